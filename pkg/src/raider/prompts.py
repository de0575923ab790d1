"""System prompt assembly: detection prompt, its ablation variants, and the
visual-observation baseline prompt.

The prose of every section lives in editable template files under
``templates/`` so wording can be tuned without code changes. Assembly is a
pure function of the config: same inputs, byte-identical prompt.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .scene import EMPTY_SCENE_TEXT

TEMPLATES_DIR = Path(__file__).parent / "templates"

PROCEDURE_VARIANTS = ("QGEN_GRND", "QGEN", "GRND", "BASIC")

ISSUE_LABELS = ("ambiguity", "unfeasibility", "no_issue")


def _template(name: str) -> str:
    return (TEMPLATES_DIR / f"{name}.txt").read_text().rstrip("\n")


@dataclass
class PromptConfig:
    variant: str = "QGEN_GRND"
    profile: str = "household"
    objective_template: str = ""  # defaults to the profile's template
    constraints_template: str = ""

    def __post_init__(self) -> None:
        if self.variant not in PROCEDURE_VARIANTS:
            raise ValueError(f"unknown procedure variant {self.variant!r}")

    @property
    def _flavor(self) -> str:
        return "assistive" if self.profile == "assistive" else "household"

    def objective_text(self) -> str:
        return self.objective_template or _template(f"task_objective_{self._flavor}")

    def constraints_text(self) -> str:
        return self.constraints_template or _template(f"constraints_{self._flavor}")


def grounding_block() -> str:
    return _template("step_grounding")


def question_generation_block() -> str:
    return _template("step_question_generation")


def _procedure_steps(variant: str, acting_template: str) -> str:
    blocks = []
    if variant in ("QGEN_GRND", "GRND"):
        blocks.append(grounding_block())
    if variant in ("QGEN_GRND", "QGEN"):
        blocks.append(question_generation_block())
    blocks.append(_template(acting_template))
    return "\n".join(blocks)


def build_system_prompt(config: PromptConfig, tool_block: str) -> str:
    """Full detection prompt: objective, procedure, tools, constraints, formats."""
    sections = [
        "# Task Objective\n" + config.objective_text(),
        "# Procedure Steps\n" + _procedure_steps(config.variant, "step_acting_tools"),
        "# Tool Description\n" + tool_block,
        "# Constraints\n" + config.constraints_text(),
        "# Tool Call Format\n" + _template("tool_call_format"),
        "# Final Response Format\n" + _template("final_response_format"),
    ]
    return "\n\n".join(sections) + "\n"


def build_user_message(query: str, object_list: list[str]) -> str:
    if not query.strip():
        raise ValueError("query must be non-empty")
    if object_list:
        listing = "Objects detected in the scene: " + repr(object_list)
    else:
        listing = EMPTY_SCENE_TEXT
    return f"{query}\n{listing}"


def build_visualobs_prompt(config: PromptConfig, scene_description: str) -> str:
    """Detection prompt with every tool section replaced by a scene observation."""
    if not scene_description.strip():
        raise ValueError("scene description must be non-empty")
    sections = [
        "# Task Objective\n" + config.objective_text(),
        "# Procedure Steps\n" + _procedure_steps(config.variant, "step_acting_visualobs"),
        "# Scene Observation\n" + scene_description,
        "# Constraints\n" + config.constraints_text(),
        "# Final Response Format\n" + _template("final_response_format"),
    ]
    return "\n\n".join(sections) + "\n"
