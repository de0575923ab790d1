"""Command-line front end.

`run` and `bench` execute in-process against the core package; `serve` starts
the HTTP session service and `client` talks to a running service, so scripted
use and the operator console share one protocol.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import requests

from . import DATA_DIR, SCENES_DIR
from .bench import (
    load_corpus,
    run_recovery_eval,
    run_repeatability,
    run_suite,
    scripted_plan_source,
)
from .gateway import ChatConfig, HttpBackend, ScriptedBackend
from .pfm import RunConfig, run as run_detection
from .prompts import PROCEDURE_VARIANTS, PromptConfig
from .scene import SceneError, load_scene
from .tools import ToolRegistry

DEFAULT_CORPUS = DATA_DIR / "corpus"


def _load_scene_arg(scene: str):
    path = Path(scene)
    if not path.exists():
        bundled = SCENES_DIR / f"{scene}.json"
        if bundled.exists():
            path = bundled
    try:
        return load_scene(path)
    except (SceneError, OSError) as exc:
        raise click.ClickException(str(exc))


@click.group()
def main() -> None:
    """Robotic action issue detection, explanation, and recovery."""


@main.command()
@click.option("--scene", required=True, help="Scene JSON file or bundled scene name.")
@click.option("--query", required=True, help="Action query, structured or unstructured.")
@click.option("--variant", default="QGEN_GRND", type=click.Choice(PROCEDURE_VARIANTS))
@click.option("--profile", default="household", help="Toolset profile.")
@click.option(
    "--backend",
    default="scripted",
    type=click.Choice(["scripted", "live"]),
    help="scripted replays --script responses; live talks to the configured LLM endpoint.",
)
@click.option("--script", type=click.Path(exists=True), help="JSON list of scripted responses.")
@click.option("--timeout", default=20.0, show_default=True, help="Run deadline in seconds.")
def run(scene, query, variant, profile, backend, script, timeout) -> None:
    """Run one detection query and print the outcome as JSON."""
    scene_obj = _load_scene_arg(scene)
    if backend == "live":
        chat_backend = HttpBackend()
    else:
        if not script:
            raise click.ClickException("--backend scripted requires --script <responses.json>")
        responses = json.loads(Path(script).read_text())
        chat_backend = ScriptedBackend.from_texts(responses)
    config = RunConfig(
        prompt=PromptConfig(variant=variant, profile=profile),
        chat=ChatConfig(),
        deadline_seconds=timeout,
    )
    outcome = run_detection(query, scene_obj, ToolRegistry(), chat_backend, config)
    click.echo(json.dumps(outcome.to_dict(), indent=2))
    if outcome.label in ("timeout", "transport_failure"):
        sys.exit(1)


@main.group()
def bench() -> None:
    """Corpus evaluation commands."""


@bench.command("run")
@click.option("--corpus", default=str(DEFAULT_CORPUS), show_default=False, help="Corpus directory.")
@click.option(
    "--method",
    default="raider",
    type=click.Choice(["raider", "precond", "visualobs"]),
)
@click.option("--variant", default="QGEN_GRND", type=click.Choice(PROCEDURE_VARIANTS))
@click.option("--report-json", type=click.Path(), help="Write full per-case records.")
@click.option("--report-csv", type=click.Path(), help="Write aggregate tables.")
def bench_run(corpus, method, variant, report_json, report_csv) -> None:
    """Run every corpus case and print the aggregate metrics."""
    config = RunConfig(prompt=PromptConfig(variant=variant))
    report = run_suite(corpus, method=method, config=config)
    if report_json:
        report.write_json(report_json)
    if report_csv:
        report.write_csv(report_csv)
    click.echo(json.dumps({"method": method, "variant": variant, **report.aggregate()}, indent=2))


@bench.command("repeat")
@click.option("--corpus", default=str(DEFAULT_CORPUS), help="Corpus directory.")
@click.option("--case", "case_id", required=True, help="Case id to repeat.")
@click.option("-n", default=10, show_default=True, help="Number of runs.")
def bench_repeat(corpus, case_id, n) -> None:
    """Repeat one case n times and print the success-rate/time distribution."""
    cases = {c.id: c for c in load_corpus(corpus)}
    if case_id not in cases:
        raise click.ClickException(f"unknown case id {case_id!r}")
    click.echo(json.dumps(run_repeatability(cases[case_id], corpus, n), indent=2))


@bench.command("recovery")
@click.option("--corpus", default=str(DEFAULT_CORPUS), help="Corpus directory.")
@click.option(
    "--variant",
    default="explanation",
    type=click.Choice(["explanation", "scene", "explanation+scene"]),
)
def bench_recovery(corpus, variant) -> None:
    """Score scripted recovery plans against their case goals."""
    cases = load_corpus(corpus)
    result = run_recovery_eval(cases, corpus, scripted_plan_source, prompt_variant=variant)
    click.echo(json.dumps(result, indent=2))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--cors", multiple=True, help="Allowed CORS origin (repeatable).")
def serve(host, port, cors) -> None:
    """Start the HTTP session service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(cors_origins=list(cors) or None), host=host, port=port)


@main.group()
@click.option("--url", default="http://127.0.0.1:8080", show_default=True, help="Service base URL.")
@click.pass_context
def client(ctx, url) -> None:
    """Thin HTTP client for a running session service."""
    ctx.obj = url.rstrip("/")


def _request(method: str, url: str, **kwargs):
    try:
        response = requests.request(method, url, timeout=30, **kwargs)
    except requests.RequestException as exc:
        raise click.ClickException(str(exc))
    if response.status_code >= 400:
        raise click.ClickException(f"{response.status_code}: {response.text}")
    return response


@client.command("create")
@click.option("--scene", required=True, help="Bundled scene name or a scene JSON file.")
@click.option("--profile", default="household")
@click.option("--variant", default="QGEN_GRND", type=click.Choice(PROCEDURE_VARIANTS))
@click.pass_obj
def client_create(url, scene, profile, variant) -> None:
    path = Path(scene)
    body_scene: object = json.loads(path.read_text()) if path.exists() else scene
    r = _request(
        "POST", f"{url}/sessions", json={"scene": body_scene, "profile": profile, "variant": variant}
    )
    click.echo(r.text)


@client.command("detect")
@click.argument("session_id")
@click.option("--query", required=True)
@click.option("--script", type=click.Path(exists=True), help="JSON list of scripted responses.")
@click.pass_obj
def client_detect(url, session_id, query, script) -> None:
    body: dict = {"query": query}
    if script:
        body["responses"] = json.loads(Path(script).read_text())
    click.echo(_request("POST", f"{url}/sessions/{session_id}/detect", json=body).text)


@client.command("answer")
@click.argument("session_id")
@click.argument("text")
@click.pass_obj
def client_answer(url, session_id, text) -> None:
    click.echo(_request("POST", f"{url}/sessions/{session_id}/answer", json={"text": text}).text)


@client.command("recover")
@click.argument("session_id")
@click.option("--plan", required=True, help="Plan text or a file containing it.")
@click.pass_obj
def client_recover(url, session_id, plan) -> None:
    path = Path(plan)
    text = path.read_text() if path.exists() else plan
    click.echo(_request("POST", f"{url}/sessions/{session_id}/recover", json={"plan": text}).text)


@client.command("mutate")
@click.argument("session_id")
@click.argument("mutation_json")
@click.pass_obj
def client_mutate(url, session_id, mutation_json) -> None:
    click.echo(
        _request(
            "POST", f"{url}/sessions/{session_id}/mutate", json=json.loads(mutation_json)
        ).text
    )


@client.command("events")
@click.argument("session_id")
@click.option("--from-seq", default=1, show_default=True)
@click.option("--follow/--no-follow", default=False)
@click.pass_obj
def client_events(url, session_id, from_seq, follow) -> None:
    r = _request(
        "GET",
        f"{url}/sessions/{session_id}/events",
        params={"from_seq": from_seq, "follow": follow},
        stream=True,
    )
    for line in r.iter_lines(decode_unicode=True):
        if line:
            click.echo(line)


if __name__ == "__main__":
    main()
