"""RAIDER-style agent: grounded tool-calling issue detection, explanation
and interactive recovery for robotic action instructions."""

from pathlib import Path

__version__ = "0.1.0"

DATA_DIR = Path(__file__).parent / "data"
SCENES_DIR = DATA_DIR / "scenes"
CORPUS_DIR = DATA_DIR / "corpus"
TRANSCRIPTS_DIR = DATA_DIR / "transcripts"


def default_user_corpus() -> list[str]:
    import json

    return json.loads((DATA_DIR / "user_corpus.json").read_text())["statements"]
