from pathlib import Path

import pytest

from fcvm.frontend import parse_file

CORPUS = Path(__file__).parent / "corpus"
CORPUS_FILES = sorted(CORPUS.glob("*.fcy"))

# filled in by test_acceptance.py, reported after the run
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(params=CORPUS_FILES, ids=lambda p: p.stem)
def corpus_file(request) -> Path:
    return request.param


def load(name: str):
    return parse_file(CORPUS / f"{name}.fcy")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split("-")[1])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}: {detail}")
