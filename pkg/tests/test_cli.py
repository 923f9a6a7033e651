import io
import subprocess
import sys

import pytest

from conftest import CORPUS, CORPUS_FILES
from fcvm.cli import RunConfig, main
from fcvm.frontend import parse_program
from fcvm.syntax import as_restricted


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, text, name="prog.fcy"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("path", CORPUS_FILES, ids=lambda p: p.stem)
def test_run_matches_golden(path):
    code, out, _ = run("run", path)
    assert out == path.with_suffix(".out").read_text()
    assert code == (0 if out else 1)


def test_run_choice():
    assert run("run", CORPUS / "choice01.fcy")[:2] == (0, "0\n1\n")


def test_run_failure_exit_code():
    code, out, _ = run("run", CORPUS / "failing.fcy")
    assert (code, out) == (1, "")
    code, out, _ = run("run", CORPUS / "failing.fcy", "--show-failures")
    assert (code, out) == (1, "<fail>\n")


def test_answer_limit():
    assert run("run", CORPUS / "choice_nested.fcy", "-n", "2")[1] == "0\n1\n"


def test_truncation_exit_code():
    code, out, err = run("run", CORPUS / "perms.fcy", "--max-steps", "60")
    assert code == 3 and "truncated" in err


def test_trace_goes_to_stderr_and_changes_nothing():
    plain = run("run", CORPUS / "share_xor.fcy")
    code, out, err = run("run", CORPUS / "share_xor.fcy", "--trace")
    assert (code, out) == plain[:2]
    assert err.startswith("RULE Fun node=0 depth=0\n")


def test_oracle_cross_check():
    code, out, _ = run("run", CORPUS / "share_xor.fcy", "--oracle")
    assert out == "False\nFalse\nORACLE: MATCH\n" and code == 0
    _, out, _ = run("run", CORPUS / "choice01.fcy", "--oracle", "--multiset")
    assert out.endswith("ORACLE: MATCH\n")
    _, out, _ = run("run", CORPUS / "apply_map.fcy", "--oracle")
    assert "ORACLE: SKIPPED" in out


def test_oracle_on_truncated_run_compares_multisets():
    _, out, _ = run("run", CORPUS / "perms.fcy", "--max-steps", "60", "--oracle")
    assert "compared as multisets" in out


def test_dot_dump(tmp_path):
    dot = tmp_path / "g.dot"
    run("run", CORPUS / "choice01.fcy", "--dot", dot)
    text = dot.read_text()
    assert text.count("digraph") == 3
    assert "digraph answer_1" in text and "digraph exhausted" in text


def test_output_is_deterministic():
    assert run("run", CORPUS / "perms.fcy") == run("run", CORPUS / "perms.fcy")
    assert run("flatten", CORPUS / "perms.fcy") == run("flatten", CORPUS / "perms.fcy")


def test_flatten_nested_and():
    code, out, _ = run("flatten", CORPUS / "and_nested.fcy")
    assert code == 0
    heads = [line.split()[0] for line in out.splitlines() if line and not line[0].isspace()]
    assert heads[1:3] == ["and", "and#1"]


def test_flatten_is_idempotent(tmp_path):
    _, once, _ = run("flatten", CORPUS / "nested_case_live.fcy")
    _, twice, _ = run("flatten", write(tmp_path, once))
    assert twice == once
    as_restricted(parse_program(once))


def test_flatten_invalid_input(tmp_path):
    code, out, err = run("flatten", write(tmp_path, "main = (1"))
    assert code == 2 and out == "" and "prog.fcy:1:10" in err


def test_check(tmp_path):
    assert run("check", CORPUS / "choice01.fcy")[:2] == (0, "OK\n")
    code, out, _ = run("check", write(tmp_path, "data P = P 2\nmain = P 1\nmain = 2\n"))
    assert code == 2 and "duplicate-function" in out and "prog.fcy:" in out
    code, out, _ = run("check", CORPUS / "and_nested.fcy", "--restricted")
    assert code == 2 and "multiple-cases" in out


def test_usage_errors(tmp_path):
    assert run("run", tmp_path / "missing.fcy")[0] == 2
    with pytest.raises(SystemExit) as exc:
        run("run", CORPUS / "choice01.fcy", "-n", "0")
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        run("frobnicate")


def test_engine_errors_exit_2(tmp_path):
    code, _, err = run("run", write(tmp_path, "f x = x\nmain = f"))
    assert code == 2 and "partial application" in err


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig("x", "run", max_answers=0)
    with pytest.raises(ValueError):
        RunConfig("x", "run", max_steps=0)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "fcvm", "run", str(CORPUS / "choice_mirror.fcy")],
                       capture_output=True, text=True)
    assert (r.returncode, r.stdout) == (0, "1\n0\n")
