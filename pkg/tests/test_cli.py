import json
import socket
import subprocess
import sys
import threading
import time
from pathlib import Path

import httpx
import jsonschema
import pytest

from phoenix.cli import appendix_corpus_path, load_corpus, main
from phoenix.latex import parse_latex
from phoenix.workspace import (
    add_equation, add_node, new_workspace, save,
)

DOCS = Path(__file__).resolve().parents[1] / "docs"


def test_transcribe_success(capsys):
    assert main(["transcribe", "x over 3"]) == 0
    out = capsys.readouterr()
    assert out.out == "\\frac{x}{3}\n"
    assert out.err == ""


def test_transcribe_failure_exit_2(capsys):
    assert main(["transcribe", "good morning"]) == 2
    out = capsys.readouterr()
    assert out.out == ""
    assert "error" in out.err


def test_transcribe_with_extra_lexicon(tmp_path, capsys):
    lex = tmp_path / "physics.lex.json"
    lex.write_text(json.dumps({
        "schema_version": "1",
        "terms": [{"phrase": "the wave number", "ident": "k",
                   "number_subscript": True}],
    }))
    assert main(["transcribe", "the wave number one", "--lexicon",
                 str(lex)]) == 0
    assert capsys.readouterr().out == "k_1\n"


def test_appendix_corpus_passes(capsys):
    assert main(["corpus", "run", str(appendix_corpus_path())]) == 0
    out = capsys.readouterr().out
    assert "3/3 passed" in out


def test_corpus_failure_exit_1(tmp_path, capsys):
    corpus = tmp_path / "bad.jsonl"
    corpus.write_text(
        '{"utterance": "x over 3", "expected_latex": "\\\\frac{x}{4}"}\n')
    assert main(["corpus", "run", str(corpus)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_corpus_invalid_expectation_exit_2(tmp_path, capsys):
    corpus = tmp_path / "broken.jsonl"
    corpus.write_text(
        '{"utterance": "x", "expected_latex": "\\\\frac{x}{"}\n')
    assert main(["corpus", "run", str(corpus)]) == 2


def test_corpus_json_report_validates(capsys):
    assert main(["corpus", "run", str(appendix_corpus_path()),
                 "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    schema = json.loads((DOCS / "corpus-report.schema.json").read_text())
    jsonschema.validate(report, schema)
    assert report["passed"] == 3


def test_corpus_loader_validates_expected_latex():
    cases = load_corpus(appendix_corpus_path())
    for case in cases:
        parse_latex(case.expected_latex)


def _fixture_workspace(tmp_path):
    ws = new_workspace("fixture")
    nid = add_node(ws, (0, 0))
    add_equation(ws, nid, parse_latex(r"\int_0^{\infty} x^2 \, dx"),
                 annotation="the running example")
    path = tmp_path / "fixture.workspace.json"
    path.write_bytes(save(ws))
    return path, nid


def test_export_latex_to_stdout(tmp_path, capsys):
    path, nid = _fixture_workspace(tmp_path)
    assert main(["export", str(path), "--node", nid,
                 "--format", "latex"]) == 0
    out = capsys.readouterr().out
    assert r"\int_0^{\infty} x^2 \, dx" in out


def test_export_word_to_file(tmp_path):
    from phoenix.exporters import validate_word_mathml
    path, nid = _fixture_workspace(tmp_path)
    out_file = tmp_path / "out.html"
    assert main(["export", str(path), "--node", nid, "--format", "word",
                 "-o", str(out_file)]) == 0
    assert validate_word_mathml(out_file.read_bytes()) == []


def test_export_missing_node_exit_2(tmp_path, capsys):
    path, _ = _fixture_workspace(tmp_path)
    assert main(["export", str(path), "--node", "n99",
                 "--format", "latex"]) == 2
    assert "error" in capsys.readouterr().err


def test_usage_error_exit_2():
    assert main(["export"]) == 2
    assert main(["no-such-command"]) == 2


def test_serve_bad_config_exit_2(tmp_path, capsys):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"backend_mode": "quantum"}))
    assert main(["serve", "--config", str(cfg)]) == 2
    assert "backend_mode" in capsys.readouterr().err


def test_console_script_entry():
    result = subprocess.run(
        [sys.executable, "-m", "phoenix.cli", "transcribe", "x plus one"],
        capture_output=True, text=True, timeout=60)
    assert result.returncode == 0
    assert result.stdout.strip() == "x + 1"


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class _SlowBackend:
    """Grammar semantics with an artificial delay, for drain testing."""

    supports_commands = False

    def __init__(self, delay):
        self.delay = delay

    def complete(self, bundle):
        time.sleep(self.delay)
        return "$x + 1$"


@pytest.mark.slow
def test_serve_healthz_and_graceful_drain():
    import uvicorn

    from phoenix.auth import local_test_issuer
    from phoenix.config import ServiceConfig
    from phoenix.service import create_app

    port = _free_port()
    app = create_app(ServiceConfig(), backend=_SlowBackend(1.5))
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                           log_level="error",
                                           timeout_graceful_shutdown=10))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{port}"
    for _ in range(100):
        try:
            if httpx.get(base + "/healthz", timeout=1).status_code == 200:
                break
        except httpx.HTTPError:
            time.sleep(0.05)
    else:
        pytest.fail("server did not start")

    token = local_test_issuer().issue("drain-user")
    headers = {"Authorization": f"Bearer {token}"}
    ws_id = httpx.post(base + "/v1/workspaces", json={"title": "d"},
                       headers=headers, timeout=5).json()["id"]

    result = {}

    def slow_request():
        result["response"] = httpx.post(
            base + "/v1/transcribe",
            json={"workspace_id": ws_id, "utterance": "x plus one"},
            headers=headers, timeout=15)

    requester = threading.Thread(target=slow_request)
    requester.start()
    time.sleep(0.4)  # request is now in flight
    server.should_exit = True  # same path a SIGTERM takes
    requester.join(timeout=12)
    thread.join(timeout=12)
    assert not thread.is_alive(), "server did not drain within the deadline"
    assert result["response"].status_code == 200
    assert result["response"].json()["latex"] == "x + 1"
