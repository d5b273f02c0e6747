"""Command line entry point.

Exit codes are a stable contract: 0 success, 1 corpus failures, 2 usage or
input error. stdout carries only the artifact (LaTeX, report, bundle);
diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import List, Optional

from .commands import NotACommand
from .config import ConfigError, load_config
from .exporters import (
    EmptyNode, export_latex, export_print_html, export_word_mathml,
)
from .exprs import normalize
from .latex import LatexSyntaxError, parse_latex, render_latex
from .lexicon import Lexicon, LexiconError, default_lexicon, load_lexicon_file
from .spoken import NoMathFound, SpokenSyntaxError, parse_spoken
from .workspace import NodeNotFound, WorkspaceError, find_node, load

EXIT_OK = 0
EXIT_CORPUS_FAILURES = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class CorpusCase:
    utterance: str
    expected_latex: str
    tags: List[str]


def _norm_ws(text: str) -> str:
    return " ".join(text.split())


def _merged_lexicon(paths: Optional[List[str]]) -> Lexicon:
    lexicon = default_lexicon()
    for path in paths or []:
        lexicon = lexicon.merge(load_lexicon_file(path))
    return lexicon


def cmd_transcribe(args) -> int:
    try:
        lexicon = _merged_lexicon(args.lexicon)
    except LexiconError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        transcription = parse_spoken(args.utterance, lexicon)
    except (NoMathFound, SpokenSyntaxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(render_latex(normalize(transcription.expr)))
    return EXIT_OK


def load_corpus(path: Path) -> List[CorpusCase]:
    cases = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}")
            if not isinstance(raw, dict) or "utterance" not in raw \
                    or "expected_latex" not in raw:
                raise ValueError(
                    f"{path}:{lineno}: needs utterance and expected_latex")
            try:
                parse_latex(raw["expected_latex"])
            except LatexSyntaxError as exc:
                raise ValueError(
                    f"{path}:{lineno}: expected_latex does not parse: {exc}")
            cases.append(CorpusCase(raw["utterance"], raw["expected_latex"],
                                    list(raw.get("tags", []))))
    return cases


def appendix_corpus_path() -> Path:
    return Path(str(resources.files("phoenix.data")
                    .joinpath("appendix_corpus.jsonl")))


def cmd_corpus_run(args) -> int:
    path = Path(args.file)
    try:
        cases = load_corpus(path)
        lexicon = _merged_lexicon(args.lexicon)
    except (ValueError, OSError, LexiconError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    results = []
    for case in cases:
        try:
            got = render_latex(normalize(parse_spoken(case.utterance,
                                                      lexicon).expr))
            error = None
        except (NoMathFound, SpokenSyntaxError) as exc:
            got = ""
            error = str(exc)
        passed = error is None and _norm_ws(got) == _norm_ws(case.expected_latex)
        results.append({"utterance": case.utterance,
                        "expected_latex": case.expected_latex,
                        "actual_latex": got, "passed": passed,
                        "error": error, "tags": case.tags})
    passed = sum(1 for r in results if r["passed"])
    failed = len(results) - passed
    if args.json:
        report = {"schema_version": "1", "total": len(results),
                  "passed": passed, "failed": failed, "cases": results}
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        width = max((len(r["utterance"]) for r in results), default=10)
        for r in results:
            status = "PASS" if r["passed"] else "FAIL"
            line = f"{status}  {r['utterance']:<{width}}  {r['actual_latex']}"
            if not r["passed"]:
                line += f"   (expected {r['expected_latex']})"
            print(line)
        print(f"{passed}/{len(results)} passed")
    return EXIT_OK if failed == 0 else EXIT_CORPUS_FAILURES


def cmd_export(args) -> int:
    path = Path(args.file)
    try:
        ws = load(path.read_bytes())
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WorkspaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        node = find_node(ws, args.node)
    except NodeNotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    exporters = {"latex": export_latex, "word": export_word_mathml,
                 "print": export_print_html}
    try:
        bundle = exporters[args.format](node)
    except EmptyNode as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.output:
        Path(args.output).write_bytes(bundle.payload)
        print(f"wrote {len(bundle.payload)} bytes ({bundle.media_type}) "
              f"to {args.output}", file=sys.stderr)
    else:
        sys.stdout.buffer.write(bundle.payload)
        sys.stdout.buffer.flush()
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        lexicon_check = _merged_lexicon(config.lexicon_files)  # noqa: F841
    except LexiconError as exc:
        print(f"error: lexicon_files: {exc}", file=sys.stderr)
        return EXIT_USAGE
    import uvicorn

    from .service import create_app

    host, port = config.host_port()
    app = create_app(config)
    uvicorn.run(app, host=host, port=port, log_level="info",
                timeout_graceful_shutdown=10)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phoenix",
        description="Voice-driven math workspace engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transcribe", help="transcribe one utterance to LaTeX")
    p.add_argument("utterance")
    p.add_argument("--lexicon", action="append", metavar="FILE",
                   help="additional lexicon file (repeatable)")
    p.set_defaults(fn=cmd_transcribe)

    corpus = sub.add_parser("corpus", help="corpus evaluation")
    corpus_sub = corpus.add_subparsers(dest="corpus_command", required=True)
    p = corpus_sub.add_parser("run", help="run a corpus file")
    p.add_argument("file")
    p.add_argument("--json", action="store_true",
                   help="machine-readable report")
    p.add_argument("--lexicon", action="append", metavar="FILE")
    p.set_defaults(fn=cmd_corpus_run)

    p = sub.add_parser("export", help="export a node from a workspace file")
    p.add_argument("file")
    p.add_argument("--node", required=True)
    p.add_argument("--format", required=True,
                   choices=["latex", "word", "print"])
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", metavar="FILE")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
