"""Domain vocabulary for the spoken grammar.

A Lexicon maps spoken phrases to symbols: domain terms ("index of
refraction" -> n with a following-number subscript), extra function words,
Greek aliases, and well-known equation templates. A default STEM lexicon
ships as package data; users can merge additional lexicon files on top via
the CLI flag or service config. File format documented in docs/schema.md.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from .exprs import Expr, GREEK_NAME_SET, GreekLetter, Ident
from .latex import LatexSyntaxError, parse_latex

LEXICON_SCHEMA_VERSION = "1"


class LexiconError(ValueError):
    """Malformed lexicon data; message carries the offending path."""


@dataclass(frozen=True)
class TermEntry:
    """One domain phrase and the symbol it stands for."""

    phrase: str
    symbol: Union[Ident, GreekLetter]
    number_subscript: bool = False


@dataclass(frozen=True)
class Lexicon:
    term_map: Tuple[TermEntry, ...] = ()
    greek_map: Dict[str, str] = field(default_factory=dict)
    function_words: Dict[str, str] = field(default_factory=dict)
    wellknown_equations: Dict[str, Expr] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for entry in self.term_map:
            phrase = entry.phrase
            if phrase != phrase.lower() or not phrase.strip():
                raise LexiconError(f"term phrase must be lowercase: {phrase!r}")
            if phrase in seen:
                raise LexiconError(f"duplicate lexicon phrase: {phrase!r}")
            seen.add(phrase)
        for phrase in (*self.greek_map, *self.function_words,
                       *self.wellknown_equations):
            if phrase != phrase.lower():
                raise LexiconError(f"phrase must be lowercase: {phrase!r}")

    def merge(self, other: "Lexicon") -> "Lexicon":
        """Overlay another lexicon; its entries win on phrase collisions."""
        terms = {e.phrase: e for e in self.term_map}
        terms.update({e.phrase: e for e in other.term_map})
        return Lexicon(
            term_map=tuple(terms.values()),
            greek_map={**self.greek_map, **other.greek_map},
            function_words={**self.function_words, **other.function_words},
            wellknown_equations={**self.wellknown_equations,
                                 **other.wellknown_equations},
        )


def lexicon_from_dict(data: dict, source: str = "<lexicon>") -> Lexicon:
    if not isinstance(data, dict):
        raise LexiconError(f"{source}: expected a JSON object")
    version = data.get("schema_version")
    if version != LEXICON_SCHEMA_VERSION:
        raise LexiconError(f"{source}: unsupported schema_version {version!r}")
    allowed = {"schema_version", "terms", "functions", "greek", "equations"}
    for key in data:
        if key not in allowed:
            raise LexiconError(f"{source}: unknown field {key!r}")

    terms = []
    for i, raw in enumerate(data.get("terms", [])):
        path = f"{source}: terms[{i}]"
        if not isinstance(raw, dict):
            raise LexiconError(f"{path}: expected an object")
        phrase = raw.get("phrase")
        if not isinstance(phrase, str):
            raise LexiconError(f"{path}: missing phrase")
        if "ident" in raw:
            symbol: Union[Ident, GreekLetter] = Ident(raw["ident"])
        elif "greek" in raw:
            name = raw["greek"]
            if name not in GREEK_NAME_SET:
                raise LexiconError(f"{path}: unknown greek letter {name!r}")
            symbol = GreekLetter(name)
        else:
            raise LexiconError(f"{path}: needs an ident or greek symbol")
        terms.append(TermEntry(phrase, symbol,
                               bool(raw.get("number_subscript", False))))

    functions = data.get("functions", {})
    if not isinstance(functions, dict):
        raise LexiconError(f"{source}: functions must be an object")

    greek = data.get("greek", {})
    if not isinstance(greek, dict):
        raise LexiconError(f"{source}: greek must be an object")
    for phrase, name in greek.items():
        if name not in GREEK_NAME_SET:
            raise LexiconError(f"{source}: greek[{phrase!r}]: unknown letter")

    equations = {}
    for phrase, latex in data.get("equations", {}).items():
        try:
            equations[phrase] = parse_latex(latex)
        except LatexSyntaxError as exc:
            raise LexiconError(
                f"{source}: equations[{phrase!r}]: {exc}") from exc

    return Lexicon(term_map=tuple(terms), greek_map=dict(greek),
                   function_words=dict(functions),
                   wellknown_equations=equations)


def load_lexicon_file(path: Union[str, Path]) -> Lexicon:
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LexiconError(f"{p}: not valid JSON: {exc}") from exc
    return lexicon_from_dict(data, source=str(p))


@lru_cache(maxsize=1)
def default_lexicon() -> Lexicon:
    """The STEM lexicon shipped with the package (loaded once, read-only)."""
    text = resources.files("phoenix.data").joinpath("stem_lexicon.json") \
        .read_text(encoding="utf-8")
    return lexicon_from_dict(json.loads(text), source="stem_lexicon.json")
