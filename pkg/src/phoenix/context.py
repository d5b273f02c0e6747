"""Context engine: dependency graph, distance-weighted ranking, few-shot
prompt assembly, output sanitization, and the transcription pipeline.

Relevance is exponential in graph distance (usefulness = decay ** distance,
decay 0.5 by default); the functional form is isolated in
usefulness_from_distance so it can be swapped without touching callers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .commands import EditCommand, NotACommand, apply_command, parse_command
from .exprs import (
    Expr, GreekLetter, Ident, normalize, validate_expr, walk,
)
from .latex import LatexSyntaxError, parse_latex, render_latex, _tokenize_latex
from .lexicon import Lexicon, default_lexicon
from .spoken import Transcription, parse_spoken
from .workspace import Workspace, find_equation

PARENT_EQUATION = "parent_equation"
INTER_NODE_LINK = "inter_node_link"

DEFAULT_DECAY = 0.5
DEFAULT_CONTEXT_CAP = 12


class FocusNotFound(ValueError):
    pass


class NoMathInOutput(ValueError):
    """Backend output contained nothing the sanitizer recognizes as math."""


class BackendUnavailable(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class EquationRef:
    node_id: str
    equation_id: str


@dataclass(frozen=True)
class Edge:
    source: EquationRef
    target: EquationRef
    kind: str  # parent_equation | inter_node_link


@dataclass(frozen=True)
class ContextGraph:
    vertices: Tuple[EquationRef, ...]
    edges: Tuple[Edge, ...]
    # plumbing for prompt assembly and identifier bias
    exprs: Dict[EquationRef, Expr] = field(default_factory=dict, compare=False)
    recency: Dict[EquationRef, int] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class ContextItem:
    ref: EquationRef
    usefulness: float
    distance: int


@dataclass(frozen=True)
class RankedContext:
    items: Tuple[ContextItem, ...]
    focus: EquationRef
    # derived: subscripted identifier forms seen in ranked equations, most
    # relevant first; lets the spoken parser resolve bare letters
    ident_forms: Tuple[Union[Ident, GreekLetter], ...] = ()


@dataclass(frozen=True)
class PromptBundle:
    system_instructions: str
    few_shot_examples: Tuple[Tuple[str, str], ...]
    context_block: str
    user_utterance: str

    def to_wire_json(self) -> dict:
        return {
            "system_instructions": self.system_instructions,
            "few_shot_examples": [[u, l] for u, l in self.few_shot_examples],
            "context_block": self.context_block,
            "user_utterance": self.user_utterance,
        }


SYSTEM_INSTRUCTIONS = (
    "You convert spoken mathematics into LaTeX. Reply with a single LaTeX "
    "expression and nothing else. The context lines below are earlier "
    "equations from the user's workspace, ordered least to most relevant; "
    "prefer variable names and subscripts that appear there. If the user "
    "asks for an edit, apply it to the most relevant context equation and "
    "reply with the edited equation."
)


def usefulness_from_distance(distance: int, decay: float) -> float:
    """Fuzzy usefulness of a vertex at the given hop distance."""
    return decay ** distance


def build_graph(ws: Workspace) -> ContextGraph:
    """One vertex per equation; parent_equation edges inside each node,
    inter_node_link edges from a child node's first equation to its parent
    node's last equation."""
    vertices: List[EquationRef] = []
    exprs: Dict[EquationRef, Expr] = {}
    recency: Dict[EquationRef, int] = {}
    edges: List[Edge] = []
    seq = 0
    for node in ws.nodes:
        for entry in node.equations:
            ref = EquationRef(node.id, entry.id)
            vertices.append(ref)
            exprs[ref] = entry.expr
            recency[ref] = seq
            seq += 1
            if entry.parent_equation_id is not None:
                edges.append(Edge(ref, EquationRef(node.id,
                                                   entry.parent_equation_id),
                                  PARENT_EQUATION))
    by_id = {node.id: node for node in ws.nodes}
    for parent_id, child_id in ws.node_links:
        parent = by_id[parent_id]
        child = by_id[child_id]
        if parent.equations and child.equations:
            edges.append(Edge(
                EquationRef(child.id, child.equations[0].id),
                EquationRef(parent.id, parent.equations[-1].id),
                INTER_NODE_LINK))
    return ContextGraph(tuple(vertices), tuple(edges), exprs, recency)


def rank_context(graph: ContextGraph, focus: EquationRef,
                 decay: float = DEFAULT_DECAY) -> RankedContext:
    """Breadth-first distances from the focus over undirected edges;
    unreachable vertices are excluded. Ordering: usefulness descending,
    ties by recency (newest first), then by id."""
    if focus not in set(graph.vertices):
        raise FocusNotFound(f"focus {focus} not in graph")
    if not (0 < decay < 1):
        raise ValueError("decay must lie in (0, 1)")
    adjacency: Dict[EquationRef, List[EquationRef]] = {}
    for edge in graph.edges:
        adjacency.setdefault(edge.source, []).append(edge.target)
        adjacency.setdefault(edge.target, []).append(edge.source)
    distances: Dict[EquationRef, int] = {focus: 0}
    queue = [focus]
    while queue:
        nxt: List[EquationRef] = []
        for ref in queue:
            for neighbor in adjacency.get(ref, ()):
                if neighbor not in distances:
                    distances[neighbor] = distances[ref] + 1
                    nxt.append(neighbor)
        queue = nxt
    items = [ContextItem(ref, usefulness_from_distance(d, decay), d)
             for ref, d in distances.items()]
    items.sort(key=lambda it: (-it.usefulness,
                               -graph.recency.get(it.ref, 0),
                               (it.ref.node_id, it.ref.equation_id)))
    return RankedContext(tuple(items), focus,
                         _ident_forms(graph, items))


def _ident_forms(graph: ContextGraph, items: Sequence[ContextItem]):
    forms: List[Union[Ident, GreekLetter]] = []
    seen = set()
    for item in items:
        expr = graph.exprs.get(item.ref)
        if expr is None:
            continue
        for node in walk(normalize(expr)):
            if isinstance(node, (Ident, GreekLetter)):
                key = (type(node).__name__, node.name)
                if key not in seen:
                    seen.add(key)
                    forms.append(node)
    return tuple(forms)


@lru_cache(maxsize=1)
def few_shot_examples() -> Tuple[Tuple[str, str], ...]:
    """The versioned example set shipped with the package."""
    text = resources.files("phoenix.data").joinpath("few_shot.json") \
        .read_text(encoding="utf-8")
    data = json.loads(text)
    return tuple((ex["utterance"], ex["latex"]) for ex in data["examples"])


def assemble_prompt(ranked: Optional[RankedContext], workspace: Workspace,
                    utterance: str,
                    examples: Optional[Sequence[Tuple[str, str]]] = None,
                    cap: int = DEFAULT_CONTEXT_CAP) -> PromptBundle:
    """Deterministic bundle; the context block keeps the `cap` most useful
    equations and lists them least relevant first, so the most relevant
    line sits next to the user text."""
    if examples is None:
        examples = few_shot_examples()
    lines: List[str] = []
    if ranked is not None:
        kept = ranked.items[:cap]
        for item in reversed(kept):
            node, entry = None, None
            try:
                node, entry = find_equation(workspace, item.ref.equation_id)
            except Exception:
                continue
            lines.append(entry.latex_cache)
    return PromptBundle(
        system_instructions=SYSTEM_INSTRUCTIONS,
        few_shot_examples=tuple(examples),
        context_block="\n".join(lines),
        user_utterance=utterance,
    )


class TranscriptionBackend:
    """Contract: take a PromptBundle, return raw text. Implementations must
    not touch the workspace."""

    supports_commands = False

    def complete(self, bundle: PromptBundle) -> str:
        raise NotImplementedError


class GrammarBackend(TranscriptionBackend):
    """Deterministic offline backend over the spoken grammar; the default."""

    supports_commands = False

    def __init__(self, lexicon: Optional[Lexicon] = None):
        self.lexicon = lexicon if lexicon is not None else default_lexicon()

    def complete(self, bundle: PromptBundle) -> str:
        transcription = parse_spoken(bundle.user_utterance, self.lexicon)
        return render_latex(normalize(transcription.expr))


class RemoteBackend(TranscriptionBackend):
    """Single request/response text exchange with a hosted model endpoint;
    30 s timeout, one retry."""

    supports_commands = True

    def __init__(self, endpoint: str, api_key: str = "",
                 timeout: float = 30.0, retries: int = 1):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self.retries = retries

    def complete(self, bundle: PromptBundle) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Optional[Exception] = None
        for _ in range(self.retries + 1):
            try:
                response = httpx.post(self.endpoint,
                                      json=bundle.to_wire_json(),
                                      headers=headers, timeout=self.timeout)
                if response.status_code >= 500:
                    last_error = BackendUnavailable(
                        f"backend returned {response.status_code}")
                    continue
                response.raise_for_status()
                content_type = response.headers.get("content-type", "")
                if content_type.startswith("application/json"):
                    body = response.json()
                    return body.get("text", "") if isinstance(body, dict) \
                        else str(body)
                return response.text
            except BackendUnavailable:
                continue
            except Exception as exc:
                last_error = exc
        raise BackendUnavailable(f"remote backend failed: {last_error}")


_DELIM_PATTERNS = [
    re.compile(r"```(?:latex|tex)?\s*(.+?)```", re.DOTALL),
    re.compile(r"\\\[(.+?)\\\]", re.DOTALL),
    re.compile(r"\$\$(.+?)\$\$", re.DOTALL),
    re.compile(r"\$([^$]+)\$"),
]

_MATH_EVIDENCE = re.compile(r"[\\^_{}=+\-<>0-9]")


def sanitize_output(raw: str) -> str:
    """Extract the first LaTeX math region from backend output.

    Tries $...$, display and fenced delimiters first, then falls back to
    the longest line that parses under the LaTeX subset and shows some
    math-token evidence. The result always tokenizes under the subset.
    """
    for candidate in _sanitize_candidates(raw):
        text = " ".join(candidate.split())
        if not text:
            continue
        try:
            _tokenize_latex(text)
            parse_latex(text)
        except LatexSyntaxError:
            continue
        return text
    raise NoMathInOutput("no LaTeX math found in backend output")


def _sanitize_candidates(raw: str):
    for pattern in _DELIM_PATTERNS:
        for match in pattern.finditer(raw):
            inner = match.group(1).strip()
            yield from _sanitize_candidates_inner(inner)
            yield inner
    lines = [ln.strip() for ln in raw.splitlines() if ln.strip()]
    lines.sort(key=len, reverse=True)
    for line in lines:
        if _MATH_EVIDENCE.search(line) or len(line) <= 3:
            yield line


def _sanitize_candidates_inner(inner: str):
    for pattern in _DELIM_PATTERNS[1:]:
        for match in pattern.finditer(inner):
            yield match.group(1).strip()


@dataclass(frozen=True)
class TranscribeResult:
    """Either a fresh transcription or an applied edit."""

    kind: str  # "transcription" | "edit"
    expr: Expr
    latex: str
    residual_text: str = ""
    command: Optional[EditCommand] = None
    source: Optional[EquationRef] = None


def transcribe(workspace: Workspace, focus: Optional[EquationRef],
               utterance: str, backend: TranscriptionBackend,
               lexicon: Optional[Lexicon] = None) -> TranscribeResult:
    """Full pipeline: command parse first; otherwise rank context, assemble
    the prompt, call the backend, sanitize, and validate the result.

    With no explicit focus the most recently created equation is used.
    """
    lexicon = lexicon if lexicon is not None else default_lexicon()
    graph = build_graph(workspace)
    if focus is None and graph.vertices:
        focus = max(graph.vertices, key=lambda r: graph.recency[r])

    if focus is not None:
        try:
            command = parse_command(utterance, lexicon)
        except NotACommand:
            command = None
        if command is not None:
            _, entry = find_equation(workspace, focus.equation_id)
            edited = apply_command(entry.expr, command)
            validate_expr(edited)
            return TranscribeResult(kind="edit", expr=edited,
                                    latex=render_latex(edited),
                                    command=command, source=focus)

    ranked = None
    if focus is not None:
        ranked = rank_context(graph, focus, workspace.preferences.decay)
    bundle = assemble_prompt(ranked, workspace, utterance,
                             cap=workspace.preferences.context_cap)

    if isinstance(backend, GrammarBackend):
        transcription = parse_spoken(utterance, lexicon, context=ranked)
        expr = normalize(transcription.expr)
        validate_expr(expr)
        return TranscribeResult(kind="transcription", expr=expr,
                                latex=render_latex(expr),
                                residual_text=transcription.residual_text)

    raw = backend.complete(bundle)
    latex = sanitize_output(raw)
    expr = normalize(parse_latex(latex))
    validate_expr(expr)
    return TranscribeResult(kind="transcription", expr=expr,
                            latex=render_latex(expr))
