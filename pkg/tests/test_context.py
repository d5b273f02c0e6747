import itertools
import random

import pytest

from phoenix.context import (
    BackendUnavailable, ContextGraph, ContextItem, Edge, EquationRef,
    FocusNotFound, GrammarBackend, INTER_NODE_LINK, NoMathInOutput,
    PARENT_EQUATION, PromptBundle, RankedContext, RemoteBackend,
    assemble_prompt, build_graph, few_shot_examples, rank_context,
    sanitize_output, transcribe, usefulness_from_distance,
)
from phoenix.exprs import Fraction, Ident, Number, structurally_equal
from phoenix.latex import parse_latex, _tokenize_latex
from phoenix.spoken import SpokenSyntaxError
from phoenix.workspace import (
    add_equation, add_node, find_equation, link_nodes, new_workspace,
)
from _oracles import floyd_warshall

x = Ident("x")


def _ws_single_chain():
    ws = new_workspace("chain")
    nid = add_node(ws, (0, 0))
    e1 = add_equation(ws, nid, parse_latex("x + 1"))
    e2 = add_equation(ws, nid, parse_latex("x + 2"))
    e3 = add_equation(ws, nid, parse_latex("x + 3"))
    return ws, nid, (e1, e2, e3)


def test_empty_workspace_empty_graph():
    graph = build_graph(new_workspace("empty"))
    assert graph.vertices == ()
    assert graph.edges == ()


def test_parent_equation_edge():
    ws = new_workspace("t")
    nid = add_node(ws, (0, 0))
    e1 = add_equation(ws, nid, parse_latex("x"))
    e2 = add_equation(ws, nid, parse_latex("y"))
    graph = build_graph(ws)
    assert set(graph.vertices) == {EquationRef(nid, e1), EquationRef(nid, e2)}
    assert graph.edges == (Edge(EquationRef(nid, e2), EquationRef(nid, e1),
                                PARENT_EQUATION),)


def test_inter_node_link_edge():
    # two linked nodes A(e1) -> B(e2): edge e2 -> e1, kind inter_node_link
    ws = new_workspace("t")
    a = add_node(ws, (0, 0))
    e1 = add_equation(ws, a, parse_latex("x"))
    b = add_node(ws, (10, 0), parent=a)
    e2 = add_equation(ws, b, parse_latex("y"))
    graph = build_graph(ws)
    inter = [e for e in graph.edges if e.kind == INTER_NODE_LINK]
    assert inter == [Edge(EquationRef(b, e2), EquationRef(a, e1),
                          INTER_NODE_LINK)]


def test_rank_single_vertex():
    ws = new_workspace("t")
    nid = add_node(ws, (0, 0))
    e1 = add_equation(ws, nid, parse_latex("x"))
    graph = build_graph(ws)
    focus = EquationRef(nid, e1)
    ranked = rank_context(graph, focus)
    assert ranked.items == (ContextItem(focus, 1.0, 0),)


def test_rank_path_powers_of_decay():
    ws, nid, (e1, e2, e3) = _ws_single_chain()
    graph = build_graph(ws)
    ranked = rank_context(graph, EquationRef(nid, e3), decay=0.5)
    assert [it.usefulness for it in ranked.items] == [1.0, 0.5, 0.25]
    assert [it.distance for it in ranked.items] == [0, 1, 2]


def test_rank_focus_not_found():
    graph = build_graph(new_workspace("t"))
    with pytest.raises(FocusNotFound):
        rank_context(graph, EquationRef("n1", "e1"))


def _graph_from_edges(n, edges):
    refs = [EquationRef("n1", f"e{i}") for i in range(n)]
    graph_edges = tuple(Edge(refs[a], refs[b], PARENT_EQUATION)
                        for a, b in edges)
    recency = {ref: i for i, ref in enumerate(refs)}
    return ContextGraph(tuple(refs), graph_edges, {}, recency), refs


def test_rank_matches_floyd_warshall_exhaustive_small():
    # all graphs on up to 4 vertices, every focus
    for n in range(1, 5):
        pairs = list(itertools.combinations(range(n), 2))
        for mask in range(2 ** len(pairs)):
            edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
            dist = floyd_warshall(n, edges)
            graph, refs = _graph_from_edges(n, edges)
            for focus in range(n):
                ranked = rank_context(graph, refs[focus], 0.5)
                got = {it.ref: it.distance for it in ranked.items}
                for j in range(n):
                    if dist[focus][j] == float("inf"):
                        assert refs[j] not in got
                    else:
                        assert got[refs[j]] == int(dist[focus][j])


def test_rank_matches_floyd_warshall_random_to_10():
    rng = random.Random(555)
    for _ in range(300):
        n = rng.randint(2, 10)
        pairs = list(itertools.combinations(range(n), 2))
        edges = [p for p in pairs if rng.random() < 0.3]
        dist = floyd_warshall(n, edges)
        graph, refs = _graph_from_edges(n, edges)
        focus = rng.randrange(n)
        ranked = rank_context(graph, refs[focus], 0.5)
        got = {it.ref: it.distance for it in ranked.items}
        for j in range(n):
            if dist[focus][j] == float("inf"):
                assert refs[j] not in got
            else:
                assert got[refs[j]] == int(dist[focus][j])


def test_usefulness_monotone_and_bounded():
    for decay in (0.1, 0.5, 0.9):
        values = [usefulness_from_distance(d, decay) for d in range(8)]
        assert values[0] == 1.0
        assert all(0 < v <= 1 for v in values)
        assert all(a > b for a, b in zip(values, values[1:]))


def test_rank_ties_broken_by_recency_then_id():
    # star: focus at center, two leaves at distance 1
    refs = [EquationRef("n1", f"e{i}") for i in range(3)]
    edges = (Edge(refs[1], refs[0], PARENT_EQUATION),
             Edge(refs[2], refs[0], PARENT_EQUATION))
    recency = {refs[0]: 0, refs[1]: 1, refs[2]: 2}
    graph = ContextGraph(tuple(refs), edges, {}, recency)
    ranked = rank_context(graph, refs[0], 0.5)
    # newest first among equal usefulness
    assert [it.ref for it in ranked.items] == [refs[0], refs[2], refs[1]]


def test_rank_deterministic():
    ws, nid, (e1, e2, e3) = _ws_single_chain()
    graph = build_graph(ws)
    first = rank_context(graph, EquationRef(nid, e2), 0.5)
    for _ in range(5):
        assert rank_context(graph, EquationRef(nid, e2), 0.5) == first


def test_assemble_prompt_empty():
    ws = new_workspace("t")
    bundle = assemble_prompt(None, ws, "x over 3")
    assert bundle.context_block == ""
    assert bundle.user_utterance == "x over 3"
    assert len(bundle.few_shot_examples) >= 10


def test_assemble_prompt_truncates_to_cap():
    ws = new_workspace("t")
    nid = add_node(ws, (0, 0))
    eq_ids = [add_equation(ws, nid, parse_latex(f"x + {i}"))
              for i in range(15)]
    graph = build_graph(ws)
    ranked = rank_context(graph, EquationRef(nid, eq_ids[-1]), 0.5)
    assert len(ranked.items) == 15
    bundle = assemble_prompt(ranked, ws, "u", cap=12)
    lines = bundle.context_block.splitlines()
    assert len(lines) == 12
    kept_latex = [find_equation(ws, it.ref.equation_id)[1].latex_cache
                  for it in ranked.items[:12]]
    assert lines == list(reversed(kept_latex))


def test_assemble_prompt_focus_is_final_line():
    ws, nid, (e1, e2, e3) = _ws_single_chain()
    graph = build_graph(ws)
    ranked = rank_context(graph, EquationRef(nid, e2), 0.5)
    bundle = assemble_prompt(ranked, ws, "substitute x with 7")
    assert bundle.context_block.splitlines()[-1] == "x + 2"


def test_few_shot_fixture_is_versioned_and_complete():
    examples = few_shot_examples()
    assert len(examples) >= 10
    utterances = [u for u, _ in examples]
    assert "The integral from zero to infinity of x squared, dx" in utterances
    assert ("The integral from zero to pi over two, cosine of x, dx"
            in utterances)
    assert any(u.startswith("Index of refraction") for u in utterances)


def test_sanitize_dollar_delimited():
    assert sanitize_output("Here is your equation: $\\frac{x}{3}$") \
        == r"\frac{x}{3}"


def test_sanitize_bare_latex_unchanged():
    raw = r"\int_0^{\infty} x^2 \, dx"
    assert sanitize_output(raw) == raw


def test_sanitize_prose_only():
    with pytest.raises(NoMathInOutput):
        sanitize_output("I cannot help with that.")


def test_sanitize_fenced_block():
    raw = "Sure!\n```latex\n\\frac{a}{b}\n```\nHope that helps."
    assert sanitize_output(raw) == r"\frac{a}{b}"


def test_sanitize_display_math():
    assert sanitize_output("answer: \\[x^2 + 1\\] ok") == "x^2 + 1"


def test_sanitize_output_always_tokenizes():
    samples = [
        "$x+1$ trailing", "no math here at all.", "x^2", "== broken $$",
        "```\n\\sqrt{2}\n```", "line one\n\\frac{1}{2}\nline three",
    ]
    for raw in samples:
        try:
            out = sanitize_output(raw)
        except NoMathInOutput:
            continue
        _tokenize_latex(out)


def test_transcribe_grammar_backend():
    ws = new_workspace("t")
    result = transcribe(ws, None, "x over 3", GrammarBackend())
    assert result.kind == "transcription"
    assert structurally_equal(result.expr, Fraction(x, Number("3")))
    assert result.latex == r"\frac{x}{3}"


def test_transcribe_routes_command_with_focus():
    ws = new_workspace("t")
    nid = add_node(ws, (0, 0))
    eq = add_equation(ws, nid, parse_latex("x + 3"))
    result = transcribe(ws, EquationRef(nid, eq),
                        "change the plus to a minus", GrammarBackend())
    assert result.kind == "edit"
    assert result.latex == "x - 3"
    assert result.command is not None


def test_transcribe_defaults_focus_to_most_recent():
    ws, nid, (e1, e2, e3) = _ws_single_chain()
    result = transcribe(ws, None, "change the plus to a minus",
                        GrammarBackend())
    assert result.kind == "edit"
    assert result.source == EquationRef(nid, e3)


def test_transcribe_context_bias_through_pipeline():
    ws = new_workspace("t")
    nid = add_node(ws, (0, 0))
    eq = add_equation(ws, nid, parse_latex(r"n_1 \sin(\theta_1) = n_2"))
    result = transcribe(ws, EquationRef(nid, eq), "n squared",
                        GrammarBackend())
    assert result.latex == "n_1^2"


class _ProseBackend:
    supports_commands = True

    def complete(self, bundle):
        return "I am sorry, I cannot do that."


class _EchoBackend:
    supports_commands = True

    def __init__(self, reply):
        self.reply = reply
        self.bundles = []

    def complete(self, bundle):
        self.bundles.append(bundle)
        return self.reply


def test_transcribe_surfaces_no_math_in_output():
    ws = new_workspace("t")
    with pytest.raises(NoMathInOutput):
        transcribe(ws, None, "anything", _ProseBackend())


def test_transcribe_remote_style_backend_parses_reply():
    ws = new_workspace("t")
    backend = _EchoBackend("The result is $\\frac{x}{3}$.")
    result = transcribe(ws, None, "x over 3", backend)
    assert result.latex == r"\frac{x}{3}"
    assert len(backend.bundles) == 1


def test_command_like_utterance_without_focus_reaches_backend():
    # supports_commands backend receives the prompt with focus context
    ws, nid, (e1, e2, e3) = _ws_single_chain()
    backend = _EchoBackend("$x - 3$")
    result = transcribe(ws, EquationRef(nid, e3),
                        "substitute theta one with thirty degrees", backend)
    assert result.kind == "transcription"
    assert result.latex == "x - 3"
    assert backend.bundles[0].context_block.splitlines()[-1] == "x + 3"


def test_remote_backend_unavailable():
    backend = RemoteBackend("http://127.0.0.1:9/", timeout=0.2, retries=1)
    with pytest.raises(BackendUnavailable):
        backend.complete(PromptBundle("s", (), "", "u"))


def test_transcribe_deterministic():
    ws, nid, eqs = _ws_single_chain()
    results = {transcribe(ws, None, "x plus one", GrammarBackend()).latex
               for _ in range(5)}
    assert results == {"x + 1"}
