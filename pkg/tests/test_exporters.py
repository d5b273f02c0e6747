import random
import re
import shutil
import subprocess
import xml.etree.ElementTree as ET

import pytest

from phoenix.exporters import (
    EmptyNode, MEDIA_LATEX, MEDIA_PRINT, MEDIA_WORD, export_latex,
    export_order, export_print_html, export_word_mathml, validate_word_mathml,
)
from phoenix.exprs import structurally_equal
from phoenix.latex import parse_latex
from phoenix.workspace import (
    add_equation, add_node, find_node, new_workspace,
)
from _generators import gen_expr
from _mathml_reader import read_mathml


def _node_with(*latex_and_annotations):
    ws = new_workspace("t")
    nid = add_node(ws, (0, 0))
    for latex, annotation in latex_and_annotations:
        add_equation(ws, nid, parse_latex(latex), annotation=annotation)
    return find_node(ws, nid)


def test_latex_single_equation():
    node = _node_with(("x^2", None))
    bundle = export_latex(node)
    assert bundle.media_type == MEDIA_LATEX
    text = bundle.payload.decode()
    assert "x^2" in text
    assert text.startswith("\\begin{align*}")
    assert text.rstrip().endswith("\\end{align*}")


def test_latex_appendix_equation():
    node = _node_with((r"\int_0^{\infty} x^2 \, dx", None))
    assert rb"\int_0^{\infty} x^2 \, dx" in export_latex(node).payload


def test_latex_annotation_escaping():
    node = _node_with(("x = 1", "costs $5 & 10% effort_here"))
    text = export_latex(node).payload.decode()
    assert r"\$5" in text and r"\&" in text and r"\%" in text \
        and r"effort\_here" in text


def test_empty_node_raises():
    ws = new_workspace("t")
    nid = add_node(ws, (0, 0))
    node = find_node(ws, nid)
    for exporter in (export_latex, export_word_mathml, export_print_html):
        with pytest.raises(EmptyNode):
            exporter(node)


def test_latex_fragment_equations_validate_offline():
    # every equation body must be accepted by an independent LaTeX math
    # parser (matplotlib mathtext)
    from matplotlib import mathtext
    parser = mathtext.MathTextParser("path")
    rng = random.Random(13)
    for _ in range(60):
        e = gen_expr(rng, rng.randint(0, 5))
        ws = new_workspace("t")
        nid = add_node(ws, (0, 0))
        add_equation(ws, nid, e)
        node = find_node(ws, nid)
        for entry in node.equations:
            parser.parse(f"${entry.latex_cache}$")


@pytest.mark.skipif(shutil.which("pdflatex") is None
                    and shutil.which("latex") is None,
                    reason="no LaTeX toolchain in this environment")
def test_latex_fragment_compiles(tmp_path):
    node = _node_with(("x^2 = 4", "square both sides"), ("x = 2", None))
    fragment = export_latex(node).payload.decode()
    doc = ("\\documentclass{article}\\usepackage{amsmath}"
           "\\begin{document}\n" + fragment + "\n\\end{document}\n")
    tex = tmp_path / "doc.tex"
    tex.write_text(doc)
    compiler = shutil.which("pdflatex") or shutil.which("latex")
    result = subprocess.run(
        [compiler, "-interaction=nonstopmode", tex.name],
        cwd=tmp_path, capture_output=True, timeout=120)
    assert result.returncode == 0, result.stdout[-2000:]


def test_word_two_equations_two_rows():
    node = _node_with(("x^2 = 4", None), ("x = 2", None))
    bundle = export_word_mathml(node)
    assert bundle.media_type == MEDIA_WORD
    root = ET.fromstring(bundle.payload)
    rows = root.findall(".//tr")
    maths = [el for el in root.iter() if el.tag.endswith("math")]
    assert len(rows) == 2
    assert len(maths) == 2


def test_word_annotation_in_mtext_preceding_row():
    node = _node_with(("x^2 = 4", "integrate both sides"), ("x = 2", None))
    bundle = export_word_mathml(node)
    root = ET.fromstring(bundle.payload)
    rows = root.findall(".//tr")
    assert len(rows) == 3
    first_row_mtext = rows[0].find(".//{*}mtext")
    assert first_row_mtext is not None
    assert first_row_mtext.text == "integrate both sides"


def test_word_export_validates_and_round_trips():
    rng = random.Random(14)
    for _ in range(150):
        e = gen_expr(rng, rng.randint(0, 5))
        ws = new_workspace("t")
        nid = add_node(ws, (0, 0))
        add_equation(ws, nid, e)
        node = find_node(ws, nid)
        bundle = export_word_mathml(node)
        assert validate_word_mathml(bundle.payload) == []
        root = ET.fromstring(bundle.payload)
        maths = [el for el in root.iter() if el.tag.endswith("math")]
        back = read_mathml(ET.tostring(maths[0], encoding="unicode"))
        assert structurally_equal(back, e)


def test_print_page_structure():
    node = _node_with(("x^2 = 4", "square"), ("x = 2", None))
    bundle = export_print_html(node)
    assert bundle.media_type == MEDIA_PRINT
    text = bundle.payload.decode()
    assert text.startswith("<!DOCTYPE html>")
    root = ET.fromstring(text.split("\n", 1)[1])
    rows = root.findall(".//tr")
    assert len(rows) == 2
    assert "mathjax@3.2.2" in text
    assert "MathJax.startup.promise.then" in text
    assert "window.print()" in text


def test_print_empty_node():
    ws = new_workspace("t")
    nid = add_node(ws, (0, 0))
    with pytest.raises(EmptyNode):
        export_print_html(find_node(ws, nid))


def test_every_generated_expr_exports_through_all_targets():
    rng = random.Random(15)
    for _ in range(100):
        ws = new_workspace("t")
        nid = add_node(ws, (0, 0))
        for _ in range(rng.randint(1, 3)):
            add_equation(ws, nid, gen_expr(rng, rng.randint(0, 5)))
        node = find_node(ws, nid)
        export_latex(node)
        export_word_mathml(node)
        export_print_html(node)


def test_export_order_stable_and_topological():
    ws = new_workspace("t")
    nid = add_node(ws, (0, 0))
    e1 = add_equation(ws, nid, parse_latex("a"))
    e2 = add_equation(ws, nid, parse_latex("b"), parent_equation=e1)
    e3 = add_equation(ws, nid, parse_latex("c"), parent_equation=e1)
    node = find_node(ws, nid)
    order = [e.id for e in export_order(node)]
    assert order == [e1, e2, e3]
    assert [e.id for e in export_order(node)] == order  # repeatable
