"""Export targets for a subproblem node: annotated LaTeX, Word-compatible
MathML tables, and a self-contained auto-printing HTML page.

Clipboard packaging is the UI's job; this module only produces bytes plus
a media type. The Word allowlist is published in docs/word-mathml.md.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import List, Optional, Union

from .latex import render_latex
from .mathml import (
    MATHML_NS, WORD_MATHML_ALLOWLIST, WORD_MATHML_ATTRIBUTES, render_mathml,
)
from .workspace import EquationEntry, SubproblemNode

MEDIA_LATEX = "application/x-latex-fragment"
MEDIA_WORD = "text/html; flavor=word-mathml-table"
MEDIA_PRINT = "text/html; flavor=print"

MATHJAX_URL = "https://cdn.jsdelivr.net/npm/mathjax@3.2.2/es5/tex-chtml.js"


class EmptyNode(ValueError):
    """The node has no equations to export."""


@dataclass(frozen=True)
class ExportBundle:
    media_type: str
    payload: bytes
    human_label: str


def export_order(node: SubproblemNode) -> List[EquationEntry]:
    """Parent-chain topological order, ties by insertion order."""
    ids = {e.id for e in node.equations}
    emitted = set()
    remaining = list(node.equations)
    ordered: List[EquationEntry] = []
    while remaining:
        for i, entry in enumerate(remaining):
            parent = entry.parent_equation_id
            if parent is None or parent in emitted or parent not in ids:
                ordered.append(entry)
                emitted.add(entry.id)
                del remaining[i]
                break
        else:
            ordered.extend(remaining)
            break
    return ordered


_TEXT_ESCAPES = {
    "\\": r"\textbackslash{}", "&": r"\&", "%": r"\%", "$": r"\$",
    "#": r"\#", "_": r"\_", "{": r"\{", "}": r"\}",
    "~": r"\textasciitilde{}", "^": r"\textasciicircum{}",
}


def _escape_text(text: str) -> str:
    return "".join(_TEXT_ESCAPES.get(c, c) for c in text)


def export_latex(node: SubproblemNode,
                 include_annotations: bool = True) -> ExportBundle:
    """Compilable align* fragment, one row per equation, annotations as
    trailing text."""
    entries = export_order(node)
    if not entries:
        raise EmptyNode(f"node {node.id!r} has no equations")
    rows = []
    for entry in entries:
        row = entry.latex_cache
        if include_annotations and entry.annotation:
            row += r" && \text{" + _escape_text(entry.annotation) + "}"
        rows.append(row)
    body = " \\\\\n".join(rows)
    fragment = "\\begin{align*}\n" + body + "\n\\end{align*}\n"
    return ExportBundle(MEDIA_LATEX, fragment.encode("utf-8"),
                        f"LaTeX export of node {node.id}")


def export_word_mathml(node: SubproblemNode,
                       include_annotations: bool = True) -> ExportBundle:
    """HTML clipboard flavor: a table with one row per equation, each cell
    holding one restricted-profile math element. Annotation rows precede
    their equation row and carry the text in an mtext element.

    The math cells are spliced in as rendered so Word sees plain
    <math xmlns=...> elements rather than ElementTree's prefixed form.
    """
    entries = export_order(node)
    if not entries:
        raise EmptyNode(f"node {node.id!r} has no equations")
    rows: List[str] = []
    for entry in entries:
        if include_annotations and entry.annotation:
            mtext = ET.Element("mtext")
            mtext.text = entry.annotation
            annotation_math = (f'<math xmlns="{MATHML_NS}">'
                               + ET.tostring(mtext, encoding="unicode")
                               + "</math>")
            rows.append(f"<tr><td>{annotation_math}</td></tr>")
        rows.append(f"<tr><td>{render_mathml(entry.expr, 'word_restricted')}"
                    "</td></tr>")
    payload = ("<html><body><table>" + "".join(rows)
               + "</table></body></html>").encode("utf-8")
    return ExportBundle(MEDIA_WORD, payload,
                        f"Word export of node {node.id}")


def validate_word_mathml(payload: Union[bytes, str]) -> List[str]:
    """Violations of the Word-restricted profile; empty list means clean.

    Checks every element inside each math subtree against the published
    allowlist and the per-element attribute set.
    """
    if isinstance(payload, bytes):
        payload = payload.decode("utf-8")
    try:
        root = ET.fromstring(payload)
    except ET.ParseError as exc:
        return [f"payload is not well-formed XML: {exc}"]
    violations: List[str] = []
    for math in _find_math_elements(root):
        for element in math.iter():
            tag = _local_name(element.tag)
            if tag not in WORD_MATHML_ALLOWLIST:
                violations.append(f"element '{tag}' not in the Word allowlist")
            allowed_attrs = WORD_MATHML_ATTRIBUTES.get(tag, frozenset())
            for attr in element.attrib:
                name = _local_name(attr)
                if name == "xmlns" or attr.startswith("{http://www.w3.org/2000/xmlns/}"):
                    continue
                if name not in allowed_attrs:
                    violations.append(
                        f"attribute '{name}' not allowed on '{tag}'")
    return violations


def _find_math_elements(root: ET.Element) -> List[ET.Element]:
    if _local_name(root.tag) == "math":
        return [root]
    return [el for el in root.iter() if _local_name(el.tag) == "math"]


def _local_name(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


_PRINT_STYLE = (
    "body{font-family:serif;margin:2em}"
    "table{border-collapse:collapse}"
    "td{padding:0.4em 1.2em 0.4em 0}"
    ".annotation{color:#444;font-style:italic}"
)


def export_print_html(node: SubproblemNode) -> ExportBundle:
    """Self-contained page: equations in a table, typeset client-side by a
    pinned MathJax build, printing only after the typeset promise resolves."""
    entries = export_order(node)
    if not entries:
        raise EmptyNode(f"node {node.id!r} has no equations")
    html = ET.Element("html")
    head = ET.SubElement(html, "head")
    meta = ET.SubElement(head, "meta", {"charset": "utf-8"})
    title = ET.SubElement(head, "title")
    title.text = f"Subproblem {node.id}"
    style = ET.SubElement(head, "style")
    style.text = _PRINT_STYLE
    script = ET.SubElement(head, "script", {"src": MATHJAX_URL,
                                            "id": "MathJax-script",
                                            "async": "async"})
    script.text = " "
    body = ET.SubElement(html, "body")
    table = ET.SubElement(body, "table")
    for entry in entries:
        tr = ET.SubElement(table, "tr")
        td = ET.SubElement(tr, "td")
        td.text = f"\\({entry.latex_cache}\\)"
        note = ET.SubElement(tr, "td", {"class": "annotation"})
        note.text = entry.annotation or ""
    print_script = ET.SubElement(body, "script")
    print_script.text = (
        "window.addEventListener('load', function () {"
        "  if (window.MathJax && MathJax.startup) {"
        "    MathJax.startup.promise.then(function () { window.print(); });"
        "  }"
        "});"
    )
    page = "<!DOCTYPE html>\n" + ET.tostring(html, encoding="unicode")
    return ExportBundle(MEDIA_PRINT, page.encode("utf-8"),
                        f"Print view of node {node.id}")
