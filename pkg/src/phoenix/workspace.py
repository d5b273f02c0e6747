"""Graph-of-subproblems document model and its versioned JSON persistence.

A workspace is a single-writer document: the service serializes mutations
per workspace id. Node links form a DAG; node depth is the longest link
path from any root and is recomputed on every link change (the UI maps it
to background saturation). Schema documented in docs/schema.md.
"""

from __future__ import annotations

import base64
import json
import time
import uuid
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .exprs import (
    Expr, ExprDecodeError, expr_from_json, expr_to_json,
)
from .latex import DEFAULT_RENDER_OPTIONS, RenderOptions, render_latex

SCHEMA_VERSION = "1"
MAX_IMAGE_BYTES = 5 * 1024 * 1024


class WorkspaceError(ValueError):
    pass


class NodeNotFound(WorkspaceError):
    pass


class ParentNotFound(WorkspaceError):
    pass


class ParentEquationNotFound(WorkspaceError):
    pass


class EquationNotFound(WorkspaceError):
    pass


class CycleWouldForm(WorkspaceError):
    pass


class ImageTooLarge(WorkspaceError):
    pass


class SchemaVersionUnsupported(WorkspaceError):
    def __init__(self, version):
        super().__init__(f"unsupported workspace schema_version: {version!r}")
        self.version = version


class MalformedDocument(WorkspaceError):
    """Structurally invalid document; path names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class Preferences:
    decay: float = 0.5
    context_cap: int = 12
    render_options: RenderOptions = DEFAULT_RENDER_OPTIONS
    equation_layout: str = "top_to_bottom"


@dataclass
class MarkupPath:
    points: List[Tuple[float, float]]
    color: Tuple[int, int, int, int] = (0, 0, 0, 255)
    thickness: float = 2.0

    @property
    def bounding_box(self) -> Tuple[float, float, float, float]:
        """(min_x, min_y, max_x, max_y) of the stroke."""
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        return (min(xs), min(ys), max(xs), max(ys))


@dataclass
class ImageAttachment:
    id: str
    media_type: str
    data_base64: str


@dataclass
class EquationEntry:
    id: str
    expr: Expr
    latex_cache: str
    parent_equation_id: Optional[str] = None
    annotation: Optional[str] = None
    position_override: Optional[Tuple[float, float]] = None


@dataclass
class SubproblemNode:
    id: str
    position: Tuple[float, float]
    size: Tuple[float, float] = (320.0, 240.0)
    depth: int = 0
    equations: List[EquationEntry] = field(default_factory=list)
    markup: List[MarkupPath] = field(default_factory=list)
    images: List[ImageAttachment] = field(default_factory=list)


@dataclass
class Workspace:
    id: str
    title: str
    nodes: List[SubproblemNode] = field(default_factory=list)
    node_links: List[Tuple[str, str]] = field(default_factory=list)
    preferences: Preferences = Preferences()
    created: str = ""
    modified: str = ""


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def new_workspace(title: str = "Untitled",
                  preferences: Optional[Preferences] = None) -> Workspace:
    now = _now()
    return Workspace(id=uuid.uuid4().hex[:12], title=title,
                     preferences=preferences or Preferences(),
                     created=now, modified=now)


def find_node(ws: Workspace, node_id: str) -> SubproblemNode:
    for node in ws.nodes:
        if node.id == node_id:
            return node
    raise NodeNotFound(f"no node {node_id!r}")


def find_equation(ws: Workspace, equation_id: str) -> Tuple[SubproblemNode, EquationEntry]:
    for node in ws.nodes:
        for entry in node.equations:
            if entry.id == equation_id:
                return node, entry
    raise EquationNotFound(f"no equation {equation_id!r}")


def _next_id(existing: Sequence[str], prefix: str) -> str:
    top = 0
    for eid in existing:
        if eid.startswith(prefix) and eid[len(prefix):].isdigit():
            top = max(top, int(eid[len(prefix):]))
    return f"{prefix}{top + 1}"


def _touch(ws: Workspace):
    ws.modified = _now()


def add_node(ws: Workspace, position: Tuple[float, float],
             parent: Optional[str] = None,
             size: Tuple[float, float] = (320.0, 240.0)) -> str:
    """Append an empty node; when parent is given the new node is linked
    under it and depths are recomputed."""
    if parent is not None:
        try:
            find_node(ws, parent)
        except NodeNotFound:
            raise ParentNotFound(f"no parent node {parent!r}") from None
    node_id = _next_id([n.id for n in ws.nodes], "n")
    ws.nodes.append(SubproblemNode(
        id=node_id, position=(float(position[0]), float(position[1])),
        size=(float(size[0]), float(size[1]))))
    if parent is not None:
        link_nodes(ws, parent, node_id)
    else:
        recompute_depths(ws)
    _touch(ws)
    return node_id


def link_nodes(ws: Workspace, parent_id: str, child_id: str) -> None:
    find_node(ws, parent_id)
    find_node(ws, child_id)
    if parent_id == child_id or _reachable(ws, child_id, parent_id):
        raise CycleWouldForm(
            f"linking {parent_id!r} -> {child_id!r} would form a cycle")
    if (parent_id, child_id) not in ws.node_links:
        ws.node_links.append((parent_id, child_id))
    recompute_depths(ws)
    _touch(ws)


def _reachable(ws: Workspace, start: str, goal: str) -> bool:
    children: Dict[str, List[str]] = {}
    for p, c in ws.node_links:
        children.setdefault(p, []).append(c)
    stack, seen = [start], set()
    while stack:
        cur = stack.pop()
        if cur == goal:
            return True
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(children.get(cur, ()))
    return False


def recompute_depths(ws: Workspace) -> None:
    """depth = longest link path from any root (topological DP)."""
    parents: Dict[str, List[str]] = {n.id: [] for n in ws.nodes}
    children: Dict[str, List[str]] = {n.id: [] for n in ws.nodes}
    for p, c in ws.node_links:
        parents[c].append(p)
        children[p].append(c)
    pending = {nid: len(ps) for nid, ps in parents.items()}
    depth = {nid: 0 for nid in parents}
    queue = [nid for nid, k in pending.items() if k == 0]
    while queue:
        cur = queue.pop()
        for child in children[cur]:
            depth[child] = max(depth[child], depth[cur] + 1)
            pending[child] -= 1
            if pending[child] == 0:
                queue.append(child)
    for node in ws.nodes:
        node.depth = depth[node.id]


def add_equation(ws: Workspace, node_id: str, expr: Expr,
                 parent_equation: Optional[str] = None,
                 annotation: Optional[str] = None) -> str:
    """Append an equation; without an explicit parent it hangs off the
    node's most recently added equation (automatic dependency tracking)."""
    node = find_node(ws, node_id)
    if parent_equation is not None:
        if not any(e.id == parent_equation for e in node.equations):
            raise ParentEquationNotFound(
                f"no equation {parent_equation!r} in node {node_id!r}")
    elif node.equations:
        parent_equation = node.equations[-1].id
    all_ids = [e.id for n in ws.nodes for e in n.equations]
    eq_id = _next_id(all_ids, "e")
    node.equations.append(EquationEntry(
        id=eq_id, expr=expr, latex_cache=render_latex(expr),
        parent_equation_id=parent_equation, annotation=annotation))
    _touch(ws)
    return eq_id


def copy_node(ws: Workspace, node_id: str) -> str:
    """Duplicate a node's contents under fresh ids; the copy is unlinked."""
    node = find_node(ws, node_id)
    new_id = _next_id([n.id for n in ws.nodes], "n")
    all_eq_ids = [e.id for n in ws.nodes for e in n.equations]
    id_map: Dict[str, str] = {}
    equations = []
    for entry in node.equations:
        fresh = _next_id(all_eq_ids, "e")
        all_eq_ids.append(fresh)
        id_map[entry.id] = fresh
    for entry in node.equations:
        equations.append(EquationEntry(
            id=id_map[entry.id], expr=entry.expr,
            latex_cache=entry.latex_cache,
            parent_equation_id=(id_map.get(entry.parent_equation_id)
                                if entry.parent_equation_id else None),
            annotation=entry.annotation,
            position_override=entry.position_override))
    markup = [MarkupPath(points=list(m.points), color=tuple(m.color),
                         thickness=m.thickness) for m in node.markup]
    images = [ImageAttachment(id=uuid.uuid4().hex[:8],
                              media_type=im.media_type,
                              data_base64=im.data_base64)
              for im in node.images]
    ws.nodes.append(SubproblemNode(
        id=new_id,
        position=(float(node.position[0]) + 24.0, float(node.position[1]) + 24.0),
        size=(float(node.size[0]), float(node.size[1])),
        equations=equations, markup=markup, images=images))
    recompute_depths(ws)
    _touch(ws)
    return new_id


def delete_node(ws: Workspace, node_id: str) -> None:
    node = find_node(ws, node_id)
    ws.nodes.remove(node)
    ws.node_links = [(p, c) for p, c in ws.node_links
                     if p != node_id and c != node_id]
    recompute_depths(ws)
    _touch(ws)


def add_image(ws: Workspace, node_id: str, media_type: str,
              data_base64: str) -> str:
    node = find_node(ws, node_id)
    try:
        raw = base64.b64decode(data_base64, validate=True)
    except Exception as exc:
        raise WorkspaceError(f"invalid base64 image data: {exc}") from exc
    if len(raw) > MAX_IMAGE_BYTES:
        raise ImageTooLarge(f"image exceeds {MAX_IMAGE_BYTES} bytes")
    image_id = uuid.uuid4().hex[:8]
    node.images.append(ImageAttachment(id=image_id, media_type=media_type,
                                       data_base64=data_base64))
    _touch(ws)
    return image_id


def visible_paths(node: SubproblemNode,
                  viewport: Tuple[float, float, float, float]) -> List[MarkupPath]:
    """Paths whose bounding boxes intersect the (x, y, w, h) viewport."""
    vx, vy, vw, vh = viewport
    out = []
    for path in node.markup:
        x0, y0, x1, y1 = path.bounding_box
        if x0 <= vx + vw and x1 >= vx and y0 <= vy + vh and y1 >= vy:
            out.append(path)
    return out


# Persistence (schema_version "1")


def save(ws: Workspace) -> bytes:
    """Deterministic UTF-8 JSON; saving twice yields identical bytes."""
    doc = workspace_to_dict(ws)
    return (json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False)
            + "\n").encode("utf-8")


def workspace_to_dict(ws: Workspace) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": ws.id,
        "title": ws.title,
        "created": ws.created,
        "modified": ws.modified,
        "preferences": {
            "decay": ws.preferences.decay,
            "context_cap": ws.preferences.context_cap,
            "render_options": {
                "spacing_before_differential":
                    ws.preferences.render_options.spacing_before_differential,
                "implicit_mul_style":
                    ws.preferences.render_options.implicit_mul_style,
                "lowercase_default":
                    ws.preferences.render_options.lowercase_default,
            },
            "equation_layout": ws.preferences.equation_layout,
        },
        "nodes": [_node_to_dict(n) for n in ws.nodes],
        "node_links": [[p, c] for p, c in ws.node_links],
    }


def _node_to_dict(node: SubproblemNode) -> dict:
    return {
        "id": node.id,
        "position": [node.position[0], node.position[1]],
        "size": [node.size[0], node.size[1]],
        "equations": [{
            "id": e.id,
            "expr": expr_to_json(e.expr),
            "latex": e.latex_cache,
            "parent_equation_id": e.parent_equation_id,
            "annotation": e.annotation,
            "position_override": (list(e.position_override)
                                  if e.position_override else None),
        } for e in node.equations],
        "markup": [{
            "points": [[x, y] for x, y in m.points],
            "color": list(m.color),
            "thickness": m.thickness,
        } for m in node.markup],
        "images": [{
            "id": im.id,
            "media_type": im.media_type,
            "data_base64": im.data_base64,
        } for im in node.images],
    }


def load(data: bytes) -> Workspace:
    """Strict loader: rejects unknown fields (naming the path) and any
    schema_version other than "1"."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedDocument("$", f"not valid JSON: {exc}") from exc
    return workspace_from_dict(doc)


def workspace_from_dict(doc) -> Workspace:
    _check_obj(doc, "$", {"schema_version", "id", "title", "created",
                          "modified", "preferences", "nodes", "node_links"})
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionUnsupported(version)
    prefs = _prefs_from(doc["preferences"])
    nodes = [_node_from(raw, f"$.nodes[{i}]")
             for i, raw in enumerate(_list(doc, "nodes", "$"))]
    links = []
    node_ids = {n.id for n in nodes}
    for i, raw in enumerate(_list(doc, "node_links", "$")):
        path = f"$.node_links[{i}]"
        if not (isinstance(raw, list) and len(raw) == 2
                and all(isinstance(v, str) for v in raw)):
            raise MalformedDocument(path, "expected [parent_id, child_id]")
        if raw[0] not in node_ids or raw[1] not in node_ids:
            raise MalformedDocument(path, "link references a missing node")
        links.append((raw[0], raw[1]))
    ws = Workspace(
        id=_str(doc, "id", "$"), title=_str(doc, "title", "$"),
        nodes=nodes, node_links=links, preferences=prefs,
        created=_str(doc, "created", "$"), modified=_str(doc, "modified", "$"),
    )
    _check_dag(ws)
    recompute_depths(ws)
    return ws


def _check_dag(ws: Workspace):
    children: Dict[str, List[str]] = {}
    for p, c in ws.node_links:
        children.setdefault(p, []).append(c)
    visiting: Dict[str, int] = {}

    def dfs(nid: str):
        state = visiting.get(nid, 0)
        if state == 1:
            raise MalformedDocument("$.node_links", "links form a cycle")
        if state == 2:
            return
        visiting[nid] = 1
        for c in children.get(nid, ()):
            dfs(c)
        visiting[nid] = 2

    for node in ws.nodes:
        dfs(node.id)


def _prefs_from(raw) -> Preferences:
    _check_obj(raw, "$.preferences", {"decay", "context_cap",
                                      "render_options", "equation_layout"})
    ro_raw = raw.get("render_options", {})
    _check_obj(ro_raw, "$.preferences.render_options",
               {"spacing_before_differential", "implicit_mul_style",
                "lowercase_default"})
    style = ro_raw.get("implicit_mul_style", "juxtaposition")
    if style not in ("juxtaposition", "cdot"):
        raise MalformedDocument("$.preferences.render_options.implicit_mul_style",
                                f"unknown style {style!r}")
    ro = RenderOptions(
        spacing_before_differential=bool(
            ro_raw.get("spacing_before_differential", True)),
        implicit_mul_style=style,
        lowercase_default=bool(ro_raw.get("lowercase_default", True)),
    )
    decay = raw.get("decay", 0.5)
    if not isinstance(decay, (int, float)) or not (0 < decay < 1):
        raise MalformedDocument("$.preferences.decay",
                                "must be a number in (0, 1)")
    cap = raw.get("context_cap", 12)
    if not isinstance(cap, int) or cap < 1:
        raise MalformedDocument("$.preferences.context_cap",
                                "must be a positive integer")
    layout = raw.get("equation_layout", "top_to_bottom")
    if layout not in ("top_to_bottom", "free"):
        raise MalformedDocument("$.preferences.equation_layout",
                                f"unknown layout {layout!r}")
    return Preferences(decay=float(decay), context_cap=cap,
                       render_options=ro, equation_layout=layout)


def _node_from(raw, path: str) -> SubproblemNode:
    _check_obj(raw, path, {"id", "position", "size", "equations", "markup",
                           "images"})
    node = SubproblemNode(
        id=_str(raw, "id", path),
        position=_pair(raw, "position", path),
        size=_pair(raw, "size", path),
    )
    seen = set()
    for i, eq_raw in enumerate(_list(raw, "equations", path)):
        epath = f"{path}.equations[{i}]"
        _check_obj(eq_raw, epath, {"id", "expr", "latex",
                                   "parent_equation_id", "annotation",
                                   "position_override"})
        try:
            expr = expr_from_json(eq_raw["expr"], epath + ".expr")
        except KeyError:
            raise MalformedDocument(epath, "missing expr") from None
        except ExprDecodeError as exc:
            raise MalformedDocument(exc.path, str(exc)) from exc
        parent = eq_raw.get("parent_equation_id")
        if parent is not None and parent not in seen:
            raise MalformedDocument(
                epath + ".parent_equation_id",
                "must reference an earlier equation in the same node")
        pos = eq_raw.get("position_override")
        entry = EquationEntry(
            id=_str(eq_raw, "id", epath), expr=expr,
            latex_cache=render_latex(expr),
            parent_equation_id=parent,
            annotation=eq_raw.get("annotation"),
            position_override=tuple(pos) if pos is not None else None,
        )
        seen.add(entry.id)
        node.equations.append(entry)
    for i, m_raw in enumerate(_list(raw, "markup", path)):
        mpath = f"{path}.markup[{i}]"
        _check_obj(m_raw, mpath, {"points", "color", "thickness"})
        points = m_raw.get("points")
        if not (isinstance(points, list) and len(points) >= 2):
            raise MalformedDocument(mpath + ".points", "need at least 2 points")
        color = m_raw.get("color", [0, 0, 0, 255])
        if not (isinstance(color, list) and len(color) == 4
                and all(isinstance(v, int) and 0 <= v <= 255 for v in color)):
            raise MalformedDocument(mpath + ".color", "expected RGBA 0..255")
        thickness = m_raw.get("thickness", 2.0)
        if not isinstance(thickness, (int, float)) or thickness <= 0:
            raise MalformedDocument(mpath + ".thickness", "must be positive")
        node.markup.append(MarkupPath(
            points=[(float(p[0]), float(p[1])) for p in points],
            color=tuple(color), thickness=float(thickness)))
    for i, im_raw in enumerate(_list(raw, "images", path)):
        ipath = f"{path}.images[{i}]"
        _check_obj(im_raw, ipath, {"id", "media_type", "data_base64"})
        data = _str(im_raw, "data_base64", ipath)
        try:
            decoded = base64.b64decode(data, validate=True)
        except Exception as exc:
            raise MalformedDocument(ipath + ".data_base64",
                                    f"invalid base64: {exc}") from exc
        if len(decoded) > MAX_IMAGE_BYTES:
            raise MalformedDocument(ipath + ".data_base64",
                                    f"image exceeds {MAX_IMAGE_BYTES} bytes")
        node.images.append(ImageAttachment(
            id=_str(im_raw, "id", ipath),
            media_type=_str(im_raw, "media_type", ipath),
            data_base64=data))
    return node


def _check_obj(raw, path: str, allowed: set):
    if not isinstance(raw, dict):
        raise MalformedDocument(path, "expected an object")
    for key in raw:
        if key not in allowed:
            raise MalformedDocument(
                f"{path}.{key}",
                f"unknown field (schema_version {SCHEMA_VERSION})")


def _str(raw: dict, key: str, path: str) -> str:
    v = raw.get(key)
    if not isinstance(v, str):
        raise MalformedDocument(f"{path}.{key}", "must be a string")
    return v


def _list(raw: dict, key: str, path: str) -> list:
    v = raw.get(key, [])
    if not isinstance(v, list):
        raise MalformedDocument(f"{path}.{key}", "must be a list")
    return v


def _pair(raw: dict, key: str, path: str) -> Tuple[float, float]:
    v = raw.get(key)
    if not (isinstance(v, list) and len(v) == 2
            and all(isinstance(x, (int, float)) for x in v)):
        raise MalformedDocument(f"{path}.{key}", "expected [x, y]")
    return (float(v[0]), float(v[1]))
