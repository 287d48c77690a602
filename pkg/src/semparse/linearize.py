"""Top-down bracketed graph linearization and its robust inverse.

A graph serializes as the pre-order walk of its spanning tree: each node is
an alignment marker plus a predicate, each tree edge opens a labelled
bracket (``-of`` when traversed against its stored direction, ``~`` when
undirected), and reentrancy edges repeat the dependent's alignment and
predicate in a ``*``-suffixed leaf.  Parsing never fails: out-of-place
symbols are skipped, missing structure is repaired, and every repair is
reported as a diagnostic.  Reentrancy leaves are resolved against the fully
built graph by (rendered predicate, alignment) with nearest-alignment
fallbacks, creating a fresh node only as a last resort.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .graph import (
    Alignment,
    Edge,
    FALLBACK_PREDICATE,
    Node,
    SemanticGraph,
    attach_disconnected,
    default_child_key,
    make_graph,
    spanning_tree,
)
from .transitions import parse_predicate_rendering

_CARG_SUFFIX = "_CARG"


@dataclass(frozen=True)
class LinearToken:
    kind: str  # open | close | align | pred | const
    label: str = ""
    reversed: bool = False
    reentrant: bool = False
    undirected: bool = False
    index: int = 0
    text: str = ""


def open_edge(
    label: str,
    reversed: bool = False,
    reentrant: bool = False,
    undirected: bool = False,
) -> LinearToken:
    return LinearToken(
        "open", label=label, reversed=reversed, reentrant=reentrant, undirected=undirected
    )


CLOSE = LinearToken("close")


def align_token(index: int) -> LinearToken:
    return LinearToken("align", index=index)


def pred_token(text: str) -> LinearToken:
    return LinearToken("pred", text=text)


def const_token(text: str) -> LinearToken:
    return LinearToken("const", text=text)


def linearize_top_down(graph: SemanticGraph, delex: bool = False) -> list[LinearToken]:
    """Serialize a graph, optionally with delexicalized predicate labels.

    Constants follow their node as quoted tokens in the full rendering and
    are dropped (leaving only the ``_CARG`` marker) when ``delex`` is set;
    they are recovered later through the predicted alignments.
    """
    decomposition = spanning_tree(graph)
    children = decomposition.children()
    reentrant: dict[int, list[Edge]] = {}
    for edge in decomposition.reentrancy_edges:
        reentrant.setdefault(edge.head, []).append(edge)

    key = default_child_key(graph)
    out: list[LinearToken] = [open_edge("root")]

    def emit_node(node_id: int) -> None:
        node = graph.node(node_id)
        out.append(align_token(node.alignment.start))
        out.append(pred_token(node.rendered(delex)))
        if not delex and node.constant is not None:
            out.append(const_token(node.constant))
        branches: list[tuple[tuple, LinearToken, Optional[int], int]] = []
        for edge, rev, child in children.get(node_id, []):
            tok = open_edge(edge.label, reversed=rev, undirected=not edge.directed)
            branches.append(((key(child), edge.label), tok, child, child))
        for edge in reentrant.get(node_id, []):
            tok = open_edge(edge.label, reentrant=True, undirected=not edge.directed)
            branches.append(((key(edge.dependent), edge.label), tok, None, edge.dependent))
        branches.sort(key=lambda item: item[0])
        for _sort_key, tok, child, target in branches:
            out.append(tok)
            if child is not None:
                emit_node(child)
            else:
                dep = graph.node(target)
                out.append(align_token(dep.alignment.start))
                out.append(pred_token(dep.rendered(delex)))
            out.append(CLOSE)

    emit_node(graph.root)
    out.append(CLOSE)
    return out


def render_linear(tokens: Sequence[LinearToken]) -> str:
    parts = []
    for tok in tokens:
        if tok.kind == "open":
            suffix = "-of" if tok.reversed else ""
            suffix += "*" if tok.reentrant else ""
            suffix += "~" if tok.undirected else ""
            parts.append(f":{tok.label}{suffix}(")
        elif tok.kind == "close":
            parts.append(")")
        elif tok.kind == "align":
            parts.append(f"<{tok.index}>")
        elif tok.kind == "pred":
            parts.append(tok.text)
        else:
            parts.append(f'"{tok.text}"')
    return " ".join(parts)


def linearize_to_text(graph: SemanticGraph, delex: bool = False) -> str:
    return render_linear(linearize_top_down(graph, delex))


_ALIGN_RE = re.compile(r"^<(-?\d+)>$")


def tokenize_linear(text: str) -> tuple[list[LinearToken], list[str]]:
    """Lex a linearization; malformed symbols are repaired with diagnostics."""
    tokens: list[LinearToken] = []
    diagnostics: list[str] = []
    for raw in text.split():
        if raw == ")":
            tokens.append(CLOSE)
            continue
        align = _ALIGN_RE.match(raw)
        if align:
            tokens.append(align_token(int(align.group(1))))
            continue
        if raw.startswith(":"):
            body = raw[1:]
            if body.endswith("("):
                body = body[:-1]
            else:
                diagnostics.append(f"edge {raw!r} missing '(': inserted")
            undirected = body.endswith("~")
            if undirected:
                body = body[:-1]
            reentrant = body.endswith("*")
            if reentrant:
                body = body[:-1]
            rev = body.endswith("-of")
            if rev:
                body = body[:-3]
            if not body:
                diagnostics.append(f"dropped edge with empty label {raw!r}")
                continue
            tokens.append(
                open_edge(body, reversed=rev, reentrant=reentrant, undirected=undirected)
            )
            continue
        if raw.startswith('"') or raw.endswith('"'):
            tokens.append(const_token(raw.strip('"')))
            continue
        tokens.append(pred_token(raw))
    return tokens, diagnostics


@dataclass
class ParseResult:
    graph: SemanticGraph
    diagnostics: list[str]


@dataclass
class _Frame:
    edge: Optional[LinearToken]
    node: Optional[int] = None
    ref: Optional[tuple[int, str]] = None  # reentrancy leaf: (align, rendering)


def parse_top_down(tokens: Sequence[LinearToken], sentence_len: int) -> ParseResult:
    """Rebuild a graph from linear tokens; total over arbitrary input."""
    diagnostics: list[str] = []
    max_align = max(sentence_len - 1, 0)

    nodes: list[Node] = []
    edges: list[Edge] = []
    edge_keys: set = set()
    # Reentrancy leaves are resolved after the whole structure is built so
    # forward references to later nodes still land on the right target.
    pending: list[tuple[int, LinearToken, int, str]] = []

    frames: list[_Frame] = [_Frame(edge=None)]
    current_align: Optional[int] = None
    last_align = 0

    def clamp(i: int) -> int:
        if 0 <= i <= max_align:
            return i
        diagnostics.append(f"clamped out-of-range alignment {i}")
        return min(max(i, 0), max_align)

    def enclosing_node() -> Optional[int]:
        for frame in reversed(frames):
            if frame.node is not None:
                return frame.node
        return None

    def add_edge(edge: Edge, context: str) -> bool:
        if edge.head == edge.dependent:
            diagnostics.append(f"dropped self-loop {context}")
            return False
        if edge.key() in edge_keys:
            diagnostics.append(f"dropped duplicate edge {context}")
            return False
        edge_keys.add(edge.key())
        edges.append(edge)
        return True

    def make_node(text: str, align: int) -> int:
        node_id = len(nodes)
        pred = parse_predicate_rendering(text) if text else FALLBACK_PREDICATE
        nodes.append(Node(node_id, pred, Alignment(align, align)))
        return node_id

    def take_alignment(context: str) -> int:
        nonlocal current_align, last_align
        if current_align is None:
            diagnostics.append(f"{context} missing alignment: using {last_align}")
            align = last_align
        else:
            align = clamp(current_align)
        current_align = None
        last_align = align
        return align

    def handle_pred(text: str) -> None:
        frame = frames[-1]
        if frame.edge is not None and frame.edge.reentrant:
            if frame.ref is None:
                frame.ref = (take_alignment(f"reentrancy leaf {text!r}"), text)
            else:
                diagnostics.append(f"ignored extra symbol {text!r} in reentrancy leaf")
            return
        align = take_alignment(f"predicate {text!r}")
        if frame.node is not None:
            node_id = make_node(text, align)
            add_edge(Edge(frame.node, "rel", node_id), f"for stray predicate {text!r}")
            diagnostics.append(f"stray predicate {text!r} attached to node {frame.node}")
            return
        node_id = make_node(text, align)
        frame.node = node_id
        if node_id == 0:
            return
        parent = None
        for outer in reversed(frames[:-1]):
            if outer.node is not None:
                parent = outer.node
                break
        if parent is None:
            add_edge(Edge(0, "rel", node_id), f"for parentless node {node_id}")
            diagnostics.append(f"node {node_id} had no parent: attached to the root")
            return
        spec = frame.edge
        if spec is None or spec.label == "root":
            add_edge(Edge(parent, "rel", node_id), f"for extra node {node_id}")
            diagnostics.append(f"extra node {node_id} attached to node {parent}")
            return
        if spec.reversed:
            add_edge(
                Edge(node_id, spec.label, parent, directed=not spec.undirected),
                f":{spec.label}-of",
            )
        else:
            add_edge(
                Edge(parent, spec.label, node_id, directed=not spec.undirected),
                f":{spec.label}",
            )

    def handle_const(text: str) -> None:
        host = enclosing_node()
        if host is None:
            diagnostics.append(f'dropped constant "{text}" before any node')
            return
        node = nodes[host]
        pred = node.predicate
        if pred.label.endswith(_CARG_SUFFIX):
            pred = replace(pred, label=pred.label[: -len(_CARG_SUFFIX)])
        nodes[host] = replace(node, predicate=pred, constant=text)

    def close_frame() -> None:
        frame = frames.pop()
        if frame.edge is None:
            return
        if frame.edge.reentrant:
            host = enclosing_node()
            if frame.ref is None:
                diagnostics.append(f"dropped empty reentrancy leaf :{frame.edge.label}*")
            elif host is None:
                diagnostics.append(f"dropped reentrancy :{frame.edge.label}* outside any node")
            else:
                pending.append((host, frame.edge, frame.ref[0], frame.ref[1]))
        elif frame.node is None and frame.edge.label != "root":
            diagnostics.append(f"dropped edge :{frame.edge.label} with no dependent")

    for tok in tokens:
        if tok.kind == "open":
            frames.append(_Frame(edge=tok))
        elif tok.kind == "align":
            current_align = tok.index
        elif tok.kind == "pred":
            handle_pred(tok.text)
        elif tok.kind == "const":
            handle_const(tok.text)
        else:
            if len(frames) > 1:
                close_frame()
            else:
                diagnostics.append("ignored unmatched ')'")

    while len(frames) > 1:
        diagnostics.append("inserted missing ')'")
        close_frame()

    if not nodes:
        diagnostics.append("empty linearization: emitting fallback node")
        nodes.append(Node(0, FALLBACK_PREDICATE, Alignment(0, 0)))

    _resolve_reentrancies(nodes, edges, edge_keys, pending, diagnostics)

    graph = make_graph(nodes, edges, 0)
    graph, attached = attach_disconnected(graph)
    for node_id in attached:
        diagnostics.append(f"attached disconnected node {node_id} to the root")
    return ParseResult(graph, diagnostics)


def _resolve_reentrancies(nodes, edges, edge_keys, pending, diagnostics) -> None:
    """Attach recorded reentrancy leaves to their most plausible targets.

    Preference order: exact (rendered predicate, alignment start) match,
    nearest alignment among same-rendering nodes, nearest alignment overall,
    then a freshly created node as the lossy fallback.  The head itself is
    never a candidate.
    """
    for head, spec, align, text in pending:
        def distance(node_id: int) -> tuple[int, int, int]:
            node = nodes[node_id]
            return (abs(node.alignment.start - align), node.alignment.start, node_id)

        same = [n.id for n in nodes if n.id != head and n.rendered(False) == text]
        exact = [i for i in same if nodes[i].alignment.start == align]
        others = [n.id for n in nodes if n.id != head and n.id not in same]

        target: Optional[int] = None
        if exact:
            target = min(exact)
        elif same:
            target = min(same, key=distance)
        elif others:
            target = min(others, key=distance)
            diagnostics.append(
                f"reentrancy target {text!r}@{align} matched by alignment only"
            )
        if target is None:
            node_id = len(nodes)
            pred = parse_predicate_rendering(text) if text else FALLBACK_PREDICATE
            nodes.append(Node(node_id, pred, Alignment(align, align)))
            diagnostics.append(
                f"reentrancy target {text!r}@{align} not found: created node {node_id}"
            )
            target = node_id

        if spec.reversed:
            edge = Edge(target, spec.label, head, directed=not spec.undirected)
        else:
            edge = Edge(head, spec.label, target, directed=not spec.undirected)
        if edge.key() in edge_keys:
            diagnostics.append(f"dropped duplicate reentrancy :{spec.label}*")
            continue
        edge_keys.add(edge.key())
        edges.append(edge)


def parse_top_down_text(text: str, sentence_len: int) -> ParseResult:
    tokens, lex_diagnostics = tokenize_linear(text)
    result = parse_top_down(tokens, sentence_len)
    result.diagnostics = lex_diagnostics + result.diagnostics
    return result


def linearization_length(graph: SemanticGraph) -> int:
    """Token count identity: one align+pred pair per node plus one per
    reentrancy edge, a bracket pair per edge, the root wrapper, and one
    token per constant in the full rendering."""
    decomposition = spanning_tree(graph)
    n_reent = len(decomposition.reentrancy_edges)
    n_tree = len(decomposition.tree_edges)
    n_const = sum(1 for n in graph.nodes if n.constant is not None)
    return 2 + 2 * len(graph.nodes) + 2 * n_tree + 4 * n_reent + n_const
