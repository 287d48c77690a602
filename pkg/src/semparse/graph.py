"""Aligned semantic graph data model.

A graph is a rooted, connected, directed labelled graph whose nodes carry
predicates and token-span alignments, plus optional string constants
(names, numbers).  Graphs are immutable after construction and safe to
share between workers; every operation in this module is pure.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional, Sequence


@dataclass(frozen=True)
class Predicate:
    """A node label.

    Surface predicates are built from a lemma, a coarse POS and an optional
    sense, and render with a leading underscore; abstract predicates render
    as their bare label.  A delexicalized surface predicate has no lemma and
    renders as ``_pos_sense``.
    """

    label: str
    is_surface: bool = False
    lemma: Optional[str] = None
    pos: Optional[str] = None
    sense: Optional[str] = None

    @staticmethod
    def abstract(label: str) -> "Predicate":
        return Predicate(label=label, is_surface=False)

    @staticmethod
    def surface(lemma: Optional[str], pos: str, sense: Optional[str] = None) -> "Predicate":
        parts = [""] + ([lemma] if lemma is not None else []) + [pos]
        if sense is not None:
            parts.append(sense)
        return Predicate(
            label="_".join(parts), is_surface=True, lemma=lemma, pos=pos, sense=sense
        )

    def rendered(self, delex: bool = False) -> str:
        """Full or delexicalized string form of this predicate.

        Surface predicates without a sense are the out-of-lexicon kind; they
        delexicalize to the special label ``unknown`` and are reconstructed
        from the aligned token at relexicalization time.
        """
        if not self.is_surface:
            return self.label
        if not delex:
            return self.label
        if self.sense is None:
            return "unknown"
        return f"_{self.pos}_{self.sense}"

    def delexicalized(self) -> "Predicate":
        if not self.is_surface or self.lemma is None:
            return self
        return Predicate.surface(None, self.pos or "u", self.sense)


#: The predicate used when robust recovery has to invent a node.
FALLBACK_PREDICATE = Predicate.abstract("unknown")


@dataclass(frozen=True)
class Alignment:
    """Inclusive token span ``start..end`` into the sentence."""

    start: int
    end: int

    @staticmethod
    def at(i: int) -> "Alignment":
        return Alignment(i, i)


@dataclass(frozen=True)
class Node:
    id: int
    predicate: Predicate
    alignment: Alignment
    constant: Optional[str] = None

    def rendered(self, delex: bool = False) -> str:
        """Predicate rendering with a ``_CARG`` marker on constant bearers."""
        base = self.predicate.rendered(delex)
        if self.constant is not None:
            return base + "_CARG"
        return base


@dataclass(frozen=True)
class Edge:
    head: int
    label: str
    dependent: int
    directed: bool = True

    def key(self) -> tuple:
        # Duplicate detection: undirected edges are orientation-free.
        if self.directed:
            return (self.head, self.label, self.dependent, True)
        lo, hi = sorted((self.head, self.dependent))
        return (lo, self.label, hi, False)


@dataclass(frozen=True)
class SemanticGraph:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    root: int

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def __len__(self) -> int:
        return len(self.nodes)


def make_graph(nodes: Sequence[Node], edges: Sequence[Edge], root: int) -> SemanticGraph:
    return SemanticGraph(tuple(nodes), tuple(edges), root)


def validate(graph: SemanticGraph, sentence_len: int) -> list[str]:
    """Check every graph invariant; returns a list of violations (empty = valid)."""
    report: list[str] = []
    n = len(graph.nodes)
    if n == 0:
        return ["graph has no nodes"]

    ids = [node.id for node in graph.nodes]
    if sorted(ids) != list(range(n)):
        report.append(f"node ids are not dense 0..{n - 1}: {sorted(ids)}")
    if any(graph.nodes[i].id != i for i in range(n) if 0 <= graph.nodes[i].id < n):
        # Allow permuted storage only if ids are dense; index lookups assume order.
        if sorted(ids) == list(range(n)):
            report.append("nodes are not stored in id order")

    for node in graph.nodes:
        if not node.predicate.label:
            report.append(f"node {node.id}: empty predicate label")
        if node.predicate.is_surface and not node.predicate.pos:
            report.append(f"node {node.id}: surface predicate without POS")
        a = node.alignment
        if not (0 <= a.start <= a.end < sentence_len):
            report.append(
                f"node {node.id}: alignment ({a.start},{a.end}) out of range for "
                f"sentence of length {sentence_len}"
            )
        if node.constant is not None:
            if node.constant == "":
                report.append(f"node {node.id}: empty constant")
            if node.predicate.is_surface:
                report.append(f"node {node.id}: constant on a surface predicate")

    valid_ids = set(range(n))
    seen_keys = set()
    for edge in graph.edges:
        if edge.head not in valid_ids or edge.dependent not in valid_ids:
            report.append(
                f"edge {edge.head}-{edge.label}->{edge.dependent} references unknown node id"
            )
            continue
        if edge.head == edge.dependent:
            report.append(f"self-loop on node {edge.head} ({edge.label})")
        if not edge.label:
            report.append(f"edge {edge.head}->{edge.dependent}: empty label")
        key = edge.key()
        if key in seen_keys:
            report.append(
                f"duplicate edge {edge.head}-{edge.label}->{edge.dependent}"
            )
        seen_keys.add(key)

    if graph.root not in valid_ids:
        report.append(f"root {graph.root} is not a node id")
    elif sorted(ids) == list(range(n)):
        reachable = _undirected_component(graph, graph.root)
        if len(reachable) != n:
            missing = sorted(valid_ids - reachable)
            report.append(f"not connected: nodes {missing} unreachable from root")
    return report


def attach_disconnected(graph: SemanticGraph, label: str = "rel") -> tuple[SemanticGraph, list[int]]:
    """Attach components unreachable from the root with fallback edges.

    Recovery paths use this so every emitted graph satisfies connectivity;
    returns the repaired graph and the ids that had to be attached.
    """
    reachable = _undirected_component(graph, graph.root)
    if len(reachable) == len(graph.nodes):
        return graph, []
    extra = []
    attached: list[int] = []
    for node in graph.nodes:
        if node.id in reachable:
            continue
        component = _undirected_component(graph, node.id)
        if component & reachable:
            continue
        extra.append(Edge(graph.root, label, node.id))
        attached.append(node.id)
        reachable |= component
    repaired = SemanticGraph(graph.nodes, graph.edges + tuple(extra), graph.root)
    return repaired, attached


def _undirected_component(graph: SemanticGraph, start: int) -> set[int]:
    adjacency: dict[int, list[int]] = {node.id: [] for node in graph.nodes}
    for edge in graph.edges:
        if edge.head in adjacency and edge.dependent in adjacency:
            adjacency[edge.head].append(edge.dependent)
            adjacency[edge.dependent].append(edge.head)
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adjacency[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


@dataclass(frozen=True)
class SpanningTreeDecomposition:
    """Partition of a graph's edges into a tree over all nodes plus reentrancies.

    A tree edge flagged ``reversed`` was traversed from its dependent to its
    head and renders with an ``-of`` suffix.  ``visit_order`` is the pre-order
    walk of the tree with children sorted by the child-ordering policy.
    """

    tree_edges: tuple[tuple[Edge, bool], ...]
    reentrancy_edges: tuple[Edge, ...]
    visit_order: tuple[int, ...]

    def children(self) -> dict[int, list[tuple[Edge, bool, int]]]:
        """Tree children as ``parent -> [(edge, reversed, child_id)]`` (unsorted)."""
        out: dict[int, list[tuple[Edge, bool, int]]] = {}
        for edge, rev in self.tree_edges:
            parent, child = (edge.dependent, edge.head) if rev else (edge.head, edge.dependent)
            out.setdefault(parent, []).append((edge, rev, child))
        return out


def default_child_key(graph: SemanticGraph):
    def key(node_id: int) -> tuple[int, int]:
        return (graph.node(node_id).alignment.start, node_id)

    return key


def spanning_tree(graph: SemanticGraph, child_key=None) -> SpanningTreeDecomposition:
    """Extract a spanning tree rooted at the graph root.

    The tree grows best-first over the undirected edge view, always
    preferring edges in their stored direction over reversed traversal and
    breaking ties by the child-ordering policy (alignment start, node id).
    Forward preference keeps stored edge directions in the tree wherever the
    graph allows it, so reversal marks are reserved for genuinely
    head-inverted edges.  Edges whose endpoints are both visited become
    reentrancies.
    """
    if child_key is None:
        child_key = default_child_key(graph)

    incident: dict[int, list[int]] = {node.id: [] for node in graph.nodes}
    for idx, edge in enumerate(graph.edges):
        incident[edge.head].append(idx)
        incident[edge.dependent].append(idx)

    visited = {graph.root}
    visit_pos = {graph.root: 0}
    tree: list[tuple[Edge, bool]] = []
    used = set()
    heap: list[tuple] = []

    def push_candidates(source: int) -> None:
        for idx in incident[source]:
            edge = graph.edges[idx]
            other = edge.dependent if edge.head == source else edge.head
            if other in visited:
                continue
            # Reversed means the walk enters the child against the stored
            # direction (dependent side first).
            rev = edge.directed and edge.head == other
            heapq.heappush(
                heap,
                (rev, child_key(other), visit_pos[source], edge.label, idx, other),
            )

    push_candidates(graph.root)
    while heap:
        rev, _key, _pos, _label, idx, child = heapq.heappop(heap)
        if child in visited:
            continue
        visited.add(child)
        visit_pos[child] = len(visit_pos)
        tree.append((graph.edges[idx], rev))
        used.add(idx)
        push_candidates(child)

    reentrancies = tuple(
        edge for idx, edge in enumerate(graph.edges) if idx not in used
    )

    children: dict[int, list[tuple[tuple, int]]] = {}
    for edge, rev in tree:
        parent, child = (edge.dependent, edge.head) if rev else (edge.head, edge.dependent)
        children.setdefault(parent, []).append(((child_key(child), edge.label), child))
    order: list[int] = []
    stack = [graph.root]
    while stack:
        u = stack.pop()
        order.append(u)
        kids = sorted(children.get(u, []), reverse=True)
        stack.extend(child for _k, child in kids)

    return SpanningTreeDecomposition(tuple(tree), reentrancies, tuple(order))


def _edge_label_maps(graph: SemanticGraph):
    directed: dict[tuple[int, int], set[str]] = {}
    undirected: dict[frozenset, set[str]] = {}
    for edge in graph.edges:
        if edge.directed:
            directed.setdefault((edge.head, edge.dependent), set()).add(edge.label)
        else:
            undirected.setdefault(frozenset((edge.head, edge.dependent)), set()).add(edge.label)
    return directed, undirected


def graphs_equal(g1: SemanticGraph, g2: SemanticGraph) -> bool:
    """Equality up to renaming of node ids.

    True iff some node bijection preserves predicate rendering, alignment,
    constant, rootness and every labelled edge (with direction; undirected
    edges match in either orientation).  Exact backtracking search with
    signature pruning; graphs here have tens of nodes at most.
    """
    if len(g1.nodes) != len(g2.nodes) or len(g1.edges) != len(g2.edges):
        return False

    def signature(graph: SemanticGraph, node: Node) -> tuple:
        return (
            node.predicate.rendered(False),
            node.alignment.start,
            node.alignment.end,
            node.constant,
            node.id == graph.root,
        )

    buckets: dict[tuple, list[int]] = {}
    for node in g2.nodes:
        buckets.setdefault(signature(g2, node), []).append(node.id)

    candidates: list[tuple[int, list[int]]] = []
    for node in g1.nodes:
        sig = signature(g1, node)
        if sig not in buckets:
            return False
        candidates.append((node.id, buckets[sig]))
    candidates.sort(key=lambda item: len(item[1]))

    dir1, und1 = _edge_label_maps(g1)
    dir2, und2 = _edge_label_maps(g2)

    mapping: dict[int, int] = {}
    used: set[int] = set()

    def compatible(a: int, b: int) -> bool:
        for x, y in mapping.items():
            if dir1.get((a, x), set()) != dir2.get((b, y), set()):
                return False
            if dir1.get((x, a), set()) != dir2.get((y, b), set()):
                return False
            if und1.get(frozenset((a, x)), set()) != und2.get(frozenset((b, y)), set()):
                return False
        return True

    def search(i: int) -> bool:
        if i == len(candidates):
            return True
        a, options = candidates[i]
        for b in options:
            if b in used or not compatible(a, b):
                continue
            mapping[a] = b
            used.add(b)
            if search(i + 1):
                return True
            del mapping[a]
            used.remove(b)
        return False

    return search(0)
