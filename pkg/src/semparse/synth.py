"""Deterministic synthetic sentence/graph corpora for desk-scale experiments.

Each graph is planned as an ordered tree laid out so that its in-order
traversal matches non-decreasing token alignments, then decorated with
quantifier leaves sharing their head's token, named-entity and number
constants, reentrancy edges (optionally crossing the tree layout), and an
occasional alignment-divergent leaf that makes the monotone node order
differ from the in-order one.  Every candidate graph is verified before
emission: it must validate, its spanning-tree decomposition must match the
plan, the oracle must round-trip it under both node orderings, and in-order
cross-arcs must all be reentrancy edges.  Failed candidates are resampled
from a per-entry substream, so corpora are a pure function of the config.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .corpus import CorpusEntry, Sentence
from .delex import number_to_words
from .graph import (
    Alignment,
    Edge,
    Node,
    Predicate,
    SemanticGraph,
    graphs_equal,
    make_graph,
    spanning_tree,
    validate,
)
from .transitions import (
    CROSS_ARC,
    OracleConfig,
    actions_to_graph,
    generation_order,
    oracle,
    replay_arc_edges,
)

_ABSTRACT = (
    "person", "thing", "place", "group", "time", "manner",
    "reason", "state", "event", "fact",
)
_QUANTIFIERS = ("every_q", "some_q", "the_q", "a_q", "most_q")
_NAMES = ("Anna", "Ben", "Carl", "Dora", "Emil", "Faye", "Gus", "Hana", "Ivan", "Jo")
_FUNCTION_WORDS = ("the", "of", "to", "and", "with", "for", "near", "about")
_FILLERS = ("then", "still", "also", "just", "quite", "well", "once", "soon")
_SYLLABLES = ("ba", "de", "ki", "lo", "mu", "na", "po", "ru", "sa", "ti", "vo", "ze")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 1
    size: int = 100
    max_nodes: int = 8
    lemma_vocab_size: int = 20
    predicate_vocab_size: int = 8
    edge_label_vocab_size: int = 4
    reentrancy_probability: float = 0.3
    nonplanar_probability: float = 0.2
    unique_reentrancy_targets: bool = False

    def check(self) -> None:
        if self.size < 1 or self.max_nodes < 1:
            raise ValueError("size and max_nodes must be >= 1")
        if any(
            v < 1
            for v in (self.lemma_vocab_size, self.predicate_vocab_size, self.edge_label_vocab_size)
        ):
            raise ValueError("vocab sizes must be >= 1")
        for p in (self.reentrancy_probability, self.nonplanar_probability):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0,1]")
        if self.nonplanar_probability > self.reentrancy_probability:
            # Non-planar extra arcs are reentrancies by construction, so the
            # crossing rate cannot exceed the reentrancy rate.
            raise ValueError("nonplanar_probability must be <= reentrancy_probability")


def _lemma_vocab(size: int) -> list[str]:
    out = []
    k = len(_SYLLABLES)
    for i in range(size):
        out.append(_SYLLABLES[i % k] + _SYLLABLES[(i * 5 + 3) % k] + ("r" if i % 3 == 0 else ""))
    return out


def _abstract_vocab(size: int) -> list[str]:
    out = list(_ABSTRACT[:size])
    while len(out) < size:
        out.append(f"concept{len(out)}")
    return out


def _inflect(lemma: str, pos: str, variant: int) -> str:
    if pos == "v":
        return lemma + ("", "s", "ed", "ing")[variant % 4]
    if pos == "n":
        return lemma + ("", "s")[variant % 2]
    return lemma


@dataclass
class _PlanNode:
    kind: str  # surface | abstract | quant | named | number | unknown | stacked
    edge_label: str = ""
    edge_reversed: bool = False
    tie: bool = False  # shares its parent's token
    left: list["_PlanNode"] = field(default_factory=list)
    right: list["_PlanNode"] = field(default_factory=list)
    # Filled during realization:
    pos_index: int = -1
    align: int = -1
    width: int = 1
    predicate: Optional[Predicate] = None
    constant: Optional[str] = None
    tokens: tuple[str, ...] = ()
    pos_tag: str = "x"
    ne_tag: str = "O"

    def walk(self):
        for child in self.left:
            yield from child.walk()
        yield self
        for child in self.right:
            yield from child.walk()


def _build_plan(rng: np.random.Generator, cfg: SynthConfig) -> _PlanNode:
    lo = min(3, cfg.max_nodes)
    n_base = int(rng.integers(lo, cfg.max_nodes + 1))
    root = _PlanNode(kind="surface")
    nodes = [root]
    for i in range(1, n_base):
        parent = nodes[int(rng.integers(0, i))]
        kind = rng.choice(
            ["surface", "surface", "abstract", "named", "number", "unknown"],
            p=[0.35, 0.2, 0.25, 0.1, 0.05, 0.05],
        )
        child = _PlanNode(kind=str(kind))
        if rng.random() < 0.35:
            parent.left.append(child)
        else:
            parent.right.append(child)
        nodes.append(child)

    budget = cfg.max_nodes - n_base
    # Quantifier leaves share the token of their nominal head.
    for node in list(nodes):
        if budget <= 0:
            break
        if node.kind in ("surface", "named") and rng.random() < 0.4:
            quant = _PlanNode(kind="quant", tie=True)
            node.right.insert(0, quant)
            nodes.append(quant)
            budget -= 1
    # A stacked same-label abstract pair creates genuinely ambiguous
    # reentrancy targets; suppressed when unique targets are requested.
    if budget > 0 and not cfg.unique_reentrancy_targets and rng.random() < 0.3:
        hosts = [n for n in nodes if n.kind == "abstract"]
        if hosts:
            host = hosts[int(rng.integers(0, len(hosts)))]
            twin = _PlanNode(kind="stacked", tie=True)
            host.right.insert(0, twin)
            nodes.append(twin)
            budget -= 1
    # A divergent leaf is aligned past every other node, so the monotone
    # ordering reorders it while the tree layout stays reproducible.
    if budget > 0 and rng.random() < 0.35:
        internal = [n for n in nodes if (n.left or n.right) and not n.tie]
        if internal:
            host = internal[int(rng.integers(0, len(internal)))]
            host.right.append(_PlanNode(kind="divergent"))
            budget -= 1
    return root


def _realize(rng: np.random.Generator, cfg: SynthConfig, root: _PlanNode):
    """Assign positions, alignments, predicates and tokens to a plan tree."""
    sequence = list(root.walk())
    for pos, node in enumerate(sequence):
        node.pos_index = pos

    lemmas = _lemma_vocab(cfg.lemma_vocab_size)
    abstracts = _abstract_vocab(cfg.predicate_vocab_size)

    next_token = 0
    divergent: list[_PlanNode] = []
    parent_of: dict[int, _PlanNode] = {}
    for node in sequence:
        for child in node.left + node.right:
            parent_of[child.pos_index] = node

    for node in sequence:
        if node.kind == "divergent":
            divergent.append(node)
            continue
        if node.tie:
            node.align = parent_of[node.pos_index].align
            node.width = 0
            continue
        node.align = next_token
        node.width = 2 if node.kind == "number" else 1
        next_token += node.width
    for node in divergent:
        node.align = next_token
        node.width = 1
        next_token += 1

    stacked_label = abstracts[int(rng.integers(0, len(abstracts)))]
    for node in sequence:
        if node.kind == "surface":
            lemma = lemmas[int(rng.integers(0, len(lemmas)))]
            pos = str(rng.choice(["v", "n", "a"], p=[0.5, 0.4, 0.1]))
            sense = str(int(rng.integers(1, 3)))
            node.predicate = Predicate.surface(lemma, pos, sense)
            node.tokens = (_inflect(lemma, pos, int(rng.integers(0, 4))),)
            node.pos_tag = pos
        elif node.kind == "divergent":
            lemma = lemmas[int(rng.integers(0, len(lemmas)))]
            node.predicate = Predicate.surface(lemma, "n", "1")
            node.tokens = (_inflect(lemma, "n", int(rng.integers(0, 2))),)
            node.pos_tag = "n"
        elif node.kind == "unknown":
            form = lemmas[int(rng.integers(0, len(lemmas)))] + "o"
            node.predicate = Predicate.surface(form, "f")
            node.tokens = (form,)
            node.pos_tag = "f"
        elif node.kind == "abstract":
            node.predicate = Predicate.abstract(
                abstracts[int(rng.integers(0, len(abstracts)))]
            )
            node.tokens = (_FUNCTION_WORDS[int(rng.integers(0, len(_FUNCTION_WORDS)))],)
            node.pos_tag = "x"
        elif node.kind == "stacked":
            node.predicate = Predicate.abstract(stacked_label)
            host = parent_of[node.pos_index]
            host.predicate = Predicate.abstract(stacked_label)
            node.tokens = ()
        elif node.kind == "quant":
            node.predicate = Predicate.abstract(
                "proper_q"
                if parent_of[node.pos_index].kind == "named"
                else str(rng.choice(_QUANTIFIERS))
            )
            node.tokens = ()
        elif node.kind == "named":
            name = _NAMES[int(rng.integers(0, len(_NAMES)))]
            node.predicate = Predicate.abstract("named")
            node.constant = name
            node.tokens = (name,)
            node.pos_tag = "nnp"
            node.ne_tag = "NE"
        elif node.kind == "number":
            value = int(rng.integers(21, 100))
            if value % 10 == 0:
                value += 1
            node.predicate = Predicate.abstract("card")
            node.constant = str(value)
            node.tokens = tuple(number_to_words(value))
            node.pos_tag = "c"
            node.ne_tag = "NUM"
    return sequence, parent_of


def _edge_labels(cfg: SynthConfig) -> list[str]:
    return [f"ARG{i + 1}" for i in range(cfg.edge_label_vocab_size)]


def _plan_edges(rng, cfg, sequence, parent_of) -> list[tuple[int, str, int, bool]]:
    """Tree edges as (head pos, label, dependent pos, reversed-storage)."""
    labels = _edge_labels(cfg)
    edges = []
    child_rank: dict[int, int] = {}
    for node in sequence:
        if node.pos_index not in parent_of:
            continue
        parent = parent_of[node.pos_index]
        rank = child_rank.get(parent.pos_index, 0)
        child_rank[parent.pos_index] = rank + 1
        if node.kind == "quant":
            # Quantifiers head their BV edge; stored child->parent.
            edges.append((node.pos_index, "BV", parent.pos_index, True))
            continue
        label = labels[rank % len(labels)]
        if node.kind not in ("stacked",) and rng.random() < 0.2:
            edges.append((node.pos_index, label, parent.pos_index, True))
        else:
            edges.append((parent.pos_index, label, node.pos_index, False))
    return edges


def _subtree_spans(sequence) -> dict[int, tuple[int, int]]:
    spans: dict[int, tuple[int, int]] = {}

    def walk(node) -> tuple[int, int]:
        lo = node.align
        hi = node.align + max(node.width - 1, 0)
        for child in node.left + node.right:
            c_lo, c_hi = walk(child)
            lo, hi = min(lo, c_lo), max(hi, c_hi)
        spans[node.pos_index] = (node.align, hi)
        return lo, hi

    roots = [n for n in sequence if n.pos_index not in {c.pos_index for p in sequence for c in p.left + p.right}]
    for r in roots:
        walk(r)
    return spans


def _pick_reentrancy(
    rng, sequence, tree_edges, want_crossing: bool, cfg: SynthConfig
) -> Optional[tuple[int, str, int]]:
    """Choose (head pos, label, dep pos) for an extra backward edge.

    The dependent must not sit strictly inside a tree edge whose far end
    falls before the head (that layout would force a tree arc through a
    pinned node).  Crossing edges must straddle at least one tree edge
    endpoint; non-crossing ones none.
    """
    n = len(sequence)
    intervals = [tuple(sorted((h, d))) for h, _l, d, _r in tree_edges]
    adjacent = {frozenset((h, d)) for h, _l, d, _r in tree_edges}
    labels = _edge_labels(cfg)

    def unsafe(x: int, y: int) -> bool:
        return any(lo < x < hi < y for lo, hi in intervals)

    def crossing(x: int, y: int) -> bool:
        return any((x < lo < y) != (x < hi < y) for lo, hi in intervals)

    allow_ties = not cfg.unique_reentrancy_targets
    candidates = []
    for x in range(n):
        if sequence[x].tie and not (allow_ties and sequence[x].kind == "stacked"):
            continue
        for y in range(x + 2, n):
            if sequence[y].tie:
                continue
            if frozenset((x, y)) in adjacent:
                continue
            if unsafe(x, y):
                continue
            if crossing(x, y) != want_crossing:
                continue
            candidates.append((x, y))
    if not candidates:
        return None
    x, y = candidates[int(rng.integers(0, len(candidates)))]
    used = {(h, l, d) for h, l, d, _r in tree_edges}
    for label in labels:
        if (y, label, x) not in used:
            return (y, label, x)
    return None


def _assemble(sequence, tree_edges, reentrancy, spans) -> SemanticGraph:
    nodes = []
    for node in sequence:
        end = max(spans[node.pos_index][1], node.align)
        nodes.append(
            Node(
                id=node.pos_index,
                predicate=node.predicate,
                alignment=Alignment(node.align, end),
                constant=node.constant,
            )
        )
    edges = []
    for head, label, dep, reversed_storage in tree_edges:
        edges.append(Edge(head, label, dep))
    if reentrancy is not None:
        head, label, dep = reentrancy
        edges.append(Edge(head, label, dep))
    root_pos = next(
        node.pos_index
        for node in sequence
        if node.pos_index not in {c.pos_index for p in sequence for c in p.left + p.right}
    )
    return make_graph(nodes, edges, root_pos)


def _sentence_for(sequence, cfg: SynthConfig, rng) -> Sentence:
    slots: dict[int, tuple[str, str, str]] = {}
    for node in sequence:
        for offset, token in enumerate(node.tokens):
            slots[node.align + offset] = (token, node.pos_tag, node.ne_tag)
    width = max(slots) + 1 if slots else 1
    tokens, pos_tags, ne_tags = [], [], []
    filler_idx = int(rng.integers(0, len(_FILLERS)))
    for i in range(width):
        if i in slots:
            tok, pos, ne = slots[i]
        else:
            tok, pos, ne = _FILLERS[(filler_idx + i) % len(_FILLERS)], "x", "O"
        tokens.append(tok)
        pos_tags.append(pos)
        ne_tags.append(ne)
    while len(tokens) < cfg.max_nodes:
        tokens.append(_FILLERS[(filler_idx + len(tokens)) % len(_FILLERS)])
        pos_tags.append("x")
        ne_tags.append("O")
    offsets = []
    cursor = 0
    for tok in tokens:
        offsets.append((cursor, cursor + len(tok)))
        cursor += len(tok) + 1
    return Sentence(tuple(tokens), tuple(pos_tags), tuple(ne_tags), tuple(offsets))


def _verify(entry: CorpusEntry, planned_tree_keys, planned_reentrancies) -> bool:
    graph = entry.graph
    if validate(graph, len(entry.sentence)):
        return False
    decomposition = spanning_tree(graph)
    tree_keys = {edge.key() for edge, _rev in decomposition.tree_edges}
    if tree_keys != planned_tree_keys:
        return False
    if {e.key() for e in decomposition.reentrancy_edges} != planned_reentrancies:
        return False
    for ordering in ("in_order", "monotone"):
        config = OracleConfig(ordering=ordering)
        try:
            actions = oracle(entry, config)
        except ValueError:
            return False
        replay = actions_to_graph(actions, len(entry.sentence), config)
        if replay.diagnostics or not graphs_equal(replay.graph, graph):
            return False
    # In-order cross-arcs must all be reentrancy edges.
    actions = oracle(entry, OracleConfig(ordering="in_order"))
    order = generation_order(graph, "in_order")
    for action, edge in replay_arc_edges(actions):
        if action.kind != CROSS_ARC:
            continue
        gold = Edge(order[edge.head], edge.label, order[edge.dependent], edge.directed)
        if gold.key() not in planned_reentrancies:
            return False
    return True


def _generate_entry(cfg: SynthConfig, index: int) -> CorpusEntry:
    for attempt in range(64):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, index, attempt])))
        plain = attempt >= 32  # fall back to an undecorated tree if unlucky
        root = _build_plan(rng, cfg)
        if plain:
            for node in root.walk():
                node.left = [c for c in node.left if not c.tie and c.kind != "divergent"]
                node.right = [c for c in node.right if not c.tie and c.kind != "divergent"]
        sequence, parent_of = _realize(rng, cfg, root)
        tree_edges = _plan_edges(rng, cfg, sequence, parent_of)
        spans = _subtree_spans(sequence)

        reentrancy = None
        if not plain:
            u = rng.random()
            if u < cfg.reentrancy_probability:
                want_crossing = u < cfg.nonplanar_probability
                reentrancy = _pick_reentrancy(rng, sequence, tree_edges, want_crossing, cfg)
                if reentrancy is None and want_crossing:
                    reentrancy = _pick_reentrancy(rng, sequence, tree_edges, False, cfg)

        graph = _assemble(sequence, tree_edges, reentrancy, spans)
        if cfg.unique_reentrancy_targets:
            seen = set()
            clash = False
            for node in graph.nodes:
                key = (node.predicate.rendered(False), node.alignment.start)
                if key in seen:
                    clash = True
                seen.add(key)
            if clash:
                continue
        sentence = _sentence_for(sequence, cfg, rng)
        entry = CorpusEntry(sentence, graph)
        planned_tree = {
            Edge(h, l, d).key() for h, l, d, _r in tree_edges
        }
        planned_reent = (
            {Edge(*reentrancy).key()} if reentrancy is not None else set()
        )
        if _verify(entry, planned_tree, planned_reent):
            return entry
    raise RuntimeError(f"could not generate a valid entry for index {index}")


def generate_synthetic_corpus(cfg: SynthConfig) -> list[CorpusEntry]:
    """Generate ``cfg.size`` verified entries, a pure function of the config."""
    cfg.check()
    return [_generate_entry(cfg, i) for i in range(cfg.size)]
