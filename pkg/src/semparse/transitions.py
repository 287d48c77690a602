"""Arc-eager graph transition system and its oracle.

The parser state holds a stack of generated nodes and a buffer carrying a
single node.  Shift pushes the buffer node and generates the next node;
left/right/undirected arcs connect the buffer with the stack top; cross-arc
connects the buffer with a node deeper in the stack; reduce pops the stack
top and records its end-of-span alignment.  Once the root has been
designated and the stack is empty, a final reduce consumes the buffer node
and terminates the derivation.

The oracle turns a gold graph into a canonical action sequence under one of
two node orderings (in-order traversal of the spanning tree, or monotone by
alignment).  Reduce is delayed while the stack top's gold span still covers
the buffer node, except that arc-free nodes are popped early whenever that
exposes a stack node that still needs an arc to the buffer; cross-arc is
used only when a pending node blocks that chain.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .corpus import CorpusEntry
from .graph import (
    Alignment,
    Edge,
    FALLBACK_PREDICATE,
    Node,
    Predicate,
    SemanticGraph,
    make_graph,
    spanning_tree,
)

SHIFT = "sh"
REDUCE = "re"
LEFT_ARC = "la"
RIGHT_ARC = "ra"
UNDIRECTED_ARC = "ua"
CROSS_ARC = "xa"
ROOT = "root"

#: Cross-arc direction codes: arc pointing at the stack node, at the buffer
#: node, or undirected.
TO_STACK = "s"
TO_BUFFER = "b"
UNDIRECTED = "u"


@dataclass(frozen=True)
class Action:
    kind: str
    align: Optional[int] = None  # shift: start alignment of the new buffer node
    predicate: Optional[Predicate] = None
    constant: Optional[str] = None  # shift: constant payload of the new node
    label: Optional[str] = None  # arc actions
    end: Optional[int] = None  # reduce: end-of-span alignment
    depth: Optional[int] = None  # cross-arc: stack depth >= 1
    direction: Optional[str] = None  # cross-arc: TO_STACK | TO_BUFFER | UNDIRECTED


def shift(align: int, predicate: Predicate, constant: Optional[str] = None) -> Action:
    return Action(SHIFT, align=align, predicate=predicate, constant=constant)


def reduce_(end: Optional[int] = None) -> Action:
    return Action(REDUCE, end=end)


def left_arc(label: str) -> Action:
    return Action(LEFT_ARC, label=label)


def right_arc(label: str) -> Action:
    return Action(RIGHT_ARC, label=label)


def undirected_arc(label: str) -> Action:
    return Action(UNDIRECTED_ARC, label=label)


def cross_arc(depth: int, label: str, direction: str) -> Action:
    return Action(CROSS_ARC, depth=depth, label=label, direction=direction)


def root_action() -> Action:
    return Action(ROOT)


@dataclass(frozen=True)
class ParserState:
    """Immutable parser configuration; ``apply`` returns a new state."""

    stack: tuple[tuple[int, int], ...]  # (node id, start alignment), bottom first
    buffer: Optional[tuple[int, int, Predicate]]  # (node id, start alignment, predicate)
    arcs: frozenset[Edge]
    node_count: int
    root: Optional[int]
    end_alignments: tuple[tuple[int, int], ...]  # (node id, end alignment)

    def stack_entry(self, depth: int) -> tuple[int, int]:
        """Stack entry at the given depth (0 = top)."""
        return self.stack[len(self.stack) - 1 - depth]

    def is_terminal(self) -> bool:
        return self.buffer is None and not self.stack


def initial_state(first_shift: Action) -> ParserState:
    """Start a derivation: node 0 appears on the buffer, stack empty."""
    if first_shift.kind != SHIFT:
        raise ValueError(f"derivations start with a shift, got {first_shift.kind}")
    return ParserState(
        stack=(),
        buffer=(0, first_shift.align or 0, first_shift.predicate or FALLBACK_PREDICATE),
        arcs=frozenset(),
        node_count=1,
        root=None,
        end_alignments=(),
    )


def check_legal(state: ParserState, action: Action) -> Optional[str]:
    """None when the action is applicable, else the violated precondition."""
    kind = action.kind
    if kind == SHIFT:
        if state.buffer is None:
            return "shift needs a buffer node to push"
        return None
    if kind == ROOT:
        if state.buffer is None:
            return "root needs a buffer node"
        if state.root is not None:
            return "root already designated"
        return None
    if kind == REDUCE:
        if state.stack:
            return None
        if state.buffer is None:
            return "reduce on empty stack and empty buffer"
        if state.root is None:
            return "terminal reduce before the root is designated"
        return None
    if kind in (LEFT_ARC, RIGHT_ARC, UNDIRECTED_ARC):
        if not state.stack:
            return "arc needs a non-empty stack"
        if state.buffer is None:
            return "arc needs a buffer node"
        edge = _arc_edge(state, action, 0)
        if _duplicate(state, edge):
            return f"duplicate arc {edge.head}-{edge.label}->{edge.dependent}"
        return None
    if kind == CROSS_ARC:
        if action.depth is None or action.depth < 1:
            return "cross-arc depth must be >= 1"
        if len(state.stack) < action.depth + 1:
            return f"cross-arc depth {action.depth} exceeds stack"
        if state.buffer is None:
            return "cross-arc needs a buffer node"
        edge = _arc_edge(state, action, action.depth)
        if _duplicate(state, edge):
            return f"duplicate arc {edge.head}-{edge.label}->{edge.dependent}"
        return None
    return f"unknown action kind {kind!r}"


def _arc_edge(state: ParserState, action: Action, depth: int) -> Edge:
    buffer_id = state.buffer[0]
    stack_id = state.stack_entry(depth)[0]
    label = action.label or ""
    if action.kind == LEFT_ARC:
        return Edge(buffer_id, label, stack_id)
    if action.kind == RIGHT_ARC:
        return Edge(stack_id, label, buffer_id)
    if action.kind == UNDIRECTED_ARC:
        return Edge(stack_id, label, buffer_id, directed=False)
    direction = action.direction or TO_STACK
    if direction == TO_STACK:
        return Edge(buffer_id, label, stack_id)
    if direction == TO_BUFFER:
        return Edge(stack_id, label, buffer_id)
    return Edge(stack_id, label, buffer_id, directed=False)


def _duplicate(state: ParserState, edge: Edge) -> bool:
    key = edge.key()
    return any(existing.key() == key for existing in state.arcs)


def legal_actions(state: ParserState) -> set[str]:
    """Action kinds with at least one applicable instantiation."""
    kinds: set[str] = set()
    if state.buffer is not None:
        kinds.add(SHIFT)
        if state.root is None:
            kinds.add(ROOT)
        if state.stack:
            kinds.update((LEFT_ARC, RIGHT_ARC, UNDIRECTED_ARC))
        if len(state.stack) >= 2:
            kinds.add(CROSS_ARC)
    if state.stack or (state.buffer is not None and state.root is not None):
        kinds.add(REDUCE)
    return kinds


def apply(state: ParserState, action: Action) -> ParserState:
    """Apply an action, returning the successor state; illegal actions raise."""
    problem = check_legal(state, action)
    if problem is not None:
        raise ValueError(f"illegal {action.kind}: {problem}")
    if action.kind == SHIFT:
        new_node = (
            state.node_count,
            action.align or 0,
            action.predicate or FALLBACK_PREDICATE,
        )
        return replace(
            state,
            stack=state.stack + ((state.buffer[0], state.buffer[1]),),
            buffer=new_node,
            node_count=state.node_count + 1,
        )
    if action.kind == ROOT:
        return replace(state, root=state.buffer[0])
    if action.kind == REDUCE:
        if state.stack:
            node_id, start = state.stack[-1]
            end = action.end if action.end is not None else start
            return replace(
                state,
                stack=state.stack[:-1],
                end_alignments=state.end_alignments + ((node_id, max(end, start)),),
            )
        node_id, start, _pred = state.buffer
        end = action.end if action.end is not None else start
        return replace(
            state,
            buffer=None,
            end_alignments=state.end_alignments + ((node_id, max(end, start)),),
        )
    depth = action.depth if action.kind == CROSS_ARC else 0
    edge = _arc_edge(state, action, depth)
    return replace(state, arcs=state.arcs | {edge})


# --------------------------------------------------------------------------
# Textual action format
# --------------------------------------------------------------------------


def render_action(action: Action, first: bool = False) -> str:
    if action.kind == SHIFT:
        name = "init" if first else "sh"
        payload = f"{action.align},{action.predicate.rendered(False)}"
        if action.constant is not None:
            payload += f',"{action.constant}"'
        return f"{name}({payload})"
    if action.kind == REDUCE:
        return "re" if action.end is None else f"re({action.end})"
    if action.kind in (LEFT_ARC, RIGHT_ARC, UNDIRECTED_ARC):
        return f"{action.kind}({action.label})"
    if action.kind == CROSS_ARC:
        return f"xa({action.depth},{action.label},{action.direction})"
    return "root"


def render_actions(actions: Sequence[Action]) -> str:
    return " ".join(render_action(a, first=(i == 0)) for i, a in enumerate(actions))


_ACTION_RE = re.compile(r"^(init|sh|re|la|ra|ua|xa|root)(?:\((.*)\))?$")


def parse_action(text: str) -> Action:
    match = _ACTION_RE.match(text.strip())
    if not match:
        raise ValueError(f"cannot parse action {text!r}")
    name, payload = match.group(1), match.group(2)
    if name in ("init", "sh"):
        parts = _split_payload(payload or "")
        if len(parts) < 2:
            raise ValueError(f"shift needs alignment and predicate: {text!r}")
        constant = parts[2].strip('"') if len(parts) > 2 else None
        return shift(int(parts[0]), parse_predicate_rendering(parts[1]), constant)
    if name == "re":
        return reduce_(int(payload) if payload else None)
    if name in ("la", "ra", "ua"):
        if not payload:
            raise ValueError(f"arc action needs a label: {text!r}")
        return Action(name, label=payload)
    if name == "xa":
        parts = _split_payload(payload or "")
        if len(parts) != 3:
            raise ValueError(f"cross-arc needs depth,label,direction: {text!r}")
        return cross_arc(int(parts[0]), parts[1], parts[2])
    return root_action()


def _split_payload(payload: str) -> list[str]:
    parts, buf, quoted = [], [], False
    for ch in payload:
        if ch == '"':
            quoted = not quoted
            buf.append(ch)
        elif ch == "," and not quoted:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    if buf:
        parts.append("".join(buf))
    return parts


def parse_predicate_rendering(text: str) -> Predicate:
    """Rebuild a predicate from a rendered form (full or delexicalized).

    Constant-bearing markers (``_CARG``) are left on abstract labels; they
    are resolved against actual constant values by the linearizer and the
    relexicalizer, not here.  Delexicalized surface forms are recognized by
    their digit sense (``_v_1``); a two-part underscore form with a
    non-digit tail is a senseless full predicate (``_go_v``).
    """
    if text == "unknown":
        return Predicate(label="unknown", is_surface=True)
    if text.startswith("_"):
        parts = text[1:].split("_")
        if len(parts) == 1:
            return Predicate.surface(None, parts[0])
        if len(parts) == 2:
            if parts[1].isdigit() and len(parts[0]) <= 2:
                return Predicate.surface(None, parts[0], parts[1])
            return Predicate.surface(parts[0], parts[1])
        return Predicate.surface("_".join(parts[:-2]), parts[-2], parts[-1])
    return Predicate.abstract(text)


def parse_actions(text: str) -> list[Action]:
    return [parse_action(tok) for tok in text.split()]


# --------------------------------------------------------------------------
# Node orderings
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleConfig:
    ordering: str = "in_order"  # in_order | monotone
    emit_end_spans: bool = True
    allow_undirected: bool = True


def in_order_nodes(graph: SemanticGraph) -> list[int]:
    """In-order traversal of the spanning tree, children ordered by alignment.

    Children whose (alignment, id) key precedes the parent's are visited
    before it, the rest after; ties inside the key are impossible since the
    id participates.
    """
    decomposition = spanning_tree(graph)
    children = decomposition.children()

    def key(node_id: int) -> tuple[int, int]:
        return (graph.node(node_id).alignment.start, node_id)

    order: list[int] = []

    def walk(u: int) -> None:
        kids = sorted((key(child), child) for _e, _r, child in children.get(u, []))
        before = [c for k, c in kids if k < key(u)]
        after = [c for k, c in kids if k >= key(u)]
        for c in before:
            walk(c)
        order.append(u)
        for c in after:
            walk(c)

    walk(graph.root)
    return order


def monotone_nodes(graph: SemanticGraph) -> list[int]:
    """Non-decreasing alignment order, in-order position breaking ties."""
    base = in_order_nodes(graph)
    return sorted(base, key=lambda n: (graph.node(n).alignment.start, base.index(n)))


def generation_order(graph: SemanticGraph, ordering: str) -> list[int]:
    if ordering == "in_order":
        return in_order_nodes(graph)
    if ordering == "monotone":
        return monotone_nodes(graph)
    raise ValueError(f"unknown ordering {ordering!r}")


# --------------------------------------------------------------------------
# Oracle
# --------------------------------------------------------------------------


class OracleError(ValueError):
    pass


def oracle(entry: CorpusEntry, config: OracleConfig = OracleConfig()) -> list[Action]:
    """Derive the canonical action sequence that rebuilds the gold graph.

    At each buffer tenure the oracle adds every gold arc between the buffer
    node and the stack: top arcs directly, then arcs to deeper nodes via
    cross-arc once no further reduce can expose them.  The stack top is
    reduced when it has no pending arcs and either its gold end alignment
    lies before the buffer node's start, or popping it is needed to expose a
    deeper node that still wants an arc to the buffer.  The root action is
    emitted at the end of the gold root's buffer tenure.
    """
    graph = entry.graph
    order = generation_order(graph, config.ordering)
    position = {node_id: i for i, node_id in enumerate(order)}

    incident: dict[int, list[Edge]] = {node.id: [] for node in graph.nodes}
    for edge in graph.edges:
        incident[edge.head].append(edge)
        incident[edge.dependent].append(edge)
        if not edge.directed and not config.allow_undirected:
            raise OracleError("undirected edge in a configuration without undirected arcs")

    remaining = {node.id: len(incident[node.id]) for node in graph.nodes}
    added: set[int] = set()  # indices into graph.edges
    edge_index = {id(edge): i for i, edge in enumerate(graph.edges)}

    actions: list[Action] = []
    # Replay-side state is tracked implicitly: the stack holds gold ids.
    stack: list[int] = []

    def gold_end(node_id: int) -> int:
        return graph.node(node_id).alignment.end

    def gold_start(node_id: int) -> int:
        return graph.node(node_id).alignment.start

    def unadded_arcs_between(a: int, b: int) -> list[Edge]:
        found = []
        for edge in incident[a]:
            if edge_index[id(edge)] in added:
                continue
            if {edge.head, edge.dependent} == {a, b}:
                found.append(edge)
        return found

    def emit_arc(edge: Edge, buffer_id: int, depth: int) -> None:
        label = edge.label
        if not edge.directed:
            action = undirected_arc(label) if depth == 0 else cross_arc(depth, label, UNDIRECTED)
        elif edge.head == buffer_id:
            action = left_arc(label) if depth == 0 else cross_arc(depth, label, TO_STACK)
        else:
            action = right_arc(label) if depth == 0 else cross_arc(depth, label, TO_BUFFER)
        actions.append(action)
        added.add(edge_index[id(edge)])
        remaining[edge.head] -= 1
        remaining[edge.dependent] -= 1

    def emit_reduce(node_id: int) -> None:
        actions.append(reduce_(gold_end(node_id) if config.emit_end_spans else None))

    def wants_arc_below_top(buffer_id: int) -> Optional[int]:
        """Shallowest stack index below the top that still needs a buffer arc."""
        for depth in range(1, len(stack)):
            node_id = stack[len(stack) - 1 - depth]
            if unadded_arcs_between(node_id, buffer_id):
                return depth
        return None

    for step, buffer_id in enumerate(order):
        if step == 0:
            node = graph.node(buffer_id)
            actions.append(
                shift(gold_start(buffer_id), node.predicate, node.constant)
            )
        # Arc/reduce loop for this buffer tenure.
        while stack:
            top = stack[-1]
            for edge in sorted(
                unadded_arcs_between(top, buffer_id),
                key=lambda e: (e.head != buffer_id, e.label),
            ):
                emit_arc(edge, buffer_id, 0)
            if remaining[top] > 0:
                break
            if gold_end(top) < gold_start(buffer_id):
                emit_reduce(top)
                stack.pop()
                continue
            needer = wants_arc_below_top(buffer_id)
            if needer is not None and all(
                remaining[stack[len(stack) - 1 - d]] == 0 for d in range(needer)
            ):
                emit_reduce(top)
                stack.pop()
                continue
            break
        # Arcs to nodes that cannot be exposed: deepest first.
        deep = [
            (depth, stack[len(stack) - 1 - depth])
            for depth in range(1, len(stack))
        ]
        for depth, node_id in sorted(deep, reverse=True):
            for edge in sorted(
                unadded_arcs_between(node_id, buffer_id),
                key=lambda e: (e.head != buffer_id, e.label),
            ):
                emit_arc(edge, buffer_id, depth)
        if buffer_id == graph.root:
            actions.append(root_action())
        if step + 1 < len(order):
            next_id = order[step + 1]
            node = graph.node(next_id)
            actions.append(shift(gold_start(next_id), node.predicate, node.constant))
            stack.append(buffer_id)
        else:
            while stack:
                emit_reduce(stack.pop())
            emit_reduce(buffer_id)

    leftover = [graph.edges[i] for i in range(len(graph.edges)) if i not in added]
    if leftover:
        raise OracleError(f"oracle failed to emit arcs: {leftover}")
    return actions


def count_nonplanar(entry: CorpusEntry, ordering: str) -> int:
    """Number of gold arcs that require a cross-arc under the given ordering."""
    config = OracleConfig(ordering=ordering)
    return sum(1 for action in oracle(entry, config) if action.kind == CROSS_ARC)


def replay_arc_edges(actions: Sequence[Action]) -> list[tuple[Action, Edge]]:
    """Pair every arc action with the edge it creates, in replay node ids.

    Replay id ``i`` is the i-th shifted node; callers relate these back to
    gold ids through the generation order.  Assumes a legal sequence.
    """
    state: Optional[ParserState] = None
    pairs: list[tuple[Action, Edge]] = []
    for action in actions:
        if state is None:
            state = initial_state(action)
            continue
        if action.kind in (LEFT_ARC, RIGHT_ARC, UNDIRECTED_ARC, CROSS_ARC):
            depth = action.depth if action.kind == CROSS_ARC else 0
            pairs.append((action, _arc_edge(state, action, depth)))
        state = apply(state, action)
    return pairs


# --------------------------------------------------------------------------
# Robust replay
# --------------------------------------------------------------------------


@dataclass
class Replay:
    """Outcome of replaying an action sequence with error recovery."""

    graph: SemanticGraph
    diagnostics: list[str]
    state: ParserState


def actions_to_graph(
    actions: Sequence[Action],
    sentence_len: int,
    config: OracleConfig = OracleConfig(),
) -> Replay:
    """Rebuild a graph from actions, recovering from any illegal input.

    Illegal actions are skipped with a diagnostic; out-of-range alignments
    are clamped; an unset root defaults to the unique in-degree-zero node,
    else node 0; components disconnected from the root are attached to it
    with a fallback ``rel`` edge so the result always validates.
    """
    diagnostics: list[str] = []
    max_align = max(sentence_len - 1, 0)

    def clamp(value: Optional[int], what: str, index: int) -> int:
        v = 0 if value is None else value
        if v < 0 or v > max_align:
            diagnostics.append(f"action {index}: clamped {what} {v}")
            return min(max(v, 0), max_align)
        return v

    state: Optional[ParserState] = None
    preds: list[tuple[Predicate, Optional[str]]] = []
    for index, action in enumerate(actions):
        if state is None:
            if action.kind != SHIFT:
                diagnostics.append(f"action {index}: dropped {action.kind} before first shift")
                continue
            first = replace(action, align=clamp(action.align, "alignment", index))
            state = initial_state(first)
            preds.append((first.predicate or FALLBACK_PREDICATE, first.constant))
            continue
        if action.kind == SHIFT:
            action = replace(action, align=clamp(action.align, "alignment", index))
        elif action.kind == REDUCE and action.end is not None:
            action = replace(action, end=clamp(action.end, "end alignment", index))
        problem = check_legal(state, action)
        if problem is not None:
            diagnostics.append(f"action {index}: skipped {action.kind} ({problem})")
            continue
        state = apply(state, action)
        if action.kind == SHIFT:
            preds.append((action.predicate or FALLBACK_PREDICATE, action.constant))

    if state is None:
        diagnostics.append("empty action sequence: emitting fallback node")
        graph = make_graph(
            [Node(0, FALLBACK_PREDICATE, Alignment(0, 0))], [], 0
        )
        terminal = ParserState((), None, frozenset(), 1, 0, ((0, 0),))
        return Replay(graph, diagnostics, terminal)

    starts: dict[int, int] = {}
    probe = state
    if probe.buffer is not None:
        starts[probe.buffer[0]] = probe.buffer[1]
    for node_id, start in probe.stack:
        starts[node_id] = start
    ends = dict(state.end_alignments)

    # Recover start alignments of already-reduced nodes from the replay: a
    # second pass records shifts in order.
    replay_starts: list[int] = []
    for action in actions:
        if action.kind == SHIFT and len(replay_starts) < state.node_count:
            replay_starts.append(min(max(action.align or 0, 0), max_align))

    nodes = []
    for node_id in range(state.node_count):
        start = replay_starts[node_id] if node_id < len(replay_starts) else 0
        end = max(ends.get(node_id, start), start)
        pred, constant = preds[node_id]
        nodes.append(Node(node_id, pred, Alignment(start, min(end, max_align)), constant))

    edges = sorted(
        state.arcs, key=lambda e: (e.head, e.label, e.dependent, e.directed)
    )

    root = state.root
    if root is None:
        in_degree = {n.id: 0 for n in nodes}
        for edge in edges:
            in_degree[edge.dependent] += 1
        candidates = [n_id for n_id, deg in in_degree.items() if deg == 0]
        root = candidates[0] if len(candidates) == 1 else 0
        diagnostics.append(f"no root action: defaulting to node {root}")

    graph = make_graph(nodes, edges, root)
    component = _component_ids(graph)
    if len(component[root]) != len(nodes):
        extra = []
        attached = set(component[root])
        for node in nodes:
            if node.id in attached:
                continue
            extra.append(Edge(root, "rel", node.id))
            attached |= component[node.id]
            diagnostics.append(f"attached disconnected node {node.id} to root")
        graph = make_graph(nodes, list(edges) + extra, root)
    return Replay(graph, diagnostics, state)


def _component_ids(graph: SemanticGraph) -> dict[int, set[int]]:
    parent = {node.id: node.id for node in graph.nodes}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for edge in graph.edges:
        ra, rb = find(edge.head), find(edge.dependent)
        if ra != rb:
            parent[ra] = rb
    groups: dict[int, set[int]] = {}
    for node in graph.nodes:
        groups.setdefault(find(node.id), set()).add(node.id)
    return {node.id: groups[find(node.id)] for node in graph.nodes}
