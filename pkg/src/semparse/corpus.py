"""Corpus formats: JSONL interchange, PENMAN-style ingestion, span conversion.

JSONL is the primary, lossless format (one sentence+graph per line with
explicit alignments).  The PENMAN-style reader ingests AMR-like bracketed
notation with mandatory per-node ``:alignment`` metadata.  Alignments are
token-level everywhere inside the toolkit; character spans exist only at
this boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .graph import (
    Alignment,
    Edge,
    Node,
    Predicate,
    SemanticGraph,
    make_graph,
    validate,
)


class CorpusFormatError(ValueError):
    """Raised for malformed corpus files; message carries line/entry context."""


@dataclass(frozen=True)
class Sentence:
    """Tokenized input: words with POS tags, NE tags and character offsets.

    ``char_offsets`` are half-open ``[start, end)`` positions into the raw
    sentence string, strictly increasing and non-overlapping.
    """

    tokens: tuple[str, ...]
    pos_tags: tuple[str, ...]
    ne_tags: tuple[str, ...]
    char_offsets: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def check(self) -> None:
        n = len(self.tokens)
        if n < 1:
            raise CorpusFormatError("sentence has no tokens")
        if not (len(self.pos_tags) == len(self.ne_tags) == len(self.char_offsets) == n):
            raise CorpusFormatError("sentence field lengths differ")
        prev_end = -1
        for start, end in self.char_offsets:
            if start < 0 or end <= start:
                raise CorpusFormatError(f"bad char offset ({start},{end})")
            if start < prev_end:
                raise CorpusFormatError("overlapping char offsets")
            prev_end = end


def sentence_from_tokens(
    tokens: Sequence[str],
    pos_tags: Optional[Sequence[str]] = None,
    ne_tags: Optional[Sequence[str]] = None,
) -> Sentence:
    """Build a Sentence with space-joined offsets and fallback X/O tags."""
    tokens = tuple(tokens)
    if pos_tags is None:
        pos_tags = ("X",) * len(tokens)
    if ne_tags is None:
        ne_tags = ("O",) * len(tokens)
    offsets = []
    pos = 0
    for tok in tokens:
        offsets.append((pos, pos + len(tok)))
        pos += len(tok) + 1
    s = Sentence(tokens, tuple(pos_tags), tuple(ne_tags), tuple(offsets))
    s.check()
    return s


@dataclass(frozen=True)
class CorpusEntry:
    sentence: Sentence
    graph: SemanticGraph


def token_span_to_char_span(alignment: Alignment, sentence: Sentence) -> tuple[int, int]:
    return (
        sentence.char_offsets[alignment.start][0],
        sentence.char_offsets[alignment.end][1],
    )


def char_spans_to_token_spans(
    char_spans: Sequence[tuple[int, int]], sentence: Sentence
) -> list[Alignment]:
    """Convert half-open character spans to inclusive token spans.

    A span covers exactly the tokens it overlaps.  A span that touches no
    token is retried after widening by one character on each side, so
    off-by-one boundaries snap to the adjacent token; a span that still
    overlaps nothing is an error.
    """
    out = []
    for start, end in char_spans:
        covered = _overlapping_tokens(start, end, sentence)
        if not covered:
            covered = _overlapping_tokens(start - 1, end + 1, sentence)
        if not covered:
            raise CorpusFormatError(f"char span ({start},{end}) overlaps no token")
        out.append(Alignment(min(covered), max(covered)))
    return out


def _overlapping_tokens(start: int, end: int, sentence: Sentence) -> list[int]:
    hits = []
    for i, (t_start, t_end) in enumerate(sentence.char_offsets):
        if max(start, t_start) < min(end, t_end):
            hits.append(i)
    return hits


# --------------------------------------------------------------------------
# JSONL
# --------------------------------------------------------------------------


def entry_to_dict(entry: CorpusEntry) -> dict:
    sent = entry.sentence
    nodes = []
    for node in entry.graph.nodes:
        rec: dict = {
            "id": node.id,
            "label": node.predicate.label,
            "is_surface": node.predicate.is_surface,
            "start": node.alignment.start,
            "end": node.alignment.end,
        }
        if node.predicate.lemma is not None:
            rec["lemma"] = node.predicate.lemma
        if node.predicate.pos is not None:
            rec["pos"] = node.predicate.pos
        if node.predicate.sense is not None:
            rec["sense"] = node.predicate.sense
        if node.constant is not None:
            rec["constant"] = node.constant
        nodes.append(rec)
    edges = [
        {"head": e.head, "label": e.label, "dep": e.dependent, "directed": e.directed}
        for e in entry.graph.edges
    ]
    return {
        "tokens": list(sent.tokens),
        "pos": list(sent.pos_tags),
        "ne": list(sent.ne_tags),
        "offsets": [list(o) for o in sent.char_offsets],
        "nodes": nodes,
        "edges": edges,
        "root": entry.graph.root,
    }


def entry_from_dict(record: dict) -> CorpusEntry:
    try:
        sentence = Sentence(
            tuple(record["tokens"]),
            tuple(record["pos"]),
            tuple(record["ne"]),
            tuple((int(a), int(b)) for a, b in record["offsets"]),
        )
        sentence.check()
        nodes = []
        for rec in record["nodes"]:
            pred = Predicate(
                label=rec["label"],
                is_surface=bool(rec["is_surface"]),
                lemma=rec.get("lemma"),
                pos=rec.get("pos"),
                sense=rec.get("sense"),
            )
            nodes.append(
                Node(
                    id=int(rec["id"]),
                    predicate=pred,
                    alignment=Alignment(int(rec["start"]), int(rec["end"])),
                    constant=rec.get("constant"),
                )
            )
        nodes.sort(key=lambda n: n.id)
        edges = [
            Edge(int(rec["head"]), rec["label"], int(rec["dep"]), bool(rec.get("directed", True)))
            for rec in record["edges"]
        ]
        graph = make_graph(nodes, edges, int(record["root"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusFormatError(f"malformed entry: {exc}") from exc
    problems = validate(graph, len(sentence))
    if problems:
        raise CorpusFormatError("invalid graph: " + "; ".join(problems))
    return CorpusEntry(sentence, graph)


def write_jsonl(entries: Iterable[CorpusEntry], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for entry in entries:
            handle.write(json.dumps(entry_to_dict(entry), sort_keys=True))
            handle.write("\n")


def read_jsonl(path) -> list[CorpusEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {line_no}: not valid JSON ({exc})") from exc
            try:
                entries.append(entry_from_dict(record))
            except CorpusFormatError as exc:
                raise CorpusFormatError(f"line {line_no} (entry {line_no - 1}): {exc}") from exc
    return entries


# --------------------------------------------------------------------------
# PENMAN-style reader
# --------------------------------------------------------------------------


class PenmanParseError(CorpusFormatError):
    pass


def _tokenize_penman(text: str) -> list[str]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == '"':
            j = text.find('"', i + 1)
            if j < 0:
                raise PenmanParseError("unterminated string constant")
            tokens.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "()":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def read_penman(text: str) -> SemanticGraph:
    """Parse a PENMAN-style graph: nested ``(var / concept :REL target)``.

    The first variable is the root; repeated variables create reentrancies;
    a quoted target sets the enclosing node's constant; ``-of`` relation
    suffixes invert the stored edge direction.  ``:alignment s-e`` token
    spans are mandatory on every node.
    """
    tokens = _tokenize_penman(text)
    if not tokens:
        raise PenmanParseError("empty input")

    depth = 0
    for tok in tokens:
        if tok == "(":
            depth += 1
        elif tok == ")":
            depth -= 1
            if depth < 0:
                raise PenmanParseError("unbalanced parentheses: too many ')'")
    if depth != 0:
        raise PenmanParseError("unbalanced parentheses: missing ')'")

    var_ids: dict[str, int] = {}
    concepts: dict[int, str] = {}
    alignments: dict[int, Alignment] = {}
    constants: dict[int, str] = {}
    edges: list[tuple[int, str, str]] = []  # (head id, label, target var)
    forward_refs: set[str] = set()

    pos = 0

    def expect(tok: str) -> None:
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != tok:
            raise PenmanParseError(f"expected '{tok}' at token {pos}")
        pos += 1

    def parse_node() -> str:
        nonlocal pos
        expect("(")
        if pos >= len(tokens) or tokens[pos] in "()":
            raise PenmanParseError("expected variable after '('")
        var = tokens[pos]
        pos += 1
        if var in var_ids:
            raise PenmanParseError(f"variable '{var}' defined twice")
        node_id = len(var_ids)
        var_ids[var] = node_id
        forward_refs.discard(var)
        expect("/")
        if pos >= len(tokens) or tokens[pos] in "()":
            raise PenmanParseError(f"expected concept for variable '{var}'")
        concepts[node_id] = tokens[pos]
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            rel = tokens[pos]
            if not rel.startswith(":"):
                raise PenmanParseError(f"expected relation, got '{rel}'")
            pos += 1
            label = rel[1:]
            if label == "alignment":
                if pos >= len(tokens) or "-" not in tokens[pos]:
                    raise PenmanParseError(f"bad alignment for '{var}'")
                start_s, end_s = tokens[pos].split("-", 1)
                try:
                    alignments[node_id] = Alignment(int(start_s), int(end_s))
                except ValueError as exc:
                    raise PenmanParseError(f"bad alignment for '{var}'") from exc
                pos += 1
                continue
            if pos >= len(tokens):
                raise PenmanParseError(f"relation ':{label}' has no target")
            target = tokens[pos]
            if target == "(":
                child = parse_node()
                edges.append((node_id, label, child))
            elif target.startswith('"'):
                constants[node_id] = target.strip('"')
                pos += 1
            else:
                if target not in var_ids:
                    forward_refs.add(target)
                edges.append((node_id, label, target))
                pos += 1
        expect(")")
        return var

    root_var = parse_node()
    if pos != len(tokens):
        raise PenmanParseError("trailing content after graph")
    if forward_refs - set(var_ids):
        missing = sorted(forward_refs - set(var_ids))
        raise PenmanParseError(f"variables used but never defined: {missing}")
    missing_align = [v for v, i in var_ids.items() if i not in alignments]
    if missing_align:
        raise PenmanParseError(f"missing :alignment metadata for: {sorted(missing_align)}")

    nodes = []
    for var, node_id in var_ids.items():
        concept = concepts[node_id]
        nodes.append(
            Node(
                id=node_id,
                predicate=Predicate.abstract(concept),
                alignment=alignments[node_id],
                constant=constants.get(node_id),
            )
        )
    nodes.sort(key=lambda n: n.id)

    graph_edges = []
    for head_id, label, target_var in edges:
        dep_id = var_ids[target_var]
        if label.endswith("-of") and len(label) > 3:
            graph_edges.append(Edge(dep_id, label[:-3], head_id))
        else:
            graph_edges.append(Edge(head_id, label, dep_id))

    return make_graph(nodes, graph_edges, var_ids[root_var])
