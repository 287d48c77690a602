"""Incremental transition-based parsing of sentences into aligned semantic graphs."""

from .graph import (
    Alignment,
    Edge,
    Node,
    Predicate,
    SemanticGraph,
    SpanningTreeDecomposition,
    graphs_equal,
    make_graph,
    spanning_tree,
    validate,
)
from .corpus import (
    CorpusEntry,
    CorpusFormatError,
    Sentence,
    char_spans_to_token_spans,
    read_jsonl,
    read_penman,
    sentence_from_tokens,
    write_jsonl,
)
from .synth import SynthConfig, generate_synthetic_corpus

__all__ = [
    "Alignment",
    "CorpusEntry",
    "CorpusFormatError",
    "Edge",
    "Node",
    "Predicate",
    "SemanticGraph",
    "Sentence",
    "SpanningTreeDecomposition",
    "SynthConfig",
    "char_spans_to_token_spans",
    "generate_synthetic_corpus",
    "graphs_equal",
    "make_graph",
    "read_jsonl",
    "read_penman",
    "sentence_from_tokens",
    "spanning_tree",
    "validate",
    "write_jsonl",
]
