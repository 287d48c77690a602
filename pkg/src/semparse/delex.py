"""Delexicalization: factoring lemmas and constants out of predicates.

Surface predicates are split into a delexicalized sense label (predicted by
the parser) and a lemma recovered from the aligned token through a lemma
dictionary with a deterministic suffix-rule fallback.  Constants are
dropped from the graph, flagged with a ``_CARG`` label suffix, and restored
by normalizing the aligned token span (names join with underscores, number
words compose into digit strings).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

from .corpus import CorpusEntry, Sentence
from .graph import Alignment, Node, Predicate, SemanticGraph, make_graph

_CARG_SUFFIX = "_CARG"

_VOWELS = set("aeiou")

_UNITS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4,
    "five": 5, "six": 6, "seven": 7, "eight": 8, "nine": 9,
}
_TEENS = {
    "ten": 10, "eleven": 11, "twelve": 12, "thirteen": 13, "fourteen": 14,
    "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18, "nineteen": 19,
}
_TENS = {
    "twenty": 20, "thirty": 30, "forty": 40, "fifty": 50,
    "sixty": 60, "seventy": 70, "eighty": 80, "ninety": 90,
}
_SCALES = {"hundred": 100, "thousand": 1000, "million": 1000000}


class LemmaDictionary:
    """(word form, POS) -> lemma lookup with a word-only fallback map.

    Loaded from UTF-8 lines ``word<TAB>pos<TAB>lemma``; a ``*`` POS acts as
    a wildcard.  First entry wins on duplicates, so lookups are stable.
    """

    def __init__(self) -> None:
        self.entries: dict[tuple[str, str], str] = {}
        self.fallback: dict[str, str] = {}

    def add(self, word: str, pos: str, lemma: str) -> None:
        if pos == "*":
            self.fallback.setdefault(word, lemma)
            return
        self.entries.setdefault((word, pos), lemma)
        self.fallback.setdefault(word, lemma)

    def lookup(self, word: str, pos: str) -> Optional[str]:
        hit = self.entries.get((word, pos))
        if hit is not None:
            return hit
        return self.fallback.get(word)

    @staticmethod
    def load(path) -> "LemmaDictionary":
        dictionary = LemmaDictionary()
        with open(path, "r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{line_no}: expected word<TAB>pos<TAB>lemma")
                dictionary.add(*parts)
        return dictionary

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for (word, pos), lemma in sorted(self.entries.items()):
                handle.write(f"{word}\t{pos}\t{lemma}\n")
            covered = {w for (w, _p) in self.entries}
            for word, lemma in sorted(self.fallback.items()):
                if word not in covered:
                    handle.write(f"{word}\t*\t{lemma}\n")

    def items(self) -> list[tuple[str, str, str]]:
        out = [(w, p, l) for (w, p), l in sorted(self.entries.items())]
        covered = {w for (w, _p) in self.entries}
        out.extend((w, "*", l) for w, l in sorted(self.fallback.items()) if w not in covered)
        return out


def build_lemma_dictionary(entries: Iterable[CorpusEntry]) -> LemmaDictionary:
    """Extract (aligned token, POS) -> lemma pairs from gold surface nodes."""
    dictionary = LemmaDictionary()
    for entry in entries:
        for node in entry.graph.nodes:
            pred = node.predicate
            if pred.is_surface and pred.lemma is not None and pred.pos is not None:
                token = entry.sentence.tokens[node.alignment.start]
                dictionary.add(token, pred.pos, pred.lemma)
    return dictionary


def rule_lemma(token: str) -> str:
    """Deterministic suffix-stripping fallback lemmatizer.

    Lowercases, then strips one of {ing, ed, es, ly, s} with undoubling of a
    doubled final consonant and a trailing-e repair after ing/ed; returns
    the word unchanged when no rule applies.
    """
    word = token.lower()
    for suffix in ("ing", "ed", "es", "ly", "s"):
        if not word.endswith(suffix):
            continue
        stem = word[: -len(suffix)]
        if len(stem) < 2:
            continue
        if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS:
            return stem[:-1]
        if suffix in ("ing", "ed") and _cvc(stem):
            return stem + "e"
        return stem
    return word


def _cvc(stem: str) -> bool:
    if len(stem) < 3:
        return False
    a, b, c = stem[-3], stem[-2], stem[-1]
    return a not in _VOWELS and b in _VOWELS and c not in _VOWELS


def predict_lemma(token: str, pos: str, dictionary: LemmaDictionary) -> str:
    hit = dictionary.lookup(token, pos)
    if hit is not None:
        return hit
    return rule_lemma(token)


def number_to_words(value: int) -> list[str]:
    """English number words for 0..999999 (test oracle and data generator)."""
    if value < 0:
        raise ValueError("negative numbers unsupported")
    if value == 0:
        return ["zero"]
    units = {v: k for k, v in _UNITS.items()}
    teens = {v: k for k, v in _TEENS.items()}
    tens = {v: k for k, v in _TENS.items()}
    words: list[str] = []

    def under_hundred(n: int) -> None:
        if n == 0:
            return
        if n < 10:
            words.append(units[n])
        elif n < 20:
            words.append(teens[n])
        else:
            words.append(tens[n - n % 10])
            if n % 10:
                words.append(units[n % 10])

    def under_thousand(n: int) -> None:
        if n >= 100:
            words.append(units[n // 100])
            words.append("hundred")
        under_hundred(n % 100)

    if value >= 1000000:
        under_thousand(value // 1000000)
        words.append("million")
        value %= 1000000
    if value >= 1000:
        under_thousand(value // 1000)
        words.append("thousand")
        value %= 1000
    under_thousand(value)
    return words


def words_to_number(tokens: Sequence[str]) -> Optional[int]:
    """Parse composed number words; None when any token is not numeric."""
    total = 0
    current = 0
    seen = False
    for raw in tokens:
        word = raw.lower()
        if word in _UNITS:
            current += _UNITS[word]
        elif word in _TEENS:
            current += _TEENS[word]
        elif word in _TENS:
            current += _TENS[word]
        elif word == "hundred":
            current = max(current, 1) * 100
        elif word in ("thousand", "million"):
            total += max(current, 1) * _SCALES[word]
            current = 0
        elif word.isdigit():
            current += int(word)
        else:
            return None
        seen = True
    if not seen:
        return None
    return total + current


def normalize_constant(tokens: Sequence[str], ne_tag: str) -> str:
    """Constant value for a token span: digit strings for spans made of
    number words, underscore-joined tokens (quotes stripped) otherwise.

    The NE tag is accepted for interface stability but the token content
    decides; tags in real corpora are too noisy to gate digit mapping on.
    """
    if not tokens:
        raise ValueError("constant span has no tokens")
    lowered = [t.lower() for t in tokens]
    if all(
        w in _UNITS or w in _TEENS or w in _TENS or w in _SCALES or w.isdigit()
        for w in lowered
    ):
        value = words_to_number(tokens)
        if value is not None:
            return str(value)
    return "_".join(t.strip('"') for t in tokens)


@dataclass(frozen=True)
class DelexGraph:
    """A graph with lemmas and constants factored out, plus recovery flags."""

    graph: SemanticGraph
    needs_lemma: tuple[bool, ...]
    needs_constant: tuple[bool, ...]


def delexicalize(graph: SemanticGraph) -> DelexGraph:
    """Strip lemmas from surface predicates and values from constant bearers."""
    nodes = []
    needs_lemma = []
    needs_constant = []
    for node in graph.nodes:
        pred = node.predicate
        constant = node.constant
        lemma_flag = pred.is_surface
        constant_flag = constant is not None
        if pred.is_surface:
            if pred.sense is None:
                pred = Predicate(label="unknown", is_surface=True, pos=pred.pos)
            else:
                pred = Predicate.surface(None, pred.pos or "u", pred.sense)
        if constant_flag:
            pred = replace(pred, label=pred.label + _CARG_SUFFIX)
            constant = None
        nodes.append(replace(node, predicate=pred, constant=constant))
        needs_lemma.append(lemma_flag)
        needs_constant.append(constant_flag)
    delexed = make_graph(nodes, graph.edges, graph.root)
    return DelexGraph(delexed, tuple(needs_lemma), tuple(needs_constant))


def _carg_flagged(pred: Predicate) -> bool:
    return pred.label.endswith(_CARG_SUFFIX)


def needs_constant_flags(graph: SemanticGraph) -> tuple[bool, ...]:
    return tuple(_carg_flagged(node.predicate) for node in graph.nodes)


def relexicalize(
    delexed: DelexGraph | SemanticGraph,
    sentence: Sentence,
    dictionary: LemmaDictionary,
) -> SemanticGraph:
    """Recover full predicates and constants through the alignments.

    Surface nodes take their lemma from the token at the alignment start;
    the special ``unknown`` label reconstructs the predicate from the token
    form plus the sentence POS tag; ``_CARG``-flagged nodes get a constant
    normalized over their aligned span.
    """
    if isinstance(delexed, DelexGraph):
        graph = delexed.graph
        lemma_flags = delexed.needs_lemma
        constant_flags = delexed.needs_constant
    else:
        graph = delexed
        lemma_flags = tuple(n.predicate.is_surface for n in graph.nodes)
        constant_flags = needs_constant_flags(graph)

    nodes = []
    for node in graph.nodes:
        pred = node.predicate
        constant = node.constant
        label = pred.label
        flagged = _carg_flagged(pred)
        if flagged:
            pred = replace(pred, label=label[: -len(_CARG_SUFFIX)])
        start = min(node.alignment.start, len(sentence) - 1)
        end = min(node.alignment.end, len(sentence) - 1)
        token = sentence.tokens[start]
        if lemma_flags[node.id] and pred.is_surface:
            if pred.label == "unknown" or (pred.sense is None and pred.lemma is None and pred.pos is None):
                pos = sentence.pos_tags[start]
                pred = Predicate.surface(token, pos)
            elif pred.lemma is None:
                lemma = predict_lemma(token, pred.pos or "", dictionary)
                pred = Predicate.surface(lemma, pred.pos or "u", pred.sense)
        if (flagged or constant_flags[node.id]) and constant is None:
            span_tokens = sentence.tokens[start : end + 1]
            constant = normalize_constant(list(span_tokens), sentence.ne_tags[start])
        nodes.append(replace(node, predicate=pred, constant=constant))
    return make_graph(nodes, graph.edges, graph.root)
