"""Hypernym candidate discovery and ranking.

Candidates for an entity come from three sources: nouns/noun phrases
co-occurring with the entity in pre-tagged snippets, encyclopedia-style
category tags, and the morphological head word of the entity.  Merged
candidates are featurized and ranked by the three-model ensemble; weakly
scored candidates are dropped.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import embedding as emb
from .disambiguation import PATH_SEPARATOR
from .errors import ParseError
from .rankers import RankerEnsemble

NOUN = "NOUN"
OTHER = "OTHER"

SOURCE_SNIPPET = "SNIPPET"
SOURCE_TAG = "TAG"
SOURCE_HEAD = "HEAD"

FEATURE_NAMES = (
    "log1p_cooccurrence",
    "is_tag",
    "is_head",
    "embedding_cosine",
    "log1p_corpus_freq",
    "length_ratio",
)


@dataclass(frozen=True)
class TaggedSnippet:
    """A pre-segmented, coarsely POS-tagged snippet retrieved for an entity."""

    entity: str
    tokens: tuple[tuple[str, str], ...]  # (surface, NOUN|OTHER)


@dataclass
class Candidate:
    term: str
    sources: set[str] = field(default_factory=set)
    cooccurrence: int = 0
    features: np.ndarray | None = None
    score: float | None = None


@dataclass
class CandidateSet:
    entity: str
    candidates: list[Candidate] = field(default_factory=list)

    def __iter__(self):
        return iter(self.candidates)

    def __len__(self):
        return len(self.candidates)

    def terms(self) -> list[str]:
        return [c.term for c in self.candidates]


def load_snippets(path) -> list[TaggedSnippet]:
    """Read snippets as JSON lines: {"entity": …, "tokens": [{"t": …, "pos": …}, …]}."""
    snippets = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                tokens = tuple((tok["t"], tok["pos"]) for tok in rec["tokens"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"bad snippet record: {exc}", line=lineno) from None
            for surface, pos in tokens:
                if pos not in (NOUN, OTHER):
                    raise ParseError(f"bad POS tag {pos!r}", line=lineno)
                if PATH_SEPARATOR in surface:
                    raise ParseError(
                        f"token {surface!r} contains the reserved separator", line=lineno
                    )
            snippets.append(TaggedSnippet(entity=rec["entity"], tokens=tokens))
    return snippets


def load_tag_table(path) -> dict[str, set[str]]:
    """Read category tags as tab-separated `entity<TAB>tag` lines."""
    table: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ParseError(f"expected entity<TAB>tag, got {line!r}", line=lineno)
            if PATH_SEPARATOR in line:
                raise ParseError("record contains the reserved separator", line=lineno)
            table.setdefault(parts[0], set()).add(parts[1])
    return table


def load_dictionary(path) -> set[str]:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            word = line.strip()
            if not word:
                continue
            if PATH_SEPARATOR in word:
                raise ParseError("word contains the reserved separator", line=lineno)
            words.add(word)
    return words


def load_seed_pairs(path) -> set[tuple[str, str]]:
    """Read known (hyponym, hypernym) pairs, one tab-separated pair per line."""
    pairs = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ParseError(f"expected hyponym<TAB>hypernym, got {line!r}", line=lineno)
            if PATH_SEPARATOR in line:
                raise ParseError("record contains the reserved separator", line=lineno)
            pairs.add((parts[0], parts[1]))
    return pairs


def snippet_term_counts(entity: str, snippets: Iterable[TaggedSnippet]) -> Counter:
    """Count co-occurring NOUN tokens and maximal adjacent NOUN runs.

    Each NOUN occurrence counts for its own surface; each maximal run of
    two or more adjacent NOUNs additionally counts for the concatenated
    noun phrase.  The entity's own surface form is never a candidate.
    """
    counts: Counter = Counter()
    for snippet in snippets:
        run: list[str] = []
        for surface, pos in snippet.tokens:
            if pos == NOUN:
                if surface != entity:
                    counts[surface] += 1
                run.append(surface)
            else:
                if len(run) >= 2:
                    phrase = "".join(run)
                    if phrase != entity:
                        counts[phrase] += 1
                run = []
        if len(run) >= 2:
            phrase = "".join(run)
            if phrase != entity:
                counts[phrase] += 1
    return counts


def collect_snippet_candidates(
    entity: str, snippets: Sequence[TaggedSnippet], n: int
) -> list[tuple[str, int]]:
    """Top-n co-occurring nouns/noun phrases, by count then code-point order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    counts = snippet_term_counts(entity, snippets)
    ranked = sorted(counts.items(), key=lambda tc: (-tc[1], tc[0]))
    return ranked[:n]


def collect_category_tags(entity: str, tag_table: Mapping[str, set[str]]) -> set[str]:
    """The entity's category tags, minus the entity itself."""
    return {t for t in tag_table.get(entity, set()) if t != entity}


def extract_head_word(entity: str, dictionary: set[str]) -> str | None:
    """Longest proper suffix of the entity that is a dictionary word."""
    if not entity:
        raise ValueError("entity must be non-empty")
    for start in range(1, len(entity)):
        suffix = entity[start:]
        if suffix in dictionary:
            return suffix
    return None


def merge_candidates(
    entity: str,
    snippet: Sequence[tuple[str, int]],
    tags: set[str],
    head: str | None,
) -> CandidateSet:
    """One candidate per distinct term with merged sources and counts."""
    merged: dict[str, Candidate] = {}

    def get(term: str) -> Candidate:
        if term not in merged:
            merged[term] = Candidate(term=term)
        return merged[term]

    for term, count in snippet:
        cand = get(term)
        cand.sources.add(SOURCE_SNIPPET)
        cand.cooccurrence += count
    for term in tags:
        get(term).sources.add(SOURCE_TAG)
    if head is not None:
        get(head).sources.add(SOURCE_HEAD)

    ordered = [merged[t] for t in sorted(merged)]
    return CandidateSet(entity=entity, candidates=ordered)


def featurize(
    entity: str,
    candidate: Candidate,
    table: emb.EmbeddingTable,
    corpus_freq: Mapping[str, int],
) -> np.ndarray:
    """Fixed-order 6-feature vector for one candidate."""
    if entity in table and candidate.term in table:
        cos = emb.cosine(table.entries[entity], table.entries[candidate.term])
    else:
        cos = 0.0
    ratio = min(len(candidate.term) / len(entity), 2.0) if entity else 0.0
    return np.array(
        [
            math.log1p(candidate.cooccurrence),
            1.0 if SOURCE_TAG in candidate.sources else 0.0,
            1.0 if SOURCE_HEAD in candidate.sources else 0.0,
            cos,
            math.log1p(corpus_freq.get(candidate.term, 0)),
            ratio,
        ],
        dtype=np.float64,
    )


def featurize_all(
    candidates: CandidateSet,
    table: emb.EmbeddingTable,
    corpus_freq: Mapping[str, int],
) -> CandidateSet:
    for cand in candidates:
        cand.features = featurize(candidates.entity, cand, table, corpus_freq)
    return candidates


def heuristic_label(
    candidates: CandidateSet,
    seed_pairs: set[tuple[str, str]],
) -> list[tuple[np.ndarray, int]]:
    """Weak labels for ranker training.

    Positive: the candidate came from two or more distinct sources, or the
    (entity, term) pair is a known seed.  Negative: single source with at
    most one co-occurrence and not a seed.  Everything else is left
    unlabeled and excluded.
    """
    rows: list[tuple[np.ndarray, int]] = []
    for cand in candidates:
        if cand.features is None:
            raise ValueError(f"candidate {cand.term!r} not featurized")
        is_seed = (candidates.entity, cand.term) in seed_pairs
        if len(cand.sources) >= 2 or is_seed:
            rows.append((cand.features, 1))
        elif len(cand.sources) == 1 and cand.cooccurrence <= 1:
            rows.append((cand.features, 0))
    return rows


def rank_candidates(
    candidates: CandidateSet,
    ensemble: RankerEnsemble,
    keep_threshold: float = 0.5,
) -> CandidateSet:
    """Score every candidate with the ensemble and drop weak ones.

    Kept candidates are sorted by score descending, ties by term
    code-point order.
    """
    kept: list[Candidate] = []
    for cand in candidates:
        if cand.features is None:
            raise ValueError(f"candidate {cand.term!r} not featurized")
        cand.score = ensemble.score_one(cand.features)
        if cand.score >= keep_threshold:
            kept.append(cand)
    kept.sort(key=lambda c: (-c.score, c.term))
    return CandidateSet(entity=candidates.entity, candidates=kept)


def corpus_frequencies(snippets: Iterable[TaggedSnippet]) -> Counter:
    """Surface-form frequencies over the whole snippet corpus."""
    freq: Counter = Counter()
    for snippet in snippets:
        for surface, _ in snippet.tokens:
            freq[surface] += 1
    return freq
