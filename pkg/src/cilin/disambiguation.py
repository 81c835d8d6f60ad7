"""Assign each hypernym path of an entity to the sense expressing its meaning.

A sense is rendered as its phrases in canonical (code-point) order; a path
is rendered as the entity and its hypernym chain joined with "→".  Both
strings are encoded to unit vectors and compared by cosine; each path goes
to its best-scoring sense when that score clears the threshold.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .embedding import Encoder, cosine
from .errors import ParseError

PATH_SEPARATOR = "→"  # →
UNASSIGNED = "UNASSIGNED"
DEFAULT_TAU = 0.5


@dataclass(frozen=True)
class SenseDescriptor:
    """One sense of an entity, characterized by its relation/value phrases."""

    entity: str
    sense_id: str
    phrases: tuple[str, ...]


@dataclass(frozen=True)
class HypernymPath:
    """Hypernym chain above an entity; nodes[0] is the immediate hypernym."""

    entity: str
    nodes: tuple[str, ...]


@dataclass(frozen=True)
class Assignment:
    path: HypernymPath
    sense_id: str  # a real sense_id, or UNASSIGNED
    score: float


def check_term(term: str) -> str:
    """Reject terms containing the reserved path separator."""
    if PATH_SEPARATOR in term:
        raise ParseError(f"term {term!r} contains the reserved separator {PATH_SEPARATOR!r}")
    return term


def sense_string(sense: SenseDescriptor) -> str:
    """Canonical form: phrases sorted by code point, space-joined."""
    return " ".join(sorted(sense.phrases))


def path_string(path: HypernymPath) -> str:
    """Entity followed by its hypernym chain, joined with the reserved separator."""
    return PATH_SEPARATOR.join([path.entity, *path.nodes])


def score_pair(sense: SenseDescriptor, path: HypernymPath, encoder: Encoder) -> float:
    """Cosine similarity between the encoded sense and path strings."""
    u = encoder.encode(sense_string(sense))
    v = encoder.encode(path_string(path))
    return cosine(u, v)


def assign_paths(
    senses: Sequence[SenseDescriptor],
    paths: Sequence[HypernymPath],
    encoder: Encoder,
    tau: float = DEFAULT_TAU,
) -> list[Assignment]:
    """Map every path to its argmax sense when the score clears ``tau``.

    Sense ties break toward the code-point-smallest sense_id.  With no
    senses at all, every path is UNASSIGNED with score -1.
    """
    assignments = []
    ordered_senses = sorted(senses, key=lambda s: s.sense_id)
    for path in paths:
        best_id, best_score = None, -2.0
        for sense in ordered_senses:
            score = score_pair(sense, path, encoder)
            if score > best_score + 1e-12:
                best_id, best_score = sense.sense_id, score
        if best_id is None:
            assignments.append(Assignment(path=path, sense_id=UNASSIGNED, score=-1.0))
        elif best_score >= tau:
            assignments.append(Assignment(path=path, sense_id=best_id, score=best_score))
        else:
            assignments.append(Assignment(path=path, sense_id=UNASSIGNED, score=best_score))
    return assignments


def load_labeled_pairs(path) -> list[tuple[str, str, int]]:
    """Read `sense_string<TAB>path_string<TAB>{0,1}` evaluation records."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise ParseError(
                    f"expected sense<TAB>path<TAB>label, got {line!r}", line=lineno
                )
            rows.append((parts[0], parts[1], int(parts[2])))
    return rows


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    positives: int
    negatives: int


def evaluate(
    pairs: Sequence[tuple[str, str, int]],
    encoder: Encoder,
    tau: float = DEFAULT_TAU,
) -> Metrics:
    """Score string pairs and report standard binary metrics at ``tau``."""
    if not pairs:
        raise ValueError("no labeled pairs to evaluate")
    tp = fp = tn = fn = 0
    for sense_text, path_text, label in pairs:
        score = cosine(encoder.encode(sense_text), encoder.encode(path_text))
        pred = 1 if score >= tau else 0
        if pred and label:
            tp += 1
        elif pred and not label:
            fp += 1
        elif not pred and label:
            fn += 1
        else:
            tn += 1
    total = tp + fp + tn + fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(
        accuracy=(tp + tn) / total,
        precision=precision,
        recall=recall,
        f1=f1,
        positives=tp + fn,
        negatives=fp + tn,
    )
