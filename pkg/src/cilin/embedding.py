"""Word-embedding table: loading, lookup, cosine similarity and text encoding.

The table is the source of the vectors used both for projection learning
(hyponym vector x, hypernym vector y) and for the averaging text encoder
behind sense/path similarity scoring.
"""
from __future__ import annotations

import io
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import (
    EmbeddingLoadError,
    OOVError,
    UndefinedSimilarityError,
    UnencodableError,
)

log = logging.getLogger(__name__)

# Separators for encoder input: phrase separator "/", whitespace, and the
# reserved path separator "→".
_TOKEN_SPLIT = re.compile(r"[/\s→]+")


@dataclass
class EmbeddingTable:
    """Immutable token → vector map with a fixed dimension."""

    dimension: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)
    duplicates: int = 0  # tokens that appeared more than once at load time

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, token: str) -> np.ndarray:
        vec = self.entries.get(token)
        if vec is None:
            raise OOVError(token)
        return vec


def _freeze(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    vec.flags.writeable = False
    return vec


def load_embeddings(source: io.IOBase | bytes | str) -> EmbeddingTable:
    """Parse the text word-vector format: header "V d", then V rows "token v1 … vd".

    Duplicate tokens are last-wins; the table's ``duplicates`` counter
    records how many rows were overwritten.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    lines = text.splitlines()
    if not lines:
        raise EmbeddingLoadError("empty stream", line=1)

    header = lines[0].split()
    if len(header) != 2:
        raise EmbeddingLoadError(f"malformed header {lines[0]!r}", line=1)
    try:
        vocab_size, dim = int(header[0]), int(header[1])
    except ValueError:
        raise EmbeddingLoadError(f"malformed header {lines[0]!r}", line=1) from None
    if vocab_size < 0 or dim <= 0:
        raise EmbeddingLoadError(f"malformed header {lines[0]!r}", line=1)

    rows = [(i + 2, ln) for i, ln in enumerate(lines[1:]) if ln.strip()]
    if len(rows) != vocab_size:
        raise EmbeddingLoadError(
            f"header declares {vocab_size} rows, found {len(rows)}",
            line=len(lines),
        )

    entries: dict[str, np.ndarray] = {}
    duplicates = 0
    for lineno, ln in rows:
        parts = ln.split()
        if len(parts) != dim + 1:
            raise EmbeddingLoadError(
                f"expected {dim} components, got {len(parts) - 1}", line=lineno
            )
        token = parts[0]
        try:
            vec = np.array([float(p) for p in parts[1:]], dtype=np.float64)
        except ValueError:
            raise EmbeddingLoadError(f"non-numeric component in {ln!r}", line=lineno) from None
        if not np.all(np.isfinite(vec)):
            raise EmbeddingLoadError("non-finite component", line=lineno)
        if token in entries:
            duplicates += 1
        entries[token] = _freeze(vec)

    if duplicates:
        log.warning("embedding load: %d duplicate tokens (last occurrence wins)", duplicates)
    return EmbeddingTable(dimension=dim, entries=entries, duplicates=duplicates)


def lookup(table: EmbeddingTable, token: str) -> np.ndarray:
    """Return the stored vector for ``token`` or raise :class:`OOVError`."""
    return table.lookup(token)


def cosine(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    """Cosine similarity of two same-length vectors, in [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"vector lengths differ: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise UndefinedSimilarityError("cosine undefined for zero-norm vector")
    sim = float(np.dot(u, v) / (nu * nv))
    # guard against fp overshoot just past ±1
    return max(-1.0, min(1.0, sim))


@dataclass(frozen=True)
class EncodedText:
    """Unit-norm encoding of a token sequence plus how many tokens contributed."""

    vector: np.ndarray
    token_count: int


def encode_text(table: EmbeddingTable, tokens: Sequence[str]) -> EncodedText:
    """Mean of in-vocabulary token vectors, L2-normalized.

    OOV tokens are skipped; if nothing survives, raises
    :class:`UnencodableError` listing the offending tokens.
    """
    if not tokens:
        raise UnencodableError(tokens)
    vecs = [table.entries[t] for t in tokens if t in table.entries]
    if not vecs:
        raise UnencodableError(tokens)
    mean = np.mean(vecs, axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        # opposing vectors can cancel exactly; treat like an unencodable input
        raise UnencodableError(tokens)
    return EncodedText(vector=mean / norm, token_count=len(vecs))


def tokenize(text: str, table: EmbeddingTable | None = None) -> list[str]:
    """Split on "/", whitespace and "→"; unknown chunks fall back to characters.

    The per-character fallback only applies when a table is given and the
    chunk is absent from it, so that Chinese phrases decompose by character
    while known words stay whole.
    """
    chunks = [c for c in _TOKEN_SPLIT.split(text) if c]
    if table is None:
        return chunks
    tokens: list[str] = []
    for chunk in chunks:
        if chunk in table.entries or len(chunk) == 1:
            tokens.append(chunk)
        else:
            tokens.extend(chunk)
    return tokens


class Encoder(Protocol):
    """Anything that turns a string into a unit vector."""

    def encode(self, text: str) -> np.ndarray: ...


class AveragingEncoder:
    """Default encoder: tokenize, average in-vocabulary vectors, normalize."""

    def __init__(self, table: EmbeddingTable):
        self.table = table

    def encode(self, text: str) -> np.ndarray:
        tokens = tokenize(text, self.table)
        return encode_text(self.table, tokens).vector


def one_hot_table(tokens: Iterable[str]) -> EmbeddingTable:
    """Build a one-hot table over the given tokens (sorted for determinism).

    Handy for tests and for bag-of-tokens style scoring without trained
    vectors.
    """
    vocab = sorted(set(tokens))
    dim = len(vocab)
    if dim == 0:
        raise ValueError("cannot build a one-hot table over an empty vocabulary")
    entries = {}
    for i, tok in enumerate(vocab):
        vec = np.zeros(dim, dtype=np.float64)
        vec[i] = 1.0
        entries[tok] = _freeze(vec)
    return EmbeddingTable(dimension=dim, entries=entries)


def save_embeddings(table: EmbeddingTable, path) -> None:
    """Write a table back out in the same text format (sorted tokens)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.entries)} {table.dimension}\n")
        for token in sorted(table.entries):
            comps = " ".join(repr(float(x)) for x in table.entries[token])
            fh.write(f"{token} {comps}\n")


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise UndefinedSimilarityError("zero-norm vector")
    return vec / norm


def nearest_tokens(table: EmbeddingTable, vec: np.ndarray, k: int = 5) -> list[tuple[str, float]]:
    """Top-k tokens by cosine similarity to ``vec`` (diagnostics helper)."""
    q = _unit(np.asarray(vec, dtype=np.float64))
    scored = []
    for token, stored in table.entries.items():
        norm = float(np.linalg.norm(stored))
        if norm == 0.0:
            continue
        scored.append((token, float(np.dot(stored, q) / norm)))
    scored.sort(key=lambda ts: (-ts[1], ts[0]))
    return scored[:k]
