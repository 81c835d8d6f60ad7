"""Synthetic data generators and independent oracles for the eval suites.

The oracles deliberately avoid the code paths they check: the projection
oracle minimizes the fitting objective by plain gradient descent instead of
a linear solve, and the graph checks run brute-force searches.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingTable
from .hierarchy import ScoredEdge, TrainingPair


# --- projection fitting oracle ----------------------------------------------


def gradient_descent_objective(
    pairs: list[TrainingPair], steps: int = 10_000
) -> tuple[float, np.ndarray]:
    """Minimize the mean squared residual by gradient descent from zero.

    Step size is 1/L with L the largest curvature of the quadratic, so the
    iteration converges monotonically; returns (objective, matrix).
    """
    x = np.stack([p.x for p in pairs])
    y = np.stack([p.y for p in pairs])
    n, d = x.shape
    hessian_scale = 2.0 * float(np.linalg.eigvalsh(x.T @ x)[-1]) / n
    lr = 1.0 / max(hessian_scale, 1e-12)
    phi = np.zeros((d, d))
    for _ in range(steps):
        grad = 2.0 * (x @ phi.T - y).T @ x / n
        phi = phi - lr * grad
    diff = x @ phi.T - y
    return float(np.sum(diff * diff) / n), phi


def random_projection_instance(
    seed: int, d: int = 10, n_pairs: int = 50, noise: float = 0.01
) -> list[TrainingPair]:
    """Random y = Ax + noise pairs for exercising the least-squares fit."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d))
    xs = rng.normal(size=(n_pairs, d))
    ys = xs @ a.T + noise * rng.normal(size=(n_pairs, d))
    return [
        TrainingPair(hyponym=f"x{i}", hypernym=f"y{i}", x=xs[i], y=ys[i])
        for i in range(n_pairs)
    ]


# --- two-matrix hierarchy generator -----------------------------------------


@dataclass
class HierarchyInstance:
    table: EmbeddingTable
    train_positives: list[tuple[str, str]]
    validation: list[tuple[str, str, int]]
    test: list[tuple[str, str, int]]
    true_cluster: dict[tuple[str, str], int]  # which matrix generated each positive


def _random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


def two_matrix_instance(
    seed: int,
    d: int = 10,
    n_train: int = 200,
    n_validation: int = 60,
    n_test_pos: int = 100,
    n_test_neg: int = 100,
    noise: float = 0.01,
) -> HierarchyInstance:
    """Ground-truth data from two projection matrices over two entity types.

    Hyponym vectors of each type cluster around a type anchor, so the
    offsets y − x separate by generating matrix; negatives pair a hyponym
    with an unrelated random target.
    """
    rng = np.random.default_rng(seed)
    matrices = [1.5 * _random_orthogonal(rng, d), 0.7 * _random_orthogonal(rng, d)]
    anchors = [np.zeros(d), np.zeros(d)]
    anchors[0][0] = 3.0
    anchors[1][1] = -3.0

    entries: dict[str, np.ndarray] = {}
    positives: list[tuple[str, str]] = []
    true_cluster: dict[tuple[str, str], int] = {}

    def fresh_positive(tag: str, i: int) -> tuple[str, str]:
        kind = int(rng.integers(0, 2))
        x = anchors[kind] + 0.2 * rng.normal(size=d)
        y = matrices[kind] @ x + noise * rng.normal(size=d)
        hypo, hyper = f"{tag}x{i}", f"{tag}y{i}"
        entries[hypo] = x
        entries[hyper] = y
        true_cluster[(hypo, hyper)] = kind
        return hypo, hyper

    def fresh_negative(tag: str, i: int) -> tuple[str, str]:
        kind = int(rng.integers(0, 2))
        x = anchors[kind] + 0.2 * rng.normal(size=d)
        y = rng.normal(size=d) * float(np.linalg.norm(matrices[kind] @ x)) / math.sqrt(d)
        hypo, hyper = f"{tag}nx{i}", f"{tag}ny{i}"
        entries[hypo] = x
        entries[hyper] = y
        return hypo, hyper

    for i in range(n_train):
        positives.append(fresh_positive("t", i))
    validation = []
    for i in range(n_validation // 2):
        validation.append((*fresh_positive("v", i), 1))
    for i in range(n_validation - n_validation // 2):
        validation.append((*fresh_negative("v", i), 0))
    test = []
    for i in range(n_test_pos):
        test.append((*fresh_positive("e", i), 1))
    for i in range(n_test_neg):
        test.append((*fresh_negative("e", i), 0))

    d_table = EmbeddingTable(dimension=d, entries={k: v for k, v in entries.items()})
    return HierarchyInstance(
        table=d_table,
        train_positives=positives,
        validation=validation,
        test=test,
        true_cluster=true_cluster,
    )


# --- random edge sets and graph oracles --------------------------------------


def random_edge_set(seed: int, max_nodes: int = 12, density: float = 0.3) -> list[ScoredEdge]:
    """Seeded random directed graph with per-edge strengths in (0, 1)."""
    rng = random.Random(seed)
    n = rng.randint(2, max_nodes)
    nodes = [f"n{i:02d}" for i in range(n)]
    edges = []
    for a in nodes:
        for b in nodes:
            if a != b and rng.random() < density:
                strength = rng.uniform(0.01, 1.0)
                edges.append(
                    ScoredEdge(hyponym=a, hypernym=b, residual=1.0 - strength, strength=strength)
                )
    return edges


def is_acyclic(edges: list[ScoredEdge]) -> bool:
    """Kahn's topological sort as an independent acyclicity check."""
    nodes = set()
    out: dict[str, set[str]] = {}
    indeg: dict[str, int] = {}
    for e in edges:
        nodes.add(e.hyponym)
        nodes.add(e.hypernym)
        out.setdefault(e.hyponym, set()).add(e.hypernym)
        indeg[e.hypernym] = indeg.get(e.hypernym, 0) + 1
    queue = [n for n in nodes if indeg.get(n, 0) == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for nxt in out.get(node, ()):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                queue.append(nxt)
    return seen == len(nodes)


def enumerate_chains(edges: list[ScoredEdge], term: str) -> list[list[str]]:
    """Brute-force enumeration of maximal simple chains upward from a term."""
    adj: dict[str, list[str]] = {}
    for e in edges:
        adj.setdefault(e.hyponym, []).append(e.hypernym)
    results: list[list[str]] = []

    def extend(chain: list[str]) -> None:
        successors = [s for s in adj.get(chain[-1], []) if s not in chain]
        terminal = not adj.get(chain[-1])
        if terminal:
            results.append(chain[1:])
            return
        for s in sorted(successors):
            extend(chain + [s])

    extend([term])
    return results


# --- separable ranking features ----------------------------------------------


def separable_features(
    seed: int, n_pos: int = 500, n_neg: int = 500, spread: float = 0.6
) -> list[tuple[np.ndarray, int]]:
    """Two Gaussian classes with enough margin to be nearly separable."""
    rng = np.random.default_rng(seed)
    center = np.array([1.2, 0.8, 0.5, 0.9, 1.1, 0.7])
    rows: list[tuple[np.ndarray, int]] = []
    for _ in range(n_pos):
        rows.append((center + spread * rng.normal(size=6), 1))
    for _ in range(n_neg):
        rows.append((-center + spread * rng.normal(size=6), 0))
    order = rng.permutation(len(rows))
    return [rows[i] for i in order]
