"""Piecewise-linear projection model over embedding offsets and schema assembly.

A hypernym pair (x, y) is modeled as y ≈ Φ_k x where k indexes the offset
cluster the pair falls into.  Training clusters the offsets y − x with
k-means, then fits one least-squares matrix per cluster.  A pair is accepted
as hypernym-hyponym when the residual ‖Φ_k x − y‖ of the nearest cluster's
matrix stays below the model threshold; accepted edges are assembled into an
acyclic graph by removing or reversing the weakest link of every cycle.
"""
from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .embedding import EmbeddingTable
from .errors import IntegrityError, OOVError, ParameterError, ParseError, TrainingError

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
KMEANS_MAX_ROUNDS = 100
DEFAULT_CLUSTERS = 10
DEFAULT_DELTA_QUANTILE = 0.95
DELTA_GRID_SIZE = 50


@dataclass(frozen=True)
class TrainingPair:
    hyponym: str
    hypernym: str
    x: np.ndarray
    y: np.ndarray


@dataclass
class OffsetCluster:
    index: int
    centroid: np.ndarray
    member_count: int


@dataclass
class ProjectionModel:
    dimension: int
    clusters: list[OffsetCluster]
    matrices: list[np.ndarray]  # one (d, d) matrix per cluster
    delta: float
    seed: int = 0
    provenance: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.clusters)

    def nearest_cluster(self, offset: np.ndarray) -> int:
        dists = [float(np.linalg.norm(offset - c.centroid)) for c in self.clusters]
        return int(np.argmin(dists))

    def residual(self, x: np.ndarray, y: np.ndarray) -> float:
        k = self.nearest_cluster(y - x)
        return float(np.linalg.norm(self.matrices[k] @ x - y))


@dataclass(frozen=True)
class ScoredEdge:
    hyponym: str
    hypernym: str
    residual: float
    strength: float


def make_training_pairs(
    pairs: Iterable[tuple[str, str]], table: EmbeddingTable
) -> list[TrainingPair]:
    """Resolve (hyponym, hypernym) token pairs against an embedding table."""
    out = []
    for hypo, hyper in pairs:
        if hypo == hyper:
            continue
        out.append(
            TrainingPair(hyponym=hypo, hypernym=hyper, x=table.lookup(hypo), y=table.lookup(hyper))
        )
    return out


def load_labeled_pairs(path) -> list[tuple[str, str, int]]:
    """Read `hyponym<TAB>hypernym<TAB>{0,1}` lines."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1") or not parts[0] or not parts[1]:
                raise ParseError(
                    f"expected hyponym<TAB>hypernym<TAB>label, got {line!r}", line=lineno
                )
            if "\u2192" in parts[0] or "\u2192" in parts[1]:
                raise ParseError("term contains the reserved separator", line=lineno)
            rows.append((parts[0], parts[1], int(parts[2])))
    return rows


# --- offset clustering ------------------------------------------------------


def cluster_offsets(
    pairs: Sequence[TrainingPair], k: int, seed: int
) -> tuple[list[OffsetCluster], list[int]]:
    """Seeded k-means over the offsets y − x.

    Initial centroids are k distinct members chosen by seeded sampling;
    assignment uses Euclidean distance with lowest-index tie-breaks and
    iterates to an assignment fixpoint (at most 100 rounds).  A cluster
    that empties is re-seeded from the point farthest from every centroid.
    """
    if not pairs:
        raise ParameterError("no training pairs")
    if k < 1 or k > len(pairs):
        raise ParameterError(f"cluster count {k} out of range [1, {len(pairs)}]")

    offsets = np.stack([p.y - p.x for p in pairs])
    rng = random.Random(seed)
    init_idx = rng.sample(range(len(pairs)), k)
    centroids = offsets[init_idx].copy()

    assign = np.full(len(pairs), -1, dtype=np.int64)
    for _ in range(KMEANS_MAX_ROUNDS):
        d2 = (
            np.sum(offsets * offsets, axis=1)[:, None]
            + np.sum(centroids * centroids, axis=1)[None, :]
            - 2.0 * offsets @ centroids.T
        )
        new_assign = np.argmin(d2, axis=1)

        # re-seed each empty cluster from the farthest eligible point;
        # points just claimed and sole members of their cluster stay put,
        # which guarantees every cluster ends this pass non-empty
        claimed = np.zeros(len(pairs), dtype=bool)
        for ki in range(k):
            if np.any(new_assign == ki):
                continue
            sizes = np.bincount(new_assign, minlength=k)
            eligible = ~claimed & (sizes[new_assign] > 1)
            min_d2 = np.where(eligible, np.min(d2, axis=1), -np.inf)
            far = int(np.argmax(min_d2))
            centroids[ki] = offsets[far]
            new_assign[far] = ki
            claimed[far] = True
            d2[:, ki] = np.sum((offsets - centroids[ki]) ** 2, axis=1)

        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for ki in range(k):
            members = offsets[assign == ki]
            if len(members):
                centroids[ki] = members.mean(axis=0)

    clusters = [
        OffsetCluster(
            index=ki,
            centroid=centroids[ki].copy(),
            member_count=int(np.sum(assign == ki)),
        )
        for ki in range(k)
    ]
    return clusters, [int(a) for a in assign]


# --- projection fitting -----------------------------------------------------


def fit_projection(cluster_pairs: Sequence[TrainingPair]) -> np.ndarray:
    """Least-squares minimizer of the mean squared residual ‖Φx − y‖².

    Solved exactly via SVD-based least squares; on rank-deficient inputs
    this yields the minimum-norm minimizer, so the solution is always a
    true stationary point of the objective.
    """
    if not cluster_pairs:
        raise TrainingError("cannot fit a projection on an empty cluster")
    x = np.stack([p.x for p in cluster_pairs])
    y = np.stack([p.y for p in cluster_pairs])
    phi_t, *_ = np.linalg.lstsq(x, y, rcond=None)
    return phi_t.T


def projection_objective(phi: np.ndarray, pairs: Sequence[TrainingPair]) -> float:
    """Mean squared residual of Φ on a pair set."""
    x = np.stack([p.x for p in pairs])
    y = np.stack([p.y for p in pairs])
    diff = x @ phi.T - y
    return float(np.sum(diff * diff) / len(pairs))


def projection_gradient(phi: np.ndarray, pairs: Sequence[TrainingPair]) -> np.ndarray:
    """Analytic gradient of the mean-squared-residual objective at Φ."""
    x = np.stack([p.x for p in pairs])
    y = np.stack([p.y for p in pairs])
    return 2.0 * (x @ phi.T - y).T @ x / len(pairs)


# --- model training and IO --------------------------------------------------


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def fit_delta(
    model_residuals: Sequence[float],
    labels: Sequence[int],
) -> float:
    """Pick the residual threshold maximizing F1 over a 50-quantile grid.

    Ties go to the smallest threshold, which keeps the admitted edge set
    minimal.
    """
    residuals = np.asarray(model_residuals, dtype=np.float64)
    labels = np.asarray(labels)
    if len(residuals) == 0:
        raise TrainingError("no residuals to fit a threshold on")
    grid = np.quantile(residuals, np.linspace(0.0, 1.0, DELTA_GRID_SIZE))
    # a threshold equal to the largest residual would still reject that pair
    # (admission is strict), so extend the grid one step past the maximum
    grid = np.append(grid, np.max(residuals) * (1.0 + 1e-9) + 1e-12)
    best_delta, best_f1 = None, -1.0
    for delta in grid:
        if delta <= 0.0:
            continue
        pred = residuals < delta
        tp = int(np.sum(pred & (labels == 1)))
        fp = int(np.sum(pred & (labels == 0)))
        fn = int(np.sum(~pred & (labels == 1)))
        f1 = _f1(tp, fp, fn)
        if f1 > best_f1 + 1e-12:
            best_delta, best_f1 = float(delta), f1
    if best_delta is None:
        raise TrainingError("threshold grid is degenerate (all residuals zero?)")
    return best_delta


def select_cluster_count(
    positives: Sequence[TrainingPair],
    validation: Sequence[tuple[TrainingPair, int]],
    seed: int,
    max_k: int = DEFAULT_CLUSTERS,
) -> int:
    """Pick K by minimizing the mean residual of held-out positive pairs.

    Ties go to the smaller K. Falls back to the default when the
    validation set has no positives.
    """
    held_out = [p for p, lbl in validation if lbl == 1]
    if not held_out:
        return min(DEFAULT_CLUSTERS, len(positives))
    best_k, best_residual = 1, float("inf")
    for k in range(1, min(max_k, len(positives)) + 1):
        clusters, assign = cluster_offsets(positives, k, seed)
        matrices = [
            fit_projection([p for p, a in zip(positives, assign) if a == ki])
            for ki in range(k)
        ]
        probe = ProjectionModel(
            dimension=len(positives[0].x),
            clusters=clusters,
            matrices=matrices,
            delta=0.0,
            seed=seed,
        )
        mean_residual = sum(probe.residual(p.x, p.y) for p in held_out) / len(held_out)
        if mean_residual < best_residual - 1e-12:
            best_k, best_residual = k, mean_residual
    return best_k


def train_projection_model(
    positives: Sequence[TrainingPair],
    k: int,
    seed: int,
    validation: Sequence[tuple[TrainingPair, int]] | None = None,
    delta: float | None = None,
    delta_quantile: float = DEFAULT_DELTA_QUANTILE,
) -> ProjectionModel:
    """Cluster offsets, fit one matrix per cluster, and set the threshold.

    The threshold comes from, in order of preference: an explicit
    ``delta``, an F1 grid search on labeled validation pairs, or the
    ``delta_quantile`` quantile of the training residuals.
    """
    k = min(k, len(positives))
    clusters, assign = cluster_offsets(positives, k, seed)
    matrices = []
    for ki in range(k):
        members = [p for p, a in zip(positives, assign) if a == ki]
        matrices.append(fit_projection(members))

    model = ProjectionModel(
        dimension=len(positives[0].x),
        clusters=clusters,
        matrices=matrices,
        delta=0.0,
        seed=seed,
    )

    delta_mode = "explicit"
    if delta is None:
        if validation:
            residuals = [model.residual(p.x, p.y) for p, _ in validation]
            labels = [lbl for _, lbl in validation]
            if len(set(labels)) == 2:
                delta = fit_delta(residuals, labels)
                delta_mode = "f1-grid"
        if delta is None:
            train_residuals = sorted(model.residual(p.x, p.y) for p in positives)
            delta = float(np.quantile(train_residuals, delta_quantile)) * (1.0 + 1e-9) + 1e-12
            delta_mode = f"train-quantile:{delta_quantile}"

    model.delta = float(delta)
    model.provenance = {
        "training_pairs": len(positives),
        "validation_pairs": len(validation) if validation else 0,
        "delta_mode": delta_mode,
        "embedding_dimension": model.dimension,
    }
    return model


def save_projection_model(model: ProjectionModel, path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "model_type": "offset_projection",
        "d": model.dimension,
        "k": model.k,
        "delta": float(model.delta),
        "seed": model.seed,
        "clusters": [
            {
                "index": c.index,
                "member_count": c.member_count,
                "centroid": [float(v) for v in c.centroid],
            }
            for c in model.clusters
        ],
        "matrices": [[float(v) for v in m.reshape(-1)] for m in model.matrices],
        "provenance": model.provenance,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def load_projection_model(path) -> ProjectionModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_FORMAT_VERSION or doc.get("model_type") != "offset_projection":
        raise TrainingError(f"unsupported projection model file: {path}")
    d = int(doc["d"])
    clusters = [
        OffsetCluster(
            index=int(c["index"]),
            centroid=np.asarray(c["centroid"], dtype=np.float64),
            member_count=int(c["member_count"]),
        )
        for c in doc["clusters"]
    ]
    matrices = [np.asarray(m, dtype=np.float64).reshape(d, d) for m in doc["matrices"]]
    return ProjectionModel(
        dimension=d,
        clusters=clusters,
        matrices=matrices,
        delta=float(doc["delta"]),
        seed=int(doc["seed"]),
        provenance=doc.get("provenance", {}),
    )


# --- pair classification ----------------------------------------------------


def classify_pair(
    x_term: str,
    y_term: str,
    model: ProjectionModel,
    table: EmbeddingTable,
) -> ScoredEdge | None:
    """Accept (x_term → y_term) when the nearest cluster's matrix maps close enough."""
    x = table.lookup(x_term)
    y = table.lookup(y_term)
    k = model.nearest_cluster(y - x)
    residual = float(np.linalg.norm(model.matrices[k] @ x - y))
    if residual < model.delta:
        return ScoredEdge(
            hyponym=x_term,
            hypernym=y_term,
            residual=residual,
            strength=model.delta - residual,
        )
    return None


def build_edge_set(
    terms: Iterable[str],
    model: ProjectionModel,
    table: EmbeddingTable,
) -> list[ScoredEdge]:
    """Classify every ordered pair of in-vocabulary terms.

    Out-of-vocabulary terms are skipped with a warning; output is sorted
    by (hyponym, hypernym).
    """
    known = []
    for term in sorted(set(terms)):
        if term in table:
            known.append(term)
        else:
            log.warning("term %r not in embedding table; skipped", term)
    edges = []
    for a in known:
        for b in known:
            if a == b:
                continue
            edge = classify_pair(a, b, model, table)
            if edge is not None:
                edges.append(edge)
    edges.sort(key=lambda e: (e.hyponym, e.hypernym))
    return edges


# --- cycle resolution -------------------------------------------------------


@dataclass
class CycleResolution:
    edges: list[ScoredEdge]
    removed: int = 0
    reversed: int = 0
    pruned: int = 0


def _find_cycle(adjacency: dict[str, list[str]]) -> list[str] | None:
    """First directed cycle by DFS from the code-point-smallest node.

    Returns the cycle's node sequence (without repeating the start), or
    None if the graph is acyclic.
    """
    color: dict[str, int] = {}  # 0 absent/white, 1 gray, 2 black
    for start in sorted(adjacency):
        if color.get(start):
            continue
        stack: list[tuple[str, int]] = [(start, 0)]
        path: list[str] = []
        color[start] = 1
        path.append(start)
        while stack:
            node, idx = stack[-1]
            successors = adjacency.get(node, ())
            if idx < len(successors):
                stack[-1] = (node, idx + 1)
                nxt = successors[idx]
                state = color.get(nxt, 0)
                if state == 1:
                    return path[path.index(nxt):]
                if state == 0:
                    color[nxt] = 1
                    path.append(nxt)
                    stack.append((nxt, 0))
            else:
                color[node] = 2
                path.pop()
                stack.pop()
    return None


def _has_path(adjacency: dict[str, list[str]], src: str, dst: str, skip: tuple[str, str]) -> bool:
    """Directed reachability src → dst ignoring the single edge ``skip``."""
    seen = {src}
    stack = [src]
    while stack:
        node = stack.pop()
        for nxt in adjacency.get(node, ()):
            if (node, nxt) == skip:
                continue
            if nxt == dst:
                return True
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def resolve_cycles_detailed(edges: Sequence[ScoredEdge]) -> CycleResolution:
    """Break every directed cycle, then prune redundant reversed edges.

    Two-node cycles lose their weakest edge; longer cycles have their
    weakest edge reversed, indicating the indirect relation carried by the
    rest of the cycle.  An edge is only ever reversed once — if it would be
    reversed again it is dropped instead, which guarantees termination.
    After the graph is acyclic, any reversed edge whose endpoints are
    still connected by another directed path is redundant and removed.
    """
    live: dict[tuple[str, str], ScoredEdge] = {}
    was_reversed: dict[tuple[str, str], bool] = {}
    for e in edges:
        key = (e.hyponym, e.hypernym)
        if key in live:  # duplicate input edge: keep the stronger
            if e.strength > live[key].strength:
                live[key] = e
        else:
            live[key] = e
            was_reversed[key] = False

    result = CycleResolution(edges=[])

    def adjacency() -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {}
        for hypo, hyper in live:
            adj.setdefault(hypo, []).append(hyper)
            adj.setdefault(hyper, [])
        for node in adj:
            adj[node].sort()
        return adj

    while True:
        cycle = _find_cycle(adjacency())
        if cycle is None:
            break
        cycle_keys = [
            (cycle[i], cycle[(i + 1) % len(cycle)]) for i in range(len(cycle))
        ]
        weakest_key = min(cycle_keys, key=lambda k: (live[k].strength, k))
        weakest = live[weakest_key]
        if len(cycle) <= 2:
            del live[weakest_key]
            del was_reversed[weakest_key]
            result.removed += 1
            continue
        if was_reversed[weakest_key]:
            # a second reversal would restore an earlier state; drop it
            del live[weakest_key]
            del was_reversed[weakest_key]
            result.removed += 1
            continue
        del live[weakest_key]
        del was_reversed[weakest_key]
        flipped_key = (weakest.hypernym, weakest.hyponym)
        flipped = ScoredEdge(
            hyponym=weakest.hypernym,
            hypernym=weakest.hyponym,
            residual=weakest.residual,
            strength=weakest.strength,
        )
        if flipped_key in live:  # collides with an existing edge: keep stronger
            if flipped.strength > live[flipped_key].strength:
                live[flipped_key] = flipped
            was_reversed[flipped_key] = True
        else:
            live[flipped_key] = flipped
            was_reversed[flipped_key] = True
        result.reversed += 1

    # transitive redundancy pruning of reversed edges
    for key in sorted(k for k, flag in was_reversed.items() if flag):
        if key not in live:
            continue
        adj = adjacency()
        if _has_path(adj, key[0], key[1], skip=key):
            del live[key]
            del was_reversed[key]
            result.pruned += 1

    result.edges = sorted(live.values(), key=lambda e: (e.hyponym, e.hypernym))
    return result


def resolve_cycles(edges: Sequence[ScoredEdge]) -> list[ScoredEdge]:
    return resolve_cycles_detailed(edges).edges


# --- path enumeration -------------------------------------------------------


def paths_to_roots(edges: Sequence[ScoredEdge], term: str) -> list[list[str]]:
    """All maximal hypernym chains from ``term`` upward.

    Each result lists the hypernym nodes above the term (the term itself
    is not included); a term with no outgoing edge yields one empty chain.
    Children are visited in code-point order.
    """
    adj: dict[str, list[str]] = {}
    for e in edges:
        adj.setdefault(e.hyponym, []).append(e.hypernym)
    for node in adj:
        adj[node].sort()

    paths: list[list[str]] = []

    def walk(node: str, trail: list[str]) -> None:
        successors = adj.get(node, ())
        if not successors:
            paths.append(trail.copy())
            return
        for nxt in successors:
            if nxt in trail or nxt == term:
                raise IntegrityError(
                    f"cycle through {nxt!r} while enumerating paths for {term!r}"
                )
            trail.append(nxt)
            walk(nxt, trail)
            trail.pop()

    walk(term, [])
    return paths
