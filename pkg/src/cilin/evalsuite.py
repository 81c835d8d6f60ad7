"""Self-contained evaluation suites: projection, taxonomy, ranking, disambiguation.

Each suite builds seeded synthetic data, runs the production code, checks it
against an independent oracle or ground truth, and reports metrics plus an
overall pass flag.
"""
from __future__ import annotations

import itertools
import math
import random
import time
from collections import Counter

import numpy as np

from . import disambiguation as dis
from . import hierarchy, synthetic
from .embedding import AveragingEncoder, one_hot_table
from .rankers import TrainingConfig, auc_score, train_rankers

SUITES = ("projection", "taxonomy", "ranking", "disambiguation")


def bag_of_tokens_cosine(text_a: str, text_b: str, vocab: set[str]) -> float:
    """Brute-force oracle for the averaging encoder + cosine path.

    Retokenizes both strings by the same published rules (split on "/",
    whitespace and "→"; characters for unknown chunks), counts in-vocab
    tokens, and compares raw count vectors.
    """

    def counts(text: str) -> Counter:
        out: Counter = Counter()
        chunk = ""
        for ch in text + " ":
            if ch in "/→" or ch.isspace():
                if chunk:
                    if chunk in vocab or len(chunk) == 1:
                        if chunk in vocab:
                            out[chunk] += 1
                    else:
                        for c in chunk:
                            if c in vocab:
                                out[c] += 1
                    chunk = ""
            else:
                chunk += ch
        return out

    ca, cb = counts(text_a), counts(text_b)
    dot = sum(ca[t] * cb.get(t, 0) for t in ca)
    na = math.sqrt(sum(v * v for v in ca.values()))
    nb = math.sqrt(sum(v * v for v in cb.values()))
    if na == 0 or nb == 0:
        raise ValueError("oracle: nothing to encode")
    return dot / (na * nb)


def apple_onehot_fixture():
    """Two-sense apple fixture over one-hot tokens, with both fruit paths."""
    vocab = ["苹果", "水果", "食品", "植物", "生物", "物", "手机"]
    table = one_hot_table(vocab)
    fruit = dis.SenseDescriptor(
        entity="苹果",
        sense_id="蔷薇科苹果属果实",
        phrases=("分类/水果", "分类/食品", "属性/植物", "本质/物"),
    )
    phone = dis.SenseDescriptor(
        entity="苹果",
        sense_id="智能手机品牌",
        phrases=("分类/手机", "品牌/苹果公司"),
    )
    paths = [
        dis.HypernymPath(entity="苹果", nodes=("水果", "食品", "物")),
        dis.HypernymPath(entity="苹果", nodes=("水果", "植物", "生物", "物")),
    ]
    return table, [fruit, phone], paths


# --- suites -------------------------------------------------------------------


def run_projection_suite(seed: int = 0) -> dict:
    """Least-squares fit vs a 10,000-step gradient-descent oracle."""
    start = time.time()
    worst_gap = -math.inf
    worst_grad = 0.0
    for s in range(seed, seed + 20):
        pairs = synthetic.random_projection_instance(s, d=10, n_pairs=50)
        phi = hierarchy.fit_projection(pairs)
        fitted = hierarchy.projection_objective(phi, pairs)
        oracle, _ = synthetic.gradient_descent_objective(pairs)
        worst_gap = max(worst_gap, fitted - oracle)
        grad_norm = float(np.linalg.norm(hierarchy.projection_gradient(phi, pairs)))
        worst_grad = max(worst_grad, grad_norm)
    elapsed = time.time() - start
    return {
        "suite": "projection",
        "instances": 20,
        "worst_objective_gap": worst_gap,
        "worst_gradient_norm": worst_grad,
        "seconds": round(elapsed, 3),
        "ok": worst_gap <= 1e-6 and worst_grad <= 1e-6 and elapsed < 5.0,
    }


def run_taxonomy_suite(seed: int = 0, trials: int = 1000) -> dict:
    """Cycle resolution must leave every random graph acyclic."""
    start = time.time()
    acyclic = 0
    for s in range(seed, seed + trials):
        edges = synthetic.random_edge_set(s, max_nodes=12, density=0.3)
        resolved = hierarchy.resolve_cycles(edges)
        if synthetic.is_acyclic(resolved):
            acyclic += 1
    elapsed = time.time() - start
    return {
        "suite": "taxonomy",
        "trials": trials,
        "acyclic": acyclic,
        "seconds": round(elapsed, 3),
        "ok": acyclic == trials,
    }


def run_ranking_suite(seed: int = 0) -> dict:
    """Held-out AUC of the ensemble and each sub-model on separable data."""
    start = time.time()
    rows = synthetic.separable_features(seed, n_pos=500, n_neg=500)
    split = int(len(rows) * 0.7)
    train, test = rows[:split], rows[split:]
    ensemble = train_rankers(train, TrainingConfig(seed=seed))
    x = np.stack([r[0] for r in test])
    y = np.asarray([r[1] for r in test])
    aucs = {name: auc_score(scores, y) for name, scores in ensemble.sub_scores(x).items()}
    aucs["ensemble"] = auc_score(ensemble.score(x), y)
    elapsed = time.time() - start
    return {
        "suite": "ranking",
        "auc": {k: round(v, 4) for k, v in sorted(aucs.items())},
        "seconds": round(elapsed, 3),
        "ok": all(v >= 0.95 for v in aucs.values()) and elapsed < 10.0,
    }


def run_disambiguation_suite(seed: int = 0) -> dict:
    """Canonical sense strings plus the one-hot apple fixture assignment."""
    start = time.time()
    rng = random.Random(seed)
    canonical_trials = 1000
    stable = 0
    phrases = [f"r{i}/v{i}" for i in range(8)] + ["性味/微甜", "科/蔷薇科"]
    for _ in range(canonical_trials):
        shuffled = phrases.copy()
        rng.shuffle(shuffled)
        a = dis.sense_string(dis.SenseDescriptor("e", "s", tuple(shuffled)))
        b = dis.sense_string(dis.SenseDescriptor("e", "s", tuple(sorted(phrases))))
        if a == b:
            stable += 1

    table, senses, paths = apple_onehot_fixture()
    encoder = AveragingEncoder(table)
    assignments = dis.assign_paths(senses, paths, encoder, tau=0.5)
    fruit_id = senses[0].sense_id
    fruit_ok = all(a.sense_id == fruit_id for a in assignments)
    vocab = set(table.entries)
    oracle_gap = max(
        abs(
            a.score
            - bag_of_tokens_cosine(
                dis.sense_string(next(s for s in senses if s.sense_id == a.sense_id)),
                dis.path_string(a.path),
                vocab,
            )
        )
        for a in assignments
        if a.sense_id != dis.UNASSIGNED
    )
    elapsed = time.time() - start
    return {
        "suite": "disambiguation",
        "canonical_trials": canonical_trials,
        "canonical_stable": stable,
        "fruit_paths_assigned": fruit_ok,
        "oracle_gap": oracle_gap,
        "seconds": round(elapsed, 3),
        "ok": stable == canonical_trials and fruit_ok and oracle_gap <= 1e-9,
    }


def run_hierarchy_recovery(seed: int = 0) -> dict:
    """Two-matrix synthetic recovery: classification F1 and cluster accuracy."""
    start = time.time()
    inst = synthetic.two_matrix_instance(seed)
    train_pairs = hierarchy.make_training_pairs(inst.train_positives, inst.table)
    validation = [
        (hierarchy.make_training_pairs([(a, b)], inst.table)[0], lbl)
        for a, b, lbl in inst.validation
    ]
    model = hierarchy.train_projection_model(train_pairs, k=2, seed=seed, validation=validation)

    tp = fp = fn = tn = 0
    for a, b, lbl in inst.test:
        edge = hierarchy.classify_pair(a, b, model, inst.table)
        pred = 1 if edge is not None else 0
        if pred and lbl:
            tp += 1
        elif pred and not lbl:
            fp += 1
        elif not pred and lbl:
            fn += 1
        else:
            tn += 1
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0

    # cluster agreement up to index permutation
    train_keys = {(p.hyponym, p.hypernym) for p in train_pairs}
    assigned = [
        (model.nearest_cluster(inst.table.lookup(hyper) - inst.table.lookup(hypo)), truth)
        for (hypo, hyper), truth in inst.true_cluster.items()
        if (hypo, hyper) in train_keys
    ]
    best_acc = max(
        sum(1 for got, truth in assigned if perm[got] == truth) / len(assigned)
        for perm in itertools.permutations(range(model.k))
    )
    elapsed = time.time() - start
    return {
        "suite": "hierarchy-recovery",
        "f1": round(f1, 4),
        "cluster_accuracy": round(best_acc, 4),
        "delta": model.delta,
        "seconds": round(elapsed, 3),
        "ok": f1 >= 0.95 and best_acc >= 0.95 and elapsed < 10.0,
    }


def run_suite(name: str, seed: int = 0) -> dict:
    if name == "projection":
        return run_projection_suite(seed)
    if name == "taxonomy":
        return run_taxonomy_suite(seed)
    if name == "ranking":
        return run_ranking_suite(seed)
    if name == "disambiguation":
        return run_disambiguation_suite(seed)
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
