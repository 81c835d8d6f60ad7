import itertools

import numpy as np
import pytest

from cilin import hierarchy as hi
from cilin import synthetic
from cilin.embedding import EmbeddingTable
from cilin.errors import IntegrityError, OOVError, ParameterError, ParseError


def pairs_from_offsets(offsets):
    """TrainingPairs with x = 0 so each offset is exactly y - x."""
    d = len(offsets[0])
    return [
        hi.TrainingPair(hyponym=f"a{i}", hypernym=f"b{i}", x=np.zeros(d), y=np.asarray(o, float))
        for i, o in enumerate(offsets)
    ]


def edge(hypo, hyper, strength):
    return hi.ScoredEdge(hyponym=hypo, hypernym=hyper, residual=1 - strength, strength=strength)


class TestClusterOffsets:
    def test_degenerate_single_cluster(self):
        pairs = pairs_from_offsets([[1.0, 2.0]] * 5)
        clusters, assign = hi.cluster_offsets(pairs, 1, seed=0)
        assert len(clusters) == 1
        assert clusters[0].member_count == 5
        assert list(clusters[0].centroid) == [1.0, 2.0]
        assert assign == [0] * 5

    def test_two_neighborhoods_recovered(self):
        rng = np.random.default_rng(42)
        group_a = [np.array([1.0, 0.0]) + 0.05 * rng.normal(size=2) for _ in range(6)]
        group_b = [np.array([0.0, 1.0]) + 0.05 * rng.normal(size=2) for _ in range(6)]
        offsets = group_a + group_b
        pairs = pairs_from_offsets(offsets)
        clusters, assign = hi.cluster_offsets(pairs, 2, seed=0)

        # brute-force: the minimum within-cluster sum of squares over all
        # 2-partitions must be achieved by the returned assignment
        points = np.stack(offsets)

        def wcss(mask):
            total = 0.0
            for side in (True, False):
                members = points[[m == side for m in mask]]
                if len(members) == 0:
                    return np.inf
                total += float(np.sum((members - members.mean(axis=0)) ** 2))
            return total

        best = min(
            wcss([(i >> b) & 1 == 1 for b in range(len(points))])
            for i in range(1, 2 ** len(points) - 1)
        )
        got = wcss([a == 0 for a in assign])
        assert got == pytest.approx(best, rel=1e-9)
        # and the split is the generating one
        assert len({assign[i] for i in range(6)}) == 1
        assert len({assign[i] for i in range(6, 12)}) == 1
        assert assign[0] != assign[6]

    def test_k_equals_pair_count(self):
        offsets = [[float(i), 0.0] for i in range(4)]
        pairs = pairs_from_offsets(offsets)
        clusters, assign = hi.cluster_offsets(pairs, 4, seed=1)
        assert sorted(assign) == [0, 1, 2, 3]
        for ki, cluster in enumerate(clusters):
            member = offsets[assign.index(ki)]
            assert list(cluster.centroid) == member
            assert cluster.member_count == 1

    def test_k_equals_pair_count_with_duplicates(self):
        pairs = pairs_from_offsets([[0.0, 0.0]] * 3)
        clusters, assign = hi.cluster_offsets(pairs, 3, seed=0)
        assert sorted(assign) == [0, 1, 2]
        assert all(c.member_count == 1 for c in clusters)

    def test_too_many_clusters_rejected(self):
        pairs = pairs_from_offsets([[1.0, 0.0]])
        with pytest.raises(ParameterError):
            hi.cluster_offsets(pairs, 2, seed=0)

    def test_centroids_are_member_means_at_convergence(self):
        rng = np.random.default_rng(7)
        pairs = pairs_from_offsets(list(rng.normal(size=(30, 3))))
        clusters, assign = hi.cluster_offsets(pairs, 4, seed=3)
        offsets = np.stack([p.y - p.x for p in pairs])
        for cluster in clusters:
            members = offsets[[a == cluster.index for a in assign]]
            assert cluster.centroid == pytest.approx(members.mean(axis=0), abs=1e-9)


class TestFitProjection:
    def test_identity_case(self):
        rng = np.random.default_rng(0)
        xs = rng.normal(size=(20, 4))
        pairs = [
            hi.TrainingPair(hyponym=f"a{i}", hypernym=f"b{i}", x=x, y=x.copy())
            for i, x in enumerate(xs)
        ]
        phi = hi.fit_projection(pairs)
        assert phi == pytest.approx(np.eye(4), abs=1e-8)
        assert hi.projection_objective(phi, pairs) == pytest.approx(0.0, abs=1e-8)

    def test_scaling_case(self):
        rng = np.random.default_rng(1)
        xs = rng.normal(size=(20, 4))
        pairs = [
            hi.TrainingPair(hyponym=f"a{i}", hypernym=f"b{i}", x=x, y=2.0 * x)
            for i, x in enumerate(xs)
        ]
        phi = hi.fit_projection(pairs)
        assert phi == pytest.approx(2.0 * np.eye(4), abs=1e-6)

    def test_matches_gradient_descent_oracle(self):
        pairs = synthetic.random_projection_instance(0, d=10, n_pairs=50, noise=0.01)
        phi = hi.fit_projection(pairs)
        fitted = hi.projection_objective(phi, pairs)
        oracle, _ = synthetic.gradient_descent_objective(pairs)
        assert fitted <= oracle + 1e-6

    def test_gradient_norm_at_solution(self):
        for seed in range(3):
            pairs = synthetic.random_projection_instance(seed)
            phi = hi.fit_projection(pairs)
            grad = hi.projection_gradient(phi, pairs)
            assert float(np.linalg.norm(grad)) <= 1e-6

    def test_random_perturbations_never_improve(self):
        pairs = synthetic.random_projection_instance(5, d=6, n_pairs=30)
        phi = hi.fit_projection(pairs)
        base = hi.projection_objective(phi, pairs)
        rng = np.random.default_rng(11)
        for _ in range(100):
            direction = rng.normal(size=phi.shape)
            direction /= np.linalg.norm(direction)
            perturbed = hi.projection_objective(phi + 1e-3 * direction, pairs)
            assert perturbed >= base - 1e-9

    def test_rank_deficient_inputs_still_solve(self):
        x = np.array([1.0, 0.0, 0.0])
        pairs = [
            hi.TrainingPair(hyponym="a", hypernym="b", x=x, y=np.array([2.0, 0.0, 0.0])),
            hi.TrainingPair(hyponym="c", hypernym="d", x=x, y=np.array([2.0, 0.0, 0.0])),
        ]
        phi = hi.fit_projection(pairs)
        assert np.all(np.isfinite(phi))
        assert hi.projection_objective(phi, pairs) == pytest.approx(0.0, abs=1e-12)
        assert float(np.linalg.norm(hi.projection_gradient(phi, pairs))) <= 1e-9


def tiny_model():
    """One cluster at offset (1, 0); matrix adds (1, 0) to any x."""
    phi = np.array([[2.0, 0.0], [0.0, 0.0]])  # maps (1,0) to (2,0)
    cluster = hi.OffsetCluster(index=0, centroid=np.array([1.0, 0.0]), member_count=1)
    return hi.ProjectionModel(
        dimension=2, clusters=[cluster], matrices=[phi], delta=0.5, seed=0
    )


class TestClassifyPair:
    table = EmbeddingTable(
        dimension=2,
        entries={
            "子": np.array([1.0, 0.0]),
            "父": np.array([2.0, 0.0]),
            "远": np.array([-3.0, 5.0]),
        },
    )

    def test_exact_image_accepted(self):
        model = tiny_model()
        result = hi.classify_pair("子", "父", model, self.table)
        assert result is not None
        assert result.residual == pytest.approx(0.0, abs=1e-12)
        assert result.strength == pytest.approx(model.delta)

    def test_distant_target_rejected(self):
        model = tiny_model()
        assert hi.classify_pair("子", "远", model, self.table) is None

    def test_oov_raises(self):
        with pytest.raises(OOVError):
            hi.classify_pair("子", "nope", tiny_model(), self.table)

    def test_strength_grows_as_residual_shrinks(self):
        model = tiny_model()
        near = EmbeddingTable(
            dimension=2,
            entries={
                "x": np.array([1.0, 0.0]),
                "y1": np.array([2.0, 0.1]),
                "y2": np.array([2.0, 0.3]),
            },
        )
        e1 = hi.classify_pair("x", "y1", model, near)
        e2 = hi.classify_pair("x", "y2", model, near)
        assert e1.residual < e2.residual
        assert e1.strength > e2.strength

    def test_synthetic_recovery_f1(self):
        inst = synthetic.two_matrix_instance(0)
        train = hi.make_training_pairs(inst.train_positives, inst.table)
        validation = [
            (hi.make_training_pairs([(a, b)], inst.table)[0], lbl)
            for a, b, lbl in inst.validation
        ]
        model = hi.train_projection_model(train, k=2, seed=0, validation=validation)
        tp = fp = fn = 0
        for a, b, lbl in inst.test:
            pred = hi.classify_pair(a, b, model, inst.table) is not None
            tp += pred and lbl
            fp += pred and not lbl
            fn += (not pred) and lbl
        f1 = 2 * tp / (2 * tp + fp + fn)
        assert f1 >= 0.95


class TestBuildEdgeSet:
    def test_empty_terms(self):
        table = EmbeddingTable(dimension=2, entries={})
        assert hi.build_edge_set([], tiny_model(), table) == []

    def test_single_direction_detected(self):
        table = EmbeddingTable(
            dimension=2,
            entries={"子": np.array([1.0, 0.0]), "父": np.array([2.0, 0.0])},
        )
        edges = hi.build_edge_set(["子", "父"], tiny_model(), table)
        assert [(e.hyponym, e.hypernym) for e in edges] == [("子", "父")]

    def test_all_oov_skipped(self, caplog):
        table = EmbeddingTable(dimension=2, entries={})
        with caplog.at_level("WARNING", logger="cilin.hierarchy"):
            edges = hi.build_edge_set(["x", "y"], tiny_model(), table)
        assert edges == []
        assert sum("not in embedding table" in r.message for r in caplog.records) == 2


class TestResolveCycles:
    def test_two_node_cycle_removes_weakest(self):
        edges = [edge("A", "B", 0.9), edge("B", "A", 0.4)]
        resolved = hi.resolve_cycles(edges)
        assert [(e.hyponym, e.hypernym) for e in resolved] == [("A", "B")]

    def test_three_node_cycle_reversal_then_pruning(self):
        edges = [edge("A", "B", 0.9), edge("B", "C", 0.8), edge("C", "A", 0.2)]
        detailed = hi.resolve_cycles_detailed(edges)
        assert [(e.hyponym, e.hypernym) for e in detailed.edges] == [("A", "B"), ("B", "C")]
        assert detailed.reversed == 1
        assert detailed.pruned == 1

    def test_reversal_kept_when_not_redundant(self):
        # C→A reverses to A→C; the alternative route A→B→C is then broken
        # by a 2-node cycle removal, so the reversed edge must survive
        edges = [
            edge("A", "B", 0.9),
            edge("B", "C", 0.8),
            edge("C", "B", 0.85),
            edge("C", "A", 0.2),
        ]
        resolved = hi.resolve_cycles(edges)
        keys = {(e.hyponym, e.hypernym) for e in resolved}
        assert keys == {("A", "B"), ("A", "C"), ("C", "B")}
        assert synthetic.is_acyclic(resolved)

    def test_acyclic_input_unchanged(self):
        edges = [edge("A", "B", 0.5), edge("B", "C", 0.7), edge("A", "C", 0.6)]
        assert hi.resolve_cycles(edges) == sorted(edges, key=lambda e: (e.hyponym, e.hypernym))

    def test_flip_flop_graph_terminates(self):
        # two interlocking cycles whose weakest edge would be reversed
        # back and forth forever without the second-reversal guard
        edges = [
            edge("u", "v", 0.1),
            edge("v", "a", 0.9),
            edge("a", "u", 0.9),
            edge("u", "b", 0.9),
            edge("b", "v", 0.9),
        ]
        resolved = hi.resolve_cycles(edges)
        assert synthetic.is_acyclic(resolved)

    def test_no_invented_edges(self):
        for seed in range(50):
            edges = synthetic.random_edge_set(seed, max_nodes=8, density=0.4)
            allowed = {(e.hyponym, e.hypernym) for e in edges}
            allowed |= {(e.hypernym, e.hyponym) for e in edges}
            for out in hi.resolve_cycles(edges):
                assert (out.hyponym, out.hypernym) in allowed

    def test_random_graphs_become_acyclic(self):
        for seed in range(200):
            resolved = hi.resolve_cycles(synthetic.random_edge_set(seed))
            assert synthetic.is_acyclic(resolved)

    def test_deterministic(self):
        edges = synthetic.random_edge_set(123)
        assert hi.resolve_cycles(edges) == hi.resolve_cycles(list(edges))


class TestPathsToRoots:
    def chain_edges(self):
        return [
            edge("苹果", "水果", 0.9),
            edge("水果", "食品", 0.8),
            edge("食品", "物", 0.7),
        ]

    def test_single_chain(self):
        assert hi.paths_to_roots(self.chain_edges(), "苹果") == [["水果", "食品", "物"]]

    def test_two_parents_two_paths(self):
        edges = self.chain_edges() + [
            edge("水果", "植物", 0.8),
            edge("植物", "生物", 0.7),
            edge("生物", "物", 0.6),
        ]
        paths = hi.paths_to_roots(edges, "苹果")
        assert paths == [
            ["水果", "植物", "生物", "物"],
            ["水果", "食品", "物"],
        ]

    def test_leaf_term_gets_trivial_path(self):
        assert hi.paths_to_roots(self.chain_edges(), "物") == [[]]

    def test_cycle_detected_as_integrity_error(self):
        edges = [edge("a", "b", 0.5), edge("b", "a", 0.5)]
        with pytest.raises(IntegrityError):
            hi.paths_to_roots(edges, "a")

    def test_matches_brute_force_enumeration(self):
        for seed in range(60):
            edges = hi.resolve_cycles(synthetic.random_edge_set(seed, max_nodes=10))
            nodes = sorted({e.hyponym for e in edges} | {e.hypernym for e in edges})
            for term in nodes[:4]:
                mine = sorted(hi.paths_to_roots(edges, term))
                oracle = sorted(synthetic.enumerate_chains(edges, term))
                assert mine == oracle


class TestModelTrainingAndIO:
    def test_delta_fit_separates_classes(self):
        residuals = [0.01, 0.02, 0.03, 0.9, 1.1, 1.3]
        labels = [1, 1, 1, 0, 0, 0]
        delta = hi.fit_delta(residuals, labels)
        assert 0.03 < delta <= 0.9

    def test_explicit_delta_respected(self):
        pairs = synthetic.random_projection_instance(2, d=4, n_pairs=12)
        model = hi.train_projection_model(pairs, k=2, seed=0, delta=0.123)
        assert model.delta == 0.123
        assert model.provenance["delta_mode"] == "explicit"

    def test_quantile_fallback_without_validation(self):
        pairs = synthetic.random_projection_instance(3, d=4, n_pairs=12)
        model = hi.train_projection_model(pairs, k=2, seed=0)
        assert model.delta > 0
        assert model.provenance["delta_mode"].startswith("train-quantile")

    def test_model_file_roundtrip(self, tmp_path):
        pairs = synthetic.random_projection_instance(4, d=5, n_pairs=20)
        model = hi.train_projection_model(pairs, k=3, seed=9)
        path = tmp_path / "projection.model.json"
        hi.save_projection_model(model, path)
        again = hi.load_projection_model(path)
        assert again.dimension == model.dimension
        assert again.k == model.k
        assert again.delta == model.delta
        assert again.seed == model.seed
        for a, b in zip(again.matrices, model.matrices):
            assert np.array_equal(a, b)
        for ca, cb in zip(again.clusters, model.clusters):
            assert np.array_equal(ca.centroid, cb.centroid)
            assert ca.member_count == cb.member_count

    def test_labeled_pair_parsing(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        path.write_text("苹果\t水果\t1\n水果\t苹果\t0\n", encoding="utf-8")
        assert hi.load_labeled_pairs(path) == [("苹果", "水果", 1), ("水果", "苹果", 0)]
        bad = tmp_path / "bad.tsv"
        bad.write_text("a\tb\t2\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 1"):
            hi.load_labeled_pairs(bad)


class TestClusterCountSelection:
    def test_recovers_generating_cluster_count(self):
        inst = synthetic.two_matrix_instance(0, n_train=120, n_validation=40)
        pairs = hi.make_training_pairs(inst.train_positives, inst.table)
        validation = [
            (hi.make_training_pairs([(a, b)], inst.table)[0], lbl)
            for a, b, lbl in inst.validation
        ]
        assert hi.select_cluster_count(pairs, validation, seed=0) == 2

    def test_falls_back_without_positive_validation(self):
        pairs = synthetic.random_projection_instance(0, d=4, n_pairs=6)
        assert hi.select_cluster_count(pairs, [], seed=0) == 6  # min(default, n)

    def test_ties_resolve_to_smallest_k(self):
        # zero hyponym vectors give every K the same residual, so the
        # smaller K must win
        pairs = pairs_from_offsets([[1.0, 0.0, 0.0]] * 12)
        validation = [(pairs[0], 1)]
        assert hi.select_cluster_count(pairs, validation, seed=0) == 1
