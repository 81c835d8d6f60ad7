import numpy as np
import pytest

from cilin import discovery as dsc
from cilin.errors import TrainingError
from cilin.rankers import (
    TrainingConfig,
    auc_score,
    load_ensemble,
    save_ensemble,
    train_rankers,
)
from cilin.synthetic import separable_features


def one_dim_rows(n=40):
    """Positives at +1, negatives at -1 on feature 0, rest zero."""
    rows = []
    for i in range(n):
        feat = np.zeros(6)
        feat[0] = 1.0 if i % 2 == 0 else -1.0
        feat[0] += 0.01 * (i % 5)
        rows.append((feat, 1 if i % 2 == 0 else 0))
    return rows


class TestTraining:
    def test_separable_scores_ordered(self):
        rows = one_dim_rows()
        ensemble = train_rankers(rows, TrainingConfig(seed=0))
        pos = [ensemble.score_one(f) for f, lbl in rows if lbl == 1]
        neg = [ensemble.score_one(f) for f, lbl in rows if lbl == 0]
        assert min(pos) > max(neg)

    def test_identical_features_equal_scores(self):
        feat = np.ones(6)
        rows = [(feat, 1), (feat, 0), (feat, 1), (feat, 0)]
        ensemble = train_rankers(rows, TrainingConfig(seed=0))
        scores = {round(ensemble.score_one(feat), 12) for feat, _ in rows}
        assert len(scores) == 1

    def test_empty_data_rejected(self):
        with pytest.raises(TrainingError):
            train_rankers([], TrainingConfig())

    def test_single_class_rejected(self):
        rows = [(np.zeros(6), 1), (np.ones(6), 1)]
        with pytest.raises(TrainingError, match="both labels"):
            train_rankers(rows, TrainingConfig())

    def test_wrong_feature_length_rejected(self):
        rows = [(np.zeros(5), 1), (np.ones(5), 0)]
        with pytest.raises(TrainingError, match="length 6"):
            train_rankers(rows, TrainingConfig())

    def test_scores_lie_in_unit_interval(self):
        rows = separable_features(3, n_pos=50, n_neg=50)
        ensemble = train_rankers(rows, TrainingConfig(seed=3))
        wild = np.array([1e3, -1e3, 1e3, -1e3, 1e3, -1e3])
        for features in [wild, -wild, np.zeros(6)]:
            assert 0.0 <= ensemble.score_one(features) <= 1.0

    def test_deterministic_given_seed(self):
        rows = separable_features(1, n_pos=60, n_neg=60)
        a = train_rankers(rows, TrainingConfig(seed=7))
        b = train_rankers(rows, TrainingConfig(seed=7))
        assert np.array_equal(a.linear_svm.weights, b.linear_svm.weights)
        assert np.array_equal(a.rbf_svm.dual_coef, b.rbf_svm.dual_coef)
        assert a.calibration["logistic"].a == b.calibration["logistic"].a


class TestMonotonicity:
    def test_positive_weight_never_decreases_calibrated_score(self):
        rows = separable_features(5, n_pos=80, n_neg=80)
        ensemble = train_rankers(rows, TrainingConfig(seed=5))
        for model_name in ("linear_svm", "logistic"):
            model = getattr(ensemble, model_name)
            cal = ensemble.calibration[model_name]
            positive_dims = [i for i in range(6) if model.weights[i] > 0]
            base = np.zeros(6)
            for dim in positive_dims:
                lo = float(cal.apply(model.decision(base[None, :]))[0])
                bumped = base.copy()
                bumped[dim] += 1.0
                hi = float(cal.apply(model.decision(bumped[None, :]))[0])
                assert hi >= lo


class TestCalibrationAndPersistence:
    def test_calibration_slope_nonnegative(self):
        rows = separable_features(2, n_pos=40, n_neg=40)
        ensemble = train_rankers(rows, TrainingConfig(seed=2))
        for cal in ensemble.calibration.values():
            assert cal.a >= 0.0

    def test_model_file_roundtrip(self, tmp_path):
        rows = separable_features(4, n_pos=60, n_neg=60)
        ensemble = train_rankers(rows, TrainingConfig(seed=4))
        path = tmp_path / "ranker.model.json"
        save_ensemble(ensemble, path)
        again = load_ensemble(path)
        probe = np.stack([r[0] for r in rows[:20]])
        assert np.array_equal(ensemble.score(probe), again.score(probe))

    def test_model_file_is_self_describing(self, tmp_path):
        import json

        rows = one_dim_rows()
        ensemble = train_rankers(rows, TrainingConfig(seed=0))
        path = tmp_path / "m.json"
        save_ensemble(ensemble, path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        assert doc["format_version"] == 1
        assert doc["feature_count"] == 6
        assert set(doc["calibration"]) == {"linear_svm", "rbf_svm", "logistic"}


class TestRankCandidates:
    def build_set(self, scores_to_terms):
        cands = []
        for term in scores_to_terms:
            cands.append(dsc.Candidate(term=term, sources={dsc.SOURCE_TAG}, features=np.zeros(6)))
        return dsc.CandidateSet(entity="e", candidates=cands)

    def test_empty_set(self):
        rows = one_dim_rows()
        ensemble = train_rankers(rows, TrainingConfig(seed=0))
        ranked = dsc.rank_candidates(dsc.CandidateSet(entity="e"), ensemble, 0.5)
        assert len(ranked) == 0

    def test_threshold_and_order(self):
        rows = one_dim_rows()
        ensemble = train_rankers(rows, TrainingConfig(seed=0))
        strong = np.zeros(6)
        strong[0] = 1.0
        weak = np.zeros(6)
        weak[0] = -1.0
        cands = dsc.CandidateSet(
            entity="e",
            candidates=[
                dsc.Candidate(term="弱", sources={dsc.SOURCE_TAG}, features=weak),
                dsc.Candidate(term="强", sources={dsc.SOURCE_TAG}, features=strong),
            ],
        )
        ranked = dsc.rank_candidates(cands, ensemble, 0.5)
        assert ranked.terms() == ["强"]
        assert ranked.candidates[0].score > 0.5

    def test_identical_features_tie_by_code_point(self):
        rows = one_dim_rows()
        ensemble = train_rankers(rows, TrainingConfig(seed=0))
        feat = np.zeros(6)
        feat[0] = 1.0
        cands = dsc.CandidateSet(
            entity="e",
            candidates=[
                dsc.Candidate(term="b", sources={dsc.SOURCE_TAG}, features=feat),
                dsc.Candidate(term="a", sources={dsc.SOURCE_TAG}, features=feat.copy()),
            ],
        )
        ranked = dsc.rank_candidates(cands, ensemble, 0.0)
        assert ranked.terms() == ["a", "b"]
        assert ranked.candidates[0].score == ranked.candidates[1].score

    def test_no_term_duplicated_and_multiset_preserved(self):
        rows = one_dim_rows()
        ensemble = train_rankers(rows, TrainingConfig(seed=0))
        feats = np.zeros(6)
        cands = dsc.CandidateSet(
            entity="e",
            candidates=[
                dsc.Candidate(term=t, sources={dsc.SOURCE_TAG}, features=feats.copy())
                for t in ("x", "y", "z")
            ],
        )
        ranked = dsc.rank_candidates(cands, ensemble, 0.0)
        assert sorted(ranked.terms()) == ["x", "y", "z"]


class TestAuc:
    def test_perfect_ranking(self):
        scores = np.array([0.9, 0.8, 0.2, 0.1])
        labels = np.array([1, 1, 0, 0])
        assert auc_score(scores, labels) == 1.0

    def test_reversed_ranking(self):
        scores = np.array([0.1, 0.2, 0.8, 0.9])
        labels = np.array([1, 1, 0, 0])
        assert auc_score(scores, labels) == 0.0

    def test_ties_give_half(self):
        scores = np.zeros(4)
        labels = np.array([1, 1, 0, 0])
        assert auc_score(scores, labels) == 0.5
