"""Tests for out-of-sample prediction, cross-validation and block studies."""

import numpy as np
import pytest

from flipscout.evaluation import crossval
from flipscout.evaluation.crossval import (
    FoldPlan,
    accuracy_vs_block_distance,
    accuracy_vs_subset_size,
    accuracy_vs_test_length,
    cross_validate,
    fit_model,
    predict_bins,
    predict_panel,
)
from flipscout.exceptions import (
    CapacityError,
    FitDivergenceError,
    InsufficientDataError,
    ShapeError,
)
from flipscout.infer import FitConfig
from flipscout.model import CouplingSet
from flipscout.sample import GlauberConfig, glauber_sample


@pytest.fixture
def coupled_panel():
    """Glauber data from a ferromagnetic model, where neighbors predict flips."""
    return glauber_sample(CouplingSet.homogeneous(5, 0.2), 3000, GlauberConfig(seed=21))


class TestPredictPanel:
    """Test flip probabilities from observed context."""

    def test_zero_params(self, sign_panel):
        """Test probability ½ everywhere and outcomes from sign changes."""
        panel = sign_panel([[1, -1, -1, 1], [1, 1, 1, 1]])

        run = predict_panel(panel, CouplingSet.zeros(2), 1, 4)

        np.testing.assert_allclose(run.probability, 0.5)
        assert run.actual.tolist() == [1, 0, 1, 0, 0, 0]
        assert run.entity.tolist() == [0, 0, 0, 1, 1, 1]
        assert run.time.tolist() == [1, 2, 3, 1, 2, 3]

    def test_matches_formula(self, random_panel, random_couplings):
        """Test ½[1 − s_{t−1} tanh(field)] at one event."""
        panel = random_panel(3, 10)
        params = random_couplings(3, lags=1)
        s = panel.signs.astype(float)
        field = params.J[1] @ s[:, 5] + params.h[1] + params.lags[0][1] @ s[:, 4]

        run = predict_bins(panel, params, np.array([5]))

        assert run.probability[1] == pytest.approx(0.5 * (1 - s[1, 4] * np.tanh(field)))

    def test_first_bin_has_no_previous_sign(self, random_panel):
        """Test that bin 0 cannot be predicted."""
        with pytest.raises(ShapeError):
            predict_panel(random_panel(2, 5), CouplingSet.zeros(2), 0, 5)

    def test_history_required(self, random_panel, random_couplings):
        """Test that bins before L are rejected for a historical model."""
        with pytest.raises(ShapeError):
            predict_panel(random_panel(2, 10), random_couplings(2, lags=2), 1, 5)

    def test_range_checked(self, random_panel):
        """Test that the range must lie inside the panel."""
        with pytest.raises(ShapeError):
            predict_panel(random_panel(2, 5), CouplingSet.zeros(2), 3, 9)

    def test_entity_count_checked(self, random_panel):
        """Test that parameters must match the panel's entities."""
        with pytest.raises(ShapeError):
            predict_panel(random_panel(3, 5), CouplingSet.zeros(2), 1, 5)


class TestFoldPlan:
    """Test fold construction."""

    def test_covers_usable_bins_once(self):
        """Test that folds partition [max(L,1), T) with sizes differing by at most one."""
        plan = FoldPlan.build(103, lags=2, k=10)

        sizes = [f.size for f in plan.folds]
        assert max(sizes) - min(sizes) <= 1
        np.testing.assert_array_equal(plan.usable, np.arange(2, 103))
        assert plan.boundaries()[0] == (2, 13)

    def test_contiguous_by_default(self):
        """Test that unshuffled folds are contiguous blocks."""
        plan = FoldPlan.build(50, k=5)

        for fold in plan.folds:
            assert np.all(np.diff(fold) == 1)

    def test_shuffle_seeded(self):
        """Test that shuffled plans depend only on the seed."""
        first = FoldPlan.build(60, k=4, shuffle=True, seed=3)
        second = FoldPlan.build(60, k=4, shuffle=True, seed=3)

        for a, b in zip(first.folds, second.folds):
            np.testing.assert_array_equal(a, b)
        assert any(np.any(np.diff(f) > 1) for f in first.folds)

    def test_train_bins_avoid_test_windows(self):
        """Test that no training window [t−L, t] touches the test fold."""
        plan = FoldPlan.build(20, lags=1, k=2)

        assert plan.train_bins(1).tolist() == list(range(1, 11))
        assert plan.train_bins(0).tolist() == list(range(12, 20))

    def test_train_and_test_disjoint(self):
        """Test disjointness for every fold of a shuffled historical plan."""
        plan = FoldPlan.build(200, lags=2, k=5, shuffle=True, seed=1)

        for f in range(plan.k):
            train = plan.train_bins(f)
            for tau in range(3):
                assert np.intersect1d(train - tau, plan.test_bins(f)).size == 0

    def test_requires_two_folds(self):
        """Test that k must be at least 2."""
        with pytest.raises(ShapeError):
            FoldPlan.build(50, k=1)

    def test_too_few_bins(self):
        """Test that each fold needs at least one bin."""
        with pytest.raises(InsufficientDataError):
            FoldPlan.build(5, k=10)


class TestFitModel:
    """Test the model variants compared out of sample."""

    def test_independent(self, random_panel):
        """Test that the independent variant has no couplings and no report."""
        params, report = fit_model(random_panel(3, 100), "independent")

        assert report is None
        assert np.all(params.J == 0)

    def test_homogeneous(self, random_panel):
        """Test a single coupling value and no fields."""
        params, report = fit_model(random_panel(3, 200), "homogeneous")

        off = params.J[~np.eye(3, dtype=bool)]
        assert np.allclose(off, off[0])
        assert np.all(params.h == 0)
        assert report is not None

    def test_history_only(self, random_panel):
        """Test that the history-only variant keeps J = 0."""
        params, _ = fit_model(random_panel(3, 200), "history_only", lags=1)

        assert np.all(params.J == 0)
        assert params.l == 1

    def test_invalid_combinations(self, random_panel):
        """Test variants that cannot take the requested lags."""
        panel = random_panel(2, 50)

        with pytest.raises(ShapeError):
            fit_model(panel, "history_only", lags=0)
        with pytest.raises(ShapeError):
            fit_model(panel, "homogeneous", lags=1)
        with pytest.raises(ShapeError):
            fit_model(panel, "quadratic")


class TestCrossValidate:
    """Test k-fold cross-validation."""

    def test_uninformative_data(self, random_panel):
        """Test that independent fair signs give an AUC near one half."""
        result = cross_validate(random_panel(4, 2000))

        assert len(result.folds) == 10
        assert result.mean_auc == pytest.approx(0.5, abs=0.05)
        assert len(result.run) == 4 * 1999

    def test_pairwise_beats_independent(self, coupled_panel):
        """Test that couplings carry information about flips."""
        pairwise = cross_validate(coupled_panel)
        independent = cross_validate(coupled_panel, kind="independent")

        assert pairwise.mean_auc > 0.58
        assert pairwise.mean_auc > independent.mean_auc + 0.05

    def test_aggregates(self, coupled_panel):
        """Test the fold table and the averaged curves."""
        result = cross_validate(coupled_panel, folds=FoldPlan.build(coupled_panel.t, k=4))

        frame = result.fold_frame()
        assert len(frame) == 4
        assert frame["auc"].tolist() == result.aucs.tolist()
        assert result.mean_tpr.size == result.fpr_grid.size
        assert result.mean_tpr[-1] == 1.0
        assert 0.5 <= result.max_mean_accuracy <= 1.0
        assert 0.5 <= result.max_entity_first_accuracy <= 1.0
        assert result.mean_max_accuracy >= result.max_mean_accuracy - 1e-12
        assert len(result.per_entity) == 5

    def test_historical_model(self, coupled_panel):
        """Test cross-validation of a model with two lags."""
        result = cross_validate(coupled_panel, lags=2, folds=FoldPlan.build(3000, 2, k=3))

        assert result.lags == 2
        assert result.run.time.min() >= 2

    def test_threads_do_not_change_scores(self, random_panel):
        """Test that parallel folds give the same scores as serial ones."""
        panel = random_panel(3, 600)

        serial = cross_validate(panel)
        parallel = cross_validate(panel, threads=4)

        np.testing.assert_array_equal(serial.aucs, parallel.aucs)

    def test_plan_lags_checked(self, random_panel):
        """Test that the plan must be built for the model's lags."""
        with pytest.raises(ShapeError):
            cross_validate(random_panel(2, 100), lags=1, folds=FoldPlan.build(100, 0))

    def test_divergence_names_fold(self, random_panel, monkeypatch):
        """Test that a divergent fit reports the fold it happened in."""

        def diverge(*args, **kwargs):
            raise FitDivergenceError("non-finite objective", iteration=3)

        monkeypatch.setattr(crossval, "fit_rpml", diverge)

        with pytest.raises(FitDivergenceError) as exc_info:
            cross_validate(random_panel(2, 100))

        assert exc_info.value.fold == 0
        assert exc_info.value.iteration == 3


class TestBlockStudies:
    """Test subset, test-length and block-distance studies."""

    def test_subset_sizes(self, coupled_panel):
        """Test one score per subset and a summary per size."""
        study = accuracy_vs_subset_size(coupled_panel.window(0, 1000), [1, 2, 5], n_folds=3)

        assert study.summary["subsets"].tolist() == [5, 10, 1]
        assert len(study.scores) == 16
        assert study.seed is None

    def test_subset_accuracy_grows(self, coupled_panel):
        """Test that seeing more entities does not hurt prediction on average."""
        study = accuracy_vs_subset_size(coupled_panel, [1, 5], n_folds=3)

        means = study.summary.set_index("k")["auc_mean"]
        assert means[5] > means[1]

    def test_subset_sampling(self, coupled_panel):
        """Test that max_subsets caps and records the draw."""
        study = accuracy_vs_subset_size(
            coupled_panel.window(0, 600), [2], n_folds=3, max_subsets=3, seed=4
        )

        assert len(study.scores) == 3
        assert study.seed == 4

    def test_subset_capacity(self, random_panel):
        """Test that large N requires subsampling."""
        with pytest.raises(CapacityError):
            accuracy_vs_subset_size(random_panel(13, 50), [2])

    def test_subset_size_checked(self, random_panel):
        """Test that k must lie in [1, N]."""
        with pytest.raises(ShapeError):
            accuracy_vs_subset_size(random_panel(3, 100), [4], n_folds=2)

    def test_test_lengths(self, coupled_panel):
        """Test one row per testing length."""
        study = accuracy_vs_test_length(
            coupled_panel, 1000, [10, 100, 500], n_blocks=3
        )

        assert study.frame["length"].tolist() == [10, 100, 500]
        assert study.frame["blocks"].tolist() == [3, 3, 3]
        assert study.frame["accuracy_mean"].between(0, 1).all()

    def test_test_lengths_fit_in_panel(self, coupled_panel):
        """Test that learning plus testing must fit in T."""
        with pytest.raises(InsufficientDataError):
            accuracy_vs_test_length(coupled_panel, 2000, [600], n_blocks=2)

    def test_block_distance(self, coupled_panel):
        """Test disjoint successive blocks and the statistical yardstick."""
        study = accuracy_vs_block_distance(coupled_panel, 1000, 400)

        assert study.frame["block"].tolist() == [0, 1, 2, 3, 4]
        assert study.frame["start"].tolist() == [1000, 1400, 1800, 2200, 2600]
        assert study.statistical_error == pytest.approx(0.05)
        assert study.spread >= 0

    def test_block_distance_needs_a_block(self, random_panel):
        """Test that at least one full block must follow the learning block."""
        with pytest.raises(InsufficientDataError):
            accuracy_vs_block_distance(random_panel(2, 100), 80, 30)

    def test_learning_block_checked(self, random_panel):
        """Test that the learning block must exceed the lags."""
        with pytest.raises(InsufficientDataError):
            accuracy_vs_block_distance(random_panel(2, 100), 1, 10, lags=2, config=FitConfig())
