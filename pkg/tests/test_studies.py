"""Tests for count-distribution comparisons, multi-information and synthetic benchmarks."""

import numpy as np
import pytest
from scipy.stats import binom

from flipscout.evaluation.studies import (
    artificial_benchmark,
    fit_count_models,
    fit_exact_ml,
    ideal_accuracy,
    multi_information_fraction,
    noise_ratio_study,
    pairwise_count_distribution,
    reconstruction_error,
    reconstruction_study,
    reversal_count_distributions,
    reversal_group_study,
    sign_cross_correlation,
    state_frequencies,
)
from flipscout.exceptions import (
    CapacityError,
    InsufficientDataError,
    ShapeError,
    UndefinedCorrelationError,
)
from flipscout.infer import DgParams, fit_poisson
from flipscout.ingest import ReversalPanel
from flipscout.model import (
    CouplingSet,
    ReversalCouplingSet,
    enumerate_states,
    reversal_to_ising,
    state_probabilities,
)
from flipscout.sample import GlauberConfig, exact_sample


@pytest.fixture
def bernoulli_reversals(rng):
    """Independent reversals of five entities at rate 0.3."""
    flips = (rng.random((5, 5000)) < 0.3).astype(np.int8)
    return ReversalPanel(
        entities=[f"e{i}" for i in range(5)],
        timestamps=[str(t) for t in range(5000)],
        flips=flips,
    )


class TestCountDistributions:
    """Test distributions of the number of simultaneous reversals."""

    def test_uniform_model_is_binomial(self):
        """Test that W = 0 gives Binomial(N, ½) counts."""
        uniform = ReversalCouplingSet(W=np.zeros((3, 3)))

        distribution, stderr = pairwise_count_distribution(uniform)

        np.testing.assert_allclose(distribution, [1 / 8, 3 / 8, 3 / 8, 1 / 8])
        assert stderr is None

    def test_large_n_is_sampled(self):
        """Test the Glauber path above the enumeration cap."""
        distribution, stderr = pairwise_count_distribution(
            ReversalCouplingSet(W=np.zeros((13, 13))), draws=20_000, seed=1, burn_in_records=100
        )

        assert distribution.size == 14
        assert distribution.sum() == pytest.approx(1.0)
        assert stderr is not None
        expected = binom.pmf(np.arange(14), 13, 0.5)
        assert np.all(np.abs(distribution - expected) < 6 * np.maximum(stderr, 1e-3))

    def test_fitted_models(self, bernoulli_reversals):
        """Test that every distribution covers 0..N and sums to one."""
        result = fit_count_models(bernoulli_reversals, dg_draws=20_000, seed=2)

        for name in ("empirical", "pairwise", "poisson", "dg"):
            values = getattr(result, name)
            assert values.size == 6
            assert values.sum() == pytest.approx(1.0)
        assert result.pairwise_method == "exact"
        assert list(result.to_frame().columns) == [
            "count",
            "empirical",
            "pairwise",
            "poisson",
            "dg",
            "dg_stderr",
        ]

    def test_pairwise_beats_poisson_on_bernoulli_counts(self, bernoulli_reversals):
        """Test that the pairwise model fits binomial counts better than Poisson."""
        table = fit_count_models(bernoulli_reversals, dg_draws=20_000).kl_table()

        kl = table.set_index("model")["kl"]
        assert kl["pairwise"] < 0.005
        assert kl["pairwise"] < kl["poisson"]
        assert (table["kl"] >= 0).all()

    def test_smoothing_recorded(self):
        """Test that an empty model cell is smoothed with ε = 1/(2T) and reported."""
        flips = np.array([[1, 0, 1, 0], [1, 0, 0, 0]], dtype=np.int8)
        reversals = ReversalPanel(entities=["a", "b"], timestamps=list("0123"), flips=flips)
        # Perfectly correlated latents never produce exactly one reversal
        dg = DgParams(mu=[0.0, 0.0], sigma=np.ones((2, 2)))
        pairwise = ReversalCouplingSet(W=np.zeros((2, 2)))
        poisson = fit_poisson(reversals)

        table = reversal_count_distributions(
            reversals, pairwise, poisson, dg, dg_draws=1000
        ).kl_table()

        flags = table.set_index("model")
        assert flags.loc["dg", "smoothed"]
        assert flags.loc["dg", "epsilon"] == pytest.approx(1 / 8)
        assert not flags.loc["pairwise", "smoothed"]
        assert flags.loc["poisson", "epsilon"] == 0.0

    def test_model_sizes_checked(self, bernoulli_reversals):
        """Test that model dimensions must match the panel."""
        with pytest.raises(ShapeError):
            reversal_count_distributions(
                bernoulli_reversals,
                ReversalCouplingSet(W=np.zeros((2, 2))),
                fit_poisson(bernoulli_reversals),
                DgParams(mu=np.zeros(5), sigma=np.eye(5)),
            )

    def test_group_study(self, bernoulli_reversals):
        """Test one summary row per group size and model."""
        study = reversal_group_study(
            bernoulli_reversals, [2, 3], n_groups=3, dg_draws=5000, seed=7
        )

        assert len(study.summary) == 6
        assert set(study.summary["model"]) == {"pairwise", "poisson", "dg"}
        assert (study.summary["groups"] == 3).all()
        assert study.seed == 7

    @pytest.mark.slow
    def test_pairwise_tracks_dg_on_correlated_reversals(self, rng):
        """Test that on correlated reversals the pairwise KL stays within 3σ of the DG KL."""
        upper = np.triu(0.3 + 0.05 * rng.standard_normal((10, 10)), k=1)
        W = upper + upper.T
        np.fill_diagonal(W, -1.5)
        signs = exact_sample(reversal_to_ising(ReversalCouplingSet(W=W)), 5000, seed=4).signs
        reversals = ReversalPanel(
            entities=[f"e{i}" for i in range(10)],
            timestamps=[str(t) for t in range(5000)],
            flips=((signs + 1) // 2).astype(np.int8),
        )

        study = reversal_group_study(reversals, [5], n_groups=10, dg_draws=100_000, seed=3)

        summary = study.summary.set_index("model")
        pairwise, dg = summary.loc["pairwise"], summary.loc["dg"]
        sigma = max(dg["kl_std"], pairwise["kl_std"])
        assert abs(pairwise["kl_mean"] - dg["kl_mean"]) <= 3 * sigma
        assert pairwise["kl_mean"] < 0.01
        assert (summary["groups"] == 10).all()

    def test_group_size_checked(self, bernoulli_reversals):
        """Test that groups cannot exceed N."""
        with pytest.raises(ShapeError):
            reversal_group_study(bernoulli_reversals, [6])


class TestMultiInformation:
    """Test entropy decomposition of the state distribution."""

    def test_state_frequencies_order(self, sign_panel):
        """Test frequencies in enumeration order."""
        panel = sign_panel([[-1, -1, 1, 1], [-1, 1, 1, 1]])

        np.testing.assert_allclose(state_frequencies(panel), [0.25, 0.25, 0.0, 0.5])

    def test_exact_ml_matches_moments(self, random_couplings):
        """Test that the enumerated fit reproduces means and correlations."""
        panel = exact_sample(random_couplings(4, seed=6), 5000, seed=3)

        params = fit_exact_ml(panel)

        states = enumerate_states(4).astype(float)
        p = state_probabilities(params)
        signs = panel.signs.astype(float)
        np.testing.assert_allclose(p @ states, signs.mean(axis=1), atol=1e-5)
        model_pairs = states.T @ (p[:, None] * states)
        np.testing.assert_allclose(model_pairs, signs @ signs.T / panel.t, atol=1e-5)

    def test_pairwise_data(self, random_couplings):
        """Test that the pairwise model captures nearly all multi-information of pairwise data."""
        panel = exact_sample(random_couplings(5, scale=0.4, seed=2), 50_000, seed=8)

        result = multi_information_fraction(panel)

        assert result.empirical_entropy <= result.pairwise_entropy + 1e-9
        assert result.pairwise_entropy <= result.independent_entropy + 1e-9
        assert result.fraction is not None
        assert 0.95 < result.fraction < 1.05

    def test_independent_data_undefined(self, random_panel):
        """Test that negligible multi-information leaves the fraction undefined."""
        result = multi_information_fraction(random_panel(3, 2000))

        assert result.fraction is None

    def test_capacity(self, random_panel):
        """Test that more than twelve entities are refused."""
        with pytest.raises(CapacityError):
            multi_information_fraction(random_panel(13, 20))


class TestReconstruction:
    """Test coupling reconstruction benchmarks."""

    def test_error_value(self):
        """Test Δ = √N · RMS over pairs."""
        truth = CouplingSet.homogeneous(4, 0.2)
        estimate = CouplingSet.homogeneous(4, 0.25)

        assert reconstruction_error(truth, estimate) == pytest.approx(0.1)
        assert reconstruction_error(truth, truth) == 0.0

    def test_error_shapes_checked(self):
        """Test that both coupling sets must have equal size."""
        with pytest.raises(ShapeError):
            reconstruction_error(CouplingSet.zeros(3), CouplingSet.zeros(4))

    def test_study(self, random_couplings):
        """Test a refit on Glauber data from known couplings."""
        params = random_couplings(6, scale=0.1, seed=3)

        study = reconstruction_study(params, 5000, seed=2)

        assert study.estimate.n == 6
        assert study.seed == 2
        assert study.delta < 0.3

    def test_noise_ratio(self):
        """Test the spread of couplings recovered from homogeneous data."""
        study = noise_ratio_study(6, 5000, 0.1, sigma_j=0.1, seed=4)

        assert study.sigma_noise > 0
        assert study.ratio == pytest.approx(study.sigma_noise / 0.1)
        assert study.recovered_mean == pytest.approx(0.1, abs=0.05)

    def test_noise_ratio_without_reference(self):
        """Test that the ratio is omitted without a reference spread."""
        assert noise_ratio_study(4, 1000, 0.1, seed=1).ratio is None


class TestBenchmarks:
    """Test the artificial-data benchmark and the Bayes accuracy."""

    def test_ideal_accuracy_without_couplings(self):
        """Test that zero parameters give an ideal accuracy of one half."""
        assert ideal_accuracy(CouplingSet.zeros(3)) == pytest.approx(0.5)

    def test_ideal_accuracy_pair(self):
        """Test ½(1 + tanh J) for two coupled entities."""
        params = CouplingSet.homogeneous(2, 0.7)

        assert ideal_accuracy(params) == pytest.approx(0.5 * (1 + np.tanh(0.7)))

    def test_ideal_accuracy_grows_with_coupling(self):
        """Test monotonicity in the homogeneous coupling."""
        values = [ideal_accuracy(CouplingSet.homogeneous(5, j)) for j in (0.05, 0.1, 0.2)]

        assert values[0] < values[1] < values[2]

    def test_artificial_benchmark(self):
        """Test the cross-validation pipeline on data from a known model."""
        params = CouplingSet.homogeneous(4, 0.25)

        result = artificial_benchmark(params, 3000, n_folds=3, glauber=GlauberConfig(seed=9))

        assert result.ideal_accuracy == pytest.approx(ideal_accuracy(params))
        assert 0.5 <= result.accuracy <= result.ideal_accuracy + 0.05
        assert result.auc > 0.55
        assert result.seed == 9
        assert len(result.cv.folds) == 3


    @pytest.mark.slow
    def test_artificial_benchmark_scale(self):
        """Test accuracy and AUC of eight homogeneously coupled entities over ten folds."""
        weak = artificial_benchmark(CouplingSet.homogeneous(8, 0.1), 2500)
        result = artificial_benchmark(CouplingSet.homogeneous(8, 0.2), 2500)

        assert len(result.cv.folds) == 10
        assert 0.83 <= result.accuracy <= 0.91
        assert 0.861 <= result.auc <= 0.951
        assert result.accuracy <= result.ideal_accuracy + 0.02
        assert weak.auc < result.auc


class TestCrossCorrelation:
    """Test sign cross-correlograms."""

    def test_lagged_copy(self, rng, sign_panel):
        """Test a correlation of one at the shift between a series and its delayed copy."""
        x = np.where(rng.random(300) < 0.5, -1, 1)
        panel = sign_panel([x, np.roll(x, 1)])

        frame = sign_cross_correlation(panel, 0, 1, 3)

        assert frame["lag"].tolist() == [-3, -2, -1, 0, 1, 2, 3]
        assert frame.set_index("lag").loc[1, "correlation"] == pytest.approx(1.0)
        assert abs(frame.set_index("lag").loc[0, "correlation"]) < 0.2

    def test_constant_series(self, sign_panel):
        """Test that a constant series has no correlation."""
        with pytest.raises(UndefinedCorrelationError):
            sign_cross_correlation(sign_panel([[1, 1, 1, 1], [1, -1, 1, -1]]), 0, 1, 1)

    def test_lag_too_long(self, random_panel):
        """Test that the panel must be longer than the lag window."""
        with pytest.raises(InsufficientDataError):
            sign_cross_correlation(random_panel(2, 4), 0, 1, 3)

    def test_index_checked(self, random_panel):
        """Test that entity indices must exist."""
        with pytest.raises(IndexError):
            sign_cross_correlation(random_panel(2, 10), 0, 2, 1)
