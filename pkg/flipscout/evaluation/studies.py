"""Model comparisons beyond flip prediction.

Simultaneous-reversal count distributions and their KL divergences,
multi-information, inference-noise and reconstruction benchmarks on
synthetic Glauber data, cross-correlograms and the Bayes accuracy ceiling.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.special import logsumexp
from scipy.stats import entropy

from flipscout.config import DEFAULT_FOLDS, ENUMERATION_CAP
from flipscout.evaluation.crossval import CvResult, FoldPlan, cross_validate
from flipscout.evaluation.metrics import kl_divergence, smooth_support
from flipscout.exceptions import (
    AttainabilityError,
    CapacityError,
    FitDivergenceError,
    InsufficientDataError,
    ShapeError,
    UndefinedCorrelationError,
)
from flipscout.infer.base import FitConfig
from flipscout.infer.baselines import PoissonModel, fit_poisson
from flipscout.infer.gaussian import DgParams, fit_dichotomized_gaussian
from flipscout.infer.pseudolikelihood import fit_rpml
from flipscout.infer.reversal import fit_reversal_pairwise
from flipscout.ingest import ReversalPanel, SignPanel
from flipscout.model import (
    CouplingSet,
    ReversalCouplingSet,
    enumerate_states,
    reversal_state_probabilities,
    reversal_to_ising,
    state_probabilities,
)
from flipscout.sample import GlauberConfig, glauber_sample, sample_dg

logger = logging.getLogger(__name__)

# Largest N whose reversal-count distributions and entropies are enumerated
SMALL_N_CAP = 12

DEFAULT_DG_DRAWS = 200_000

COUNT_MODELS = ("pairwise", "poisson", "dg")


def _count_histogram(counts: np.ndarray, n: int) -> np.ndarray:
    return np.bincount(counts, minlength=n + 1)[: n + 1] / counts.size


def _binomial_error(p: np.ndarray, draws: int) -> np.ndarray:
    return np.sqrt(p * (1.0 - p) / draws)


@dataclass
class CountDistributions:
    """Distributions of the number of simultaneous reversals, 0..N."""

    empirical: np.ndarray
    pairwise: np.ndarray
    poisson: np.ndarray
    dg: np.ndarray
    n_bins: int
    dg_stderr: np.ndarray
    pairwise_stderr: Optional[np.ndarray] = None
    pairwise_method: str = "exact"
    seed: int = 0

    @property
    def n(self) -> int:
        return self.empirical.size - 1

    def model(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def kl_table(self) -> pd.DataFrame:
        """KL(empirical ‖ model) per model, smoothing empty model cells with ε = 1/(2T)."""
        epsilon = 1.0 / (2.0 * self.n_bins)
        rows = []
        for name in COUNT_MODELS:
            q, smoothed = smooth_support(self.empirical, self.model(name), epsilon)
            rows.append(
                {
                    "model": name,
                    "kl": kl_divergence(self.empirical, q),
                    "smoothed": smoothed,
                    "epsilon": epsilon if smoothed else 0.0,
                }
            )
        return pd.DataFrame(rows)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "count": np.arange(self.n + 1),
                "empirical": self.empirical,
                "pairwise": self.pairwise,
                "poisson": self.poisson,
                "dg": self.dg,
                "dg_stderr": self.dg_stderr,
            }
        )
        if self.pairwise_stderr is not None:
            frame["pairwise_stderr"] = self.pairwise_stderr
        return frame


def pairwise_count_distribution(
    params: ReversalCouplingSet,
    draws: int = DEFAULT_DG_DRAWS,
    seed: int = 0,
    exact_cap: int = SMALL_N_CAP,
    burn_in_records: int = 1000,
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Count distribution of the reversal model, with standard errors when sampled."""
    n = params.n
    if n <= exact_cap:
        probabilities = reversal_state_probabilities(params, cap=exact_cap)
        counts = enumerate_states(n, cap=exact_cap, binary=True).sum(axis=1)
        return np.bincount(counts, weights=probabilities, minlength=n + 1), None

    logger.info(f"N={n} above {exact_cap}: sampling the reversal model with Glauber dynamics")
    panel = glauber_sample(
        reversal_to_ising(params),
        draws,
        GlauberConfig(seed=seed, burn_in_records=burn_in_records),
    )
    distribution = _count_histogram((panel.signs == 1).sum(axis=0), n)
    return distribution, _binomial_error(distribution, draws)


def reversal_count_distributions(
    reversals: ReversalPanel,
    pairwise: ReversalCouplingSet,
    poisson: PoissonModel,
    dg: DgParams,
    dg_draws: int = DEFAULT_DG_DRAWS,
    seed: int = 0,
    exact_cap: int = SMALL_N_CAP,
) -> CountDistributions:
    """Empirical and model distributions of the number of simultaneous reversals.

    Args:
        reversals: Observed reversal indicators
        pairwise: Fitted reversal couplings
        poisson: Fitted Poisson count model
        dg: Dichotomized Gaussian fitted to the reversal indicators on ±1
        dg_draws: Draws used for the DG (and large-N pairwise) distributions
        seed: Seed of the sampled distributions
        exact_cap: Largest N whose pairwise distribution is enumerated

    Returns:
        CountDistributions over {0..N}
    """
    n = reversals.n
    if pairwise.n != n or dg.n != n:
        raise ShapeError("model sizes do not match the reversal panel")

    empirical = _count_histogram(reversals.counts.astype(int), n)
    pairwise_dist, pairwise_err = pairwise_count_distribution(
        pairwise, draws=dg_draws, seed=seed, exact_cap=exact_cap
    )
    dg_panel = sample_dg(dg, dg_draws, seed=seed)
    dg_dist = _count_histogram((dg_panel.signs == 1).sum(axis=0), n)

    return CountDistributions(
        empirical=empirical,
        pairwise=pairwise_dist,
        poisson=poisson.distribution(n),
        dg=dg_dist,
        n_bins=reversals.t,
        dg_stderr=_binomial_error(dg_dist, dg_draws),
        pairwise_stderr=pairwise_err,
        pairwise_method="exact" if pairwise_err is None else "glauber",
        seed=seed,
    )


def fit_count_models(
    reversals: ReversalPanel,
    config: Optional[FitConfig] = None,
    dg_draws: int = DEFAULT_DG_DRAWS,
    seed: int = 0,
) -> CountDistributions:
    """Fit the pairwise, Poisson and DG count models and tabulate their distributions."""
    pairwise = fit_reversal_pairwise(reversals, config).params
    poisson = fit_poisson(reversals)
    dg = fit_dichotomized_gaussian(reversals.as_signs())
    return reversal_count_distributions(reversals, pairwise, poisson, dg, dg_draws, seed)


@dataclass
class GroupStudy:
    """KL divergences over random entity groups of each size."""

    summary: pd.DataFrame
    groups: pd.DataFrame
    seed: int


def reversal_group_study(
    reversals: ReversalPanel,
    group_sizes: list[int],
    n_groups: int = 10,
    config: Optional[FitConfig] = None,
    dg_draws: int = DEFAULT_DG_DRAWS,
    seed: int = 0,
) -> GroupStudy:
    """Mean KL(empirical ‖ model) per model over random groups of entities.

    Args:
        reversals: Observed reversal indicators
        group_sizes: Group sizes to study
        n_groups: Random groups drawn per size
        config: Fit configuration of the pairwise reversal model
        dg_draws: Draws for the sampled DG distributions
        seed: Seed of the group draw and the samplers

    Returns:
        GroupStudy with mean and standard deviation per (size, model)
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    rows = []
    for size in group_sizes:
        if not 1 <= size <= reversals.n:
            raise ShapeError(f"group size {size} outside [1, {reversals.n}]")
        for g in range(n_groups):
            members = np.sort(rng.choice(reversals.n, size=size, replace=False))
            group = ReversalPanel(
                entities=[reversals.entities[i] for i in members],
                timestamps=list(reversals.timestamps),
                flips=reversals.flips[members],
            )
            try:
                table = fit_count_models(group, config, dg_draws, seed + g).kl_table()
            except AttainabilityError as e:
                logger.warning(f"Skipping group {members.tolist()}: {e}")
                continue
            for record in table.to_dict("records"):
                rows.append({"size": size, "group": g, **record})

    groups = pd.DataFrame(rows, columns=["size", "group", "model", "kl", "smoothed", "epsilon"])
    summary = (
        groups.groupby(["size", "model"])
        .agg(
            kl_mean=("kl", "mean"),
            kl_std=("kl", lambda v: float(np.std(v))),
            groups=("kl", "size"),
        )
        .reset_index()
    )
    return GroupStudy(summary=summary, groups=groups, seed=seed)


@dataclass
class MultiInformation:
    """Entropies of the independent, pairwise and empirical distributions (nats)."""

    independent_entropy: float
    pairwise_entropy: float
    empirical_entropy: float
    tolerance: float
    pairwise_params: Optional[CouplingSet] = None

    @property
    def multi_information(self) -> float:
        return self.independent_entropy - self.empirical_entropy

    @property
    def fraction(self) -> Optional[float]:
        """Share of the multi-information captured by the pairwise model, or None."""
        if self.multi_information < self.tolerance:
            return None
        return (self.independent_entropy - self.pairwise_entropy) / self.multi_information


def state_frequencies(panel: SignPanel) -> np.ndarray:
    """Empirical frequency of each state, in `enumerate_states` order."""
    bits = (panel.signs.astype(np.int64) + 1) // 2
    weights = 1 << np.arange(panel.n - 1, -1, -1, dtype=np.int64)
    index = weights @ bits
    return np.bincount(index, minlength=2**panel.n) / panel.t


def fit_exact_ml(
    panel: SignPanel, tolerance: float = 1e-7, max_iterations: int = 5000
) -> CouplingSet:
    """Maximum-likelihood pairwise model by matching enumerated moments."""
    n = panel.n
    states = enumerate_states(n, cap=SMALL_N_CAP).astype(float)
    signs = panel.signs.astype(float)
    upper = np.triu_indices(n, k=1)
    target_means = signs.mean(axis=1)
    target_pairs = (signs @ signs.T / panel.t)[upper]
    pair_products = states[:, upper[0]] * states[:, upper[1]]

    def negated(theta: np.ndarray) -> tuple[float, np.ndarray]:
        h, j = theta[:n], theta[n:]
        weights = states @ h + pair_products @ j
        log_z = logsumexp(weights)
        p = np.exp(weights - log_z)
        value = target_means @ h + target_pairs @ j - log_z
        grad = np.concatenate([target_means - p @ states, target_pairs - p @ pair_products])
        return -value, -grad

    result = minimize(
        negated,
        np.zeros(n + upper[0].size),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iterations, "gtol": tolerance, "ftol": 1e-15},
    )
    gradient_norm = float(np.abs(result.jac).max(initial=0.0))
    if not np.isfinite(result.fun) or gradient_norm > 100 * tolerance:
        raise FitDivergenceError(
            f"exact maximum-likelihood fit did not converge (gradient norm {gradient_norm:.2e})",
            iteration=int(result.nit),
        )
    J = np.zeros((n, n))
    J[upper] = result.x[n:]
    return CouplingSet(J=J + J.T, h=result.x[:n])


def multi_information_fraction(panel: SignPanel) -> MultiInformation:
    """Multi-information of the panel and the share the pairwise model accounts for.

    Args:
        panel: ±1 orientations of at most 12 entities

    Returns:
        MultiInformation; `fraction` is None when the multi-information is below
        the plug-in entropy bias scale 2·2^N/T
    """
    if panel.n > SMALL_N_CAP:
        raise CapacityError(f"multi-information needs N ≤ {SMALL_N_CAP} (got {panel.n})")
    empirical = entropy(state_frequencies(panel))
    p_up = (panel.signs == 1).mean(axis=1)
    independent = float(sum(entropy([p, 1.0 - p]) for p in p_up))

    params = fit_exact_ml(panel)
    pairwise = entropy(state_probabilities(params, cap=SMALL_N_CAP))
    result = MultiInformation(
        independent_entropy=independent,
        pairwise_entropy=float(pairwise),
        empirical_entropy=float(empirical),
        tolerance=2.0 * 2**panel.n / panel.t,
        pairwise_params=params,
    )
    logger.info(
        f"Multi-information {result.multi_information:.4f} nats; pairwise fraction "
        f"{'undefined' if result.fraction is None else f'{result.fraction:.3f}'}"
    )
    return result


def off_diagonal(J: np.ndarray) -> np.ndarray:
    return J[np.triu_indices(J.shape[0], k=1)]


def reconstruction_error(true_params: CouplingSet, est_params: CouplingSet) -> float:
    """Δ = √N times the root-mean-square coupling error over pairs i < j."""
    if true_params.J.shape != est_params.J.shape:
        raise ShapeError(
            f"coupling shapes differ: {true_params.J.shape} vs {est_params.J.shape}"
        )
    n = true_params.n
    if n < 2:
        return 0.0
    diff = off_diagonal(true_params.J) - off_diagonal(est_params.J)
    return float(np.sqrt(n) * np.sqrt(np.mean(diff**2)))


@dataclass
class ReconstructionStudy:
    delta: float
    t: int
    seed: int
    estimate: CouplingSet


def reconstruction_study(
    params: CouplingSet,
    t: int,
    config: Optional[FitConfig] = None,
    seed: int = 0,
    glauber: Optional[GlauberConfig] = None,
) -> ReconstructionStudy:
    """Sample Glauber data from known couplings, refit them and measure Δ."""
    glauber = glauber or GlauberConfig(seed=seed)
    panel = glauber_sample(params.memoryless(), t, glauber)
    estimate = fit_rpml(panel, 0, config).params
    delta = reconstruction_error(params.memoryless(), estimate)
    logger.info(f"Reconstruction error {delta:.4f} for N={params.n}, T={t}")
    return ReconstructionStudy(delta=delta, t=t, seed=glauber.seed, estimate=estimate)


@dataclass
class NoiseStudy:
    sigma_noise: float
    recovered_mean: float
    ratio: Optional[float]
    n: int
    t: int
    j_mean: float
    seed: int


def noise_ratio_study(
    n: int,
    t: int,
    j_mean: float,
    sigma_j: Optional[float] = None,
    config: Optional[FitConfig] = None,
    seed: int = 0,
    glauber: Optional[GlauberConfig] = None,
) -> NoiseStudy:
    """Spread of couplings recovered from homogeneous synthetic data.

    Args:
        n: Number of entities
        t: Number of recorded configurations
        j_mean: Value of every true coupling
        sigma_j: Standard deviation of couplings fitted on real data, if known
        config: Fit configuration
        seed: Chain seed
        glauber: Chain schedule (seed overrides `seed` when given)

    Returns:
        NoiseStudy with σ_noise and, when sigma_j is given, σ_noise/σ_J
    """
    glauber = glauber or GlauberConfig(seed=seed)
    panel = glauber_sample(CouplingSet.homogeneous(n, j_mean), t, glauber)
    recovered = off_diagonal(fit_rpml(panel, 0, config).params.J)
    sigma_noise = float(np.std(recovered))
    ratio = None if not sigma_j else sigma_noise / sigma_j
    logger.info(f"sigma_noise {sigma_noise:.4f} for homogeneous J={j_mean}, N={n}, T={t}")
    return NoiseStudy(
        sigma_noise=sigma_noise,
        recovered_mean=float(np.mean(recovered)),
        ratio=ratio,
        n=n,
        t=t,
        j_mean=j_mean,
        seed=glauber.seed,
    )


@dataclass
class ArtificialBenchmark:
    """Cross-validated scores on data truly generated by the pairwise model."""

    accuracy: float
    auc: float
    cv: CvResult
    ideal_accuracy: Optional[float] = None
    seed: int = 0
    extras: dict = field(default_factory=dict)


def artificial_benchmark(
    params: CouplingSet,
    t: int,
    config: Optional[FitConfig] = None,
    n_folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    glauber: Optional[GlauberConfig] = None,
    threads: int = 1,
    cap: int = ENUMERATION_CAP,
) -> ArtificialBenchmark:
    """Generate Glauber data from params and run the full cross-validation pipeline.

    Returns:
        ArtificialBenchmark with the maximum mean accuracy, the mean AUC and,
        for N up to `cap`, the Bayes accuracy of the true model
    """
    glauber = glauber or GlauberConfig(seed=seed)
    true_params = params.memoryless()
    panel = glauber_sample(true_params, t, glauber)
    cv = cross_validate(
        panel, 0, config, FoldPlan.build(panel.t, 0, n_folds), threads=threads
    )
    ceiling = ideal_accuracy(true_params, cap) if true_params.n <= cap else None
    return ArtificialBenchmark(
        accuracy=cv.max_mean_accuracy,
        auc=cv.mean_auc,
        cv=cv,
        ideal_accuracy=ceiling,
        seed=glauber.seed,
    )


def sign_cross_correlation(panel: SignPanel, i: int, j: int, max_lag: int) -> pd.DataFrame:
    """Pearson correlation of s_i,t with s_j,t+lag for lag in [−max_lag, max_lag]."""
    for k in (i, j):
        if not 0 <= k < panel.n:
            raise IndexError(f"entity index {k} out of range for N={panel.n}")
    if max_lag < 0 or panel.t <= max_lag + 1:
        raise InsufficientDataError(f"T={panel.t} is too short for max_lag={max_lag}")

    x = panel.signs[i].astype(float)
    y = panel.signs[j].astype(float)
    rows = []
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            a, b = x[: panel.t - lag], y[lag:]
        else:
            a, b = x[-lag:], y[: panel.t + lag]
        if a.std() == 0 or b.std() == 0:
            raise UndefinedCorrelationError(
                f"constant series for entities {panel.entities[i]}/{panel.entities[j]} at lag {lag}"
            )
        rows.append({"lag": lag, "correlation": float(np.corrcoef(a, b)[0, 1])})
    return pd.DataFrame(rows)


def ideal_accuracy(params: CouplingSet, cap: int = ENUMERATION_CAP) -> float:
    """Bayes accuracy of predicting one entity's sign from the others under the exact model.

    Equals the mean over entities of Σ_s p(s) ½[1 + |tanh(field_i(s))|],
    which is also the flip accuracy at α = ½ on stationary data.
    """
    probabilities = state_probabilities(params, cap)
    states = enumerate_states(params.n, cap).astype(float)
    fields = states @ params.J + params.h
    per_entity = probabilities @ (0.5 * (1.0 + np.abs(np.tanh(fields))))
    return float(per_entity.mean())
