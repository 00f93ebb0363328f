"""Regularized pseudo-maximum likelihood (rPML) for the pairwise model.

The pseudo-likelihood factorizes over entities: each entity's conditional
½[1 + s_i tanh(field_i)] is an autologistic regression on the other
entities' current signs (and on L past full states for the historical
model). Entities are fitted independently and J is symmetrized afterwards.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from flipscout.exceptions import FitDivergenceError, InsufficientDataError, ShapeError
from flipscout.infer.base import FitConfig, FitReport, combine_traces
from flipscout.ingest import SignPanel
from flipscout.model import CouplingSet

logger = logging.getLogger(__name__)

# Samples per free parameter below which a fit is considered under-determined
MIN_BINS_PER_PARAMETER = 10


@dataclass
class ConditionalFit:
    """Solution of one entity's penalized conditional likelihood."""

    theta: np.ndarray
    trace: list[float]
    iterations: int
    gradient_norm: float
    converged: bool


def _log_conditional(margin: np.ndarray) -> np.ndarray:
    # log ½[1 + tanh(m)] = −log(1 + e^{−2m})
    return -np.logaddexp(0.0, -2.0 * margin)


def _soft_threshold(x: np.ndarray, level: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - level, 0.0)


def _l1_optimality(grad: np.ndarray, theta: np.ndarray, lam: float) -> float:
    # Distance of zero from the subdifferential of the penalized objective
    active = theta != 0
    residual = np.where(
        active, grad - lam * np.sign(theta), np.sign(grad) * np.maximum(np.abs(grad) - lam, 0.0)
    )
    return float(np.abs(residual).max(initial=0.0))


def solve_conditional(
    design: np.ndarray,
    y: np.ndarray,
    lam: float,
    config: FitConfig,
    x0: Optional[np.ndarray] = None,
    label: str = "entity",
) -> ConditionalFit:
    """Maximize (1/T) Σ_t log ½[1 + y_t tanh(design_t · θ)] − λ·penalty(θ).

    Args:
        design: T×P matrix of regressors (a column of ones carries the field)
        y: Length-T vector of ±1 outcomes
        lam: Regularization strength
        config: Penalty type, iteration cap and gradient tolerance
        x0: Starting point (zeros by default)
        label: Name used in log and error messages

    Returns:
        ConditionalFit with the maximizer and the per-iteration objective trace
    """
    n_bins, n_params = design.shape
    theta0 = np.zeros(n_params) if x0 is None else np.asarray(x0, dtype=float).copy()
    iteration = 0

    def smooth(theta: np.ndarray) -> tuple[float, np.ndarray]:
        fields = design @ theta
        value = _log_conditional(y * fields).mean()
        grad = design.T @ (y - np.tanh(fields)) / n_bins
        return float(value), grad

    def objective(theta: np.ndarray) -> float:
        value, _ = smooth(theta)
        if config.penalty == "l2":
            value -= lam * float(theta @ theta)
        else:
            value -= lam * float(np.abs(theta).sum())
        if not np.isfinite(value):
            raise FitDivergenceError(
                f"non-finite objective for {label} at iteration {iteration}", iteration=iteration
            )
        return value

    trace: list[float] = []

    if config.penalty == "l2":

        def negated(theta: np.ndarray) -> tuple[float, np.ndarray]:
            value, grad = smooth(theta)
            value -= lam * float(theta @ theta)
            if not np.isfinite(value):
                raise FitDivergenceError(
                    f"non-finite objective for {label} at iteration {iteration}",
                    iteration=iteration,
                )
            return -value, -(grad - 2.0 * lam * theta)

        def record(theta: np.ndarray):
            nonlocal iteration
            iteration += 1
            trace.append(objective(theta))

        result = minimize(
            negated,
            theta0,
            jac=True,
            method="L-BFGS-B",
            callback=record,
            options={
                "maxiter": config.max_iterations,
                "gtol": config.gradient_tolerance,
                "ftol": 1e-15,
            },
        )
        theta = result.x
        _, grad = smooth(theta)
        gradient_norm = float(np.abs(grad - 2.0 * lam * theta).max(initial=0.0))
    else:
        # FISTA with the constant step 1/Lipschitz of the smooth part
        lipschitz = max(float(np.linalg.norm(design, 2)) ** 2 / n_bins, 1e-12)
        theta = theta0
        momentum = theta0.copy()
        t_k = 1.0
        gradient_norm = np.inf
        for _ in range(config.max_iterations):
            _, grad = smooth(momentum)
            updated = _soft_threshold(momentum + grad / lipschitz, lam / lipschitz)
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
            momentum = updated + ((t_k - 1.0) / t_next) * (updated - theta)
            theta, t_k = updated, t_next
            iteration += 1
            trace.append(objective(theta))
            _, grad_at = smooth(theta)
            gradient_norm = _l1_optimality(grad_at, theta, lam)
            if gradient_norm <= config.gradient_tolerance:
                break

    converged = gradient_norm <= config.gradient_tolerance
    if not trace:
        trace.append(objective(theta))
    logger.debug(
        f"{label}: {iteration} iterations, objective {trace[-1]:.6f}, "
        f"gradient norm {gradient_norm:.2e}"
    )
    return ConditionalFit(
        theta=theta,
        trace=trace,
        iterations=iteration,
        gradient_norm=gradient_norm,
        converged=converged,
    )


def training_times(t: int, lags: int, times: Optional[np.ndarray] = None) -> np.ndarray:
    """Target bins usable for training: every t ≥ L unless an explicit set is given."""
    if times is None:
        return np.arange(lags, t)
    times = np.asarray(times, dtype=int)
    if times.size and (times.min() < lags or times.max() >= t):
        raise ShapeError(f"training bins must lie in [{lags}, {t}) for L={lags}")
    return times


def design_matrix(signs: np.ndarray, lags: int, times: np.ndarray) -> np.ndarray:
    """Regressors [1, s_t, s_{t−1}, ..., s_{t−L}] for every target bin, one row per bin."""
    blocks = [np.ones((times.size, 1))]
    for tau in range(lags + 1):
        blocks.append(signs[:, times - tau].T.astype(float))
    return np.hstack(blocks)


def _fields(signs: np.ndarray, params: CouplingSet, times: np.ndarray) -> np.ndarray:
    fields = params.J @ signs[:, times] + params.h[:, None]
    for tau, k in enumerate(params.lags, start=1):
        fields = fields + k @ signs[:, times - tau]
    return fields


def _prepare(panel: SignPanel, params: CouplingSet, times: Optional[np.ndarray]):
    if params.n != panel.n:
        raise ShapeError(f"panel has {panel.n} entities, parameters have {params.n}")
    times = training_times(panel.t, params.l, times)
    if times.size == 0:
        raise InsufficientDataError(f"no usable bins for L={params.l} and T={panel.t}")
    return panel.signs.astype(float), times


def _penalty(params: CouplingSet, config: FitConfig, lam: float) -> float:
    upper = params.J[np.triu_indices(params.n, k=1)]
    values = np.concatenate([params.h, upper, *(k.ravel() for k in params.lags)])
    if config.penalty == "l2":
        return lam * float(values @ values)
    return lam * float(np.abs(values).sum())


def rpl_objective(
    panel: SignPanel,
    params: CouplingSet,
    config: FitConfig,
    times: Optional[np.ndarray] = None,
) -> float:
    """Regularized pseudo-log-likelihood per bin.

    Args:
        panel: ±1 orientations
        params: Coupling set; with L lags the first L bins serve only as history
        config: Penalty settings (λ defaults to 1/T')
        times: Target bins to score (all bins ≥ L by default)

    Returns:
        (1/T') Σ_t Σ_i log p(s_i,t | context) − λ‖θ‖, θ = (h, J_i<j, K)
    """
    signs, times = _prepare(panel, params, times)
    lam = config.resolve_lambda(times.size)
    margin = signs[:, times] * _fields(signs, params, times)
    value = float(_log_conditional(margin).sum() / times.size) - _penalty(params, config, lam)
    if not np.isfinite(value):
        raise FitDivergenceError("non-finite pseudo-likelihood objective")
    return value


def rpl_gradient(
    panel: SignPanel,
    params: CouplingSet,
    config: FitConfig,
    times: Optional[np.ndarray] = None,
) -> CouplingSet:
    """Analytic gradient of `rpl_objective`, shaped like the parameters.

    J_ij is a single symmetric parameter, so its entry collects the terms of
    both conditionals it enters; the matrix is reported symmetrically.
    """
    signs, times = _prepare(panel, params, times)
    lam = config.resolve_lambda(times.size)
    current = signs[:, times]
    residual = current - np.tanh(_fields(signs, params, times))
    n_bins = times.size

    grad_h = residual.sum(axis=1) / n_bins
    cross = residual @ current.T / n_bins
    grad_J = cross + cross.T
    np.fill_diagonal(grad_J, 0.0)
    grad_K = [residual @ signs[:, times - tau].T / n_bins for tau in range(1, params.l + 1)]

    if config.penalty == "l2":
        grad_h = grad_h - 2.0 * lam * params.h
        grad_J = grad_J - 2.0 * lam * params.J
        grad_K = [g - 2.0 * lam * k for g, k in zip(grad_K, params.lags)]
    else:
        grad_h = grad_h - lam * np.sign(params.h)
        grad_J = grad_J - lam * np.sign(params.J)
        grad_K = [g - lam * np.sign(k) for g, k in zip(grad_K, params.lags)]

    return CouplingSet(J=grad_J, h=grad_h, lags=grad_K)


def _entity_problem(n: int, lags: int, i: int, freeze_couplings: bool) -> np.ndarray:
    """Boolean mask of free coordinates in [h_i, J_i·, K^1_i·, ..., K^L_i·]."""
    free = np.ones(1 + n * (lags + 1), dtype=bool)
    if freeze_couplings:
        free[1 : 1 + n] = False
    else:
        free[1 + i] = False
    return free


def _initial_theta(init: Optional[CouplingSet], i: int) -> Optional[np.ndarray]:
    if init is None:
        return None
    return np.concatenate([[init.h[i]], init.J[i], *(k[i] for k in init.lags)])


def fit_rpml(
    panel: SignPanel,
    lags: int = 0,
    config: Optional[FitConfig] = None,
    times: Optional[np.ndarray] = None,
    init: Optional[CouplingSet] = None,
    freeze_couplings: bool = False,
) -> FitReport:
    """Estimate J, h (and K^1..K^L) by regularized pseudo-maximum likelihood.

    Args:
        panel: ±1 orientations
        lags: Number of lagged couplings L (0 for the memoryless model)
        config: Fit configuration (defaults: l2, λ = 1/T')
        times: Target bins used for training (all bins ≥ L by default)
        init: Starting parameters (zeros by default)
        freeze_couplings: Keep J at zero, fitting only h and K (history-only model)

    Returns:
        FitReport whose params hold the symmetrized couplings
    """
    config = config or FitConfig()
    n = panel.n
    times = training_times(panel.t, lags, times)
    if times.size == 0:
        raise InsufficientDataError(f"no training bins for L={lags} and T={panel.t}")
    if init is not None and (init.n != n or init.l != lags):
        raise ShapeError(f"initial parameters have N={init.n}, L={init.l}; need N={n}, L={lags}")

    lam = config.resolve_lambda(times.size)
    signs = panel.signs.astype(float)
    design = design_matrix(signs, lags, times)

    per_entity = int(_entity_problem(n, lags, 0, freeze_couplings).sum())
    if times.size < MIN_BINS_PER_PARAMETER * per_entity:
        logger.warning(
            f"Only {times.size} training bins for {per_entity} parameters per entity; "
            f"estimates may be unreliable"
        )

    def fit_entity(i: int) -> ConditionalFit:
        free = _entity_problem(n, lags, i, freeze_couplings)
        x0 = _initial_theta(init, i)
        solved = solve_conditional(
            design[:, free],
            signs[i, times],
            lam,
            config,
            x0=None if x0 is None else x0[free],
            label=f"entity {panel.entities[i]}",
        )
        theta = np.zeros(free.size)
        theta[free] = solved.theta
        solved.theta = theta
        return solved

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            fits = list(pool.map(fit_entity, range(n)))
    else:
        fits = [fit_entity(i) for i in range(n)]

    rows = np.array([f.theta for f in fits])
    J = rows[:, 1 : 1 + n]
    J = (J + J.T) / 2.0
    np.fill_diagonal(J, 0.0)
    lag_blocks = [rows[:, 1 + n * tau : 1 + n * (tau + 1)] for tau in range(1, lags + 1)]
    params = CouplingSet(J=J, h=rows[:, 0], lags=lag_blocks)

    converged = all(f.converged for f in fits)
    gradient_norm = max(f.gradient_norm for f in fits)
    optimizer = "L-BFGS-B" if config.penalty == "l2" else "FISTA"
    if converged:
        logger.info(
            f"rPML converged for N={n}, L={lags}, T'={times.size} "
            f"({optimizer}, lambda={lam:.3g}, max {max(f.iterations for f in fits)} iterations)"
        )
    else:
        logger.warning(
            f"rPML stopped before reaching gradient tolerance {config.gradient_tolerance:g} "
            f"(gradient norm {gradient_norm:.2e})"
        )

    return FitReport(
        params=params,
        objective_trace=combine_traces([f.trace for f in fits]),
        converged=converged,
        iterations_used=max(f.iterations for f in fits),
        config=config,
        optimizer=optimizer,
        lam=lam,
        gradient_norm=gradient_norm,
        training_bins=int(times.size),
        frozen_couplings=freeze_couplings,
        entity_iterations=[f.iterations for f in fits],
    )
