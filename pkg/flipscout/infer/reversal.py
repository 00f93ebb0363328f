"""Pairwise model of simultaneous reversals on {0,1} variables.

P(x_i = 1 | x_−i) = σ(W_ii + 2 Σ_{j≠i} W_ij x_j), which is the autologistic
conditional ½[1 + y tanh(g)] with y = 2x − 1 and g = ½W_ii + Σ_{j≠i} W_ij x_j.
The per-entity problems therefore share the rPML solver.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from flipscout.exceptions import InsufficientDataError
from flipscout.infer.base import FitConfig, FitReport, combine_traces
from flipscout.infer.pseudolikelihood import ConditionalFit, solve_conditional
from flipscout.ingest import ReversalPanel
from flipscout.model import ReversalCouplingSet

logger = logging.getLogger(__name__)


def fit_reversal_pairwise(
    reversals: ReversalPanel, config: Optional[FitConfig] = None
) -> FitReport:
    """Estimate W by regularized pseudo-likelihood on the reversal indicators.

    Args:
        reversals: N×T' binary reversal matrix
        config: Fit configuration (defaults: l2, λ = 1/T')

    Returns:
        FitReport whose params are a ReversalCouplingSet with symmetrized W
    """
    config = config or FitConfig()
    if reversals.t < 2:
        raise InsufficientDataError(f"need at least 2 reversal bins (got {reversals.t})")

    x = reversals.flips.astype(float)
    n, n_bins = x.shape
    lam = config.resolve_lambda(n_bins)

    def fit_entity(i: int) -> ConditionalFit:
        others = np.delete(np.arange(n), i)
        design = np.hstack([np.full((n_bins, 1), 0.5), x[others].T])
        solved = solve_conditional(
            design, 2.0 * x[i] - 1.0, lam, config, label=f"entity {reversals.entities[i]}"
        )
        row = np.empty(n)
        row[i] = solved.theta[0]
        row[others] = solved.theta[1:]
        solved.theta = row
        return solved

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            fits = list(pool.map(fit_entity, range(n)))
    else:
        fits = [fit_entity(i) for i in range(n)]

    rows = np.array([f.theta for f in fits])
    W = (rows + rows.T) / 2.0
    converged = all(f.converged for f in fits)
    gradient_norm = max(f.gradient_norm for f in fits)
    if not converged:
        logger.warning(f"Reversal fit stopped with gradient norm {gradient_norm:.2e}")

    return FitReport(
        params=ReversalCouplingSet(W=W),
        objective_trace=combine_traces([f.trace for f in fits]),
        converged=converged,
        iterations_used=max(f.iterations for f in fits),
        config=config,
        optimizer="L-BFGS-B" if config.penalty == "l2" else "FISTA",
        lam=lam,
        gradient_norm=gradient_norm,
        training_bins=n_bins,
        entity_iterations=[f.iterations for f in fits],
    )
