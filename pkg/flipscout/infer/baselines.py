"""Reference models: independent entities, homogeneous couplings and Poisson counts."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import poisson

from flipscout.exceptions import InsufficientDataError, ShapeError
from flipscout.ingest import ReversalPanel, SignPanel
from flipscout.model import CouplingSet

logger = logging.getLogger(__name__)

# Keeps atanh finite for entities that never change sign
MEAN_CLAMP = 1e-9


def fit_independent(panel: SignPanel) -> CouplingSet:
    """Fields matching each entity's mean sign, with J = 0.

    Args:
        panel: ±1 orientations

    Returns:
        Memoryless CouplingSet with h_i = atanh(mean_t s_i,t), clamped to ±(1 − 1e-9)
    """
    means = panel.signs.mean(axis=1)
    clamped = np.clip(means, -(1.0 - MEAN_CLAMP), 1.0 - MEAN_CLAMP)
    saturated = int((np.abs(means) >= 1.0 - MEAN_CLAMP).sum())
    if saturated:
        logger.warning(f"{saturated} entities never change sign; their fields are clamped")
    return CouplingSet(J=np.zeros((panel.n, panel.n)), h=np.arctanh(clamped))


def homogenize(params: CouplingSet) -> CouplingSet:
    """Replace every off-diagonal coupling by their mean and drop the fields."""
    if params.l:
        raise ShapeError(f"homogenize requires a memoryless model (got L={params.l})")
    n = params.n
    if n < 2:
        return CouplingSet.zeros(n)
    off_diagonal = params.J[~np.eye(n, dtype=bool)]
    return CouplingSet.homogeneous(n, float(off_diagonal.mean()))


@dataclass
class PoissonModel:
    """Poisson law for the number of simultaneous reversals per bin."""

    rate: float
    n_entities: int

    def distribution(self, n: Optional[int] = None) -> np.ndarray:
        """Probabilities of 0..n reversals, truncated to that range and renormalized."""
        n = self.n_entities if n is None else n
        counts = np.arange(n + 1)
        if self.rate == 0:
            pmf = (counts == 0).astype(float)
        else:
            pmf = poisson.pmf(counts, self.rate)
        return pmf / pmf.sum()


def fit_poisson(reversals: ReversalPanel) -> PoissonModel:
    """Maximum-likelihood rate: the mean number of simultaneous reversals per bin."""
    if reversals.t < 1:
        raise InsufficientDataError("need at least one bin of reversals")
    rate = float(reversals.counts.mean())
    logger.debug(f"Poisson rate {rate:.4f} over {reversals.t} bins")
    return PoissonModel(rate=rate, n_entities=reversals.n)
