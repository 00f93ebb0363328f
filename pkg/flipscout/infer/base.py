"""Fit configuration and reports shared by the estimators."""

import logging
from dataclasses import dataclass, field
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from flipscout.model import CouplingSet, ReversalCouplingSet

logger = logging.getLogger(__name__)

Penalty = Literal["l2", "l1"]


class FitConfig(BaseModel):
    """Regularization and stopping rules for pseudo-likelihood fits."""

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    lam: Optional[float] = Field(
        default=None,
        ge=0,
        alias="lambda",
        description="Regularization strength; None means 1/T' with T' training bins",
    )
    penalty: Penalty = Field(default="l2", description="l2 (ridge) or l1 (sparse networks)")
    max_iterations: int = Field(default=1000, gt=0, description="Iteration cap per entity")
    gradient_tolerance: float = Field(default=1e-6, gt=0, description="Stopping gradient norm")
    seed: int = Field(default=0, description="Recorded for reproducibility")
    threads: int = Field(default=1, gt=0, description="Worker threads for per-entity fits")

    def resolve_lambda(self, n_bins: int) -> float:
        """Regularization strength actually applied for n_bins training bins."""
        if self.lam is not None:
            return self.lam
        return 1.0 / max(n_bins, 1)


@dataclass
class FitReport:
    """Outcome of a fit: parameters plus the bookkeeping needed to reproduce it."""

    params: Union[CouplingSet, ReversalCouplingSet]
    objective_trace: list[float]
    converged: bool
    iterations_used: int
    config: FitConfig
    optimizer: str
    lam: float
    gradient_norm: float
    training_bins: int
    frozen_couplings: bool = False
    entity_iterations: list[int] = field(default_factory=list)


def combine_traces(traces: list[list[float]]) -> list[float]:
    """Sum per-entity objective traces, carrying each finished entity's last value."""
    if not traces:
        return []
    length = max(len(trace) for trace in traces)
    padded = np.array(
        [
            trace + [trace[-1]] * (length - len(trace)) if trace else [0.0] * length
            for trace in traces
        ]
    )
    return padded.sum(axis=0).tolist()
