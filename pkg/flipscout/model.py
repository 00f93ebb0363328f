"""Pairwise maximum-entropy model: parameters and exact probabilities.

Conventions shared by every function here:

* the joint weight of a ±1 state is ½ Σ_ij J_ij s_i s_j + Σ_i h_i s_i with
  J symmetric and zero on the diagonal, so each unordered pair counts once;
* the local field of entity i is Σ_{j≠i} J_ij s_j + h_i, plus
  Σ_τ Σ_j K^τ_ij s_{j,t−τ} for the historical model;
* the reversal model weight of a {0,1} state is Σ_ij W_ij x_i x_j over both
  orderings, diagonal included.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from flipscout.config import ENUMERATION_CAP
from flipscout.exceptions import CapacityError, DataValidationError, ShapeError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-10


@dataclass
class CouplingSet:
    """Couplings J, fields h and lagged couplings K^1..K^L."""

    J: np.ndarray
    h: np.ndarray
    lags: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        self.lags = [np.asarray(k, dtype=float) for k in self.lags]
        n = self.h.shape[0] if self.h.ndim == 1 else -1
        if self.J.shape != (n, n):
            raise ShapeError(f"J has shape {self.J.shape}, expected ({n}, {n})")
        for tau, k in enumerate(self.lags, start=1):
            if k.shape != (n, n):
                raise ShapeError(f"K^{tau} has shape {k.shape}, expected ({n}, {n})")
        if not all(np.isfinite(a).all() for a in (self.J, self.h, *self.lags)):
            raise DataValidationError("coupling parameters must be finite")
        if np.abs(np.diag(self.J)).max(initial=0.0) > 0:
            raise DataValidationError("J must have a zero diagonal")
        if np.abs(self.J - self.J.T).max(initial=0.0) > SYMMETRY_TOLERANCE:
            raise DataValidationError("J must be symmetric")

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def l(self) -> int:
        return len(self.lags)

    @classmethod
    def zeros(cls, n: int, lags: int = 0) -> "CouplingSet":
        """All-zero parameters for n entities and the given number of lags."""
        return cls(
            J=np.zeros((n, n)), h=np.zeros(n), lags=[np.zeros((n, n)) for _ in range(lags)]
        )

    @classmethod
    def homogeneous(cls, n: int, j_mean: float) -> "CouplingSet":
        """Memoryless parameters with every off-diagonal coupling equal to j_mean."""
        J = np.full((n, n), float(j_mean))
        np.fill_diagonal(J, 0.0)
        return cls(J=J, h=np.zeros(n))

    def memoryless(self) -> "CouplingSet":
        """The same J and h without lagged couplings."""
        return CouplingSet(J=self.J.copy(), h=self.h.copy())

    def subset(self, entities: list[int]) -> "CouplingSet":
        """Parameters restricted to the given entities."""
        idx = np.asarray(entities)
        return CouplingSet(
            J=self.J[np.ix_(idx, idx)],
            h=self.h[idx],
            lags=[k[np.ix_(idx, idx)] for k in self.lags],
        )


@dataclass
class ReversalCouplingSet:
    """Symmetric W of the simultaneous-reversal model; the diagonal acts as a field."""

    W: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1]:
            raise ShapeError(f"W must be square (got shape {self.W.shape})")
        if not np.isfinite(self.W).all():
            raise DataValidationError("W must be finite")
        if np.abs(self.W - self.W.T).max(initial=0.0) > SYMMETRY_TOLERANCE:
            raise DataValidationError("W must be symmetric")

    @property
    def n(self) -> int:
        return self.W.shape[0]


def _check_alphabet(state: np.ndarray, alphabet: tuple[int, int]) -> np.ndarray:
    state = np.asarray(state)
    if not np.isin(state, alphabet).all():
        raise DataValidationError(f"state entries must lie in {set(alphabet)}")
    return state.astype(float)


def _check_memoryless(params: CouplingSet):
    if params.l:
        raise ShapeError(f"operation requires a memoryless model (got L={params.l})")


def _check_index(i: int, n: int):
    if not 0 <= i < n:
        raise IndexError(f"entity index {i} out of range for N={n}")


@lru_cache(maxsize=8)
def _states(n: int) -> np.ndarray:
    # Row k holds the binary digits of k, most significant first
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1
    states = (2 * bits - 1).astype(np.int8)
    states.setflags(write=False)
    return states


def enumerate_states(n: int, cap: int = ENUMERATION_CAP, binary: bool = False) -> np.ndarray:
    """All 2^n states as rows, over ±1 (default) or {0,1}.

    Args:
        n: Number of entities
        cap: Largest n allowed
        binary: Return the {0,1} alphabet instead of ±1

    Returns:
        Array of shape (2^n, n), lexicographic with −1 (or 0) first
    """
    if n > cap:
        raise CapacityError(
            f"N={n} exceeds the enumeration cap of {cap}; use the Glauber sampler instead"
        )
    states = _states(n)
    return ((states + 1) // 2).astype(np.int8) if binary else states


def log_weight(state: np.ndarray, params: CouplingSet) -> float:
    """Unnormalized log-probability ½ sᵀJs + h·s of a ±1 state."""
    _check_memoryless(params)
    s = _check_alphabet(state, (-1, 1))
    if s.shape != (params.n,):
        raise ShapeError(f"state has shape {s.shape}, expected ({params.n},)")
    return float(0.5 * s @ params.J @ s + params.h @ s)


def state_log_weights(params: CouplingSet, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """log_weight of every enumerated state, in `enumerate_states` order."""
    _check_memoryless(params)
    states = enumerate_states(params.n, cap).astype(float)
    return 0.5 * ((states @ params.J) * states).sum(axis=1) + states @ params.h


def log_partition_function(params: CouplingSet, cap: int = ENUMERATION_CAP) -> float:
    """log Z by exact enumeration."""
    return float(logsumexp(state_log_weights(params, cap)))


def partition_function(params: CouplingSet, cap: int = ENUMERATION_CAP) -> float:
    """Normalizing constant Z summed over all 2^N states."""
    return float(np.exp(log_partition_function(params, cap)))


def state_probabilities(params: CouplingSet, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Exact probability of every enumerated state."""
    weights = state_log_weights(params, cap)
    return np.exp(weights - logsumexp(weights))


def exact_probability(state: np.ndarray, params: CouplingSet, cap: int = ENUMERATION_CAP) -> float:
    """Probability of a ±1 state under the pairwise distribution."""
    return float(np.exp(log_weight(state, params) - log_partition_function(params, cap)))


def local_field(
    i: int, state: np.ndarray, params: CouplingSet, history: list[np.ndarray] = ()
) -> float:
    """Σ_{j≠i} J_ij s_j + h_i + Σ_τ Σ_j K^τ_ij s_{j,t−τ} for a full state vector."""
    field_i = params.J[i] @ state + params.h[i]
    for k, past in zip(params.lags, history):
        field_i = field_i + k[i] @ past
    return float(field_i)


def conditional_probability(i: int, state: np.ndarray, params: CouplingSet) -> float:
    """P(s_i | s_−i) = ½[1 + s_i tanh(Σ_{j≠i} J_ij s_j + h_i)]."""
    _check_memoryless(params)
    s = _check_alphabet(state, (-1, 1))
    if s.shape != (params.n,):
        raise ShapeError(f"state has shape {s.shape}, expected ({params.n},)")
    _check_index(i, params.n)
    return 0.5 * (1.0 + s[i] * np.tanh(local_field(i, s, params)))


def _full_state(i: int, prev_sign: int, context: np.ndarray, n: int) -> np.ndarray:
    if prev_sign not in (-1, 1):
        raise DataValidationError(f"prev_sign must be -1 or +1 (got {prev_sign})")
    context = _check_alphabet(context, (-1, 1))
    if context.shape != (n - 1,):
        raise ShapeError(f"context has shape {context.shape}, expected ({n - 1},)")
    # Entity i's own slot is multiplied by J_ii = 0, so its value is irrelevant
    return np.insert(context, i, 0.0)


def flip_probability_instant(
    i: int, prev_sign: int, context: np.ndarray, params: CouplingSet
) -> float:
    """Probability that entity i reverses, given the other entities' current signs.

    Args:
        i: Entity index
        prev_sign: Entity i's sign in the previous bin
        context: Current signs of the other N−1 entities, in entity order
        params: Memoryless coupling set

    Returns:
        ½[1 − prev_sign · tanh(Σ_{j≠i} J_ij s_j + h_i)]
    """
    _check_memoryless(params)
    _check_index(i, params.n)
    state = _full_state(i, prev_sign, context, params.n)
    return 0.5 * (1.0 - prev_sign * np.tanh(local_field(i, state, params)))


def flip_probability_hist(
    i: int,
    prev_sign: int,
    context: np.ndarray,
    history: list[np.ndarray],
    params: CouplingSet,
) -> float:
    """Probability that entity i reverses given the current context and L past states.

    Args:
        i: Entity index
        prev_sign: Entity i's sign in the previous bin
        context: Current signs of the other N−1 entities
        history: Full ±1 states at t−1, ..., t−L (most recent first)
        params: Coupling set with L lag matrices

    Returns:
        ½[1 − prev_sign · tanh(field_i + Σ_τ Σ_j K^τ_ij s_{j,t−τ})]
    """
    _check_index(i, params.n)
    if len(history) != params.l:
        raise ShapeError(f"history holds {len(history)} states, model has L={params.l}")
    past = [_check_alphabet(p, (-1, 1)) for p in history]
    for p in past:
        if p.shape != (params.n,):
            raise ShapeError(f"history state has shape {p.shape}, expected ({params.n},)")
    state = _full_state(i, prev_sign, context, params.n)
    instant = local_field(i, state, params.memoryless())
    lagged = 0.0
    for k, p in zip(params.lags, past):
        lagged += float(k[i] @ p)
    return 0.5 * (1.0 - prev_sign * np.tanh(instant + lagged))


def reversal_log_weight(x: np.ndarray, params: ReversalCouplingSet) -> float:
    """Σ_ij W_ij x_i x_j of a {0,1} reversal state."""
    x = _check_alphabet(x, (0, 1))
    if x.shape != (params.n,):
        raise ShapeError(f"state has shape {x.shape}, expected ({params.n},)")
    return float(x @ params.W @ x)


def reversal_state_probabilities(
    params: ReversalCouplingSet, cap: int = ENUMERATION_CAP
) -> np.ndarray:
    """Exact probability of every {0,1} state under the reversal model."""
    states = enumerate_states(params.n, cap, binary=True).astype(float)
    weights = ((states @ params.W) * states).sum(axis=1)
    return np.exp(weights - logsumexp(weights))


def reversal_to_ising(params: ReversalCouplingSet) -> CouplingSet:
    """Rewrite the {0,1} reversal model as an equivalent ±1 pairwise model.

    With x = (1 + s)/2 the weight Σ W_ij x_i x_j equals, up to a constant,
    ½ Σ_{i≠j} (W_ij/2) s_i s_j + Σ_i (½ Σ_j W_ij) s_i.
    """
    J = params.W / 2.0
    np.fill_diagonal(J, 0.0)
    return CouplingSet(J=J, h=params.W.sum(axis=1) / 2.0)
