"""Synthetic orientation panels: Glauber chains, exact draws and baseline samplers.

Every sampler is a pure function of its parameters and seed. Glauber chains
consume one uniform stream in a fixed order: for each flip attempt the entity
choice is drawn first and the acceptance draw second.
"""

import logging
from typing import Optional, Union

import numba
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from flipscout.config import ENUMERATION_CAP
from flipscout.exceptions import DataValidationError, InsufficientDataError, ShapeError
from flipscout.infer.gaussian import DgParams
from flipscout.ingest import SignPanel
from flipscout.model import CouplingSet, enumerate_states, state_probabilities

logger = logging.getLogger(__name__)

# Upper bound on uniforms generated per chunk of recorded configurations
CHUNK_UNIFORMS = 2_000_000

SeedLike = Union[int, np.random.Generator]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """PCG64 generator for an integer seed; generators pass through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


class GlauberConfig(BaseModel):
    """Schedule of a Glauber chain."""

    model_config = ConfigDict(frozen=True)

    sweeps_per_record: int = Field(default=1, gt=0, description="Monte Carlo steps per record")
    attempts_per_sweep: Optional[int] = Field(
        default=None, gt=0, description="Flip attempts per Monte Carlo step; None means 5N"
    )
    burn_in_records: int = Field(default=1000, ge=0, description="Records discarded first")
    seed: int = Field(default=0, description="Seed of the PCG64 stream")

    def attempts_per_record(self, n: int) -> int:
        return self.sweeps_per_record * (self.attempts_per_sweep or 5 * n)


def _synthetic_labels(n: int, t: int) -> tuple[list[str], list[str]]:
    return [f"e{i}" for i in range(n)], [str(k) for k in range(t)]


@numba.jit(nopython=True)
def _glauber_chunk(state, fields, J, uniforms, attempts_per_record, out):
    n = state.shape[0]
    k = 0
    for r in range(out.shape[0]):
        for _ in range(attempts_per_record):
            i = int(uniforms[k] * n)
            if i == n:
                i = n - 1
            u = uniforms[k + 1]
            k += 2
            if 0.5 * (1.0 - state[i] * np.tanh(fields[i])) > u:
                state[i] = -state[i]
                delta = 2.0 * state[i]
                for j in range(n):
                    fields[j] += J[j, i] * delta
        for j in range(n):
            out[r, j] = state[j]


def _check_glauber_params(params: CouplingSet):
    if params.l:
        raise ShapeError(f"Glauber dynamics needs a memoryless model (got L={params.l})")


def glauber_step(
    state: np.ndarray, params: CouplingSet, rng: np.random.Generator
) -> np.ndarray:
    """One flip attempt on a uniformly chosen entity.

    Args:
        state: Current ±1 state
        params: Memoryless coupling set
        rng: Generator; two uniforms are drawn (choice, then acceptance)

    Returns:
        New state; entity i flips iff ½[1 − s_i tanh(field_i)] exceeds the draw
    """
    _check_glauber_params(params)
    state = np.asarray(state, dtype=np.int8)
    if state.shape != (params.n,):
        raise ShapeError(f"state has shape {state.shape}, expected ({params.n},)")
    if not np.isin(state, (-1, 1)).all():
        raise DataValidationError("state entries must be -1 or +1")

    choice, acceptance = rng.random(2)
    i = min(int(choice * params.n), params.n - 1)
    field_i = params.J[i] @ state + params.h[i]
    new_state = state.copy()
    if 0.5 * (1.0 - state[i] * np.tanh(field_i)) > acceptance:
        new_state[i] = -state[i]
    return new_state


def _check_stationarity(signs: np.ndarray):
    half = signs.shape[1] // 2
    if half < 2:
        return
    first = signs[:, :half].mean(axis=1)
    second = signs[:, half:].mean(axis=1)
    error = np.sqrt((1.0 - first**2) / half + (1.0 - second**2) / (signs.shape[1] - half))
    drifting = np.abs(first - second) > 4.0 * np.maximum(error, 1e-12)
    if drifting.any():
        logger.warning(
            f"Mean signs of {int(drifting.sum())} entities differ by more than 4 sigma "
            f"between the two halves of the chain; burn-in may be too short"
        )


def glauber_sample(
    params: CouplingSet,
    t_records: int,
    config: Optional[GlauberConfig] = None,
    initial_state: Optional[np.ndarray] = None,
) -> SignPanel:
    """Record configurations of a Glauber chain whose stationary law is the pairwise model.

    Args:
        params: Memoryless coupling set
        t_records: Number of configurations to record
        config: Chain schedule and seed
        initial_state: Starting state (drawn uniformly from the stream by default)

    Returns:
        SignPanel with one column per record, after burn-in
    """
    config = config or GlauberConfig()
    _check_glauber_params(params)
    if t_records < 1:
        raise InsufficientDataError(f"t_records must be at least 1 (got {t_records})")

    n = params.n
    rng = make_rng(config.seed)
    if initial_state is None:
        state = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    else:
        state = np.asarray(initial_state, dtype=float).copy()
        if state.shape != (n,) or not np.isin(state, (-1, 1)).all():
            raise DataValidationError(f"initial state must be a ±1 vector of length {n}")

    J = np.ascontiguousarray(params.J)
    attempts = config.attempts_per_record(n)
    chunk = max(1, CHUNK_UNIFORMS // (2 * attempts))
    total = config.burn_in_records + t_records
    records = np.empty((total, n))

    done = 0
    while done < total:
        size = min(chunk, total - done)
        # Incremental fields are rebuilt at every chunk boundary
        fields = J @ state + params.h
        uniforms = rng.random(2 * attempts * size)
        _glauber_chunk(state, fields, J, uniforms, attempts, records[done : done + size])
        done += size

    signs = records[config.burn_in_records :].T.astype(np.int8)
    _check_stationarity(signs)
    logger.info(
        f"Sampled {t_records} records for N={n} "
        f"({attempts} attempts per record, burn-in {config.burn_in_records})"
    )
    entities, timestamps = _synthetic_labels(n, t_records)
    return SignPanel(entities=entities, timestamps=timestamps, signs=signs)


def exact_sample(
    params: CouplingSet, t_records: int, seed: SeedLike = 0, cap: int = ENUMERATION_CAP
) -> SignPanel:
    """Independent draws from the enumerated pairwise distribution."""
    if t_records < 1:
        raise InsufficientDataError(f"t_records must be at least 1 (got {t_records})")
    probabilities = state_probabilities(params, cap)
    rng = make_rng(seed)
    index = rng.choice(probabilities.size, size=t_records, p=probabilities)
    signs = enumerate_states(params.n, cap)[index].T
    entities, timestamps = _synthetic_labels(params.n, t_records)
    return SignPanel(entities=entities, timestamps=timestamps, signs=signs)


def independent_sample(params: CouplingSet, t_records: int, seed: SeedLike = 0) -> SignPanel:
    """Independent entities with P(s_i = +1) = ½[1 + tanh(h_i)]; requires J = 0."""
    if params.l or np.any(params.J != 0):
        raise DataValidationError("independent sampling requires J = 0 and no lags")
    rng = make_rng(seed)
    p_up = 0.5 * (1.0 + np.tanh(params.h))
    signs = np.where(rng.random((params.n, t_records)) < p_up[:, None], 1, -1)
    entities, timestamps = _synthetic_labels(params.n, t_records)
    return SignPanel(entities=entities, timestamps=timestamps, signs=signs)


def sample_dg(params: DgParams, t_records: int, seed: SeedLike = 0) -> SignPanel:
    """Threshold latent Gaussian draws at zero; a latent value of exactly 0 maps to +1."""
    params.check_psd()
    if t_records < 1:
        raise InsufficientDataError(f"t_records must be at least 1 (got {t_records})")
    rng = make_rng(seed)
    latent = rng.multivariate_normal(params.mu, params.sigma, size=t_records, method="eigh")
    signs = np.where(latent >= 0.0, 1, -1).T
    entities, timestamps = _synthetic_labels(params.n, t_records)
    return SignPanel(entities=entities, timestamps=timestamps, signs=signs)
