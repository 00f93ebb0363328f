"""Dichotomized Gaussian baseline: a latent Gaussian thresholded at zero.

A sign is +1 when its latent coordinate is positive, so with unit latent
variances P(s_i = +1) = Φ(mu_i) and P(s_i = s_j = +1) = Φ₂(mu_i, mu_j; ρ_ij).
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.stats import norm

from flipscout.exceptions import AttainabilityError, DataValidationError, ShapeError
from flipscout.ingest import SignPanel

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-8
EIGENVALUE_FLOOR = 1e-10
ROOT_TOLERANCE = 1e-12
MEAN_CLAMP = 1e-9


@dataclass
class DgParams:
    """Latent means and unit-diagonal covariance of a dichotomized Gaussian."""

    mu: np.ndarray
    sigma: np.ndarray
    projected: bool = False

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        n = self.mu.shape[0]
        if self.sigma.shape != (n, n):
            raise ShapeError(f"sigma has shape {self.sigma.shape}, expected ({n}, {n})")
        if not (np.isfinite(self.mu).all() and np.isfinite(self.sigma).all()):
            raise DataValidationError("DG parameters must be finite")
        if np.abs(self.sigma - self.sigma.T).max(initial=0.0) > PSD_TOLERANCE:
            raise DataValidationError("sigma must be symmetric")
        if np.abs(np.diag(self.sigma) - 1.0).max(initial=0.0) > PSD_TOLERANCE:
            raise DataValidationError("sigma must have a unit diagonal")

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    def check_psd(self):
        """Raise DataValidationError unless sigma is PSD within 1e-8."""
        smallest = float(np.linalg.eigvalsh(self.sigma).min(initial=0.0))
        if smallest < -PSD_TOLERANCE:
            raise DataValidationError(
                f"sigma is not positive semidefinite (smallest eigenvalue {smallest:.3g})"
            )


def orthant_probability(h: float, k: float, rho: float) -> float:
    """P(Z₁ < h, Z₂ < k) for standard bivariate normals with correlation rho.

    Uses Φ₂(h, k; ρ) = Φ(h)Φ(k) + ∫₀^ρ φ₂(h, k; r) dr, with the closed forms at ρ = ±1.
    """
    if rho >= 1.0:
        return float(norm.cdf(min(h, k)))
    if rho <= -1.0:
        return float(max(0.0, norm.cdf(h) + norm.cdf(k) - 1.0))

    def density(r: float) -> float:
        one_minus = 1.0 - r * r
        return np.exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * one_minus)) / (
            2.0 * np.pi * np.sqrt(one_minus)
        )

    integral, _ = quad(density, 0.0, rho, epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(norm.cdf(h) * norm.cdf(k) + integral)


def latent_correlation(mu_i: float, mu_j: float, target: float, pair=None) -> float:
    """Correlation ρ with Φ₂(mu_i, mu_j; ρ) equal to the target P(+1, +1)."""
    low = orthant_probability(mu_i, mu_j, -1.0)
    high = orthant_probability(mu_i, mu_j, 1.0)
    if target < low - ROOT_TOLERANCE or target > high + ROOT_TOLERANCE:
        raise AttainabilityError(
            f"no latent correlation reproduces P(+,+)={target:.6g} for pair {pair} "
            f"(attainable range [{low:.6g}, {high:.6g}])",
            pair=pair,
        )
    if target <= low:
        return -1.0
    if target >= high:
        return 1.0
    return float(
        brentq(
            lambda r: orthant_probability(mu_i, mu_j, r) - target,
            -1.0,
            1.0,
            xtol=ROOT_TOLERANCE,
        )
    )


def nearest_correlation(sigma: np.ndarray) -> np.ndarray:
    """Clip eigenvalues at 1e-10 and rescale back to a unit diagonal."""
    values, vectors = np.linalg.eigh(sigma)
    clipped = (vectors * np.maximum(values, EIGENVALUE_FLOOR)) @ vectors.T
    scale = 1.0 / np.sqrt(np.diag(clipped))
    projected = clipped * np.outer(scale, scale)
    projected = (projected + projected.T) / 2.0
    np.fill_diagonal(projected, 1.0)
    return projected


def fit_dichotomized_gaussian(panel: SignPanel) -> DgParams:
    """Match a dichotomized Gaussian to the empirical first and second sign moments.

    Args:
        panel: ±1 orientations

    Returns:
        DgParams; `projected` is True when the assembled covariance needed
        nearest-PSD projection
    """
    signs = panel.signs.astype(float)
    means = np.clip(signs.mean(axis=1), -(1.0 - MEAN_CLAMP), 1.0 - MEAN_CLAMP)
    second = signs @ signs.T / panel.t
    mu = norm.ppf((1.0 + means) / 2.0)

    n = panel.n
    sigma = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            target = (1.0 + means[i] + means[j] + second[i, j]) / 4.0
            rho = latent_correlation(mu[i], mu[j], target, pair=(i, j))
            sigma[i, j] = sigma[j, i] = rho

    projected = False
    smallest = float(np.linalg.eigvalsh(sigma).min())
    if smallest < -PSD_TOLERANCE:
        logger.warning(
            f"Assembled DG covariance is not PSD (smallest eigenvalue {smallest:.3g}); "
            f"projecting to the nearest correlation matrix"
        )
        sigma = nearest_correlation(sigma)
        projected = True

    logger.info(f"Fitted dichotomized Gaussian for N={n} over T={panel.t} bins")
    return DgParams(mu=mu, sigma=sigma, projected=projected)
