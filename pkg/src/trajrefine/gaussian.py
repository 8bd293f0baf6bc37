"""Bivariate Gaussian primitives.

Positions are 2-D points in meters. Covariances are symmetric 2x2 matrices
stored by their three free entries (sxx, sxy, syy), which keeps symmetry
exact by construction and makes positive-semidefiniteness checks cheap.
The (sigma_x, sigma_y, rho) parameterization is used at the I/O boundary;
conversion functions between the two forms live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Relative PSD tolerance suited to double precision on meter-scale covariances.
PSD_TOL = 1e-9


@dataclass(frozen=True)
class Cov2:
    """Symmetric 2x2 covariance in m^2, stored as (sxx, sxy, syy).

    Entries are only required to be finite; definiteness is checked
    explicitly via :func:`is_psd` so that difference matrices can be
    represented too.
    """

    sxx: float
    sxy: float
    syy: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.sxx, self.sxy, self.syy)):
            raise ValueError("covariance entries must be finite")

    @property
    def trace(self) -> float:
        return self.sxx + self.syy

    @property
    def det(self) -> float:
        return self.sxx * self.syy - self.sxy * self.sxy

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.sxx, self.sxy], [self.sxy, self.syy]], dtype=float)

    def scaled(self, factor: float) -> Cov2:
        return Cov2(self.sxx * factor, self.sxy * factor, self.syy * factor)

    @staticmethod
    def from_matrix(m: np.ndarray) -> Cov2:
        """Build from a 2x2 array, averaging the off-diagonal entries."""
        m = np.asarray(m, dtype=float)
        return Cov2(float(m[0, 0]), 0.5 * float(m[0, 1] + m[1, 0]), float(m[1, 1]))

    @staticmethod
    def isotropic(variance: float) -> Cov2:
        return Cov2(variance, 0.0, variance)


@dataclass(frozen=True)
class Gaussian2D:
    """Bivariate Gaussian over position: (x, y, sigma_x, sigma_y, rho).

    sigma_x, sigma_y are in meters and must be positive; |rho| < 1 strictly,
    so the covariance is always positive definite (rank-1 Gaussians would
    make downstream fusion inversions singular).
    """

    x: float
    y: float
    sigma_x: float
    sigma_y: float
    rho: float

    def __post_init__(self) -> None:
        vals = (self.x, self.y, self.sigma_x, self.sigma_y, self.rho)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("Gaussian2D parameters must be finite")
        if self.sigma_x <= 0.0 or self.sigma_y <= 0.0:
            raise ValueError("sigma_x and sigma_y must be positive")
        if abs(self.rho) >= 1.0:
            raise ValueError("|rho| must be strictly less than 1")

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @property
    def cov(self) -> Cov2:
        return cov_from_params(self.sigma_x, self.sigma_y, self.rho)

    @staticmethod
    def from_moments(mean: np.ndarray, cov: Cov2) -> Gaussian2D:
        sx, sy, rho = params_from_cov(cov)
        m = np.asarray(mean, dtype=float)
        return Gaussian2D(float(m[0]), float(m[1]), sx, sy, rho)


def cov_from_params(sigma_x: float, sigma_y: float, rho: float) -> Cov2:
    """Covariance matrix of a (sigma_x, sigma_y, rho) Gaussian.

    Returns [[sx^2, rho*sx*sy], [rho*sx*sy, sy^2]], which has determinant
    sx^2 * sy^2 * (1 - rho^2) > 0 for valid inputs.
    """
    if not (sigma_x > 0.0 and sigma_y > 0.0):
        raise ValueError("sigma_x and sigma_y must be positive")
    if not abs(rho) < 1.0:
        raise ValueError("|rho| must be strictly less than 1")
    return Cov2(sigma_x * sigma_x, rho * sigma_x * sigma_y, sigma_y * sigma_y)


def params_from_cov(c: Cov2) -> tuple[float, float, float]:
    """Inverse of :func:`cov_from_params`; requires a positive-definite input."""
    if c.sxx <= 0.0 or c.syy <= 0.0 or c.det <= 0.0:
        raise ValueError("covariance is not positive definite")
    sigma_x = math.sqrt(c.sxx)
    sigma_y = math.sqrt(c.syy)
    return sigma_x, sigma_y, c.sxy / (sigma_x * sigma_y)


def is_psd(c: Cov2, tol: float = PSD_TOL) -> bool:
    """Tolerant positive-semidefiniteness test for a symmetric 2x2 matrix."""
    if tol < 0.0:
        raise ValueError("tol must be non-negative")
    if c.sxx < -tol or c.syy < -tol:
        return False
    return c.det >= -tol * max(1.0, c.sxx * c.syy)


def log_density(g: Gaussian2D, p: np.ndarray) -> float:
    """Log-density of ``g`` at point ``p`` in nats."""
    p = np.asarray(p, dtype=float)
    u = (p[0] - g.x) / g.sigma_x
    v = (p[1] - g.y) / g.sigma_y
    one_minus_r2 = 1.0 - g.rho * g.rho
    quad = (u * u - 2.0 * g.rho * u * v + v * v) / one_minus_r2
    norm = math.log(2.0 * math.pi * g.sigma_x * g.sigma_y * math.sqrt(one_minus_r2))
    return -norm - 0.5 * quad
