"""Fusion of two Gaussian position estimates.

Implements the gain-form update

    K = P H^T (H P H^T + R)^-1
    x' = x + K (z - H x)
    P' = (I - K H) P

together with the algebraically equivalent precision-weighted (information)
form, which serves as an independent cross-check. The prior (x, P) plays the
role of a rollout estimate and the measurement (z, R) the role of a
goal-derived pseudo-observation; H is the identity in that pipeline but the
general form is kept in the API.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import PSD_TOL, Cov2, is_psd

# Innovation covariances with determinant at or below this (relative) level
# signal that both inputs are degenerate in the same direction.
SINGULARITY_TOL = 1e-15


class SingularInnovationError(ValueError):
    """Raised when the innovation covariance is numerically singular.

    Carries the rollout step index when raised from within a refinement
    loop, None otherwise.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class Estimate:
    """A Gaussian position estimate: mean (meters) plus 2x2 covariance."""

    mean: np.ndarray
    cov: Cov2

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float).reshape(2)
        if not np.all(np.isfinite(mean)):
            raise ValueError("estimate mean must be finite")
        object.__setattr__(self, "mean", mean)
        if not is_psd(self.cov, PSD_TOL):
            raise ValueError("estimate covariance must be positive semidefinite")


def _inv2(m: np.ndarray, det: float) -> np.ndarray:
    """Closed-form inverse of a 2x2 matrix with precomputed determinant."""
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]], dtype=float) / det


def rls_gain(prior_cov: Cov2, meas_cov: Cov2, h: np.ndarray) -> np.ndarray:
    """Gain K = P H^T (H P H^T + R)^-1 as a 2x2 array.

    Raises SingularInnovationError when H P H^T + R is numerically singular
    (determinant <= 1e-15 * max(1, trace^2)); a silent pseudo-inverse would
    hide a degenerate goal model.
    """
    h = np.asarray(h, dtype=float).reshape(2, 2)
    p = prior_cov.as_matrix()
    s = h @ p @ h.T + meas_cov.as_matrix()
    det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
    scale = max(1.0, (s[0, 0] + s[1, 1]) ** 2)
    if det <= SINGULARITY_TOL * scale:
        raise SingularInnovationError(
            f"innovation covariance is singular (det={det:.3e})"
        )
    return p @ h.T @ _inv2(s, det)


def rls_update(prior: Estimate, measurement: Estimate, h: np.ndarray) -> Estimate:
    """One gain-form update of ``prior`` by ``measurement`` through ``h``.

    The posterior covariance (I - K H) P is symmetrized before being stored,
    since the short-form expression is asymmetric under rounding.
    """
    h = np.asarray(h, dtype=float).reshape(2, 2)
    k = rls_gain(prior.cov, measurement.cov, h)
    mean = prior.mean + k @ (measurement.mean - h @ prior.mean)
    cov = (np.eye(2) - k @ h) @ prior.cov.as_matrix()
    return Estimate(mean, Cov2.from_matrix(0.5 * (cov + cov.T)))


def fuse(prior: Estimate, measurement: Estimate) -> Estimate:
    """Gain-form fusion with the observation matrix fixed to the identity."""
    return rls_update(prior, measurement, np.eye(2))


def info_fuse(prior: Estimate, measurement: Estimate) -> Estimate:
    """Precision-weighted product of two Gaussians.

    Sigma' = (P^-1 + R^-1)^-1 and mu' = Sigma' (P^-1 x + R^-1 z). Identical
    to :func:`fuse` for positive-definite inputs; kept as an independent
    formulation so the two can validate each other.
    """
    p = prior.cov.as_matrix()
    r = measurement.cov.as_matrix()
    p_det = prior.cov.det
    r_det = measurement.cov.det
    if prior.cov.sxx <= 0.0 or p_det <= 0.0:
        raise ValueError("prior covariance must be positive definite")
    if measurement.cov.sxx <= 0.0 or r_det <= 0.0:
        raise ValueError("measurement covariance must be positive definite")
    p_inv = _inv2(p, p_det)
    r_inv = _inv2(r, r_det)
    info = p_inv + r_inv
    cov = _inv2(info, info[0, 0] * info[1, 1] - info[0, 1] * info[1, 0])
    cov = 0.5 * (cov + cov.T)
    mean = cov @ (p_inv @ prior.mean + r_inv @ measurement.mean)
    return Estimate(mean, Cov2.from_matrix(cov))
