"""Rollout backbones and the goal-refined rollout loop.

Three closed-form backbones stand behind one predictor contract: constant
velocity (cv), constant acceleration (ca, quadratic extrapolation over a
sliding window) and an autoregressive displacement model (ar). Each emits a
Gaussian estimate per future step whose covariance comes from a per-horizon
calibration table, so uncertainty grows with the horizon the way the
backbone's own rollout errors actually grow.

The refined rollout predicts goal anchors once, then at every step fuses the
raw backbone estimate with the interpolated goal measurement and (by
default) feeds the fused mean back into the predictor's position buffer.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .data import Dataset
from .fusion import Estimate, SingularInnovationError, fuse
from .gaussian import PSD_TOL, Cov2, is_psd
from .goals import GoalModelParams, InterpConfig, goal_measurement_at, predict_goals

BACKBONES = ("cv", "ca", "ar")

COV_FLOOR = 1e-6  # m^2, keeps calibrated covariances positive definite


@dataclass(frozen=True)
class PredictorParams:
    """Fitted backbone parameters plus the per-step covariance table.

    step_covs[k-1] is the estimate-error covariance attached to future step
    k; its trace must be non-decreasing in k (uncertainty grows with the
    horizon). cv/ca use a position window of length ``window``; ar uses the
    last ``lag`` displacement vectors with ``ar_weights`` of shape
    (2*lag, 2).
    """

    backbone: str
    dt: float
    step_covs: tuple[Cov2, ...]
    window: int = 2
    lag: int = 1
    ar_weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {self.backbone!r}; valid: {BACKBONES}")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if not self.step_covs:
            raise ValueError("at least one per-step covariance is required")
        prev = -np.inf
        for k, cov in enumerate(self.step_covs, start=1):
            if not is_psd(cov, PSD_TOL):
                raise ValueError(f"step covariance {k} is not PSD")
            if cov.trace < prev - 1e-9 * max(1.0, prev):
                raise ValueError("step covariance traces must be non-decreasing")
            prev = cov.trace
        if self.backbone == "cv" and self.window < 2:
            raise ValueError("cv backbone needs a window of at least 2 positions")
        if self.backbone == "ca" and self.window < 3:
            raise ValueError("ca backbone needs a window of at least 3 positions")
        if self.backbone == "ar":
            if self.lag < 1:
                raise ValueError("ar backbone needs lag >= 1")
            if self.ar_weights is None:
                raise ValueError("ar backbone needs a weight matrix")
            w = np.asarray(self.ar_weights, dtype=float)
            if w.shape != (2 * self.lag, 2):
                raise ValueError(
                    f"ar weights must have shape ({2 * self.lag}, 2), got {w.shape}"
                )
            object.__setattr__(self, "ar_weights", w)

    @property
    def horizon(self) -> int:
        return len(self.step_covs)

    @property
    def buffer_len(self) -> int:
        return self.window if self.backbone in ("cv", "ca") else self.lag + 1


@dataclass(frozen=True)
class PredictorState:
    """Recent position buffer (oldest first) and completed-step counter."""

    buffer: np.ndarray
    step: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "buffer", np.asarray(self.buffer, dtype=float))


@dataclass(frozen=True)
class RefineConfig:
    """Refinement loop knobs.

    feedback 'fused' replaces the predictor's latest buffered position with
    the fused mean; 'raw' leaves the backbone rolling out on its own output
    while the fused sequence is still what gets returned. goal_cov_scale
    multiplies every goal measurement covariance (1e12 recovers the vanilla
    rollout, 1e-12 snaps the output onto the goals).
    """

    refine_enabled: bool = True
    epsilon: float = 0.05
    beta: float = 0.5
    feedback: str = "fused"
    goal_cov_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.feedback not in ("fused", "raw"):
            raise ValueError("feedback mode must be 'fused' or 'raw'")
        if self.goal_cov_scale <= 0.0:
            raise ValueError("goal_cov_scale must be positive")
        # epsilon/beta domains are enforced by InterpConfig
        InterpConfig(self.epsilon, self.beta)

    def interp(self) -> InterpConfig:
        return InterpConfig(self.epsilon, self.beta)


def predictor_init(params: PredictorParams, history: np.ndarray) -> PredictorState:
    """Prime a rollout state with the tail of the observed history."""
    history = np.asarray(history, dtype=float)
    need = params.buffer_len
    if history.ndim != 2 or history.shape[1] != 2:
        raise ValueError("history must be an (n, 2) array")
    if len(history) < need:
        raise ValueError(
            f"{params.backbone} backbone needs at least {need} history points, "
            f"got {len(history)}"
        )
    return PredictorState(buffer=history[-need:].copy(), step=0)


@lru_cache(maxsize=None)
def _quadratic_extrapolation_coeffs(window: int) -> tuple[float, ...]:
    """Weights over the window positions whose dot product extrapolates a
    least-squares quadratic one step past the window (dt cancels out)."""
    t = np.arange(window, dtype=float)
    vander = np.column_stack([np.ones(window), t, t * t])
    coeffs = np.array([1.0, float(window), float(window) ** 2]) @ np.linalg.pinv(vander)
    return tuple(coeffs)


def _step_mean(params: PredictorParams, buffer: np.ndarray) -> np.ndarray:
    if params.backbone == "cv":
        velocity = (buffer[-1] - buffer[0]) / ((len(buffer) - 1) * params.dt)
        return buffer[-1] + velocity * params.dt
    if params.backbone == "ca":
        coeffs = np.asarray(_quadratic_extrapolation_coeffs(len(buffer)))
        return coeffs @ buffer
    phi = np.diff(buffer, axis=0).ravel()
    return buffer[-1] + phi @ params.ar_weights


def predictor_step(
    params: PredictorParams, state: PredictorState
) -> tuple[Estimate, PredictorState]:
    """Emit the next step's Gaussian estimate and the advanced state.

    The raw predicted mean is appended to the buffer; callers that refine
    replace it afterwards via :func:`predictor_feedback`.
    """
    if state.step >= params.horizon:
        raise ValueError(
            f"rollout horizon of {params.horizon} steps exceeded at step "
            f"{state.step + 1}"
        )
    mean = _step_mean(params, state.buffer)
    estimate = Estimate(mean, params.step_covs[state.step])
    buffer = np.vstack([state.buffer[1:], mean])
    return estimate, PredictorState(buffer=buffer, step=state.step + 1)


def predictor_feedback(
    params: PredictorParams, state: PredictorState, fused_mean: np.ndarray
) -> PredictorState:
    """Replace the most recently predicted position with the fused one.

    Velocity/displacement features are derived from the buffer on demand,
    so no other state needs recomputing here.
    """
    if state.step < 1:
        raise ValueError("feedback requires at least one completed step")
    buffer = state.buffer.copy()
    buffer[-1] = np.asarray(fused_mean, dtype=float).reshape(2)
    return PredictorState(buffer=buffer, step=state.step)


def _series(seg) -> np.ndarray:
    return np.vstack([seg.history, seg.future])


def _solve_ridge(x: np.ndarray, y: np.ndarray, ridge_lambda: float) -> np.ndarray:
    gram = x.T @ x
    if ridge_lambda == 0.0:
        eigs = np.linalg.eigvalsh(gram)
        if eigs[0] <= 1e-12 * max(1.0, eigs[-1]):
            raise ValueError(
                "normal equations are singular with ridge_lambda=0 "
                "(rank-deficient features)"
            )
    return np.linalg.solve(gram + ridge_lambda * np.eye(gram.shape[0]), x.T @ y)


def fit_predictor(
    backbone: str,
    train: Dataset,
    val: Dataset | None = None,
    *,
    window: int = 2,
    lag: int = 3,
    ridge_lambda: float = 1e-6,
    horizon: int | None = None,
) -> PredictorParams:
    """Fit a backbone plus its per-horizon error covariance table.

    ar weights come from closed-form ridge normal equations on one-step
    displacement prediction over each training series. The covariance at
    step k is the second moment of the backbone's own vanilla-rollout errors
    at that horizon on the validation set (training set when none is given),
    floored with +1e-6 I and forced trace-non-decreasing in k by running
    maximum.
    """
    if backbone not in BACKBONES:
        raise ValueError(f"unknown backbone {backbone!r}; valid: {BACKBONES}")
    if not train.segments:
        raise ValueError("training set is empty")
    horizon = train.horizon if horizon is None else int(horizon)
    if horizon < 1 or horizon > train.horizon:
        raise ValueError(f"horizon must be in [1, {train.horizon}]")

    ar_weights = None
    if backbone == "ar":
        feats, targets = [], []
        for seg in train.segments:
            disp = np.diff(_series(seg), axis=0)
            for j in range(lag, len(disp)):
                feats.append(disp[j - lag : j].ravel())
                targets.append(disp[j])
        if not feats:
            raise ValueError("training segments are too short for the requested lag")
        ar_weights = _solve_ridge(np.asarray(feats), np.asarray(targets), ridge_lambda)

    flat = Cov2.isotropic(1.0)
    probe = PredictorParams(
        backbone,
        train.dt,
        (flat,) * horizon,
        window=window,
        lag=lag,
        ar_weights=ar_weights,
    )
    calib = val if val is not None and val.segments else train
    if calib.horizon < horizon:
        raise ValueError("calibration futures are shorter than the fitted horizon")
    errors = np.empty((len(calib.segments), horizon, 2))
    for i, seg in enumerate(calib.segments):
        estimates = rollout_vanilla(probe, seg.history, horizon)
        preds = np.array([e.mean for e in estimates])
        errors[i] = preds - seg.future[:horizon]

    step_covs = []
    running_max = 0.0
    for k in range(horizon):
        e = errors[:, k, :]
        moment = e.T @ e / len(e) + COV_FLOOR * np.eye(2)
        trace = moment[0, 0] + moment[1, 1]
        if trace < running_max:
            moment = moment * (running_max / trace)
        running_max = max(running_max, trace)
        step_covs.append(Cov2.from_matrix(0.5 * (moment + moment.T)))

    return PredictorParams(
        backbone,
        train.dt,
        tuple(step_covs),
        window=window,
        lag=lag,
        ar_weights=ar_weights,
    )


def fit_ar_rls(pairs, forgetting: float = 1.0, delta: float = 1e-8) -> np.ndarray:
    """Classical recursive least squares with exponential forgetting.

    Processes a stream of (feature, target) pairs one at a time. With
    forgetting 1 the result matches the batch ridge solution with ridge
    delta; with forgetting < 1 it matches the exponentially weighted batch
    solution. The recursion is well defined for any delta > 0.
    """
    if not 0.0 < forgetting <= 1.0:
        raise ValueError("forgetting factor must be in (0, 1]")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    weights = None
    p = None
    scalar_target = False
    for x, y in pairs:
        x = np.asarray(x, dtype=float).ravel()
        y_arr = np.asarray(y, dtype=float)
        scalar_target = y_arr.ndim == 0
        y_arr = np.atleast_1d(y_arr)
        if weights is None:
            weights = np.zeros((x.size, y_arr.size))
            p = np.eye(x.size) / delta
        px = p @ x
        gain = px / (forgetting + x @ px)
        weights = weights + np.outer(gain, y_arr - x @ weights)
        p = (p - np.outer(gain, px)) / forgetting
        p = 0.5 * (p + p.T)
    if weights is None:
        raise ValueError("at least one (feature, target) pair is required")
    return weights[:, 0] if scalar_target else weights


def rollout_vanilla(
    params: PredictorParams, history: np.ndarray, horizon: int | None = None
) -> list[Estimate]:
    """Plain rollout: repeated one-step prediction, no fusion, no feedback."""
    horizon = params.horizon if horizon is None else int(horizon)
    state = predictor_init(params, history)
    estimates = []
    for _ in range(horizon):
        estimate, state = predictor_step(params, state)
        estimates.append(estimate)
    return estimates


def rollout_refined(
    params: PredictorParams,
    goal_params: GoalModelParams,
    history: np.ndarray,
    horizon: int | None = None,
    cfg: RefineConfig = RefineConfig(),
) -> list[Estimate]:
    """Goal-refined rollout.

    Goals are predicted exactly once up front. At each step k the raw
    backbone estimate is fused with the goal measurement for k, the fused
    estimate is emitted, and (in 'fused' feedback mode) the fused mean
    replaces the raw one in the predictor's buffer before the next step.
    """
    horizon = params.horizon if horizon is None else int(horizon)
    history = np.asarray(history, dtype=float)
    goals = predict_goals(goal_params, history)
    interp = cfg.interp()
    last_obs = history[-1]
    state = predictor_init(params, history)
    fused_estimates = []
    for k in range(1, horizon + 1):
        raw, state = predictor_step(params, state)
        meas = goal_measurement_at(goals, k, last_obs, interp)
        if cfg.goal_cov_scale != 1.0:
            meas = Estimate(meas.mean, meas.cov.scaled(cfg.goal_cov_scale))
        try:
            fused = fuse(raw, meas)
        except SingularInnovationError as exc:
            raise SingularInnovationError(f"step {k}: {exc}", step=k) from exc
        if cfg.feedback == "fused":
            state = predictor_feedback(params, state, fused.mean)
        fused_estimates.append(fused)
    return fused_estimates


def rollout(
    params: PredictorParams,
    goal_params: GoalModelParams | None,
    history: np.ndarray,
    horizon: int | None = None,
    cfg: RefineConfig = RefineConfig(),
) -> list[Estimate]:
    """Dispatch on cfg.refine_enabled; vanilla rollouts need no goal model."""
    if cfg.refine_enabled:
        if goal_params is None:
            raise ValueError("refined rollout requires a goal model")
        return rollout_refined(params, goal_params, history, horizon, cfg)
    return rollout_vanilla(params, history, horizon)
