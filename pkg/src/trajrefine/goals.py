"""Goal-point model: once-per-segment anchor prediction and per-step measurements.

A set of goal anchors (future-step indices carrying a position Gaussian) is
predicted exactly once from the observed history. Each anchor has its own
independent ridge regressor from ego-frame history displacements to the
anchor displacement, so removing one anchor never perturbs another. At
refinement time the sparse anchors are turned into a pseudo-measurement for
every horizon step by linear interpolation of means and covariances, which
preserves positive semidefiniteness (convex combinations of PSD matrices).

The ego frame translates the last observed position to the origin and, by
default, rotates the net history heading onto +x so the regressors are
position- and heading-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .fusion import Estimate
from .gaussian import Cov2, Gaussian2D, params_from_cov

RESIDUAL_FLOOR = 1e-6  # m^2 added to residual covariances; keeps fusion nonsingular

DEFAULT_ANCHOR_STEPS = (5, 10, 15, 20, 25)  # every whole second at dt = 0.2 s


@dataclass(frozen=True)
class GoalAnchor:
    """A future-step index together with its predicted position Gaussian."""

    step: int
    gaussian: Gaussian2D

    def __post_init__(self) -> None:
        if self.step < 1:
            raise ValueError("anchor step must be >= 1")


@dataclass(frozen=True)
class GoalSet:
    """Ordered, non-empty anchors with strictly increasing steps."""

    anchors: tuple[GoalAnchor, ...]

    def __post_init__(self) -> None:
        anchors = tuple(self.anchors)
        if not anchors:
            raise ValueError("goal set must contain at least one anchor")
        steps = [a.step for a in anchors]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError(f"anchor steps must be strictly increasing, got {steps}")
        object.__setattr__(self, "anchors", anchors)

    @property
    def steps(self) -> tuple[int, ...]:
        return tuple(a.step for a in self.anchors)


@dataclass(frozen=True)
class InterpConfig:
    """Interpolation knobs for steps without an anchor.

    epsilon is the variance (m^2) of the virtual step-0 anchor pinned at the
    last observed position; beta inflates the held covariance by beta * gap
    per step beyond the last anchor.
    """

    epsilon: float = 0.05
    beta: float = 0.5

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.beta < 0.0:
            raise ValueError("beta must be non-negative")


@dataclass(frozen=True)
class GoalModelParams:
    """Per-anchor ridge regressors plus ego-frame configuration.

    weights[i] maps the flattened ego-frame history displacements
    (2*tau features) to the ego-frame displacement of anchor_steps[i];
    residual_covs[i] is the matching ego-frame residual covariance.
    """

    anchor_steps: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    residual_covs: tuple[Cov2, ...]
    history_len: int
    rotate: bool = True

    def __post_init__(self) -> None:
        steps = tuple(int(s) for s in self.anchor_steps)
        if not steps or any(s < 1 for s in steps):
            raise ValueError("anchor steps must be >= 1")
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError("anchor steps must be strictly increasing")
        if not (len(self.weights) == len(self.residual_covs) == len(steps)):
            raise ValueError("one (weights, residual_cov) pair required per anchor")
        feat = 2 * (self.history_len - 1)
        weights = tuple(np.asarray(w, dtype=float).reshape(feat, 2) for w in self.weights)
        object.__setattr__(self, "anchor_steps", steps)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "residual_covs", tuple(self.residual_covs))


def _heading_angle(history: np.ndarray) -> float:
    """Direction of the net history displacement; 0 for a stationary history."""
    net = history[-1] - history[0]
    if float(np.hypot(net[0], net[1])) < 1e-12:
        return 0.0
    return float(np.arctan2(net[1], net[0]))


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _ego_features(history: np.ndarray, rotate: bool) -> tuple[np.ndarray, np.ndarray]:
    """Flattened ego-frame displacement features and the ego->world rotation."""
    rot = _rotation(_heading_angle(history)) if rotate else np.eye(2)
    disp = np.diff(history, axis=0)
    return (disp @ rot).ravel(), rot  # disp @ rot == each row rotated by -theta


def fit_goal_model(
    train: Dataset,
    anchor_steps: tuple[int, ...] = DEFAULT_ANCHOR_STEPS,
    ridge_lambda: float = 1e-6,
    val: Dataset | None = None,
    rotate: bool = True,
) -> GoalModelParams:
    """Fit one independent ridge regressor per anchor step.

    Each anchor solves its normal equations in closed form for the ego-frame
    anchor displacement. Residual covariances are the second moment of the
    held-out residuals (training residuals when no validation set is given),
    floored with +1e-6 I so downstream fusion stays well conditioned.
    """
    if ridge_lambda < 0.0:
        raise ValueError("ridge_lambda must be >= 0")
    if not train.segments:
        raise ValueError("training set is empty")
    steps = tuple(int(s) for s in anchor_steps)
    if max(steps) > train.horizon:
        raise ValueError(
            f"anchor step {max(steps)} exceeds the future length {train.horizon}"
        )

    def design(ds: Dataset) -> tuple[np.ndarray, list[np.ndarray]]:
        feats, rots = [], []
        for seg in ds.segments:
            phi, rot = _ego_features(seg.history, rotate)
            feats.append(phi)
            rots.append(rot)
        return np.asarray(feats), rots

    def targets(ds: Dataset, rots: list[np.ndarray], step: int) -> np.ndarray:
        rows = []
        for seg, rot in zip(ds.segments, rots):
            rows.append((seg.future[step - 1] - seg.history[-1]) @ rot)
        return np.asarray(rows)

    x_train, rot_train = design(train)
    gram = x_train.T @ x_train
    if ridge_lambda == 0.0:
        eigs = np.linalg.eigvalsh(gram)
        if eigs[0] <= 1e-12 * max(1.0, eigs[-1]):
            raise ValueError(
                "normal equations are singular with ridge_lambda=0 "
                "(rank-deficient features); add ridge or more data"
            )
    lhs = gram + ridge_lambda * np.eye(gram.shape[0])

    holdout = val if val is not None and val.segments else train
    if holdout is train:
        x_hold, rot_hold = x_train, rot_train
    else:
        if max(steps) > holdout.horizon:
            raise ValueError("validation futures are shorter than the last anchor")
        x_hold, rot_hold = design(holdout)

    weights, residual_covs = [], []
    for step in steps:
        w = np.linalg.solve(lhs, x_train.T @ targets(train, rot_train, step))
        resid = x_hold @ w - targets(holdout, rot_hold, step)
        second_moment = resid.T @ resid / len(resid)
        cov = 0.5 * (second_moment + second_moment.T) + RESIDUAL_FLOOR * np.eye(2)
        weights.append(w)
        residual_covs.append(Cov2.from_matrix(cov))
    return GoalModelParams(
        anchor_steps=steps,
        weights=tuple(weights),
        residual_covs=tuple(residual_covs),
        history_len=train.tau + 1,
        rotate=rotate,
    )


def predict_goals(params: GoalModelParams, history: np.ndarray) -> GoalSet:
    """Predict every configured anchor once from the observed history.

    Regression runs in the ego frame; means and residual covariances are
    mapped back to world coordinates. Pure function of (params, history).
    """
    history = np.asarray(history, dtype=float)
    if history.ndim != 2 or history.shape != (params.history_len, 2):
        raise ValueError(
            f"history shape {history.shape} does not match the fitted "
            f"configuration ({params.history_len}, 2)"
        )
    phi, rot = _ego_features(history, params.rotate)
    origin = history[-1]
    anchors = []
    for step, w, rcov in zip(params.anchor_steps, params.weights, params.residual_covs):
        mean = origin + rot @ (phi @ w)
        world_cov = rot @ rcov.as_matrix() @ rot.T
        sx, sy, rho = params_from_cov(Cov2.from_matrix(world_cov))
        anchors.append(GoalAnchor(step, Gaussian2D(mean[0], mean[1], sx, sy, rho)))
    return GoalSet(tuple(anchors))


def goal_measurement_at(
    goals: GoalSet, k: int, last_obs: np.ndarray, cfg: InterpConfig = InterpConfig()
) -> Estimate:
    """Pseudo-measurement for future step k from the sparse anchor set.

    Anchor steps return the anchor Gaussian exactly. Steps between anchors
    (with a virtual step-0 anchor at the last observed position, variance
    epsilon) interpolate both mean and covariance linearly. Steps beyond the
    last anchor hold its mean and inflate its covariance by beta per step.
    """
    if k < 1:
        raise ValueError("step index must be >= 1")
    last_obs = np.asarray(last_obs, dtype=float).reshape(2)
    nodes = [(0, last_obs, Cov2.isotropic(cfg.epsilon).as_matrix())]
    nodes += [(a.step, a.gaussian.mean, a.gaussian.cov.as_matrix()) for a in goals.anchors]

    last_step, last_mean, last_cov = nodes[-1]
    if k >= last_step:
        inflated = last_cov + cfg.beta * (k - last_step) * np.eye(2)
        return Estimate(last_mean, Cov2.from_matrix(inflated))
    for (s0, m0, c0), (s1, m1, c1) in zip(nodes, nodes[1:]):
        if s0 <= k <= s1:
            w = (k - s0) / (s1 - s0)
            mean = (1.0 - w) * m0 + w * m1
            cov = (1.0 - w) * c0 + w * c1
            return Estimate(mean, Cov2.from_matrix(cov))
    raise AssertionError("unreachable: k inside anchor range but no bracket found")
