"""Training losses, evaluated as plain functions of predictions and labels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..body import euler_to_matrix
from ..config import get_numerics
from ..errors import ValidationError
from ..validation import (
    check_finite,
    check_points,
    check_positive,
    check_probabilities,
    check_same_shape,
    check_vector,
)


@dataclass(frozen=True)
class Camera2D:
    """Pinhole intrinsics in pixels."""

    focal: float
    principal: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "focal", check_positive(self.focal, "focal"))
        object.__setattr__(self, "principal", tuple(check_vector(self.principal, 2, "principal")))

    def project(self, X):
        """``(f x / z + c_x, f y / z + c_y)`` for points ``(..., 3)``; all depths must be positive."""
        X = check_points(X, "X", min_ndim=1)
        z = X[..., 2]
        bad = np.argwhere(z <= 0)
        if bad.size:
            where = ", ".join(str(tuple(int(i) for i in idx)) for idx in bad[:10])
            raise ValidationError(f"points with non-positive depth at indices {where}")
        return self.focal * X[..., :2] / z[..., None] + np.asarray(self.principal)


def _clamp(p):
    eps = get_numerics().probability_clamp
    return np.clip(check_probabilities(p), eps, 1.0 - eps)


def _pose_rotations(q):
    q = check_finite(q, "q")
    if q.shape[-1] < 6 or q.shape[-1] % 3:
        raise ValidationError(f"pose vectors must have 3k + 6 entries, got {q.shape[-1]}")
    angles = q[..., 3:].reshape(q.shape[:-1] + (-1, 3))
    return euler_to_matrix(angles)


def loss_3d(X, X_gt, q, q_gt):
    """L1 joint error plus squared Frobenius distance of joint rotation matrices."""
    X, X_gt = check_points(X), check_points(X_gt, "X_gt")
    check_same_shape(X, X_gt)
    q, q_gt = np.asarray(q, dtype=float), np.asarray(q_gt, dtype=float)
    check_same_shape(q, q_gt, ("q", "q_gt"))
    joint = np.abs(X - X_gt).sum()
    pose = ((_pose_rotations(q) - _pose_rotations(q_gt)) ** 2).sum()
    return float(joint + pose)


def loss_2d(X, X_gt, cam: Camera2D):
    """L1 distance between pinhole projections of predicted and reference joints."""
    X, X_gt = check_points(X), check_points(X_gt, "X_gt")
    check_same_shape(X, X_gt)
    return float(np.abs(cam.project(X) - cam.project(X_gt)).sum())


def loss_trans(q_trans, q_trans_gt):
    a = check_vector(q_trans, 3, "q_trans")
    b = check_vector(q_trans_gt, 3, "q_trans_gt")
    return float(np.abs(a - b).sum())


def loss_contact(p, b_gt):
    """Mean binary cross-entropy of contact probabilities against labels."""
    p = _clamp(p)
    b = check_probabilities(b_gt, "b_gt")
    check_same_shape(p, b, ("p", "b_gt"))
    return float(np.mean(-b * np.log(p) - (1.0 - b) * np.log1p(-p)))


def binary_entropy(p):
    p = _clamp(p)
    return -p * np.log(p) - (1.0 - p) * np.log1p(-p)


def loss_reg(eta, p):
    """Squared root actuation plus mean contact entropy.

    Exact 0/1 probabilities contribute no entropy.
    """
    eta = check_vector(eta, 3, "eta")
    p = check_probabilities(p)
    h = np.where((p == 0.0) | (p == 1.0), 0.0, binary_entropy(p))
    return float(eta @ eta + np.mean(h))
