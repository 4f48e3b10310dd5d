"""Input validation helpers shared by the functional API and the estimators."""
from __future__ import annotations

import numpy as np

from .errors import ValidationError

POSE_DIM = 75


def check_finite(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_vector(x, length, name):
    arr = check_finite(x, name)
    if arr.shape != (length,):
        raise ValidationError(f"{name} must have shape ({length},), got {arr.shape}")
    return arr


def check_pose(q, name="q"):
    return check_vector(q, POSE_DIM, name)


def check_motion(motion, name="motion"):
    """A (T, 75) pose sequence."""
    arr = check_finite(motion, name)
    if arr.ndim != 2 or arr.shape[1] != POSE_DIM:
        raise ValidationError(f"{name} must have shape (T, {POSE_DIM}), got {arr.shape}")
    return arr


def check_points(X, name="X", min_ndim=2):
    """Joint clouds shaped (..., J, 3)."""
    arr = check_finite(X, name)
    if arr.ndim < min_ndim or arr.shape[-1] != 3:
        raise ValidationError(f"{name} must have shape (..., J, 3), got {arr.shape}")
    return arr


def check_same_shape(a, b, names=("prediction", "ground truth")):
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {names[0]} {a.shape} vs {names[1]} {b.shape}")


def check_probabilities(p, name="p"):
    arr = check_finite(p, name)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValidationError(f"{name} entries must lie in [0, 1]")
    return arr


def check_rotation(R, name="rotation", atol=1e-9):
    arr = check_finite(R, name)
    if arr.shape != (3, 3):
        raise ValidationError(f"{name} must be 3x3, got {arr.shape}")
    if not np.allclose(arr @ arr.T, np.eye(3), atol=atol) or np.linalg.det(arr) <= 0:
        raise ValidationError(f"{name} is not a proper rotation")
    return arr


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be positive, got {value}")
    return value
