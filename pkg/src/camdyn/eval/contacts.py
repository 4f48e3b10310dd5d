"""Ground-plane fitting and the 4 cm contact labelling rule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..validation import check_finite, check_points

CONTACT_HEIGHT = 0.04  # meters


@dataclass(frozen=True)
class GroundPlane:
    """Plane ``{x : normal . x = offset}``; heights are positive on the normal side."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = check_finite(self.normal, "normal")
        if n.shape != (3,):
            raise ValidationError(f"normal must have shape (3,), got {n.shape}")
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValidationError("plane normal is zero")
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "offset", float(self.offset))

    def height(self, X):
        """Signed distance of points ``(..., 3)`` to the plane."""
        return np.asarray(X, dtype=float) @ self.normal - self.offset

    def in_plane(self, d):
        """Component of displacement vectors ``(..., 3)`` parallel to the plane."""
        d = np.asarray(d, dtype=float)
        return d - (d @ self.normal)[..., None] * self.normal

    def to_record(self):
        return {"normal": self.normal.tolist(), "offset": self.offset}


def fit_ground_plane(points, up_hint=None, rel_tol=1e-9):
    """Total least-squares plane through ``points`` (K, 3).

    The normal is the right singular vector of the centred cloud with the
    smallest singular value. It is flipped toward ``up_hint`` (a point that
    should lie above the ground) when given. Collinear or coincident points
    leave the plane undetermined and raise.
    """
    P = check_points(points, "toe positions").reshape(-1, 3)
    if P.shape[0] < 3:
        raise ValidationError("plane fit needs at least 3 points")
    centroid = P.mean(axis=0)
    _, s, Vt = np.linalg.svd(P - centroid, full_matrices=False)
    if s[1] <= rel_tol * max(s[0], np.finfo(float).tiny):
        raise ValidationError("toe trajectory is degenerate (collinear); cannot fit a ground plane")
    normal = Vt[2]
    if up_hint is not None and (np.asarray(up_hint, dtype=float) - centroid) @ normal < 0:
        normal = -normal
    return GroundPlane(normal=normal, offset=float(normal @ centroid))


def annotate_contacts(motion_world, toe_indices, contact_indices=None, threshold=CONTACT_HEIGHT):
    """Fit the ground to toe positions and label joints closer than ``threshold``.

    ``motion_world`` holds world joint positions ``(T, J, 3)``. Labels cover
    ``contact_indices`` (all joints when None) and are True iff the signed
    height above the fitted plane is below ``threshold``. The plane normal
    points toward the mean of all joints.
    """
    X = check_points(motion_world, "motion_world")
    if X.ndim != 3:
        raise ValidationError(f"motion_world must have shape (T, J, 3), got {X.shape}")
    if X.shape[0] < 3:
        raise ValidationError("contact annotation needs at least 3 frames")
    toes = list(toe_indices)
    if not toes:
        raise ValidationError("no toe joints given")
    plane = fit_ground_plane(X[:, toes], up_hint=X.reshape(-1, 3).mean(axis=0))
    joints = list(range(X.shape[1])) if contact_indices is None else list(contact_indices)
    labels = plane.height(X[:, joints]) < threshold
    return plane, labels
