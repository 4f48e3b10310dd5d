"""Pose accuracy and physical plausibility metrics.

Inputs are in meters and seconds; every metric is reported in millimeters
(ACCEL in mm/s^2).
"""
from __future__ import annotations

import numpy as np

from ..body import BodySpec, forward_kinematics_batch
from ..errors import ValidationError
from ..validation import check_finite, check_motion, check_points, check_positive, check_same_shape
from .contacts import GroundPlane

MM = 1000.0


def _pair(X, X_gt):
    X, X_gt = check_points(X), check_points(X_gt, "X_gt")
    check_same_shape(X, X_gt)
    return X, X_gt


def mpjpe(X, X_gt, root_align=False, root=0):
    """Mean Euclidean joint distance over ``(..., J, 3)`` clouds, in mm.

    With ``root_align`` both clouds are translated so joint ``root`` sits at
    the origin first.
    """
    X, X_gt = _pair(X, X_gt)
    if root_align:
        X = X - X[..., root:root + 1, :]
        X_gt = X_gt - X_gt[..., root:root + 1, :]
    return float(np.linalg.norm(X - X_gt, axis=-1).mean() * MM)


def pve_joints(X, X_gt, root_align=False, root=0):
    """Per-vertex error restricted to joints; identical to :func:`mpjpe`."""
    return mpjpe(X, X_gt, root_align, root)


def similarity_align(X, Y):
    """Scale, rotation and translation minimising ``|s R X + t - Y|`` over one cloud (J, 3).

    Closed form from the SVD of the cross-covariance, with a reflection guard.
    """
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mx, Y - my
    var_x = (Xc ** 2).sum()
    if var_x <= 0 or np.linalg.matrix_rank(Xc, tol=1e-12 * max(1.0, np.abs(Xc).max())) < 2:
        raise ValidationError("Procrustes alignment needs at least 3 non-collinear joints")
    U, S, Vt = np.linalg.svd(Yc.T @ Xc)
    D = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        D[2] = -1.0
    R = (U * D) @ Vt
    s = (S * D).sum() / var_x
    t = my - s * R @ mx
    return s, R, t


def pa_mpjpe(X, X_gt):
    """MPJPE after per-frame similarity alignment of the prediction, in mm."""
    X, X_gt = _pair(X, X_gt)
    Xf = X.reshape(-1, X.shape[-2], 3)
    Yf = X_gt.reshape(-1, X.shape[-2], 3)
    aligned = np.empty_like(Xf)
    for k, (x, y) in enumerate(zip(Xf, Yf)):
        s, R, t = similarity_align(x, y)
        aligned[k] = s * x @ R.T + t
    return mpjpe(aligned, Yf)


def accel_error(X_seq, X_gt_seq, dt):
    """Mean norm of the difference of second differences, divided by ``dt^2``, in mm/s^2."""
    X, X_gt = _pair(X_seq, X_gt_seq)
    dt = check_positive(dt, "dt")
    if X.ndim < 3 or X.shape[0] < 3:
        raise ValidationError("accel_error needs sequences of at least 3 frames shaped (T, J, 3)")
    acc = X[2:] - 2.0 * X[1:-1] + X[:-2]
    acc_gt = X_gt[2:] - 2.0 * X_gt[1:-1] + X_gt[:-2]
    return float(np.linalg.norm(acc - acc_gt, axis=-1).mean() / dt ** 2 * MM)


def foot_sliding(X_world_seq, contacts, plane: GroundPlane):
    """Mean in-plane displacement per step of feet labelled in contact, in mm.

    A (step, joint) pair counts when the joint is labelled in contact at both
    ends of the step. ``X_world_seq`` is ``(T, N_c, 3)`` and ``contacts`` is
    ``(T, N_c)``. Returns 0 when no pair qualifies.
    """
    X = check_points(X_world_seq, "foot positions")
    c = np.asarray(contacts, dtype=bool)
    if X.ndim != 3 or c.shape != X.shape[:2]:
        raise ValidationError(f"contacts {c.shape} do not match foot positions {X.shape}")
    both = c[1:] & c[:-1]
    if not both.any():
        return 0.0
    slide = np.linalg.norm(plane.in_plane(X[1:] - X[:-1]), axis=-1)
    return float(slide[both].mean() * MM)


def ground_penetration(X_world_seq, plane: GroundPlane):
    """Per frame, the mean depth of joints below the plane (0 if none); averaged over frames, in mm."""
    X = check_points(X_world_seq, "joint positions")
    if X.ndim == 2:
        X = X[None]
    depth = np.maximum(-plane.height(X), 0.0).reshape(X.shape[0], -1)
    below = depth > 0
    count = below.sum(axis=1)
    per_frame = np.where(count > 0, depth.sum(axis=1) / np.maximum(count, 1), 0.0)
    return float(per_frame.mean() * MM)


def g_mpjpe(X_world_seq, X_gt_world_seq, window_s=10.0, dt=0.04, root=0):
    """World-frame MPJPE over consecutive windows of ``window_s`` seconds, in mm.

    At the first frame of each window the prediction is shifted so its root
    joint coincides with the reference root; the shift is held for the whole
    window. Windows do not overlap and the last one may be shorter. A sequence
    shorter than one window is aligned once at frame 0.
    """
    X, X_gt = _pair(X_world_seq, X_gt_world_seq)
    if X.ndim != 3:
        raise ValidationError(f"world sequences must have shape (T, J, 3), got {X.shape}")
    window = max(1, int(round(check_positive(window_s, "window_s") / check_positive(dt, "dt"))))
    errors = []
    for start in range(0, X.shape[0], window):
        seg, ref = X[start:start + window], X_gt[start:start + window]
        shift = ref[0, root] - seg[0, root]
        errors.append(np.linalg.norm(seg + shift - ref, axis=-1))
    return float(np.concatenate(errors).mean() * MM)


def world_joint_positions(body: BodySpec, motion, trajectory=None, R_cam=None):
    """World joint positions ``(T, n, 3)`` from camera-frame poses and a world root path.

    Joint offsets from the root are rotated into the world by ``R_cam^T`` (per
    frame, identity when None) and attached to ``trajectory`` (the camera-frame
    root translation when None).
    """
    motion = check_motion(motion)
    pos, _, _ = forward_kinematics_batch(body, motion)
    rel = pos - pos[:, :1]
    if R_cam is not None:
        R = check_finite(R_cam, "R_cam")
        R = np.broadcast_to(R, (motion.shape[0], 3, 3))
        rel = rel @ R          # row vectors: (R^T v)^T = v^T R
    base = motion[:, 0:3] if trajectory is None else check_finite(trajectory, "trajectory")
    if base.shape != (motion.shape[0], 3):
        raise ValidationError(f"trajectory must have shape ({motion.shape[0]}, 3), got {base.shape}")
    return rel + base[:, None, :]
