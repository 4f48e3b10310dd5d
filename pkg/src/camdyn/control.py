"""Attentive PD control: re-targeting the kinematic reference and joint torques."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import get_numerics
from .errors import ValidationError
from .validation import POSE_DIM, check_finite, check_motion, check_pose

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControlInputs:
    """Per-frame gains ``(T, 75)``, offset torques ``(T, 75)`` and attention ``(T, T)``."""

    kp: np.ndarray
    kd: np.ndarray
    alpha: np.ndarray
    attention: np.ndarray

    def __post_init__(self):
        att = check_finite(self.attention, "attention")
        if att.ndim != 2 or att.shape[0] != att.shape[1]:
            raise ValidationError(f"attention must be square (T, T), got {att.shape}")
        if np.any(att < 0):
            raise ValidationError("attention weights must be non-negative")
        object.__setattr__(self, "attention", att)
        T = att.shape[0]
        for name in ("kp", "kd", "alpha"):
            arr = check_finite(getattr(self, name), name)
            if arr.shape != (T, POSE_DIM):
                raise ValidationError(f"{name} must have shape ({T}, {POSE_DIM}), got {arr.shape}")
            object.__setattr__(self, name, arr)
        if np.any(self.kp < 0) or np.any(self.kd < 0):
            raise ValidationError("PD gains must be non-negative")

    def __len__(self):
        return self.attention.shape[0]

    @classmethod
    def constant(cls, T, kp=0.0, kd=0.0, alpha=0.0, attention=None):
        """Constant gains; attention defaults to the identity (track frame t itself)."""
        full = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (T, POSE_DIM)).copy()
        att = np.eye(T) if attention is None else attention
        return cls(kp=full(kp), kd=full(kd), alpha=full(alpha), attention=att)


def unwrap_motion(motion):
    """Remove 2*pi jumps along time in every Euler-angle channel (columns 3:)."""
    motion = check_motion(motion)
    out = motion.copy()
    out[:, 3:] = np.unwrap(motion[:, 3:], axis=0)
    return out


def attentive_target(w_row, init_motion):
    """Convex combination ``sum_j w_j q_hat^j`` of the reference poses."""
    motion = check_motion(init_motion, "init_motion")
    w = check_finite(w_row, "attention")
    if w.shape != (motion.shape[0],):
        raise ValidationError(f"attention row must have length {motion.shape[0]}, got {w.shape}")
    if np.any(w < 0):
        raise ValidationError("attention weights must be non-negative")
    total = w.sum()
    if total <= 0:
        raise ValidationError("attention weights sum to zero")
    if abs(total - 1.0) > get_numerics().attention_sum_tol:
        log.warning("attention row sums to %.9g; renormalizing", total)
        w = w / total
    return w @ motion


def pd_torque(kp, kd, alpha, h_c, q_target_next, q, dq):
    """``kp * (q_target_next - q) - kd * dq + alpha + h_c`` (elementwise products)."""
    kp, kd, alpha, h_c, target, q, dq = (
        check_pose(v, name) for v, name in
        ((kp, "kp"), (kd, "kd"), (alpha, "alpha"), (h_c, "h_c"),
         (q_target_next, "q_target_next"), (q, "q"), (dq, "dq"))
    )
    return kp * (target - q) - kd * dq + alpha + h_c
