"""Losses, motion-quality metrics and contact annotation."""
from .contacts import CONTACT_HEIGHT, GroundPlane, annotate_contacts, fit_ground_plane
from .losses import Camera2D, binary_entropy, loss_2d, loss_3d, loss_contact, loss_reg, loss_trans
from .metrics import (
    accel_error,
    foot_sliding,
    g_mpjpe,
    ground_penetration,
    mpjpe,
    pa_mpjpe,
    pve_joints,
    similarity_align,
    world_joint_positions,
)

__all__ = [
    "CONTACT_HEIGHT", "GroundPlane", "annotate_contacts", "fit_ground_plane",
    "Camera2D", "binary_entropy", "loss_2d", "loss_3d", "loss_contact", "loss_reg", "loss_trans",
    "accel_error", "foot_sliding", "g_mpjpe", "ground_penetration", "mpjpe", "pa_mpjpe",
    "pve_joints", "similarity_align", "world_joint_positions",
]
