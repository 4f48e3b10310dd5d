"""Recursive joint Jacobians, the inertia matrix and the Coriolis/centripetal torque.

Jacobians are stored dense: ``(n_nodes, 3, 75)``. The recursions walk the tree
once, parents before children:

    J_w[i] = J_w[parent] + R_parent @ W(theta_i)   (placed in joint i's columns)
    J_v[i] = J_v[parent] - [dr_i]_x @ J_w[parent]

with ``J_v[root] = [E | 0]``. The linear recursion uses the parent's angular
Jacobian because a bone vector ``dr_i = R_parent @ offset_i`` turns with the
parent frame.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .body import (
    BodySpec,
    JointPlacements,
    euler_rate_matrix,
    forward_kinematics,
    forward_kinematics_batch,
    skew,
)
from .config import get_numerics
from .validation import check_pose


@dataclass(frozen=True, eq=False)
class JacobianSet:
    J_omega: np.ndarray  # (n, 3, 75)
    J_v: np.ndarray      # (n, 3, 75)
    placements: JointPlacements


def _angular_batch(body: BodySpec, Q, rot):
    B = Q.shape[0]
    J_w = np.zeros((B, body.n_nodes, 3, body.n_dof))
    J_w[:, 0, :, 3:6] = euler_rate_matrix(Q[:, 3:6])
    for i in range(1, body.n_nodes):
        p = body.parent[i]
        J_w[:, i] = J_w[:, p]
        s = body.dof_start[i]
        if s >= 0:
            J_w[:, i, :, s:s + 3] += rot[:, p] @ euler_rate_matrix(Q[:, s:s + 3])
    return J_w


def _linear_batch(body: BodySpec, part, J_w):
    B = part.shape[0]
    J_v = np.zeros((B, body.n_nodes, 3, body.n_dof))
    J_v[:, 0, :, 0:3] = np.eye(3)
    S = skew(part)
    for i in range(1, body.n_nodes):
        p = body.parent[i]
        J_v[:, i] = J_v[:, p] - S[:, i] @ J_w[:, p]
    return J_v


def _inertia_batch(body: BodySpec, Q):
    _, rot, part = forward_kinematics_batch(body, Q)
    J_w = _angular_batch(body, Q, rot)
    J_v = _linear_batch(body, part, J_w)
    I_c = rot @ body.rest_inertia @ np.swapaxes(rot, -1, -2)
    return _assemble(body.mass, J_v, J_w, I_c)


def _assemble(mass, J_v, J_w, I_c):
    # Stack node rows so each Gram sum is one batched matmul.
    B, n, _, d = J_v.shape
    A = (J_v * np.sqrt(mass)[None, :, None, None]).reshape(B, 3 * n, d)
    M = np.swapaxes(A, 1, 2) @ A
    M += np.swapaxes(J_w.reshape(B, 3 * n, d), 1, 2) @ (I_c @ J_w).reshape(B, 3 * n, d)
    return 0.5 * (M + np.swapaxes(M, 1, 2))


def angular_jacobians(body: BodySpec, q, placements: JointPlacements | None = None):
    """Per-node angular Jacobians ``(n, 3, 75)``; ``omega_i = J_omega[i] @ dq``."""
    q = check_pose(q)
    if placements is None:
        placements = forward_kinematics(body, q)
    return _angular_batch(body, q[None], placements.rotation[None])[0]


def linear_jacobians(body: BodySpec, q, J_omega, placements: JointPlacements | None = None):
    """Per-node linear Jacobians ``(n, 3, 75)``; ``v_i = J_v[i] @ dq``."""
    if placements is None:
        placements = forward_kinematics(body, q)
    return _linear_batch(body, placements.part_vector[None], np.asarray(J_omega)[None])[0]


def compute_jacobians(body: BodySpec, q) -> JacobianSet:
    q = check_pose(q)
    placements = forward_kinematics(body, q)
    J_w = angular_jacobians(body, q, placements)
    J_v = linear_jacobians(body, q, J_w, placements)
    return JacobianSet(J_omega=J_w, J_v=J_v, placements=placements)


def rotated_inertia(body: BodySpec, placements: JointPlacements):
    """Per-node inertia tensors rotated into the camera frame, ``R I R^T``."""
    R = placements.rotation
    return R @ body.rest_inertia @ np.swapaxes(R, 1, 2)


def inertia_matrix(body: BodySpec, q, jac: JacobianSet | None = None):
    """``M = sum_i m_i J_v^T J_v + J_w^T I_c J_w``, symmetrised."""
    if jac is None:
        jac = compute_jacobians(body, q)
    I_c = rotated_inertia(body, jac.placements)
    return _assemble(body.mass, jac.J_v[None], jac.J_omega[None], I_c[None])[0]


def inertia_derivatives(body: BodySpec, q, step=None):
    """Central-difference ``dM/dq_k`` stacked as ``(k, m, n)``.

    M does not depend on the root translation, so those slices are zero.
    """
    q = check_pose(q)
    if step is None:
        step = get_numerics().coriolis_fd_step
    n = body.n_dof
    cols = np.arange(3, n)
    Q = np.tile(q, (2 * cols.size, 1))
    Q[np.arange(cols.size), cols] += step
    Q[cols.size + np.arange(cols.size), cols] -= step
    M = _inertia_batch(body, Q)
    dM = np.zeros((n, n, n))
    dM[3:] = (M[:cols.size] - M[cols.size:]) / (2.0 * step)
    return dM


def coriolis_matrix(body: BodySpec, q, dq, dM=None):
    """``C(q, dq)`` from Christoffel symbols of the first kind.

    ``C[i, j] = 1/2 sum_k (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) dq_k``.
    """
    dq = check_pose(dq, "dq")
    if dM is None:
        dM = inertia_derivatives(body, q)
    M_dot = np.einsum("kij,k->ij", dM, dq)
    # term2[i, j] = sum_k dM[j][i, k] dq_k ; term3[i, j] = sum_k dM[i][j, k] dq_k
    term2 = np.einsum("jik,k->ij", dM, dq)
    term3 = np.einsum("ijk,k->ij", dM, dq)
    return 0.5 * (M_dot + term2 - term3)


def coriolis_torque(body: BodySpec, q, dq, dM=None):
    dq = check_pose(dq, "dq")
    if not np.any(dq):
        return np.zeros(body.n_dof)
    return coriolis_matrix(body, q, dq, dM) @ dq


def kinetic_energy(body: BodySpec, q, dq, jac: JacobianSet | None = None):
    dq = check_pose(dq, "dq")
    M = inertia_matrix(body, q, jac)
    return 0.5 * dq @ M @ dq
