"""Finite-difference self-checks of the Jacobians, inertia matrix and Coriolis term."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .body import BodySpec, forward_kinematics_batch
from .config import get_numerics
from .jacobians import (
    _inertia_batch,
    compute_jacobians,
    coriolis_matrix,
    inertia_matrix,
    rotated_inertia,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.max_error < self.tolerance)


def random_state(rng, angle=np.pi, speed=1.0):
    """Random pose with angles in ``[-angle, angle]`` and a Gaussian velocity."""
    q = rng.uniform(-angle, angle, 75)
    q[0:3] = rng.normal(size=3)
    return q, speed * rng.normal(size=75)


def linear_jacobian_error(body: BodySpec, q, node, h):
    """Relative Frobenius error of ``J_v[node]`` against central differences of positions."""
    n = q.shape[0]
    Q = np.concatenate([q + h * np.eye(n), q - h * np.eye(n)])
    pos, _, _ = forward_kinematics_batch(body, Q)
    fd = ((pos[:n, node] - pos[n:, node]) / (2 * h)).T
    J = compute_jacobians(body, q).J_v[node]
    return np.linalg.norm(J - fd) / max(np.linalg.norm(fd), np.finfo(float).tiny)


def angular_jacobian_error(body: BodySpec, q, dq, node, h):
    """Relative error of ``[J_w dq]_x`` against ``dR/dt R^T`` by central differences."""
    _, rot, _ = forward_kinematics_batch(body, np.stack([q + h * dq, q - h * dq, q]))
    Rdot = (rot[0, node] - rot[1, node]) / (2 * h)
    W = Rdot @ rot[2, node].T
    w_fd = 0.5 * np.array([W[2, 1] - W[1, 2], W[0, 2] - W[2, 0], W[1, 0] - W[0, 1]])
    w = compute_jacobians(body, q).J_omega[node] @ dq
    return np.linalg.norm(w - w_fd) / max(np.linalg.norm(w_fd), np.finfo(float).tiny)


def energy_identity_error(body: BodySpec, q, dq):
    """Relative gap between ``dq^T M dq / 2`` and the per-node kinetic energy sum."""
    jac = compute_jacobians(body, q)
    M = inertia_matrix(body, q, jac)
    v = jac.J_v @ dq
    w = jac.J_omega @ dq
    I_c = rotated_inertia(body, jac.placements)
    per_node = 0.5 * body.mass * (v ** 2).sum(axis=1) + 0.5 * np.einsum("ik,ikl,il->i", w, I_c, w)
    total = per_node.sum()
    return abs(0.5 * dq @ M @ dq - total) / max(abs(total), np.finfo(float).tiny)


def symmetry_error(body: BodySpec, q):
    M = inertia_matrix(body, q)
    return np.abs(M - M.T).max() / np.abs(M).max()


def min_inertia_eigenvalue(body: BodySpec, q):
    return float(np.linalg.eigvalsh(inertia_matrix(body, q)).min())


def skew_identity_error(body: BodySpec, q, dq, h):
    """``|dq^T (Mdot - 2C) dq|`` with ``Mdot`` differenced along ``dq``."""
    M_pm = _inertia_batch(body, np.stack([q + h * dq, q - h * dq]))
    M_dot = (M_pm[0] - M_pm[1]) / (2 * h)
    C = coriolis_matrix(body, q, dq)
    return abs(dq @ (M_dot - 2.0 * C) @ dq)


def run_checks(body: BodySpec, seed, trials):
    """Run every check on ``trials`` random states; one :class:`CheckResult` per check."""
    num = get_numerics()
    rng = np.random.default_rng(seed)
    worst = {"linear_jacobian": 0.0, "angular_jacobian": 0.0, "inertia_symmetry": 0.0,
             "inertia_positive_definite": 0.0, "energy_identity": 0.0, "coriolis_skew": 0.0}
    for _ in range(trials):
        q, dq = random_state(rng)
        node = int(rng.integers(1, body.n_nodes))
        worst["linear_jacobian"] = max(worst["linear_jacobian"],
                                       linear_jacobian_error(body, q, node, num.jacobian_fd_step))
        worst["angular_jacobian"] = max(worst["angular_jacobian"],
                                        angular_jacobian_error(body, q, dq, node, num.jacobian_fd_step))
        worst["inertia_symmetry"] = max(worst["inertia_symmetry"], symmetry_error(body, q))
        # Reported as a violation: positive when the smallest eigenvalue is not positive.
        lam = min_inertia_eigenvalue(body, q)
        worst["inertia_positive_definite"] = max(worst["inertia_positive_definite"],
                                                 0.0 if lam > 0 else 1.0 - lam)
        worst["energy_identity"] = max(worst["energy_identity"], energy_identity_error(body, q, dq))
        worst["coriolis_skew"] = max(worst["coriolis_skew"],
                                     skew_identity_error(body, q, dq, num.coriolis_fd_step))
    tol = {"linear_jacobian": num.jacobian_rel_tol, "angular_jacobian": num.jacobian_rel_tol,
           "inertia_symmetry": num.inertia_symmetry_tol, "inertia_positive_definite": 0.5,
           "energy_identity": num.energy_rel_tol, "coriolis_skew": num.skew_symmetry_tol}
    return [CheckResult(name, float(worst[name]), tol[name]) for name in worst]
