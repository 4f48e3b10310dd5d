"""Contact-constrained velocity projection.

Finds the velocities closest (in squared Euclidean norm) to the integrated ones
such that every joint with contact probability above 0.5 moves slower than
``epsilon`` in the world frame:

    min  |dq* - dq|^2 + |dq_trans* - dq_trans|^2
    s.t. |R_cam^T (J_v[i] dq* - dq*[0:3]) + dq_trans*| <= epsilon

Each constraint is a 3-D second-order cone ``|A_i z| <= epsilon`` over the
stacked variable ``z = (dq*, dq_trans*)``. The problem is solved through its
dual: for multipliers ``mu >= 0`` on ``|A_i z|^2 <= epsilon^2`` the primal
minimiser is ``z(mu) = (I + sum mu_i A_i^T A_i)^{-1} z0`` and the dual is a
smooth concave function of at most four variables. ``z = 0`` is strictly
feasible, so strong duality holds. A log-barrier phase started at ``z = 0``
supplies multiplier estimates and projected Newton on the dual polishes them.
Only the row space of the stacked ``A_i`` takes part; the rest of ``z0`` passes
through unchanged, and coordinates no constraint involves are copied exactly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, LinAlgWarning, cho_factor, cho_solve, solve
from scipy.optimize import nnls

from .config import get_numerics
from .errors import SolverError, ValidationError
from .validation import check_pose, check_vector

CONTACT_THRESHOLD = 0.5


@dataclass(frozen=True)
class ProjectionResult:
    dq: np.ndarray
    dq_trans: np.ndarray
    active: np.ndarray        # indices of constrained contacts
    multipliers: np.ndarray   # cone multipliers, one per active contact
    kkt_residual: float
    iterations: int


def contact_constraint_matrices(J_contacts, R_cam):
    """``A_i = [R^T (J_v[i] - [E|0]) | E]`` for each contact, shape ``(m, 3, 78)``."""
    J = np.asarray(J_contacts, dtype=float)
    m, _, n = J.shape
    rel = J.copy()
    rel[:, :, 0:3] -= np.eye(3)
    A = np.zeros((m, 3, n + 3))
    A[:, :, :n] = R_cam.T @ rel
    A[:, :, n:] = np.eye(3)
    return A


def contact_world_velocity(J_contacts, dq, dq_trans, R_cam):
    """World-frame velocity of each contact joint, ``(m, 3)``."""
    z = np.concatenate([dq, dq_trans])
    return contact_constraint_matrices(J_contacts, R_cam) @ z


def _kkt(z, z0, A, mu, eps):
    Az = A @ z
    norms = np.linalg.norm(Az, axis=1)
    grad_l = z - z0 + np.einsum("i,ikn,ik->n", mu, A, Az)
    stationarity = np.abs(grad_l).max()
    primal = np.maximum(norms - eps, 0.0).max()
    complementarity = np.abs(mu * norms * (eps - norms)).max()
    dual = np.maximum(-mu, 0.0).max()
    return max(stationarity, primal, complementarity, dual)


def _barrier_phase(z0, A, AtA, epsilon, gap):
    """Log-barrier path following from the strictly feasible point ``z = 0``.

    Minimises ``t/2 |z - z0|^2 - sum log(eps^2 - |A_i z|^2)`` for growing ``t``
    and returns the last iterate with multiplier estimates ``2 / (t r_i)``.
    """
    m, _, n = A.shape
    eps2 = epsilon * epsilon
    z = np.zeros(n)
    # Start where the barrier and the objective have comparable weight.
    t = m / max(0.5 * z0 @ z0, np.finfo(float).tiny)

    def barrier(z, t):
        r = eps2 - np.einsum("ik,ik->i", A @ z, A @ z)
        if np.any(r <= 0):
            return np.inf, r
        d = z - z0
        return 0.5 * t * d @ d - np.log(r).sum(), r

    while True:
        value, r = barrier(z, t)
        for _ in range(100):
            Qz = AtA @ z
            g = t * (z - z0) + 2.0 * (Qz / r[:, None]).sum(axis=0)
            H = t * np.eye(n) + np.einsum("i,ikl->kl", 2.0 / r, AtA)
            H += 4.0 * np.einsum("ik,il->kl", Qz / r[:, None] ** 2, Qz)
            try:
                dz = -cho_solve(cho_factor(H), g)
            except LinAlgError:
                # Near the boundary the rank-one terms swamp tI in rounding.
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", LinAlgWarning)
                    dz = -solve(H, g, assume_a="sym")
            decrement = -g @ dz
            if not decrement > 1e-12 * max(1.0, t):
                break
            s = 1.0
            while True:
                new_value, new_r = barrier(z + s * dz, t)
                if new_value <= value - 0.25 * s * decrement or s < 1e-12:
                    break
                s *= 0.5
            z, value, r = z + s * dz, new_value, new_r
        if m / t < gap:
            return z, 2.0 / (t * r)
        t *= 20.0


def _polish(z0, A, epsilon, tol, accept_base, max_iter):
    """Barrier start plus projected dual Newton on a problem with full-row-rank ``A``."""
    m, _, n = A.shape
    AtA = np.swapaxes(A, 1, 2) @ A
    eps2 = epsilon * epsilon

    def accepted(z, mu, residual):
        # Stationarity sums terms as large as mu_i |A_i^T A_i z|, whose rounding
        # error sets a floor under the residual (nearly parallel cones drive mu up).
        terms = np.abs(mu[:, None] * (AtA @ z)).max(initial=0.0)
        return residual <= accept_base * max(1.0, np.abs(z0).max(), terms)

    def dual_point(mu):
        H = np.eye(n) + np.einsum("i,ikl->kl", mu, AtA)
        factor = cho_factor(H)
        z = cho_solve(factor, z0)
        value = 0.5 * (z0 @ z0 - z0 @ z - eps2 * mu.sum())
        return z, factor, value

    # Strong convexity bounds |z - z*| by sqrt(2 gap); stop well inside epsilon.
    z_bar, mu_bar = _barrier_phase(z0, A, AtA, epsilon, gap=1e-4 * eps2)
    # 2 / (t r) loses all accuracy once the slacks r drop below rounding of
    # eps^2 (huge z0); multipliers fitted to stationarity at z_bar do not.
    mu_fit = nnls((AtA @ z_bar).T, z0 - z_bar)[0]
    candidates = []
    for mu in (mu_bar, mu_fit):
        z, factor, value = dual_point(mu)
        candidates.append((_kkt(z, z0, A, mu, epsilon), z, factor, value, mu))
    residual, z, factor, value, mu = min(candidates, key=lambda c: c[0])
    best = (z, mu, residual)
    since_best = 0
    for it in range(1, max_iter + 1):
        if residual < tol:
            return z, mu, it - 1
        if residual < 0.5 * best[2]:
            best, since_best = (z, mu, residual), 0
        else:
            since_best += 1
        if since_best >= 5 and accepted(*best):
            return best[0], best[1], it
        Az = A @ z
        grad = 0.5 * (np.einsum("ik,ik->i", Az, Az) - eps2)
        F = np.flatnonzero((mu > 0) | (grad > 0))
        Qz = np.einsum("ikn,ik->in", A[F], Az[F])      # A_i^T A_i z
        G = Qz @ cho_solve(factor, Qz.T)               # negative dual Hessian
        G += 1e-14 * max(np.trace(G), 1.0) * np.eye(F.size)
        step = np.zeros(m)
        step[F] = np.linalg.solve(G, grad[F])
        t = 1.0
        while True:
            trial = np.maximum(mu + t * step, 0.0)
            try:
                z_new, factor_new, value_new = dual_point(trial)
                res_new = _kkt(z_new, z0, A, trial, epsilon)
            except LinAlgError:
                value_new, res_new = -np.inf, np.inf
            if value_new >= value + 1e-4 * grad @ (trial - mu):
                break
            # Near the optimum dual values stop resolving; fall back on the residual.
            if res_new < residual:
                break
            if t < 1e-10:
                if accepted(*best):
                    return best[0], best[1], it
                raise SolverError("line search stalled", iterations=it, residual=best[2])
            t *= 0.5
        mu, z, factor, value, residual = trial, z_new, factor_new, value_new, res_new
    if accepted(*best):
        return best[0], best[1], max_iter
    raise SolverError("projection did not converge", iterations=max_iter, residual=best[2])


def project_contact_velocities(z0, A, epsilon, tol=None, max_iter=None):
    """Project ``z0`` onto ``{z : |A_i z| <= epsilon for all i}``.

    The part of ``z0`` in the null space of the stacked constraint rows is
    left untouched; the cones are solved in the row space (at most 12
    coordinates). There a barrier phase brings the iterate near the optimum
    and projected dual Newton polishes until the KKT residual drops below
    ``tol``. If progress stalls at rounding level the iterate is still
    returned when the residual is within ``projection_kkt_accept`` scaled by
    the largest stationarity term. Returns ``(z, mu, residual, iterations)``
    where ``mu`` are the multipliers of the squared constraints.
    """
    numerics = get_numerics()
    tol = numerics.projection_kkt_tol if tol is None else tol
    accept_base = max(tol, numerics.projection_kkt_accept)
    max_iter = numerics.projection_max_iter if max_iter is None else max_iter
    m, k, n = A.shape
    if m == 0 or np.all(np.linalg.norm(A @ z0, axis=1) <= epsilon):
        return z0.copy(), np.zeros(m), 0.0, 0

    # Columns no constraint touches are copied exactly.
    cols = np.flatnonzero(A.reshape(m * k, n).any(axis=0))
    B = A[:, :, cols]
    _, S, Vt = np.linalg.svd(B.reshape(m * k, -1), full_matrices=False)
    V = Vt[S > S[0] * 1e-12].T                     # orthonormal row-space basis
    w0 = V.T @ z0[cols]
    w, mu, iterations = _polish(w0, B @ V, epsilon, tol, accept_base, max_iter)
    z = z0.copy()
    z[cols] += V @ (w - w0)
    return z, mu, _kkt(z, z0, A, mu, epsilon), iterations


def constrained_velocity_update(dq, dq_trans, J_contacts, p, R_cam, epsilon=0.01,
                                tol=None, max_iter=None) -> ProjectionResult:
    """Project integrated velocities onto the contact cones of joints with ``p > 0.5``.

    ``J_contacts`` holds the linear Jacobians ``(N_c, 3, 75)`` of the contact
    joints at the current pose.
    """
    dq = check_pose(dq, "dq")
    dq_trans = check_vector(dq_trans, 3, "dq_trans")
    p = np.asarray(p, dtype=float)
    J_contacts = np.asarray(J_contacts, dtype=float)
    if J_contacts.shape != (p.shape[0], 3, dq.shape[0]):
        raise ValidationError("contact Jacobians do not match the contact probabilities")
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    active = np.flatnonzero(p > CONTACT_THRESHOLD)
    if active.size == 0:
        return ProjectionResult(dq.copy(), dq_trans.copy(), active, np.zeros(0), 0.0, 0)
    A = contact_constraint_matrices(J_contacts[active], np.asarray(R_cam, dtype=float))
    z0 = np.concatenate([dq, dq_trans])
    z, mu, residual, iterations = project_contact_velocities(z0, A, epsilon, tol, max_iter)
    multipliers = mu * np.linalg.norm(A @ z, axis=1)
    n = dq.shape[0]
    return ProjectionResult(z[:n], z[n:], active, multipliers, residual, iterations)
