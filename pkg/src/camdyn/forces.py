"""External generalized torques: gravity, moving-frame inertial forces and ground reaction.

Every torque is a 75-vector in pose coordinates. Functions take the pose ``q``
and optionally a precomputed :class:`~camdyn.jacobians.JacobianSet` for the same
pose, so a simulation step builds the Jacobians once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import expit, logit

from .body import BodySpec
from .jacobians import JacobianSet, compute_jacobians
from .validation import check_finite, check_pose, check_probabilities, check_vector
from .errors import ValidationError


@dataclass(frozen=True)
class ForceInputs:
    """Per-frame physical properties for one time step.

    ``gravity`` may be None, in which case the simulator rotates its configured
    world gravity into the current camera frame.
    """

    lam: np.ndarray        # (N_c, 3) N, camera frame
    gravity: np.ndarray | None
    eta: np.ndarray        # (3,) N
    contact_prob: np.ndarray  # (N_c,)
    a_ine: np.ndarray      # (3,) m/s^2
    omega_ine: np.ndarray  # (3,) rad/s

    def __post_init__(self):
        lam = check_finite(self.lam, "lambda")
        if lam.ndim != 2 or lam.shape[1] != 3:
            raise ValidationError(f"lambda must have shape (N_c, 3), got {lam.shape}")
        p = check_probabilities(self.contact_prob, "contact_prob")
        if p.shape != (lam.shape[0],):
            raise ValidationError("contact_prob and lambda disagree on the contact count")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "contact_prob", p)
        if self.gravity is not None:
            object.__setattr__(self, "gravity", check_vector(self.gravity, 3, "gravity"))
        for name in ("eta", "a_ine", "omega_ine"):
            object.__setattr__(self, name, check_vector(getattr(self, name), 3, name))

    @classmethod
    def zeros(cls, n_contacts=4, gravity=(0.0, 0.0, 0.0)):
        return cls(lam=np.zeros((n_contacts, 3)), gravity=np.asarray(gravity, dtype=float),
                   eta=np.zeros(3), contact_prob=np.zeros(n_contacts),
                   a_ine=np.zeros(3), omega_ine=np.zeros(3))


@dataclass(frozen=True)
class ContactSample:
    b_soft: np.ndarray  # Gumbel-softmax weights in [0, 1]
    b_hard: np.ndarray  # b_soft > 0.5


@dataclass(frozen=True)
class TorqueBundle:
    h_g: np.ndarray
    h_grf: np.ndarray
    inertial: np.ndarray
    h_c: np.ndarray
    tau: np.ndarray

    def rhs(self):
        """Right-hand side of the pose dynamics: ``tau + h_grf - h_g - h_c + I``."""
        return self.tau + self.h_grf - self.h_g - self.h_c + self.inertial


def _jac(body, q, jac):
    return compute_jacobians(body, q) if jac is None else jac


def gravity_torque(body: BodySpec, q, g_vec, jac: JacobianSet | None = None):
    """``h_g = -sum_i m_i J_v[i]^T g``."""
    g_vec = check_vector(g_vec, 3, "gravity")
    jac = _jac(body, q, jac)
    return -np.einsum("i,ikn,k->n", body.mass, jac.J_v, g_vec)


def inertial_components(body: BodySpec, q, dq, a_ine, omega_ine, jac: JacobianSet | None = None):
    """Linear, centripetal and Coriolis parts of the moving-frame force, each a 75-vector."""
    dq = check_pose(dq, "dq")
    a_ine = check_vector(a_ine, 3, "a_ine")
    w = check_vector(omega_ine, 3, "omega_ine")
    jac = _jac(body, q, jac)
    r = jac.placements.position
    v = jac.J_v @ dq
    m = body.mass
    linear = np.einsum("i,ikn,k->n", m, jac.J_v, a_ine)
    centripetal = np.einsum("i,ikn,ik->n", m, jac.J_v, np.cross(w, np.cross(w, r)))
    coriolis = 2.0 * np.einsum("i,ikn,ik->n", m, jac.J_v, np.cross(w, v))
    return linear, centripetal, coriolis


def inertial_torque(body: BodySpec, q, dq, a_ine, omega_ine, jac: JacobianSet | None = None):
    linear, centripetal, coriolis = inertial_components(body, q, dq, a_ine, omega_ine, jac)
    return linear + centripetal + coriolis


def _contact_torque(body, q, weights, lam, jac):
    lam = check_finite(lam, "lambda")
    n_c = len(body.contact_joints)
    if lam.shape != (n_c, 3):
        raise ValidationError(f"lambda must have shape ({n_c}, 3), got {lam.shape}")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n_c,):
        raise ValidationError(f"contact weights must have shape ({n_c},), got {weights.shape}")
    jac = _jac(body, q, jac)
    J_c = jac.J_v[list(body.contact_joints)]
    return np.einsum("j,jkn,jk->n", weights, J_c, lam)


def grf_torque_discrete(body: BodySpec, q, b_hard, lam, jac: JacobianSet | None = None):
    """``sum_j b_j J_v[j]^T lambda_j`` with binary contact states."""
    b = np.asarray(b_hard)
    if not np.all((b == 0) | (b == 1)):
        raise ValidationError("discrete contact states must be 0 or 1")
    return _contact_torque(body, q, b.astype(float), lam, jac)


def grf_torque_pct(body: BodySpec, q, sample: ContactSample, lam, jac: JacobianSet | None = None):
    """Ground-reaction torque weighted by sampled soft contact states."""
    return _contact_torque(body, q, sample.b_soft, lam, jac)


def grf_torque_expectation(body: BodySpec, q, p, lam, jac: JacobianSet | None = None):
    """Probability-weighted torque ``sum_j p_j J_v[j]^T lambda_j``."""
    p = check_probabilities(p)
    return _contact_torque(body, q, p, lam, jac)


def gumbel_noise(rng, shape):
    """Standard Gumbel draws via ``-log(-log(u))``."""
    tiny = np.finfo(float).tiny
    u = np.clip(rng.random(shape), tiny, 1.0 - np.finfo(float).epsneg)
    return -np.log(-np.log(u))


def pct_sample(p, rng: np.random.Generator) -> ContactSample:
    """Draw soft contact states at temperature 1.

    ``b_j = p_j e^{g_j1} / (p_j e^{g_j1} + (1 - p_j) e^{g_j2})``, evaluated as
    ``sigmoid(logit(p_j) + g_j1 - g_j2)`` so that p = 0 and p = 1 give exactly
    0 and 1. Noise is drawn as one ``(N_c, 2)`` block: column 0 is ``g_j1``.
    """
    p = check_probabilities(p)
    g = gumbel_noise(rng, p.shape + (2,))
    with np.errstate(divide="ignore"):
        b_soft = expit(logit(p) + g[..., 0] - g[..., 1])
    return ContactSample(b_soft=b_soft, b_hard=b_soft > 0.5)


def pct_mean_weight(p):
    """Exact mean of the soft weight ``E[b_soft]`` for each probability.

    ``g_1 - g_2`` is standard logistic, so the mean is a 1-D integral of
    ``sigmoid(logit(p) + l)`` against the logistic density. It equals ``p`` only
    at 0, 1/2 and 1.
    """
    p = check_probabilities(p)
    out = np.empty_like(p)
    for idx, pj in np.ndenumerate(p):
        if pj in (0.0, 1.0):
            out[idx] = pj
            continue
        a = logit(pj)

        def integrand(l):
            s = expit(l)
            return expit(a + l) * s * (1.0 - s)

        out[idx] = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
    return out
