"""Forward dynamics in the moving camera frame and the per-frame simulation loop.

One step, for frame ``t``:

    Jacobians, M, h_c at q_t
    target   = attention[t + 1] @ init_motion
    tau      = kp * (target - q) - kd * dq + alpha (+ h_c)
    ddq      = M^{-1} (tau + h_grf - h_g - h_c + I)
    R_cam   <- R_cam exp([omega] dt)
    ddq_tr   = R_cam^T (eta + h_grf[0:3] - h_g[0:3]) / m
    velocities integrated, projected onto the contact cones, positions integrated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.transform import Rotation

from .body import BodySpec
from .config import get_numerics
from .control import ControlInputs, attentive_target, pd_torque
from .errors import CamdynError, NumericError, SolverError, ValidationError
from .forces import (
    ContactSample,
    ForceInputs,
    TorqueBundle,
    gravity_torque,
    grf_torque_pct,
    inertial_torque,
    pct_sample,
)
from .jacobians import coriolis_torque, compute_jacobians, inertia_matrix
from .projection import ProjectionResult, constrained_velocity_update, contact_world_velocity
from .validation import check_motion, check_pose, check_positive, check_rotation, check_vector

INTEGRATORS = ("semi-implicit", "explicit")
TRAJECTORY_MASSES = ("total", "root")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.04
    epsilon: float = 0.01
    integrator: str = "semi-implicit"
    trajectory_mass: str = "total"
    # The PD rule adds h_c to tau, cancelling the Coriolis term of the dynamics.
    coriolis_compensation: bool = True
    world_gravity: tuple = (0.0, -9.81, 0.0)
    projection_tol: float | None = None
    projection_max_iter: int | None = None

    def __post_init__(self):
        check_positive(self.dt, "dt")
        check_positive(self.epsilon, "epsilon")
        if self.integrator not in INTEGRATORS:
            raise ValidationError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if self.trajectory_mass not in TRAJECTORY_MASSES:
            raise ValidationError(
                f"trajectory_mass must be one of {TRAJECTORY_MASSES}, got {self.trajectory_mass!r}")
        object.__setattr__(self, "world_gravity",
                           tuple(check_vector(self.world_gravity, 3, "world_gravity")))


@dataclass(frozen=True)
class CameraState:
    """Camera orientation relative to the first frame; maps world vectors to camera vectors."""

    R_cam: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "R_cam", check_rotation(self.R_cam, "R_cam"))


@dataclass(frozen=True)
class TrajectoryState:
    q_trans: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dq_trans: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "q_trans", check_vector(self.q_trans, 3, "q_trans"))
        object.__setattr__(self, "dq_trans", check_vector(self.dq_trans, 3, "dq_trans"))


@dataclass(frozen=True, eq=False)
class StepRecord:
    frame: int
    torques: TorqueBundle
    contacts: ContactSample
    ddq: np.ndarray
    ddq_trans: np.ndarray
    dq_pre: np.ndarray
    dq_trans_pre: np.ndarray
    projection: ProjectionResult
    contact_speed_pre: np.ndarray   # world-frame speed of each contact node
    contact_speed_post: np.ndarray
    camera: CameraState
    trajectory: TrajectoryState


@dataclass(eq=False)
class SimDiagnostics:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)


def pose_acceleration(M, tau, h_grf, h_g, h_c, inertial, frame=None):
    """Solve ``M ddq = tau + h_grf - h_g - h_c + I`` by Cholesky factorization."""
    numerics = get_numerics()
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(tau, dtype=float) + h_grf - h_g - h_c + inertial
    n = rhs.shape[0]
    if M.shape != (n, n):
        raise ValidationError(f"inertia matrix shape {M.shape} does not match torque length {n}")
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(rhs))):
        raise NumericError("non-finite inertia matrix or torque", frame=frame)
    cond = np.linalg.cond(M)
    if not cond < numerics.max_condition_number:
        raise NumericError(f"inertia matrix condition number {cond:.3e} exceeds "
                           f"{numerics.max_condition_number:.1e}", frame=frame)
    try:
        ddq = cho_solve(cho_factor(M), rhs)
    except LinAlgError as exc:
        raise NumericError(f"inertia matrix is not positive definite: {exc}", frame=frame) from exc
    residual = np.linalg.norm(M @ ddq - rhs)
    if residual > numerics.solve_residual_rel_tol * max(np.linalg.norm(rhs), np.finfo(float).tiny):
        raise NumericError(f"linear solve residual {residual:.3e} too large", frame=frame)
    return ddq


def trajectory_acceleration(body: BodySpec, eta, h_grf, h_g, cam: CameraState, mass="total"):
    """World-frame root acceleration ``R_cam^T (eta + h_grf[0:3] - h_g[0:3]) / m``.

    ``mass="total"`` divides by the whole body mass (free fall at g);
    ``mass="root"`` uses the root joint mass alone.
    """
    if mass not in TRAJECTORY_MASSES:
        raise ValidationError(f"mass must be one of {TRAJECTORY_MASSES}, got {mass!r}")
    m = body.total_mass if mass == "total" else float(body.mass[0])
    force = check_vector(eta, 3, "eta") + np.asarray(h_grf)[0:3] - np.asarray(h_g)[0:3]
    return cam.R_cam.T @ force / m


def update_camera(cam: CameraState, omega_ine, dt) -> CameraState:
    """``R_cam <- R_cam exp([omega] dt)``."""
    w = check_vector(omega_ine, 3, "omega_ine")
    step = Rotation.from_rotvec(w * dt).as_matrix()
    return CameraState(R_cam=cam.R_cam @ step)


def integrate_velocity(dq, ddq, dt):
    return dq + dt * ddq


def integrate_position(q, dq_old, dq_new, dt, integrator="semi-implicit"):
    """Position update with the new (semi-implicit) or old (explicit) velocity."""
    return q + dt * (dq_new if integrator == "semi-implicit" else dq_old)


def integrate_state(q, dq, ddq, dt, integrator="semi-implicit"):
    """One Euler step of the pose: returns ``(q', dq')``."""
    dq_new = integrate_velocity(dq, ddq, dt)
    return integrate_position(q, dq, dq_new, dt, integrator), dq_new


def integrate_trajectory(q_trans, dq_trans, ddq_trans, dt, integrator="semi-implicit"):
    """One Euler step of the world root translation: returns ``(q_trans', dq_trans')``."""
    return integrate_state(q_trans, dq_trans, ddq_trans, dt, integrator)


def camera_gravity(forces: ForceInputs, config: SimConfig, cam: CameraState):
    """Per-frame gravity if supplied, else the configured world gravity seen from the camera."""
    if forces.gravity is not None:
        return forces.gravity
    return cam.R_cam @ np.asarray(config.world_gravity)


def _check_streams(forces, controls, init_motion, body):
    T = init_motion.shape[0]
    if T < 1:
        raise ValidationError("init_motion must contain at least one frame")
    if len(forces) != T:
        raise ValidationError(f"force stream has {len(forces)} frames, motion has {T}")
    if len(controls) != T:
        raise ValidationError(f"control stream has {len(controls)} frames, motion has {T}")
    n_c = len(body.contact_joints)
    for t, f in enumerate(forces):
        if f.lam.shape[0] != n_c:
            raise ValidationError(f"frame {t}: expected {n_c} contacts, got {f.lam.shape[0]}")


def simulate_sequence(body: BodySpec, init_q0, forces, controls: ControlInputs, init_motion,
                      config: SimConfig | None = None, rng: np.random.Generator | None = None,
                      init_dq0=None, trajectory0: TrajectoryState | None = None):
    """Run the analytical pipeline over ``T`` frames.

    Returns ``(motion (T, 75), trajectory (T, 3), SimDiagnostics)``. Frame 0 is
    the initial state; step ``t`` consumes forces and controls of frame ``t``
    and the attention row ``t + 1``.
    """
    config = SimConfig() if config is None else config
    if rng is None:
        raise ValidationError("simulate_sequence needs an explicit random generator")
    init_motion = check_motion(init_motion, "init_motion")
    forces = list(forces)
    _check_streams(forces, controls, init_motion, body)
    T = init_motion.shape[0]
    dt = config.dt

    q = check_pose(init_q0, "init_q0").copy()
    dq = np.zeros_like(q) if init_dq0 is None else check_pose(init_dq0, "init_dq0").copy()
    traj = TrajectoryState() if trajectory0 is None else trajectory0
    cam = CameraState()
    contact_ids = list(body.contact_joints)

    motion = np.empty((T, q.shape[0]))
    trajectory = np.empty((T, 3))
    motion[0], trajectory[0] = q, traj.q_trans
    diag = SimDiagnostics()

    for t in range(T - 1):
        f = forces[t]
        try:
            jac = compute_jacobians(body, q)
            M = inertia_matrix(body, q, jac)
            h_c = coriolis_torque(body, q, dq)

            target = attentive_target(controls.attention[t + 1], init_motion)
            comp = h_c if config.coriolis_compensation else np.zeros_like(h_c)
            tau = pd_torque(controls.kp[t], controls.kd[t], controls.alpha[t], comp, target, q, dq)

            inertial = inertial_torque(body, q, dq, f.a_ine, f.omega_ine, jac)
            h_g = gravity_torque(body, q, camera_gravity(f, config, cam), jac)
            sample = pct_sample(f.contact_prob, rng)
            h_grf = grf_torque_pct(body, q, sample, f.lam, jac)
            torques = TorqueBundle(h_g=h_g, h_grf=h_grf, inertial=inertial, h_c=h_c, tau=tau)

            ddq = pose_acceleration(M, tau, h_grf, h_g, h_c, inertial, frame=t)
            cam = update_camera(cam, f.omega_ine, dt)
            ddq_trans = trajectory_acceleration(body, f.eta, h_grf, h_g, cam, config.trajectory_mass)

            dq_pre = integrate_velocity(dq, ddq, dt)
            dq_trans_pre = integrate_velocity(traj.dq_trans, ddq_trans, dt)
            proj = constrained_velocity_update(
                dq_pre, dq_trans_pre, jac.J_v[contact_ids], f.contact_prob, cam.R_cam,
                config.epsilon, config.projection_tol, config.projection_max_iter)
            J_c = jac.J_v[contact_ids]
            speed_pre = np.linalg.norm(
                contact_world_velocity(J_c, dq_pre, dq_trans_pre, cam.R_cam), axis=1)
            speed_post = np.linalg.norm(
                contact_world_velocity(J_c, proj.dq, proj.dq_trans, cam.R_cam), axis=1)
        except (NumericError, SolverError) as exc:
            if exc.frame is None:
                exc.frame = t
                exc.args = (f"frame {t}: {exc.args[0]}",)
            raise
        except CamdynError as exc:
            raise type(exc)(f"frame {t}: {exc}") from exc

        q = integrate_position(q, dq, proj.dq, dt, config.integrator)
        q_trans = integrate_position(traj.q_trans, traj.dq_trans, proj.dq_trans, dt, config.integrator)
        dq = proj.dq
        traj = TrajectoryState(q_trans=q_trans, dq_trans=proj.dq_trans)
        if not np.all(np.isfinite(q)):
            raise NumericError("pose diverged to non-finite values", frame=t)

        motion[t + 1], trajectory[t + 1] = q, traj.q_trans
        diag.records.append(StepRecord(
            frame=t, torques=torques, contacts=sample, ddq=ddq, ddq_trans=ddq_trans,
            dq_pre=dq_pre, dq_trans_pre=dq_trans_pre, projection=proj,
            contact_speed_pre=speed_pre, contact_speed_post=speed_post, camera=cam,
            trajectory=traj))
    return motion, trajectory, diag
