"""Articulated-body dynamics in a moving camera frame.

Pose accelerations from gravity, ground reaction, moving-frame inertial forces
and PD control; contact-constrained velocity projection; motion metrics.
"""
from .body import BodySpec, JointPlacements, build_body, euler_to_matrix, forward_kinematics
from .control import ControlInputs, attentive_target, pd_torque
from .errors import CamdynError, NumericError, SolverError, ValidationError
from .forces import (
    ContactSample,
    ForceInputs,
    TorqueBundle,
    gravity_torque,
    grf_torque_discrete,
    grf_torque_expectation,
    grf_torque_pct,
    inertial_torque,
    pct_sample,
)
from .jacobians import (
    JacobianSet,
    angular_jacobians,
    compute_jacobians,
    coriolis_torque,
    inertia_matrix,
    linear_jacobians,
    rotated_inertia,
)
from .projection import constrained_velocity_update
from .simulate import (
    CameraState,
    SimConfig,
    SimDiagnostics,
    TrajectoryState,
    integrate_state,
    integrate_trajectory,
    pose_acceleration,
    simulate_sequence,
    trajectory_acceleration,
    update_camera,
)

__version__ = "0.1.0"
