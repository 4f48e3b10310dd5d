"""scikit-learn style wrappers around the functional API.

Only two pieces fit the estimator shape: contact annotation (fit a ground
plane, predict labels) and the simulator (fit builds the body, transform runs
a sequence). Everything else stays a plain function.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .body import build_body
from .control import ControlInputs
from .errors import ValidationError
from .eval.contacts import CONTACT_HEIGHT, annotate_contacts
from .forces import ForceInputs
from .simulate import SimConfig, simulate_sequence
from .validation import check_motion, check_points


class ContactAnnotator(BaseEstimator):
    """Fit a ground plane to toe positions; label joints within ``threshold`` of it.

    ``X`` is a world-frame joint sequence ``(T, J, 3)``.
    """

    def __init__(self, toe_indices=(), contact_indices=None, threshold=CONTACT_HEIGHT):
        self.toe_indices = toe_indices
        self.contact_indices = contact_indices
        self.threshold = threshold

    def fit(self, X, y=None):
        plane, _ = annotate_contacts(X, self.toe_indices, self.contact_indices, self.threshold)
        self.plane_ = plane
        self.n_joints_ = np.shape(X)[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "plane_")
        X = check_points(X)
        if X.ndim != 3 or X.shape[1] != self.n_joints_:
            raise ValidationError(f"expected (T, {self.n_joints_}, 3) joints, got {X.shape}")
        joints = list(range(X.shape[1])) if self.contact_indices is None else list(self.contact_indices)
        return self.plane_.height(X[:, joints]) < self.threshold


class InertialMotionSimulator(TransformerMixin, BaseEstimator):
    """Simulate a kinematic reference ``X`` (T, 75) under per-frame forces and controls.

    ``fit`` builds the body for ``beta``. ``transform`` returns the simulated
    poses and stores the world trajectory and diagnostics of the last call.
    Without streams the body moves under the configured world gravity only,
    with zero gains.
    """

    def __init__(self, beta=None, dt=0.04, epsilon=0.01, integrator="semi-implicit",
                 trajectory_mass="total", coriolis_compensation=True,
                 world_gravity=(0.0, -9.81, 0.0), seed=0):
        self.beta = beta
        self.dt = dt
        self.epsilon = epsilon
        self.integrator = integrator
        self.trajectory_mass = trajectory_mass
        self.coriolis_compensation = coriolis_compensation
        self.world_gravity = world_gravity
        self.seed = seed

    def fit(self, X=None, y=None):
        self.body_ = build_body(None if self.beta is None else np.asarray(self.beta, dtype=float))
        self.config_ = SimConfig(dt=self.dt, epsilon=self.epsilon, integrator=self.integrator,
                                 trajectory_mass=self.trajectory_mass,
                                 coriolis_compensation=self.coriolis_compensation,
                                 world_gravity=tuple(self.world_gravity))
        return self

    def transform(self, X, forces=None, controls=None):
        check_is_fitted(self, "body_")
        X = check_motion(X)
        T = X.shape[0]
        n_c = len(self.body_.contact_joints)
        if forces is None:
            forces = [ForceInputs(lam=np.zeros((n_c, 3)), gravity=None, eta=np.zeros(3),
                                  contact_prob=np.zeros(n_c), a_ine=np.zeros(3),
                                  omega_ine=np.zeros(3)) for _ in range(T)]
        if controls is None:
            controls = ControlInputs.constant(T)
        rng = np.random.default_rng(self.seed)
        motion, trajectory, diagnostics = simulate_sequence(
            self.body_, X[0], forces, controls, X, self.config_, rng)
        self.trajectory_ = trajectory
        self.diagnostics_ = diagnostics
        return motion
