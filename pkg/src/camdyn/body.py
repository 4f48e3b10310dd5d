"""Humanoid kinematic tree, shape-dependent mass properties and forward kinematics.

The tree holds 24 articulated joints in SMPL order followed by massless contact
sites (heels and toes). Sites are rigid leaf points carried by their parent
joint; they own no pose coordinates. The pose vector is

    q = [root translation (3) | root Euler angles (3) | 23 x joint Euler angles (3)]

so joint ``i`` owns columns ``3 + 3 i`` to ``6 + 3 i``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .validation import POSE_DIM, check_pose

SCHEMA_VERSION = 1
N_SHAPE = 10
N_CONTACTS = 4


def euler_to_matrix(angles):
    """Rotation ``Rz(gamma) @ Ry(beta) @ Rx(alpha)`` for ``angles = (alpha, beta, gamma)``.

    Accepts a single triple or a stack shaped ``(..., 3)``.
    """
    angles = np.asarray(angles, dtype=float)
    a, b, g = angles[..., 0], angles[..., 1], angles[..., 2]
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cg, sg = np.cos(g), np.sin(g)
    R = np.empty(angles.shape[:-1] + (3, 3))
    R[..., 0, 0] = cg * cb
    R[..., 0, 1] = cg * sb * sa - sg * ca
    R[..., 0, 2] = cg * sb * ca + sg * sa
    R[..., 1, 0] = sg * cb
    R[..., 1, 1] = sg * sb * sa + cg * ca
    R[..., 1, 2] = sg * sb * ca - cg * sa
    R[..., 2, 0] = -sb
    R[..., 2, 1] = cb * sa
    R[..., 2, 2] = cb * ca
    return R


def euler_rate_matrix(angles):
    """Map Euler-angle rates to angular velocity expressed in the parent frame."""
    angles = np.asarray(angles, dtype=float)
    b, g = angles[..., 1], angles[..., 2]
    cb, sb = np.cos(b), np.sin(b)
    cg, sg = np.cos(g), np.sin(g)
    W = np.zeros(angles.shape[:-1] + (3, 3))
    W[..., 0, 0] = cb * cg
    W[..., 0, 1] = -sg
    W[..., 1, 0] = cb * sg
    W[..., 1, 1] = cg
    W[..., 2, 0] = -sb
    W[..., 2, 2] = 1.0
    return W


def skew(v):
    """Cross-product matrix ``[v]_x``; batched over leading axes."""
    v = np.asarray(v, dtype=float)
    S = np.zeros(v.shape[:-1] + (3, 3))
    S[..., 0, 1] = -v[..., 2]
    S[..., 0, 2] = v[..., 1]
    S[..., 1, 0] = v[..., 2]
    S[..., 1, 2] = -v[..., 0]
    S[..., 2, 0] = -v[..., 1]
    S[..., 2, 1] = v[..., 0]
    return S


@dataclass(frozen=True)
class BodyTemplate:
    """Parsed body config file; shape-independent."""

    joint_names: tuple
    joint_parent: np.ndarray
    joint_offset: np.ndarray
    mass_fraction: np.ndarray
    shape_basis: np.ndarray
    site_names: tuple
    site_parent: np.ndarray
    site_offset: np.ndarray
    site_is_toe: np.ndarray
    standard_mass: float
    radius_ratio: float
    placeholder_tables: bool = True


@dataclass(frozen=True, eq=False)
class BodySpec:
    """Kinematic tree with per-node mass properties.

    Node arrays have one row per node: the articulated joints first, then the
    contact sites. ``dof_start[i]`` is the first pose column of joint ``i`` or
    -1 for a site.
    """

    names: tuple
    parent: np.ndarray
    rest_offset: np.ndarray
    mass: np.ndarray
    rest_inertia: np.ndarray
    dof_start: np.ndarray
    contact_joints: tuple
    toe_joints: tuple
    bone_ratio: float = 1.0

    def __post_init__(self):
        n = len(self.names)
        for arr, shape in ((self.parent, (n,)), (self.rest_offset, (n, 3)), (self.mass, (n,)),
                           (self.rest_inertia, (n, 3, 3)), (self.dof_start, (n,))):
            if np.shape(arr) != shape:
                raise ValidationError(f"body array has shape {np.shape(arr)}, expected {shape}")
        if self.parent[0] != -1:
            raise ValidationError("node 0 must be the root")
        for i in range(1, n):
            if not 0 <= self.parent[i] < i:
                raise ValidationError(f"node {i} ({self.names[i]}) must have a parent with a smaller index")
        articulated = self.dof_start >= 0
        if self.dof_start[0] != 3:
            raise ValidationError("root must own pose columns 3:6")
        if np.any(self.mass[articulated] <= 0):
            raise ValidationError("joint masses must be strictly positive")
        if np.any(self.mass[~articulated] != 0):
            raise ValidationError("contact sites must be massless")
        if not np.allclose(self.rest_inertia, np.swapaxes(self.rest_inertia, 1, 2), atol=1e-14):
            raise ValidationError("rest inertia tensors must be symmetric")
        if np.any(np.linalg.eigvalsh(self.rest_inertia) < -1e-14):
            raise ValidationError("rest inertia tensors must be positive semi-definite")
        if 3 * int(articulated.sum()) + 3 != POSE_DIM:
            raise ValidationError(f"tree must have {(POSE_DIM - 3) // 3} articulated joints")
        if len(self.contact_joints) != N_CONTACTS:
            raise ValidationError(f"expected {N_CONTACTS} contact joints, got {len(self.contact_joints)}")
        has_child = np.zeros(n, dtype=bool)
        has_child[self.parent[1:]] = True
        for c in self.contact_joints:
            if has_child[c]:
                raise ValidationError(f"contact node {self.names[c]} is not a leaf")

    @property
    def n_nodes(self):
        return len(self.names)

    @property
    def joint_count(self):
        """Non-root articulated joints."""
        return int((self.dof_start >= 0).sum()) - 1

    @property
    def n_dof(self):
        return 3 * self.joint_count + 6

    @property
    def total_mass(self):
        return float(self.mass.sum())

    def index(self, name):
        return self.names.index(name)


@dataclass(frozen=True, eq=False)
class JointPlacements:
    position: np.ndarray     # (n, 3) camera frame
    rotation: np.ndarray     # (n, 3, 3)
    part_vector: np.ndarray  # (n, 3), position[i] - position[parent[i]]


def default_body_config_path():
    return resources.files("camdyn").joinpath("data/smpl_body.json")


def _vec(value, length, where):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (length,) or not np.all(np.isfinite(arr)):
        raise ValidationError(f"{where}: expected {length} finite numbers")
    return arr


def parse_body_config(record) -> BodyTemplate:
    if not isinstance(record, dict):
        raise ValidationError("body config must be a JSON object")
    if record.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError(f"body config schema_version must be {SCHEMA_VERSION}")
    try:
        joints = record["joints"]
        sites = record["contact_sites"]
        standard_mass = float(record["standard_mass_kg"])
        radius_ratio = float(record["inertia_radius_ratio"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"body config missing or malformed field: {exc}") from exc
    if standard_mass <= 0 or radius_ratio <= 0:
        raise ValidationError("standard_mass_kg and inertia_radius_ratio must be positive")

    names = []
    parents = []
    offsets = []
    fractions = []
    basis = []
    for k, joint in enumerate(joints):
        where = f"joints[{k}]"
        try:
            name = joint["name"]
            parent_name = joint["parent"]
            fraction = float(joint["mass_fraction"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{where}: {exc}") from exc
        if name in names:
            raise ValidationError(f"{where}: duplicate joint name {name!r}")
        if parent_name is None:
            if k != 0:
                raise ValidationError(f"{where}: only the first joint may be the root")
            parents.append(-1)
        elif parent_name not in names:
            raise ValidationError(f"{where}: parent {parent_name!r} must be listed earlier")
        else:
            parents.append(names.index(parent_name))
        names.append(name)
        offsets.append(_vec(joint["rest_offset"], 3, where + ".rest_offset"))
        fractions.append(fraction)
        basis.append(_vec(joint.get("shape_basis", [0.0] * N_SHAPE), N_SHAPE, where + ".shape_basis"))
    if not names:
        raise ValidationError("body config has no joints")
    fractions = np.array(fractions)
    if np.any(fractions <= 0) or abs(fractions.sum() - 1.0) > 1e-9:
        raise ValidationError("mass fractions must be positive and sum to 1")

    site_names, site_parent, site_offset, site_is_toe = [], [], [], []
    for k, site in enumerate(sites):
        where = f"contact_sites[{k}]"
        try:
            parent_name = site["parent"]
            site_names.append(site["name"])
            site_is_toe.append(bool(site["toe"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{where}: {exc}") from exc
        if parent_name not in names:
            raise ValidationError(f"{where}: unknown parent joint {parent_name!r}")
        site_parent.append(names.index(parent_name))
        site_offset.append(_vec(site["offset"], 3, where + ".offset"))

    return BodyTemplate(
        joint_names=tuple(names),
        joint_parent=np.array(parents, dtype=int),
        joint_offset=np.array(offsets),
        mass_fraction=fractions,
        shape_basis=np.array(basis),
        site_names=tuple(site_names),
        site_parent=np.array(site_parent, dtype=int),
        site_offset=np.array(site_offset).reshape(-1, 3),
        site_is_toe=np.array(site_is_toe, dtype=bool),
        standard_mass=standard_mass,
        radius_ratio=radius_ratio,
        placeholder_tables=bool(record.get("placeholder_tables", True)),
    )


def load_body_config(path=None) -> BodyTemplate:
    source = default_body_config_path() if path is None else Path(path)
    try:
        text = source.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read body config {path}: {exc}") from exc
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"body config {path}: line {exc.lineno}: {exc.msg}") from exc
    return parse_body_config(record)


def cylinder_inertia(mass, segment, radius_ratio):
    """Solid cylinder about its centre, axis along ``segment``, radius ``radius_ratio * |segment|``."""
    length = np.linalg.norm(segment)
    if length == 0:
        return np.zeros((3, 3))
    axis = segment / length
    radius = radius_ratio * length
    axial = 0.5 * mass * radius**2
    transverse = mass * (3.0 * radius**2 + length**2) / 12.0
    along = np.outer(axis, axis)
    return transverse * (np.eye(3) - along) + axial * along


def build_body(beta=None, template: BodyTemplate | None = None) -> BodySpec:
    """Instantiate the body for shape coefficients ``beta``.

    Each bone is scaled by ``1 + shape_basis[i] @ beta``. Total mass is the
    standard mass times the mean bone-length ratio; joint masses follow the
    fixed fractions and inertia scales with mass and squared segment length.
    """
    if template is None:
        template = load_body_config()
    beta = np.zeros(N_SHAPE) if beta is None else np.asarray(beta, dtype=float)
    if beta.shape != (N_SHAPE,):
        raise ValidationError(f"beta must have shape ({N_SHAPE},), got {beta.shape}")
    if not np.all(np.isfinite(beta)):
        raise ValidationError("beta contains non-finite values")

    n_joints = len(template.joint_names)
    scale = 1.0 + template.shape_basis @ beta
    if np.any(scale[1:] <= 0):
        raise ValidationError("shape coefficients collapse a bone to non-positive length")
    joint_offset = template.joint_offset * scale[:, None]
    template_len = np.linalg.norm(template.joint_offset[1:], axis=1)
    ratio = float(np.mean(np.linalg.norm(joint_offset[1:], axis=1) / template_len))

    joint_mass = template.standard_mass * ratio * template.mass_fraction

    # Segment rotating with joint i: its longest child bone, or its own bone for leaves.
    inertia = np.zeros((n_joints, 3, 3))
    for i in range(n_joints):
        children = np.flatnonzero(template.joint_parent == i)
        if children.size:
            lengths = np.linalg.norm(joint_offset[children], axis=1)
            segment = joint_offset[children[np.argmax(lengths)]]
        else:
            segment = joint_offset[i]
        inertia[i] = cylinder_inertia(joint_mass[i], segment, template.radius_ratio)

    n_sites = len(template.site_names)
    site_offset = template.site_offset * scale[template.site_parent][:, None]
    site_ids = tuple(range(n_joints, n_joints + n_sites))
    return BodySpec(
        names=template.joint_names + template.site_names,
        parent=np.concatenate([template.joint_parent, template.site_parent]),
        rest_offset=np.vstack([joint_offset, site_offset]),
        mass=np.concatenate([joint_mass, np.zeros(n_sites)]),
        rest_inertia=np.concatenate([inertia, np.zeros((n_sites, 3, 3))]),
        dof_start=np.concatenate([3 + 3 * np.arange(n_joints), -np.ones(n_sites, dtype=int)]),
        contact_joints=site_ids,
        toe_joints=tuple(s for s, toe in zip(site_ids, template.site_is_toe) if toe),
        bone_ratio=ratio,
    )


def rest_positions(body: BodySpec):
    pos = np.zeros((body.n_nodes, 3))
    for i in range(1, body.n_nodes):
        pos[i] = pos[body.parent[i]] + body.rest_offset[i]
    return pos


def forward_kinematics_batch(body: BodySpec, Q):
    """Unvalidated forward kinematics for a stack of poses ``(B, 75)``.

    Returns positions ``(B, n, 3)``, rotations ``(B, n, 3, 3)`` and part
    vectors ``(B, n, 3)``.
    """
    B = Q.shape[0]
    n = body.n_nodes
    pos = np.zeros((B, n, 3))
    rot = np.zeros((B, n, 3, 3))
    part = np.zeros((B, n, 3))
    pos[:, 0] = Q[:, 0:3]
    rot[:, 0] = euler_to_matrix(Q[:, 3:6])
    for i in range(1, n):
        p = body.parent[i]
        part[:, i] = rot[:, p] @ body.rest_offset[i]
        pos[:, i] = pos[:, p] + part[:, i]
        s = body.dof_start[i]
        rot[:, i] = rot[:, p] @ euler_to_matrix(Q[:, s:s + 3]) if s >= 0 else rot[:, p]
    return pos, rot, part


def forward_kinematics(body: BodySpec, q) -> JointPlacements:
    """Camera-frame joint positions and orientations for pose ``q``.

    ``R_i = R_parent @ E(theta_i)`` and ``r_i = r_parent + R_parent @ offset_i``
    with the root placed at ``q[0:3]``.
    """
    q = check_pose(q)
    pos, rot, part = forward_kinematics_batch(body, q[None])
    return JointPlacements(position=pos[0], rotation=rot[0], part_vector=part[0])
