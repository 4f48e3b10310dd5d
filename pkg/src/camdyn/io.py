"""JSON motion and property-stream files, and the diagnostics CSV.

Floats are written with Python's shortest round-trip ``repr``, so reading a
file back reproduces every value bitwise. Motion files put one frame per line
to keep fixtures diffable.

Motion file::

    {"schema_version": 1, "frame_rate": 25.0,
     "frames": [{"q": [75 numbers], "q_trans": [3], "contacts": [4 bools],
                 "joints_world": [[x, y, z], ...]}, ...],
     "ground_plane": {"normal": [3], "offset": x}}      # optional

Property-stream file::

    {"schema_version": 1, "beta": [10 numbers],          # beta optional
     "frames": [{"lambda": [[3] x 4], "gravity": [3] or null, "eta": [3],
                 "contact_prob": [4], "a_ine": [3], "omega_ine": [3],
                 "kp": [75] or number, "kd": [75] or number, "alpha": [75] or number,
                 "attention": [T numbers]}, ...]}         # attention optional, default one-hot
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import ControlInputs
from .errors import ValidationError
from .forces import ForceInputs
from .validation import POSE_DIM

SCHEMA_VERSION = 1


@dataclass(eq=False)
class MotionFile:
    frame_rate: float
    q: np.ndarray                       # (T, 75)
    q_trans: np.ndarray | None = None   # (T, 3)
    contacts: np.ndarray | None = None  # (T, N_c) bool
    joints_world: np.ndarray | None = None  # (T, J, 3)
    ground_plane: dict | None = None

    def __len__(self):
        return self.q.shape[0]


@dataclass(eq=False)
class PropertyStream:
    forces: list
    controls: ControlInputs
    beta: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.forces)


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _check_schema(record, path):
    if not isinstance(record, dict):
        raise ValidationError(f"{path}: top level must be an object")
    version = record.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(f"{path}: unsupported schema_version {version!r}")
    frames = record.get("frames")
    if not isinstance(frames, list) or not frames:
        raise ValidationError(f"{path}: 'frames' must be a non-empty list")
    return frames


def _array(value, shape, where, dtype=float):
    try:
        arr = np.asarray(value, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc
    if shape is not None and arr.shape != shape:
        raise ValidationError(f"{where}: expected shape {shape}, got {arr.shape}")
    if dtype is float and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{where}: non-finite values")
    return arr


def _optional_stack(frames, key, shape, path, dtype=float):
    present = [key in f for f in frames]
    if not any(present):
        return None
    if not all(present):
        raise ValidationError(f"{path}: '{key}' must be given for every frame or none")
    if dtype is bool and not all(isinstance(v, bool) for f in frames for v in f[key]):
        raise ValidationError(f"{path}: '{key}' entries must be booleans")
    first = np.asarray(frames[0][key]).shape if shape is None else shape
    return np.stack([_array(f[key], first, f"{path}: frame {t} {key}", dtype)
                     for t, f in enumerate(frames)])


def read_motion(path) -> MotionFile:
    record = _read_json(path)
    frames = _check_schema(record, path)
    rate = record.get("frame_rate")
    if not isinstance(rate, (int, float)) or isinstance(rate, bool) or not rate > 0:
        raise ValidationError(f"{path}: frame_rate must be a positive number")
    for t, f in enumerate(frames):
        if not isinstance(f, dict) or "q" not in f:
            raise ValidationError(f"{path}: frame {t} must be an object with 'q'")
    q = np.stack([_array(f["q"], (POSE_DIM,), f"{path}: frame {t} q") for t, f in enumerate(frames)])
    return MotionFile(
        frame_rate=float(rate), q=q,
        q_trans=_optional_stack(frames, "q_trans", (3,), path),
        contacts=_optional_stack(frames, "contacts", None, path, bool),
        joints_world=_optional_stack(frames, "joints_world", None, path),
        ground_plane=record.get("ground_plane"),
    )


def _dump(value):
    return json.dumps(value, allow_nan=False, separators=(", ", ": "))


def motion_to_text(motion: MotionFile) -> str:
    lines = ["{", f'"schema_version": {SCHEMA_VERSION},', f'"frame_rate": {_dump(float(motion.frame_rate))},']
    if motion.ground_plane is not None:
        lines.append(f'"ground_plane": {_dump(motion.ground_plane)},')
    lines.append('"frames": [')
    T = len(motion)
    for t in range(T):
        frame = {"q": motion.q[t].tolist()}
        if motion.q_trans is not None:
            frame["q_trans"] = motion.q_trans[t].tolist()
        if motion.contacts is not None:
            frame["contacts"] = [bool(c) for c in motion.contacts[t]]
        if motion.joints_world is not None:
            frame["joints_world"] = motion.joints_world[t].tolist()
        lines.append(_dump(frame) + ("," if t < T - 1 else ""))
    lines += ["]", "}"]
    return "\n".join(lines) + "\n"


def write_motion(path, motion: MotionFile):
    Path(path).write_text(motion_to_text(motion))


def _gain(value, where):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(POSE_DIM, float(value))
    return _array(value, (POSE_DIM,), where)


def read_properties(path, n_contacts=4) -> PropertyStream:
    record = _read_json(path)
    frames = _check_schema(record, path)
    T = len(frames)
    forces, kp, kd, alpha, attention = [], [], [], [], []
    for t, f in enumerate(frames):
        where = f"{path}: frame {t}"
        if not isinstance(f, dict):
            raise ValidationError(f"{where}: must be an object")
        missing = [k for k in ("lambda", "eta", "contact_prob", "a_ine", "omega_ine") if k not in f]
        if missing:
            raise ValidationError(f"{where}: missing {', '.join(missing)}")
        gravity = f.get("gravity")
        try:
            forces.append(ForceInputs(
                lam=_array(f["lambda"], (n_contacts, 3), f"{where} lambda"),
                gravity=None if gravity is None else _array(gravity, (3,), f"{where} gravity"),
                eta=_array(f["eta"], (3,), f"{where} eta"),
                contact_prob=_array(f["contact_prob"], (n_contacts,), f"{where} contact_prob"),
                a_ine=_array(f["a_ine"], (3,), f"{where} a_ine"),
                omega_ine=_array(f["omega_ine"], (3,), f"{where} omega_ine"),
            ))
        except ValidationError as exc:
            if str(exc).startswith(str(path)):
                raise
            raise ValidationError(f"{where}: {exc}") from exc
        kp.append(_gain(f.get("kp", 0.0), f"{where} kp"))
        kd.append(_gain(f.get("kd", 0.0), f"{where} kd"))
        alpha.append(_gain(f.get("alpha", 0.0), f"{where} alpha"))
        if "attention" in f:
            attention.append(_array(f["attention"], (T,), f"{where} attention"))
        else:
            attention.append(np.eye(T)[t])
    beta = record.get("beta")
    beta = None if beta is None else _array(beta, (10,), f"{path}: beta")
    controls = ControlInputs(kp=np.stack(kp), kd=np.stack(kd), alpha=np.stack(alpha),
                             attention=np.stack(attention))
    return PropertyStream(forces=forces, controls=controls, beta=beta)


def properties_to_text(stream: PropertyStream) -> str:
    frames = []
    c = stream.controls
    for t, f in enumerate(stream.forces):
        frames.append({
            "lambda": f.lam.tolist(),
            "gravity": None if f.gravity is None else f.gravity.tolist(),
            "eta": f.eta.tolist(), "contact_prob": f.contact_prob.tolist(),
            "a_ine": f.a_ine.tolist(), "omega_ine": f.omega_ine.tolist(),
            "kp": c.kp[t].tolist(), "kd": c.kd[t].tolist(), "alpha": c.alpha[t].tolist(),
            "attention": c.attention[t].tolist(),
        })
    lines = ["{", f'"schema_version": {SCHEMA_VERSION},']
    if stream.beta is not None:
        lines.append(f'"beta": {_dump(np.asarray(stream.beta).tolist())},')
    lines.append('"frames": [')
    lines += [_dump(fr) + ("," if t < len(frames) - 1 else "") for t, fr in enumerate(frames)]
    lines += ["]", "}"]
    return "\n".join(lines) + "\n"


def write_properties(path, stream: PropertyStream):
    Path(path).write_text(properties_to_text(stream))


# Frozen column order of the diagnostics CSV. Append new columns at the end only.
DIAGNOSTIC_COLUMNS = (
    ["frame", "time"]
    + [f"b_soft_{j}" for j in range(4)]
    + [f"b_hard_{j}" for j in range(4)]
    + ["h_g_norm", "h_grf_norm", "inertial_norm", "h_c_norm", "tau_norm", "ddq_norm"]
    + [f"ddq_trans_{a}" for a in "xyz"]
    + ["dq_pre_norm", "dq_post_norm"]
    + [f"dq_trans_pre_{a}" for a in "xyz"]
    + [f"dq_trans_{a}" for a in "xyz"]
    + [f"q_trans_{a}" for a in "xyz"]
    + [f"R_cam_{i}{j}" for i in range(3) for j in range(3)]
    + [f"contact_speed_pre_{j}" for j in range(4)]
    + [f"contact_speed_post_{j}" for j in range(4)]
    + ["n_constrained", "kkt_residual", "projection_iterations"]
)


def diagnostic_rows(diagnostics, dt):
    norm = lambda v: float(np.linalg.norm(v))
    for rec in diagnostics.records:
        tb, proj = rec.torques, rec.projection
        row = [rec.frame, repr(rec.frame * dt)]
        row += [repr(float(v)) for v in rec.contacts.b_soft]
        row += [int(v) for v in rec.contacts.b_hard]
        row += [repr(norm(v)) for v in (tb.h_g, tb.h_grf, tb.inertial, tb.h_c, tb.tau, rec.ddq)]
        row += [repr(float(v)) for v in rec.ddq_trans]
        row += [repr(norm(rec.dq_pre)), repr(norm(proj.dq))]
        row += [repr(float(v)) for v in rec.dq_trans_pre]
        row += [repr(float(v)) for v in proj.dq_trans]
        row += [repr(float(v)) for v in rec.trajectory.q_trans]
        row += [repr(float(v)) for v in rec.camera.R_cam.ravel()]
        row += [repr(float(v)) for v in rec.contact_speed_pre]
        row += [repr(float(v)) for v in rec.contact_speed_post]
        row += [len(proj.active), repr(float(proj.kkt_residual)), proj.iterations]
        yield row


def write_diagnostics(path, diagnostics, dt):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DIAGNOSTIC_COLUMNS)
        writer.writerows(diagnostic_rows(diagnostics, dt))
