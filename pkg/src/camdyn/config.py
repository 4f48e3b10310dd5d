"""Numerical tolerances and finite-difference steps, loaded from one JSON record.

The packaged defaults live in ``data/numerics.json``. Set ``DND_NUMERICS_CONFIG``
to a JSON file to override any subset of the keys.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields, replace
from functools import lru_cache
from importlib import resources

from .errors import ValidationError

ENV_VAR = "DND_NUMERICS_CONFIG"


@dataclass(frozen=True)
class Numerics:
    coriolis_fd_step: float = 1e-6
    jacobian_fd_step: float = 1e-6
    jacobian_rel_tol: float = 1e-5
    inertia_symmetry_tol: float = 1e-10
    energy_rel_tol: float = 1e-9
    skew_symmetry_tol: float = 1e-6
    solve_residual_rel_tol: float = 1e-8
    max_condition_number: float = 1e12
    projection_kkt_tol: float = 1e-10
    projection_kkt_accept: float = 1e-9
    projection_max_iter: int = 200
    attention_sum_tol: float = 1e-6
    probability_clamp: float = 1e-7


def _apply(base: Numerics, record: dict, source: str) -> Numerics:
    known = {f.name: f.type for f in fields(Numerics)}
    updates = {}
    for key, value in record.items():
        if key == "schema_version":
            continue
        if key not in known:
            raise ValidationError(f"{source}: unknown numerics key {key!r}")
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
            raise ValidationError(f"{source}: {key} must be a positive number")
        updates[key] = int(value) if key == "projection_max_iter" else float(value)
    return replace(base, **updates)


@lru_cache(maxsize=None)
def _load(override_path: str | None) -> Numerics:
    packaged = resources.files("camdyn").joinpath("data/numerics.json").read_text()
    numerics = _apply(Numerics(), json.loads(packaged), "data/numerics.json")
    if override_path:
        try:
            with open(override_path) as fh:
                record = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read {ENV_VAR}={override_path}: {exc}") from exc
        numerics = _apply(numerics, record, override_path)
    return numerics


def get_numerics() -> Numerics:
    return _load(os.environ.get(ENV_VAR) or None)
