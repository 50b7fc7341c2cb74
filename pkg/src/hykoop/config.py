"""Run configuration: JSON schema, validation, and object builders.

A run config is a plain JSON document; `load_config` validates it
against SCHEMA, applies defaults, and runs the sanity checks that a
schema cannot express (dt against the stability bound, integer step
count).  Builders turn the validated dict into library objects.
"""

from __future__ import annotations

import json
import math

import jsonschema
import numpy as np

from .errors import ConfigError
from .grids import Grid
from .hamiltonians import HybridHamiltonian, POTENTIAL_KINDS, potential_from_dict
from . import hybrid as _hybrid
from . import snapshots as _snapshots
from . import states as _states

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["grid", "hamiltonian", "state", "T", "dt"],
    "additionalProperties": False,
    "properties": {
        "grid": {
            "type": "object",
            "required": ["n_q", "n_p", "n_x"],
            "additionalProperties": False,
            "properties": {
                "n_q": _posint, "n_p": _posint, "n_x": _posint,
                "L_q": _pos, "L_p": _pos, "L_x": _pos,
                "o_q": _num, "o_p": _num, "o_x": _num,
                "dealias": {"type": "boolean"},
            },
        },
        "hamiltonian": {
            "type": "object",
            "required": ["hbar", "potential"],
            "additionalProperties": False,
            "properties": {
                "hbar": _pos,
                "m": _pos,
                "M": _pos,
                "potential": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": sorted(POTENTIAL_KINDS)},
                    },
                },
                "include_quantum_kinetic": {"type": "boolean"},
                "include_classical_kinetic": {"type": "boolean"},
            },
        },
        "state": {
            "type": "object",
            "required": ["preset"],
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["gaussian", "file"]},
                "q0": _num, "p0": _num,
                "sigma_q": _pos, "sigma_p": _pos,
                "kq": _num, "kp": _num, "chirp": _num,
                "x0": _num, "k0": _num, "sigma_x": _pos,
                "chi": {
                    "type": "array", "minItems": 2, "maxItems": 2,
                    "items": {"type": "array", "minItems": 2, "maxItems": 2,
                              "items": _num},
                },
                "path": {"type": "string"},
            },
        },
        "T": _pos,
        "dt": _pos,
        "snapshot_every": {"type": "integer", "minimum": 0},
        "record_every": _posint,
        "diagnostics": {
            "type": "array",
            "items": {"enum": ["continuity"]},
        },
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
}

_DEFAULTS = {
    "snapshot_every": 0,
    "record_every": 1,
    "diagnostics": [],
    "seed": 0,
    "output_dir": "runs/out",
}
_HAM_DEFAULTS = {"m": 1.0, "M": 1.0,
                 "include_quantum_kinetic": True,
                 "include_classical_kinetic": True}
_STATE_DEFAULTS = {"q0": 0.0, "p0": 0.0, "sigma_q": 0.5, "sigma_p": 0.5,
                   "kq": 0.0, "kp": 0.0, "chirp": 0.0,
                   "x0": 0.0, "k0": 0.0, "sigma_x": 0.5}


def validate_config(cfg: dict) -> dict:
    """Schema-check a config dict and return it with defaults applied."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as err:
        path = "/".join(str(p) for p in err.absolute_path) or "(root)"
        raise ConfigError(f"config schema violation at {path}: {err.message}") \
            from err
    out = dict(cfg)
    for key, val in _DEFAULTS.items():
        out.setdefault(key, val)
    out["hamiltonian"] = {**_HAM_DEFAULTS, **cfg["hamiltonian"]}
    out["state"] = {**_STATE_DEFAULTS, **cfg["state"]}

    for key in ("T", "dt"):
        if not math.isfinite(out[key]):
            raise ConfigError(f"{key} must be finite")

    grid = build_grid(out)
    ham = build_hamiltonian(out)
    n_steps = out["T"] / out["dt"]
    if abs(n_steps - round(n_steps)) > 1e-9 * max(1.0, n_steps):
        raise ConfigError(f"T/dt = {n_steps:g} is not an integer step count")
    bound = _hybrid.stability_bound(grid, ham)
    if out["dt"] > bound:
        raise ConfigError(f"dt = {out['dt']:g} exceeds the stability bound "
                          f"{bound:.3e} for this grid and Hamiltonian")
    if out["snapshot_every"] and out["snapshot_every"] % out["record_every"]:
        raise ConfigError("snapshot_every must be a multiple of record_every "
                          "(snapshots are taken at recording times)")
    if out["state"]["preset"] == "file" and "path" not in cfg["state"]:
        raise ConfigError("state preset 'file' needs a 'path'")
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    return validate_config(cfg)


def build_grid(cfg: dict) -> Grid:
    try:
        return Grid(**cfg["grid"])
    except ValueError as err:
        raise ConfigError(f"bad grid: {err}") from err


def build_hamiltonian(cfg: dict) -> HybridHamiltonian:
    ham = {**_HAM_DEFAULTS, **cfg["hamiltonian"]}
    try:
        pot = potential_from_dict(ham.pop("potential"))
        return HybridHamiltonian(potential=pot, **ham)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad hamiltonian: {err}") from err


def build_state(grid: Grid, cfg: dict) -> np.ndarray:
    """Construct the initial field from the config's state preset."""
    st = {**_STATE_DEFAULTS, **cfg["state"]}
    preset = st["preset"]
    if preset == "file":
        field, _ = _snapshots.read_snapshot(st["path"], grid=grid)
        return field
    z = _states.phase_space_gaussian(
        grid, q0=st["q0"], p0=st["p0"], sigma_q=st["sigma_q"],
        sigma_p=st["sigma_p"], kq=st["kq"], kp=st["kp"], chirp=st["chirp"])
    if grid.n_x == 1:
        return grid.normalize(z[:, :, None] if z.ndim == 2 else z)
    if grid.n_x == 2:
        chi = st.get("chi")
        if chi is None:
            chi = [[1.0, 0.0], [0.0, 0.0]]
        xpart = np.array([complex(re, im) for re, im in chi])
        if np.all(xpart == 0.0):
            raise ConfigError("state chi must not be the zero vector")
    else:
        xpart = _states.quantum_gaussian_x(grid, x0=st["x0"], k0=st["k0"],
                                           sigma=st["sigma_x"])
    return _states.product_state(grid, z, xpart)
