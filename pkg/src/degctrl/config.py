"""JSON experiment configuration: parsing, validation and object building.

Errors are reported as ConfigError with the dotted key path of the offending
entry, so a bad config exits with a pointer to the exact field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .coeffs import (
    DegeneracyCoefficient,
    NonlocalFactor,
    ProblemData,
    SemilinearTerm,
    linearized_potential,
    power_coefficient,
    power_cosine_coefficient,
    validate_degeneracy,
)
from .errors import ConfigError, DegctrlError
from .grid import SpaceTimeGrid, build_grid
from .hum import DEFAULT_CAP, PenaltySchedule

__all__ = ["ExperimentConfig", "parse_config", "load_config"]

_DEFAULTS = {
    "discretization": {"nx": 64, "nt": 64, "gamma": 2.0},
    "carleman": {"s": 1.0, "lambda": 2.0, "omega_prime_margin": 0.25, "M_fraction": 0.5},
    "hum": {
        "schedule": [1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6],
        "cg_tol": 1e-8,
        "cg_maxit": 500,
        "tol_terminal": 1e-2,
        "log_weight_cap": DEFAULT_CAP,
    },
    "newton": {"tol": 1e-6, "maxit": 25},
    "verify": {"checks": ["hardy", "carleman_phi", "carleman_A", "energy"], "seed": 0, "ensemble": 20},
    "output": {"directory": None},
}


def _get(block: dict, key: str, path: str, expect=None, default=..., low=None, high=None):
    if key not in block:
        if default is not ...:
            return default
        raise ConfigError(path, "missing required key")
    val = block[key]
    if expect is not None and not isinstance(val, expect):
        if expect == float and isinstance(val, int):
            val = float(val)
        else:
            raise ConfigError(path, f"expected {expect}, got {type(val).__name__}")
    if low is not None and val < low:
        raise ConfigError(path, f"must be >= {low}, got {val}")
    if high is not None and val > high:
        raise ConfigError(path, f"must be <= {high}, got {val}")
    return val


def _build_a(block: dict) -> DegeneracyCoefficient:
    kind = _get(block, "kind", "problem.a.kind", str, default="power")
    if kind == "power":
        alpha = float(_get(block, "alpha", "problem.a.alpha", (int, float), default=0.5))
        a = power_coefficient(alpha)
    elif kind == "power_cosine":
        alpha = float(_get(block, "alpha", "problem.a.alpha", (int, float), default=0.5))
        a = power_cosine_coefficient(alpha)
    else:
        raise ConfigError("problem.a.kind", f"unknown coefficient kind {kind!r}")
    try:
        validate_degeneracy(a)
    except DegctrlError as exc:
        raise ConfigError("problem.a", str(exc)) from exc
    return a


def _build_ell(block: dict) -> NonlocalFactor:
    kind = _get(block, "kind", "problem.ell.kind", str, default="constant")
    if kind == "constant":
        return NonlocalFactor.constant()
    if kind == "affine":
        slope = float(_get(block, "slope", "problem.ell.slope", (int, float), default=0.5))
        return NonlocalFactor.affine(slope)
    raise ConfigError("problem.ell.kind", f"unknown nonlocal kind {kind!r}")


def _build_f(block: dict) -> SemilinearTerm:
    kind = _get(block, "kind", "problem.f.kind", str, default="linear")
    coeff = float(_get(block, "coeff", "problem.f.coeff", (int, float), default=1.0))
    if kind == "linear":
        return SemilinearTerm.linear(coeff)
    if kind == "sine":
        return SemilinearTerm.sine(coeff)
    if kind == "logistic":
        return SemilinearTerm.logistic(coeff)
    if kind == "polynomial":
        coeffs = _get(block, "coeffs", "problem.f.coeffs", list, default=[1.0])
        return SemilinearTerm.polynomial([float(c) for c in coeffs])
    raise ConfigError("problem.f.kind", f"unknown semilinear kind {kind!r}")


def _build_u0(block: dict, grid: SpaceTimeGrid) -> np.ndarray:
    kind = _get(block, "kind", "problem.u0.kind", str, default="sine")
    if kind == "zero":
        return np.zeros(grid.nx + 1)
    if kind == "sine":
        amp = float(
            _get(block, "amplitude", "problem.u0.amplitude", (int, float), default=1.0)
        )
        return amp * np.sin(np.pi * grid.x)
    raise ConfigError("problem.u0.kind", f"unknown initial-datum kind {kind!r}")


@dataclass
class ExperimentConfig:
    raw: dict
    grid: SpaceTimeGrid
    problem: ProblemData
    c: np.ndarray  # linearized potential on the grid
    s: float
    lam: float
    omega_prime_margin: float
    M_fraction: float
    schedule: PenaltySchedule
    log_weight_cap: float
    newton_tol: float
    newton_maxit: int
    verify_checks: list
    verify_seed: int
    verify_ensemble: int
    out_dir: Optional[str]


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    merged = {}
    for block, defaults in _DEFAULTS.items():
        user = raw.get(block, {})
        if not isinstance(user, dict):
            raise ConfigError(block, "must be an object")
        merged[block] = {**defaults, **user}
    if "problem" not in raw or not isinstance(raw["problem"], dict):
        raise ConfigError("problem", "missing problem block")
    pb = raw["problem"]

    disc = merged["discretization"]
    nx = _get(disc, "nx", "discretization.nx", int, low=2)
    nt = _get(disc, "nt", "discretization.nt", int, low=2)
    gamma = float(_get(disc, "gamma", "discretization.gamma", (int, float), low=1.0))

    T = float(_get(pb, "T", "problem.T", (int, float), default=1.0))
    if T <= 0:
        raise ConfigError("problem.T", f"must be positive, got {T}")
    grid = build_grid(nx, nt, T, gamma)

    omega = _get(pb, "omega", "problem.omega", list, default=[0.3, 0.8])
    if len(omega) != 2:
        raise ConfigError("problem.omega", "expected [x_left, x_right]")
    a = _build_a(pb.get("a", {}))
    ell = _build_ell(pb.get("ell", {}))
    f = _build_f(pb.get("f", {}))
    u0 = _build_u0(pb.get("u0", {}), grid)
    try:
        problem = ProblemData(
            a=a, ell=ell, f=f, omega=(float(omega[0]), float(omega[1])), T=T, u0=u0
        )
    except ValueError as exc:
        raise ConfigError("problem", str(exc)) from exc
    c = linearized_potential(f, grid)

    car = merged["carleman"]
    s = float(_get(car, "s", "carleman.s", (int, float), low=1e-12))
    lam = float(_get(car, "lambda", "carleman.lambda", (int, float), low=1e-12))
    margin = float(
        _get(car, "omega_prime_margin", "carleman.omega_prime_margin", (int, float))
    )
    if not 0.0 < margin < 0.5:
        raise ConfigError("carleman.omega_prime_margin", "must lie in (0, 0.5)")
    mfrac = float(_get(car, "M_fraction", "carleman.M_fraction", (int, float)))
    if not 0.0 < mfrac < 1.0:
        raise ConfigError("carleman.M_fraction", "must lie in (0, 1)")

    hum = merged["hum"]
    sched_vals = _get(hum, "schedule", "hum.schedule", list)
    try:
        schedule = PenaltySchedule(
            ns=tuple(float(v) for v in sched_vals),
            cg_tol=float(_get(hum, "cg_tol", "hum.cg_tol", (int, float), low=0.0)),
            cg_maxit=_get(hum, "cg_maxit", "hum.cg_maxit", int, low=1),
            tol_terminal=float(
                _get(hum, "tol_terminal", "hum.tol_terminal", (int, float), low=0.0)
            ),
        )
    except ValueError as exc:
        raise ConfigError("hum.schedule", str(exc)) from exc
    cap = float(_get(hum, "log_weight_cap", "hum.log_weight_cap", (int, float), low=1.0))

    nwt = merged["newton"]
    ver = merged["verify"]
    checks = _get(ver, "checks", "verify.checks", list)
    from .verify import KNOWN_CHECKS

    for ch in checks:
        if ch not in KNOWN_CHECKS:
            raise ConfigError("verify.checks", f"unknown check {ch!r}")
    out = merged["output"].get("directory")

    return ExperimentConfig(
        raw=raw,
        grid=grid,
        problem=problem,
        c=c,
        s=s,
        lam=lam,
        omega_prime_margin=margin,
        M_fraction=mfrac,
        schedule=schedule,
        log_weight_cap=cap,
        newton_tol=float(_get(nwt, "tol", "newton.tol", (int, float), low=0.0)),
        newton_maxit=_get(nwt, "maxit", "newton.maxit", int, low=1),
        verify_checks=[str(x) for x in checks],
        verify_seed=_get(ver, "seed", "verify.seed", int),
        verify_ensemble=_get(ver, "ensemble", "verify.ensemble", int, low=1),
        out_dir=out,
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(path, "config file not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"invalid JSON: {exc}") from exc
    return parse_config(raw)
