"""Run configuration: strict JSON schema with defaults and physics validation.

Unknown keys are rejected with their path; the quantum parameter is checked
against the saturation threshold of the configured initial datum at parse
time, before any expensive computation starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .equilibrium import SaturationError, eps_sat
from .kernels import (
    ConstantKernel,
    InversePowerKernel,
    KernelSpec,
    TableKernel,
)
from .solver import (
    FileDatum,
    InitialDatum,
    NearSaturated,
    ScaledEquilibrium,
    SimConfig,
    TwoMaxwellians,
    nominal_moments,
)

__all__ = ["ConfigError", "RunConfig", "parse_config", "serialize_config", "load_config"]


class ConfigError(ValueError):
    """Schema violation; the message carries the offending field path."""


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig
    output_dir: str


def _reject_unknown(obj: dict, allowed, path: str):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}{key}'")


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise ConfigError(f"missing required key '{path}{key}'")
    return obj[key]


def _number(x, path: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"'{path}' must be a number, got {x!r}")
    return float(x)


def _vec3(x, path: str):
    if not isinstance(x, (list, tuple)) or len(x) != 3:
        raise ConfigError(f"'{path}' must be a 3-vector")
    return tuple(_number(v, path) for v in x)


def _parse_angular(obj, path: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"'{path}' must be an object")
    kind = _need(obj, "type", path)
    if kind == "constant":
        _reject_unknown(obj, {"type", "b0"}, path)
        return ConstantKernel(b0=_number(_need(obj, "b0", path), path + "b0"))
    if kind == "inverse_power":
        _reject_unknown(obj, {"type", "alpha", "scale"}, path)
        return InversePowerKernel(
            alpha=_number(_need(obj, "alpha", path), path + "alpha"),
            scale=_number(obj.get("scale", 1.0), path + "scale"),
        )
    if kind == "table":
        _reject_unknown(obj, {"type", "nodes"}, path)
        nodes = _need(obj, "nodes", path)
        if not isinstance(nodes, list):
            raise ConfigError(f"'{path}nodes' must be a list of [cos, value] pairs")
        return TableKernel(nodes=tuple((float(c), float(v)) for c, v in nodes))
    raise ConfigError(f"'{path}type' must be constant|inverse_power|table, got {kind!r}")


def _parse_kernel(obj, path: str) -> KernelSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"'{path}' must be an object")
    _reject_unknown(obj, {"gamma", "angular"}, path)
    return KernelSpec(
        gamma=_number(_need(obj, "gamma", path), path + "gamma"),
        angular=_parse_angular(_need(obj, "angular", path), path + "angular."),
    )


def _parse_initial(obj, path: str) -> InitialDatum:
    if not isinstance(obj, dict):
        raise ConfigError(f"'{path}' must be an object")
    kind = _need(obj, "type", path)
    if kind == "two_maxwellians":
        _reject_unknown(obj, {"type", "rho1", "u1", "t1", "rho2", "u2", "t2"}, path)
        return TwoMaxwellians(
            rho1=_number(_need(obj, "rho1", path), path + "rho1"),
            u1=_vec3(_need(obj, "u1", path), path + "u1"),
            t1=_number(_need(obj, "t1", path), path + "t1"),
            rho2=_number(_need(obj, "rho2", path), path + "rho2"),
            u2=_vec3(_need(obj, "u2", path), path + "u2"),
            t2=_number(_need(obj, "t2", path), path + "t2"),
        )
    if kind == "scaled_equilibrium":
        _reject_unknown(obj, {"type", "rho", "u", "e", "amplitude"}, path)
        return ScaledEquilibrium(
            rho=_number(_need(obj, "rho", path), path + "rho"),
            u=_vec3(obj.get("u", (0.0, 0.0, 0.0)), path + "u"),
            e=_number(_need(obj, "e", path), path + "e"),
            amplitude=_number(obj.get("amplitude", 0.0), path + "amplitude"),
        )
    if kind == "near_saturated":
        _reject_unknown(obj, {"type", "fill", "radius"}, path)
        return NearSaturated(
            fill=_number(_need(obj, "fill", path), path + "fill"),
            radius=_number(_need(obj, "radius", path), path + "radius"),
        )
    if kind == "file":
        _reject_unknown(obj, {"type", "path"}, path)
        return FileDatum(path=str(_need(obj, "path", path)))
    raise ConfigError(
        f"'{path}type' must be two_maxwellians|scaled_equilibrium|near_saturated|file, "
        f"got {kind!r}"
    )


_TOP_KEYS = {
    "kernel", "eps", "initial", "t_end", "grid", "theta", "diag_stride",
    "diagnostics", "snapshot_times", "output_dir", "seed", "threads",
}
_GRID_KEYS = {"n", "l", "n_theta", "n_phi"}
_DIAG_KEYS = {"dissipation", "sandwich", "ckp"}


def parse_config(text_or_obj) -> RunConfig:
    """Validate a JSON document (text or already-parsed dict) into a RunConfig."""
    if isinstance(text_or_obj, str):
        try:
            obj = json.loads(text_or_obj)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
    else:
        obj = text_or_obj
    if not isinstance(obj, dict):
        raise ConfigError("top-level config must be an object")
    _reject_unknown(obj, _TOP_KEYS, "")
    kernel = _parse_kernel(_need(obj, "kernel", ""), "kernel.")
    eps = _number(_need(obj, "eps", ""), "eps")
    initial = _parse_initial(_need(obj, "initial", ""), "initial.")

    grid = obj.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("'grid' must be an object")
    _reject_unknown(grid, _GRID_KEYS, "grid.")
    diag = obj.get("diagnostics", {})
    if not isinstance(diag, dict):
        raise ConfigError("'diagnostics' must be an object")
    _reject_unknown(diag, _DIAG_KEYS, "diagnostics.")
    snaps = obj.get("snapshot_times", [])
    if not isinstance(snaps, list):
        raise ConfigError("'snapshot_times' must be a list of times")

    lval = grid.get("l")
    sim = SimConfig(
        kernel=kernel,
        eps=eps,
        initial=initial,
        t_end=_number(obj.get("t_end", 5.0), "t_end"),
        n=int(_number(grid.get("n", 16), "grid.n")),
        l=None if lval is None else _number(lval, "grid.l"),
        n_theta=int(_number(grid.get("n_theta", 8), "grid.n_theta")),
        n_phi=int(_number(grid.get("n_phi", 8), "grid.n_phi")),
        theta=_number(obj.get("theta", 0.5), "theta"),
        diag_stride=int(_number(obj.get("diag_stride", 10), "diag_stride")),
        enable_dissipation=bool(diag.get("dissipation", True)),
        enable_sandwich=bool(diag.get("sandwich", True)),
        enable_ckp=bool(diag.get("ckp", True)),
        snapshot_times=tuple(_number(t, "snapshot_times[]") for t in snaps),
        seed=int(_number(obj.get("seed", 0), "seed")),
        threads=None if obj.get("threads") in (None, 0) else int(obj["threads"]),
    )
    # physics gate: the quantum parameter must leave the datum non-degenerate
    rho, _, e = nominal_moments(initial, eps)
    if eps > 0 and eps >= eps_sat(rho, e):
        raise SaturationError(
            f"eps = {eps} >= eps_sat = {eps_sat(rho, e):.6g} for the configured "
            f"initial datum (rho={rho:.6g}, E={e:.6g})"
        )
    return RunConfig(sim=sim, output_dir=str(obj.get("output_dir", "out")))


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def serialize_config(rc: RunConfig) -> str:
    """Inverse of parse_config (round-trips through parse_config)."""
    sim = rc.sim
    ang = sim.kernel.angular
    if isinstance(ang, ConstantKernel):
        angular = {"type": "constant", "b0": ang.b0}
    elif isinstance(ang, InversePowerKernel):
        angular = {"type": "inverse_power", "alpha": ang.alpha, "scale": ang.scale}
    else:
        angular = {"type": "table", "nodes": [list(p) for p in ang.nodes]}
    ini = sim.initial
    if isinstance(ini, TwoMaxwellians):
        initial = {
            "type": "two_maxwellians",
            "rho1": ini.rho1, "u1": list(ini.u1), "t1": ini.t1,
            "rho2": ini.rho2, "u2": list(ini.u2), "t2": ini.t2,
        }
    elif isinstance(ini, ScaledEquilibrium):
        initial = {
            "type": "scaled_equilibrium",
            "rho": ini.rho, "u": list(ini.u), "e": ini.e, "amplitude": ini.amplitude,
        }
    elif isinstance(ini, NearSaturated):
        initial = {"type": "near_saturated", "fill": ini.fill, "radius": ini.radius}
    else:
        initial = {"type": "file", "path": ini.path}
    obj = {
        "kernel": {"gamma": sim.kernel.gamma, "angular": angular},
        "eps": sim.eps,
        "initial": initial,
        "t_end": sim.t_end,
        "grid": {"n": sim.n, "l": sim.l, "n_theta": sim.n_theta, "n_phi": sim.n_phi},
        "theta": sim.theta,
        "diag_stride": sim.diag_stride,
        "diagnostics": {
            "dissipation": sim.enable_dissipation,
            "sandwich": sim.enable_sandwich,
            "ckp": sim.enable_ckp,
        },
        "snapshot_times": list(sim.snapshot_times),
        "output_dir": rc.output_dir,
        "seed": sim.seed,
        "threads": 0 if sim.threads is None else sim.threads,
    }
    if obj["grid"]["l"] is None:
        del obj["grid"]["l"]
    return json.dumps(obj, sort_keys=True, indent=2)
