"""Entropies, entropy production, and the quantum/classical comparison tools.

The quantum entropy of an admissible field (0 <= f <= 1/eps) is

    H_eps(f) = int [ f log f + (1/eps)(1 - eps f) log(1 - eps f) ] dv,

reducing to int f log f at eps = 0.  Its production D_eps is a ninefold
quadrature sharing the collision sweeps' discretization.  The transform
x -> x/(1 - eps x) maps admissible fields onto classical ones; production
computed for the transformed field with the same quadrature sandwiches the
quantum production termwise between kappa0^4 and 1 times itself, where kappa0
is the Pauli margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from . import _sweeps, equilibrium
from .collision import _apply_threads, _fmax, _grid_cache, _kernel_tables, _pad
from .equilibrium import SaturationError, fit_fermi_dirac, sample_fermi_dirac
from .grid import DistributionField, lebesgue_norm, moments, weighted_lp_norm
from .kernels import KernelSpec

__all__ = [
    "EntropyReport",
    "SandwichReport",
    "fd_entropy",
    "phi_transform",
    "entropy_production",
    "production_pair",
    "relative_entropy",
    "fit_to_field",
    "comparison_sandwich",
    "ckp_bound",
    "entropy_report",
]


def fd_entropy(f: DistributionField) -> float:
    """H_eps(f) by the midpoint rule, with x log x := 0 at x = 0 and the
    quantum term dropped where eps f = 1."""
    vals = f.values
    ent = xlogy(vals, vals)
    if f.eps > 0:
        hole = 1.0 - f.eps * vals
        np.maximum(hole, 0.0, out=hole)
        ent = ent + xlogy(hole, hole) / f.eps
    return f.grid.dv**3 * float(np.sum(ent))


def phi_transform(f: DistributionField) -> DistributionField:
    """Nodewise x -> x/(1 - eps x); the result is a classical (eps = 0) field."""
    if f.eps == 0.0:
        return DistributionField(f.grid, f.values.copy(), 0.0)
    margin = f.pauli_margin()
    if margin < 1e-10:
        raise SaturationError(
            f"phi transform blows up: min(1 - eps f) = {margin} < 1e-10"
        )
    return DistributionField(f.grid, f.values / (1.0 - f.eps * f.values), 0.0)


def production_pair(f: DistributionField, spec: KernelSpec):
    """(D_eps(f), D_0(phi_eps f)) from one fused sweep.

    The classical production uses the transform-after-interpolation convention,
    which makes kappa0^4 D_0 <= D_eps <= D_0 exact termwise.
    """
    g = f.grid
    nthr = _apply_threads()
    pix, piy, piz, ax, hx, hy, hz, hw = _grid_cache(g)
    kkind, b0, btab = _kernel_tables(spec)
    de, d0 = _sweeps.dissipation(
        f.values, _pad(f.values, g.n), pix, piy, piz, ax, g.n, f.eps, spec.gamma,
        kkind, b0, btab, hx, hy, hz, hw, nthr, _fmax(f.eps),
    )
    scale = 0.25 * g.dv**6 * 2.0
    return scale * de, scale * d0


def entropy_production(f: DistributionField, spec: KernelSpec) -> float:
    """D_eps(f) >= 0 (the integrand is (x-y)log(x/y)-shaped, hence nonnegative)."""
    if f.eps > 0 and f.pauli_margin() < 0.0:
        raise SaturationError("entropy production needs 1 - eps f >= 0")
    return production_pair(f, spec)[0]


def fit_to_field(f: DistributionField, eps: float | None = None):
    """Equilibrium parameters matching the field's discrete moments."""
    m = moments(f)
    return fit_fermi_dirac(m.rho, m.u, m.e, f.eps if eps is None else eps)


def relative_entropy(f: DistributionField) -> float:
    """H_eps(f | M) = H_eps(f) - H_eps(M), M fitted to f's moments and sampled
    on f's grid (so the difference is a same-rule discrete quantity)."""
    params = fit_to_field(f)
    mfield = sample_fermi_dirac(params, f.grid)
    return fd_entropy(f) - fd_entropy(mfield)


@dataclass(frozen=True)
class SandwichReport:
    h_eps_rel: float
    h0_phi_rel: float
    d_eps: float
    d0_phi: float
    kappa0: float
    kappa_min: float
    margin_entropy: float  # H_0(phi f | .) - H_eps(f | .)      >= 0
    margin_lower: float  # D_eps - kappa0^4 D_0(phi f)          >= 0
    margin_upper: float  # D_0(phi f) - D_eps                   >= 0
    scale: float

    @property
    def ok(self) -> bool:
        tol = 1e-8 * self.scale
        return (
            self.margin_entropy >= -tol
            and self.margin_lower >= -tol
            and self.margin_upper >= -tol
        )


def comparison_sandwich(
    f: DistributionField, spec: KernelSpec, kappa0: float
) -> SandwichReport:
    """Quantum/classical entropy and production comparison at margin kappa0."""
    kappa_min = f.pauli_margin()
    if kappa_min < kappa0 - 1e-12:
        raise SaturationError(
            f"field margin {kappa_min} below requested kappa0 = {kappa0}"
        )
    h_eps_rel = relative_entropy(f)
    h0_phi_rel = relative_entropy(phi_transform(f))
    d_eps, d0_phi = production_pair(f, spec)
    scale = max(abs(h_eps_rel), abs(h0_phi_rel), abs(d0_phi), 1e-30)
    return SandwichReport(
        h_eps_rel=h_eps_rel,
        h0_phi_rel=h0_phi_rel,
        d_eps=d_eps,
        d0_phi=d0_phi,
        kappa0=kappa0,
        kappa_min=kappa_min,
        margin_entropy=h0_phi_rel - h_eps_rel,
        margin_lower=d_eps - kappa0**4 * d0_phi,
        margin_upper=d0_phi - d_eps,
        scale=scale,
    )


def ckp_bound(f: DistributionField, p: float, k: float):
    """Distance-versus-entropy bound: returns (lhs, rhs) with

        lhs = ||<v>^k (f - M)||_p^2,
        rhs = 2 max(||<v>^{2k} M||_q, ||<v>^{2k} f||_q) H_eps(f | M),

    q = p/(2-p) (infinity at p = 2); the caller asserts lhs <= rhs.
    """
    if not (1.0 <= p <= 2.0):
        raise ValueError(f"p must lie in [1, 2], got {p}")
    params = fit_to_field(f)
    mfield = sample_fermi_dirac(params, f.grid)
    q = math.inf if p == 2.0 else p / (2.0 - p)
    lhs = weighted_lp_norm(f.grid, f.values - mfield.values, p, k) ** 2
    h_rel = fd_entropy(f) - fd_entropy(mfield)
    rhs = 2.0 * max(
        lebesgue_norm(mfield, q, 2.0 * k), lebesgue_norm(f, q, 2.0 * k)
    ) * max(h_rel, 0.0)
    return lhs, rhs


@dataclass(frozen=True)
class EntropyReport:
    """Per-snapshot entropy diagnostics."""

    h_eps: float
    h_eps_rel: float
    d_eps: float
    h0_phi_rel: float
    d0_phi: float
    kappa_min: float


def entropy_report(f: DistributionField, spec: KernelSpec) -> EntropyReport:
    h = fd_entropy(f)
    h_rel = relative_entropy(f)
    d_eps, d0_phi = production_pair(f, spec)
    h0_rel = relative_entropy(phi_transform(f)) if f.pauli_margin() > 1e-10 else math.nan
    return EntropyReport(
        h_eps=h,
        h_eps_rel=h_rel,
        d_eps=d_eps,
        h0_phi_rel=h0_rel,
        d0_phi=d0_phi,
        kappa_min=f.pauli_margin(),
    )
