"""Fermi-Dirac statistics: integrals, parameter fitting, saturation thresholds.

The equilibrium with mass rho, bulk velocity u and energy parameter E (so that
int M |v-u|^2 = 3 rho E) is the logistic deformation of a Maxwellian,

    M(v) = exp(a + b|v-u|^2) / (1 + eps exp(a + b|v-u|^2)),     b < 0.

Writing tau = 1/(eps e^a), its radial moments reduce to the integrals
I_s(tau) = int_0^inf r^s / (1 + tau e^{r^2}) dr, and the fit solves the scalar
equation P(tau) = I_4 I_2^{-5/3} = 3 E rho^{-2/3} (4 pi / eps)^{2/3}, with P
strictly increasing from 3^{5/3}/5 to infinity.  Admissibility requires
eps < eps_sat = 4 pi (5E)^{3/2} / (3 rho); at eps = eps_sat the equilibrium
degenerates into the saturated ball state (f = 1/eps on a ball).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .grid import DistributionField, VelocityGrid

__all__ = [
    "SaturationError",
    "GridGeometryError",
    "FitError",
    "FermiDiracParams",
    "SaturationInfo",
    "fermi_integral",
    "pressure_ratio",
    "fit_fermi_dirac",
    "eval_fermi_dirac",
    "sample_fermi_dirac",
    "radial_moments",
    "saturation_info",
    "eps_sat",
    "eps_sat_dagger",
    "saturated_state",
    "fd_norm_bounds",
]

# lower endpoint of the range of P(tau) = I4 I2^(-5/3)
P_INFIMUM = 3.0 ** (5.0 / 3.0) / 5.0
# large-tau limit of P(tau) / tau^(2/3):  (3 sqrt(pi)/8) (sqrt(pi)/4)^(-5/3)
P_CLASSICAL_COEFF = (3.0 * math.sqrt(math.pi) / 8.0) * (math.sqrt(math.pi) / 4.0) ** (
    -5.0 / 3.0
)


class SaturationError(ValueError):
    """eps at or beyond the admissibility threshold for the given moments."""


class GridGeometryError(ValueError):
    """Requested construction does not fit inside the velocity cube."""


class FitError(RuntimeError):
    """Equilibrium parameter fit failed to converge."""


@dataclass(frozen=True)
class FermiDiracParams:
    """Parameters (a, b) of a fitted equilibrium plus its target moments.

    eps = 0 denotes the classical Maxwellian limit (a = log(rho (2 pi E)^-3/2),
    b = -1/(2E)), kept in the same container so comparison diagnostics can
    treat both cases uniformly.
    """

    a_eps: float
    b_eps: float
    eps: float
    rho: float
    u: np.ndarray
    e: float


@dataclass(frozen=True)
class SaturationInfo:
    eps_sat: float
    eps_sat_dagger: float
    fermi_temperature: float
    r_e: float


def fermi_integral(s: int, tau: float) -> float:
    """I_s(tau) = int_0^inf r^s / (1 + tau e^{r^2}) dr for tau > 0."""
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    if s not in (2, 4):
        raise ValueError(f"only orders 2 and 4 are used, got {s}")
    # integrand <= r^s e^{-r^2}/tau: cut where the Gaussian tail is negligible
    upper = max(8.0, math.sqrt(max(math.log(1e16 / tau), 1.0)))
    # the occupation drops around r0 = sqrt(-log tau) when tau < 1
    r0 = math.sqrt(-math.log(tau)) if tau < 1.0 else 0.0
    pts = [r0] if 0.0 < r0 < upper else None

    def integrand(r):
        # stable for large r^2: 1/(1 + tau e^x) = e^-x / (e^-x + tau)
        x = r * r
        return r**s * math.exp(-x) / (math.exp(-x) + tau)

    val, err = integrate.quad(integrand, 0.0, upper, points=pts, epsabs=0.0, epsrel=1e-12, limit=200)
    if not math.isfinite(val) or (val > 0 and err > 1e-8 * val):
        raise FitError(f"Fermi integral I_{s}({tau}) did not converge (err={err})")
    return val


def _dfermi_dtau(s: int, tau: float) -> float:
    """d/dtau I_s(tau) = -int r^s e^{r^2} / (1 + tau e^{r^2})^2 dr."""
    upper = max(8.0, math.sqrt(max(math.log(1e16 / tau), 1.0)))
    r0 = math.sqrt(-math.log(tau)) if tau < 1.0 else 0.0
    pts = [r0] if 0.0 < r0 < upper else None

    def integrand(r):
        x = r * r
        ex = math.exp(-x)
        return -(r**s) * ex / (ex + tau) ** 2

    val, _ = integrate.quad(integrand, 0.0, upper, points=pts, epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def pressure_ratio(tau: float) -> float:
    """P(tau) = I_4(tau) I_2(tau)^(-5/3); strictly increasing, > 3^(5/3)/5."""
    i2 = fermi_integral(2, tau)
    i4 = fermi_integral(4, tau)
    return i4 * i2 ** (-5.0 / 3.0)


def eps_sat(rho: float, e: float) -> float:
    """Admissibility threshold 4 pi (5E)^{3/2} / (3 rho)."""
    return 4.0 * math.pi * (5.0 * e) ** 1.5 / (3.0 * rho)


def eps_sat_dagger(rho: float, e: float) -> float:
    """Stricter threshold below which the uniform equilibrium norm bounds hold:
    2^{5/2} 3^{3/2} 5^{-5/2} pi^{3/2} E^{3/2} / rho  (about 0.0625 eps_sat)."""
    return (
        2.0**2.5 * 3.0**1.5 * 5.0 ** (-2.5) * math.pi**1.5 * e**1.5 / rho
    )


def saturation_info(rho: float, e: float, eps: float) -> SaturationInfo:
    if rho <= 0 or e <= 0:
        raise ValueError("rho and e must be positive")
    t_fermi = 0.5 * (3.0 * eps * rho / (4.0 * math.pi)) ** (2.0 / 3.0)
    return SaturationInfo(
        eps_sat=eps_sat(rho, e),
        eps_sat_dagger=eps_sat_dagger(rho, e),
        fermi_temperature=t_fermi,
        r_e=e / t_fermi if t_fermi > 0 else math.inf,
    )


def fit_fermi_dirac(rho: float, u, e: float, eps: float) -> FermiDiracParams:
    """Solve for (a, b) reproducing (rho, rho u, 3 rho E) at quantum parameter eps.

    Bracketing + Brent on log(tau) followed by Newton polishing; raises
    SaturationError for eps >= eps_sat and FitError on non-convergence.
    eps = 0 returns the closed-form Maxwellian.
    """
    u = np.asarray(u, dtype=float).reshape(3)
    if rho <= 0 or e <= 0:
        raise ValueError("rho and e must be positive")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0.0:
        a = math.log(rho * (2.0 * math.pi * e) ** (-1.5))
        return FermiDiracParams(a_eps=a, b_eps=-0.5 / e, eps=0.0, rho=rho, u=u, e=e)
    if eps >= eps_sat(rho, e):
        raise SaturationError(
            f"eps = {eps} >= eps_sat = {eps_sat(rho, e)} for rho={rho}, E={e}"
        )

    target = 3.0 * e * rho ** (-2.0 / 3.0) * (4.0 * math.pi / eps) ** (2.0 / 3.0)

    def resid(log_tau):
        return pressure_ratio(math.exp(log_tau)) - target

    # classical guess P ~ coeff * tau^(2/3), expanded geometrically to a bracket
    guess = 1.5 * math.log(max(target / P_CLASSICAL_COEFF, 1e-12))
    lo, hi = guess - 2.0, guess + 2.0
    flo, fhi = resid(lo), resid(hi)
    for _ in range(80):
        if flo < 0.0:
            break
        lo -= 3.0
        flo = resid(lo)
    else:
        raise FitError("could not bracket the equilibrium equation from below")
    for _ in range(80):
        if fhi > 0.0:
            break
        hi += 3.0
        fhi = resid(hi)
    else:
        raise FitError("could not bracket the equilibrium equation from above")
    log_tau = optimize.brentq(resid, lo, hi, xtol=1e-13, rtol=8.9e-16, maxiter=200)
    tau = math.exp(log_tau)

    # Newton polish on tau with the differentiated integrals
    for _ in range(4):
        i2 = fermi_integral(2, tau)
        i4 = fermi_integral(4, tau)
        p = i4 * i2 ** (-5.0 / 3.0)
        res = p - target
        if abs(res) <= 1e-13 * target:
            break
        dp = _dfermi_dtau(4, tau) * i2 ** (-5.0 / 3.0) - (5.0 / 3.0) * i4 * i2 ** (
            -8.0 / 3.0
        ) * _dfermi_dtau(2, tau)
        if dp == 0.0:
            break
        step = res / dp
        if abs(step) > 0.5 * tau:
            step = math.copysign(0.5 * tau, step)
        tau -= step
    else:
        raise FitError(f"Newton polish did not converge (tau={tau})")

    a = -math.log(eps * tau)
    b = -((4.0 * math.pi / (eps * rho)) * fermi_integral(2, tau)) ** (2.0 / 3.0)
    return FermiDiracParams(a_eps=a, b_eps=b, eps=eps, rho=rho, u=u, e=e)


def eval_fermi_dirac(params: FermiDiracParams, v):
    """Pointwise M(v); v is (3,) or (N, 3).  Stable for all exponents."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    vv = v.reshape(-1, 3)
    x = params.a_eps + params.b_eps * np.sum((vv - params.u) ** 2, axis=1)
    out = np.where(
        x < -700.0,
        0.0,
        1.0 / (np.exp(-np.clip(x, -700.0, None)) + params.eps),
    )
    return float(out[0]) if single else out


def sample_fermi_dirac(params: FermiDiracParams, grid: VelocityGrid) -> DistributionField:
    """Sample the equilibrium on a grid as a DistributionField."""
    vals = eval_fermi_dirac(params, grid.nodes)
    return DistributionField(grid, vals, params.eps)


def radial_moments(params: FermiDiracParams, n_nodes: int = 256):
    """(rho, 3 rho E) of the fitted profile by 1D radial quadrature.

    Independent of any velocity grid: used to verify fits.  Splits the radial
    axis at the occupation drop and uses mapped Gauss-Legendre panels.
    """
    a, b, eps = params.a_eps, params.b_eps, params.eps
    babs = -b
    r_max = math.sqrt((max(a, 0.0) + 45.0) / babs)
    # occupation transition where eps e^{a + b r^2} = 1 (if it exists)
    splits = []
    if eps > 0:
        arg = a + math.log(eps)
        if 0.0 < arg / babs < r_max**2:
            splits.append(math.sqrt(arg / babs))
    edges = [0.0] + sorted(splits) + [r_max]
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    rho = 0.0
    en = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        ww = 0.5 * (hi - lo) * w
        ex = a + b * r * r
        m = np.where(ex < -700.0, 0.0, 1.0 / (np.exp(-np.clip(ex, -700.0, None)) + eps))
        rho += float(np.sum(ww * m * r * r))
        en += float(np.sum(ww * m * r**4))
    return 4.0 * math.pi * rho, 4.0 * math.pi * en


def saturated_state(rho: float, u, eps: float, grid: VelocityGrid) -> DistributionField:
    """The degenerate ball state: f = 1/eps on |v-u| <= (3 rho eps / 4 pi)^(1/3).

    Voxelized mass differs from rho by O(dv).  Raises if the ball does not fit
    inside the grid cube.
    """
    if eps <= 0:
        raise ValueError("saturated state requires eps > 0")
    u = np.asarray(u, dtype=float).reshape(3)
    radius = (3.0 * rho * eps / (4.0 * math.pi)) ** (1.0 / 3.0)
    if np.max(np.abs(u)) + radius >= grid.l:
        raise GridGeometryError(
            f"saturated ball (radius {radius:.3g} at u={u}) exits the cube l={grid.l}"
        )
    d2 = np.sum((grid.nodes - u) ** 2, axis=1)
    vals = np.where(d2 <= radius * radius, 1.0 / eps, 0.0)
    return DistributionField(grid, vals, eps)


def fd_norm_bounds(params: FermiDiracParams, k: float):
    """Uniform-in-eps bounds (C_inf, C_1k) on ||M||_inf and ||M||_{L^1_k}.

    Valid for eps <= eps_sat_dagger(rho, E):
        C_inf = rho E^{-3/2},
        C_1k  = C_inf 4 pi (int e^{-x^2} x^2 (1+x^2)^{k/2} dx)
                * (bbar^{3/2} min(1, bbar)^k)^{-1},   bbar = 3/(10 pi^{2/5}) / E.
    """
    rho, e, eps = params.rho, params.e, params.eps
    dag = eps_sat_dagger(rho, e)
    if eps > dag * (1.0 + 1e-12):
        raise SaturationError(f"bounds require eps <= eps_sat_dagger = {dag}, got {eps}")
    c_inf = rho * e ** (-1.5)

    def integrand(x):
        return math.exp(-x * x) * x * x * (1.0 + x * x) ** (k / 2.0)

    quad_val, _ = integrate.quad(integrand, 0.0, 12.0, epsabs=0.0, epsrel=1e-12)
    bbar = 3.0 / (10.0 * math.pi**0.4) / e
    c_1k = c_inf * 4.0 * math.pi * quad_val / (bbar**1.5 * min(1.0, bbar) ** k)
    return c_inf, c_1k
