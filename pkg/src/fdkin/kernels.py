"""Collision kernels B(v, v*, sigma) = b(cos theta) |v - v*|^gamma.

The angular part b lives on cos(theta) in (-1, 1) and must have finite mass on
the unit sphere (cutoff kernels); the relative-speed part is a hard-potential
power gamma in (0, 1].  Three angular families are supported:

- ``ConstantKernel``: b == b0,
- ``InversePowerKernel``: the squared-difference profile induced by an
  inverse-power interaction potential |x|^(-alpha) with alpha in (5/2, 3),
- ``TableKernel``: piecewise-linear data on a monotone cos(theta) grid.

Angular integrals (sphere mass and the convolution constants ``young_constant``)
are computed with dyadic endpoint-refined Gauss-Legendre panels so that the
integrable endpoint singularities of the inverse-power family converge and
genuine divergences are detected instead of silently truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AngularKernel",
    "ConstantKernel",
    "InversePowerKernel",
    "TableKernel",
    "KernelSpec",
    "KernelError",
    "DivergenceError",
    "eval_angular",
    "angular_mass",
    "eval_kernel",
    "young_constant",
]


class KernelError(ValueError):
    """Invalid kernel parameter or evaluation point."""


class DivergenceError(KernelError):
    """A sphere integral failed to converge (non-integrable singularity)."""


@dataclass(frozen=True)
class ConstantKernel:
    """Isotropic angular kernel b(c) = b0 > 0."""

    b0: float

    def __post_init__(self):
        if not self.b0 > 0:
            raise KernelError(f"constant kernel needs b0 > 0, got {self.b0}")

    def value(self, c):
        return np.full_like(np.asarray(c, dtype=float), self.b0)


@dataclass(frozen=True)
class InversePowerKernel:
    """Angular profile of an inverse-power potential |x|^(-alpha).

    b(c) = scale * ((1-c)^(-beta) - (1+c)^beta)^2 with beta = (3-alpha)/2.
    Requires 5/2 < alpha < 3 so the induced hard-potential exponent
    gamma = 2*alpha - 5 lies in (0, 1).  The profile is singular (but
    integrable) at c = +1.
    """

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not (2.5 < self.alpha < 3.0):
            raise KernelError(f"alpha must lie in (5/2, 3), got {self.alpha}")
        if not self.scale > 0:
            raise KernelError(f"scale must be positive, got {self.scale}")

    @property
    def beta(self) -> float:
        return (3.0 - self.alpha) / 2.0

    @property
    def induced_gamma(self) -> float:
        return 2.0 * self.alpha - 5.0

    def value(self, c):
        c = np.asarray(c, dtype=float)
        if np.any(np.abs(c) >= 1.0):
            raise KernelError("inverse-power kernel is singular at cos(theta) = +/-1")
        b = self.beta
        return self.scale * ((1.0 - c) ** (-b) - (1.0 + c) ** b) ** 2


@dataclass(frozen=True)
class TableKernel:
    """Piecewise-linear angular data on a strictly increasing cos(theta) grid."""

    nodes: tuple = field(default=())  # sequence of (cos_theta, value)

    def __post_init__(self):
        pts = tuple((float(c), float(v)) for c, v in self.nodes)
        if len(pts) < 2:
            raise KernelError("table kernel needs at least two nodes")
        cs = np.array([p[0] for p in pts])
        vs = np.array([p[1] for p in pts])
        if np.any(np.diff(cs) <= 0):
            raise KernelError("table abscissae must be strictly increasing")
        if cs[0] < -1.0 or cs[-1] > 1.0:
            raise KernelError("table abscissae must lie in [-1, 1]")
        if np.any(vs < 0):
            raise KernelError("table values must be nonnegative")
        object.__setattr__(self, "nodes", pts)
        object.__setattr__(self, "_cs", cs)
        object.__setattr__(self, "_vs", vs)

    def value(self, c):
        c = np.asarray(c, dtype=float)
        # constant extension outside the tabulated range keeps b >= 0
        return np.interp(c, self._cs, self._vs)


AngularKernel = ConstantKernel | InversePowerKernel | TableKernel


@dataclass(frozen=True)
class KernelSpec:
    """Full collision kernel: hard-potential exponent plus angular part."""

    gamma: float
    angular: AngularKernel

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise KernelError(f"gamma must lie in (0, 1], got {self.gamma}")
        if isinstance(self.angular, InversePowerKernel):
            g = self.angular.induced_gamma
            if abs(self.gamma - g) > 1e-12:
                raise KernelError(
                    f"inverse-power alpha={self.angular.alpha} induces gamma={g}, "
                    f"but gamma={self.gamma} was requested"
                )


def eval_angular(kernel: AngularKernel, c):
    """Evaluate b(cos theta); scalar in, scalar out (arrays allowed)."""
    carr = np.asarray(c, dtype=float)
    if np.any(carr < -1.0) or np.any(carr > 1.0):
        raise KernelError(f"cos(theta) outside [-1, 1]: {c}")
    if isinstance(kernel, InversePowerKernel) and np.any(np.abs(carr) == 1.0):
        raise KernelError("inverse-power kernel evaluated at cos(theta) = +/-1")
    out = kernel.value(carr)
    return float(out) if np.isscalar(c) or carr.ndim == 0 else out


# 16-point Gauss-Legendre rule reused by the panel integrator
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _panel_integrate(func, lo, hi, breakpoints=()):
    cuts = [lo] + [b for b in breakpoints if lo < b < hi] + [hi]
    out = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        out += half * float(np.sum(_GL_W * func(mid + half * _GL_X)))
    return out


def _dyadic_integrate(func, rel_tol=1e-10, max_k=60, breakpoints=()):
    """Integrate func over (-1, 1) with panels refining dyadically into both
    endpoints.

    Algebraic endpoint singularities make the panel contributions geometric in
    the refinement level, so the remaining tail is summed by geometric
    extrapolation once the ratio stabilizes below 1.  Sustained ratios >= 1
    mean a non-integrable singularity and raise DivergenceError.
    """
    breakpoints = sorted(breakpoints)
    total = _panel_integrate(func, -0.5, 0.5, breakpoints)
    for sign in (+1.0, -1.0):
        prev = None
        prev_total = None
        partial = 0.0
        tail = 0.0
        converged = False
        grew = 0
        for k in range(1, max_k + 1):
            outer = sign * (1.0 - 2.0 ** (-k))
            inner = sign * (1.0 - 2.0 ** (-k - 1))
            lo, hi = (min(outer, inner), max(outer, inner))
            if hi <= lo or abs(inner) >= 1.0:
                converged = True
                break
            contrib = _panel_integrate(func, lo, hi, breakpoints)
            partial += contrib
            scale = max(abs(total) + abs(partial), 1e-300)
            if abs(contrib) <= rel_tol * scale:
                tail = 0.0
                converged = True
                break
            if prev is not None and abs(prev) > 0.0:
                q = contrib / prev
                if q >= 1.0001:
                    grew += 1
                    if grew >= 8:
                        raise DivergenceError(
                            "endpoint panel contributions grow: integral diverges"
                        )
                else:
                    grew = 0
                if 0.0 <= q < 0.99:
                    tail = contrib * q / (1.0 - q)
                    # stop when the geometrically-extrapolated total stabilizes
                    if (
                        prev_total is not None
                        and abs(partial + tail - prev_total) <= rel_tol * scale
                    ):
                        converged = True
                        break
                    prev_total = partial + tail
                else:
                    tail = 0.0
                    prev_total = None
            prev = contrib
        if not converged:
            raise DivergenceError("sphere quadrature did not converge")
        total += partial + tail
    return total


def angular_mass(kernel: AngularKernel) -> float:
    """Sphere mass 2*pi * int_{-1}^{1} b(s) ds (exact for constant kernels)."""
    if isinstance(kernel, ConstantKernel):
        return 4.0 * math.pi * kernel.b0
    if isinstance(kernel, TableKernel):
        # trapezoid is exact on piecewise-linear data; account for the
        # constant extension outside the tabulated range
        cs, vs = kernel._cs, kernel._vs
        core = float(np.trapezoid(vs, cs))
        ext = vs[0] * (cs[0] + 1.0) + vs[-1] * (1.0 - cs[-1])
        return 2.0 * math.pi * (core + ext)
    return 2.0 * math.pi * _dyadic_integrate(kernel.value)


def _kernel_breakpoints(kernel: AngularKernel):
    if isinstance(kernel, TableKernel):
        return tuple(float(c) for c in kernel._cs if -1.0 < c < 1.0)
    return ()


def eval_kernel(spec: KernelSpec, v, v_star, sigma) -> float:
    """B(v, v*, sigma) = b(sigma . (v-v*)/|v-v*|) * |v-v*|^gamma."""
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    ns = float(np.linalg.norm(sigma))
    if abs(ns - 1.0) > 1e-12:
        raise KernelError(f"sigma must be a unit vector, |sigma| = {ns}")
    rel = v - v_star
    r = float(np.linalg.norm(rel))
    if r == 0.0:
        return 0.0
    c = float(np.dot(sigma, rel) / r)
    c = min(1.0, max(-1.0, c))
    return eval_angular(spec.angular, c) * r**spec.gamma


def _conjugate(p: float) -> float:
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def young_constant(kernel: AngularKernel, p: float, q: float, r: float) -> float:
    """Convolution-inequality constant C_b(p, q) for the gain operator.

    With r', p', q' the conjugate exponents and s = cos(theta),

        C_b(p,q) = (2pi int ((1+s)/2)^(-3/(2r')) b(s) ds)^(r'/p')
                 * (2pi int ((1-s)/2)^(-3/(2r')) b(s) ds)^(r'/q'),

    the case p = q = r = 1 being the plain sphere mass.  Raises
    DivergenceError when the endpoint weight is non-integrable against b.
    """
    for name, val in (("p", p), ("q", q), ("r", r)):
        if not (val >= 1.0):
            raise KernelError(f"exponent {name} must be >= 1, got {val}")
    if p > r or q > r:
        raise KernelError(f"need p, q <= r, got p={p}, q={q}, r={r}")
    inv = (1.0 / p) + (1.0 / q)
    rhs = 1.0 + (0.0 if math.isinf(r) else 1.0 / r)
    if abs(inv - rhs) > 1e-12:
        raise KernelError(f"Hoelder relation 1/p + 1/q = 1 + 1/r fails: {inv} != {rhs}")
    if p == 1.0 and q == 1.0 and r == 1.0:
        return angular_mass(kernel)
    rp = _conjugate(r)
    pp = _conjugate(p)
    qp = _conjugate(q)
    ex_p = 0.0 if math.isinf(pp) else rp / pp
    ex_q = 0.0 if math.isinf(qp) else rp / qp
    w = 3.0 / (2.0 * rp)

    out = 1.0
    for sign, ex in ((+1.0, ex_p), (-1.0, ex_q)):
        if ex == 0.0:
            continue

        def weighted(s, sign=sign):
            b = kernel.value(np.clip(s, -1.0, 1.0))
            return ((1.0 + sign * s) / 2.0) ** (-w) * b

        integral = 2.0 * math.pi * _dyadic_integrate(
            weighted, breakpoints=_kernel_breakpoints(kernel)
        )
        out *= integral**ex
    return out
