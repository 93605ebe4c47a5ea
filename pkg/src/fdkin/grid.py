"""Velocity discretization: cell-centered cube lattice plus sphere quadrature.

All fields live on a uniform lattice of n^3 cell centers filling [-l, l]^3;
velocity integrals use the midpoint rule (positive weights, so nonnegativity
survives every linear operation that has nonnegative coefficients).  The
scattering-direction sphere carries a tensor rule: Gauss-Legendre in
cos(theta), uniform in azimuth.  Both node counts must be even so the rule is
symmetric under sigma -> -sigma, which the collision sweeps exploit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridError",
    "FieldError",
    "VelocityGrid",
    "DistributionField",
    "Moments",
    "build_grid",
    "post_collision",
    "moments",
    "lebesgue_norm",
    "weighted_lp_norm",
    "l1k_log_norm",
]


class GridError(ValueError):
    """Invalid grid construction parameters."""


class FieldError(ValueError):
    """Invalid distribution-field data (shape, sign, Pauli bound)."""


class VelocityGrid:
    """Cell-centered velocity lattice with an attached sphere rule.

    Nodes are v_ijk = (-l + (i+1/2) dv, ...), dv = 2l/n, flattened in C order
    (i slowest).  ``sphere_sigma`` (m, 3) and ``sphere_w`` (m,) form the full
    quadrature rule with sum(w) = 4 pi.
    """

    def __init__(self, n, l, n_theta, n_phi):
        if n % 2 != 0 or n < 8:
            raise GridError(f"n must be even and >= 8, got {n}")
        if not l > 0:
            raise GridError(f"half-width l must be positive, got {l}")
        if n_theta < 4 or n_theta % 2 != 0:
            raise GridError(f"n_theta must be even and >= 4, got {n_theta}")
        if n_phi < 4 or n_phi % 2 != 0:
            raise GridError(f"n_phi must be even and >= 4, got {n_phi}")
        self.n = int(n)
        self.l = float(l)
        self.n_theta = int(n_theta)
        self.n_phi = int(n_phi)
        self.dv = 2.0 * self.l / self.n
        self.axis = -self.l + (np.arange(self.n) + 0.5) * self.dv
        self.size = self.n**3

        mu, wmu = np.polynomial.legendre.leggauss(n_theta)
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        st = np.sqrt(1.0 - mu**2)
        sig = np.empty((n_theta * n_phi, 3))
        w = np.empty(n_theta * n_phi)
        k = 0
        for a in range(n_theta):
            for b in range(n_phi):
                sig[k] = (st[a] * np.cos(phi[b]), st[a] * np.sin(phi[b]), mu[a])
                w[k] = wmu[a] * (2.0 * np.pi / n_phi)
                k += 1
        self.sphere_sigma = sig
        self.sphere_w = w
        # hemisphere half (mu > 0); with even node counts the full rule is the
        # symmetrization of this half under sigma -> -sigma
        mask = sig[:, 2] > 0.0
        self.hemi_sigma = np.ascontiguousarray(sig[mask])
        self.hemi_w = np.ascontiguousarray(w[mask])

        self._nodes = None
        self._basis_q = None

    @property
    def nodes(self):
        """(n^3, 3) array of node coordinates, C-ordered."""
        if self._nodes is None:
            X, Y, Z = np.meshgrid(self.axis, self.axis, self.axis, indexing="ij")
            self._nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
        return self._nodes

    @property
    def invariant_basis(self):
        """Orthonormal (n^3, 5) basis of span{1, vx, vy, vz, |v|^2} under the
        midpoint inner product <a,b> = dv^3 sum(a b)."""
        if self._basis_q is None:
            v = self.nodes
            cols = np.column_stack(
                [np.ones(self.size), v[:, 0], v[:, 1], v[:, 2], np.sum(v**2, axis=1)]
            )
            q, _ = np.linalg.qr(cols)
            self._basis_q = q
        return self._basis_q

    def integrate(self, values):
        """Midpoint-rule integral dv^3 * sum(values)."""
        return self.dv**3 * float(np.sum(values))

    def same_layout(self, other) -> bool:
        return (
            self.n == other.n
            and self.l == other.l
            and self.n_theta == other.n_theta
            and self.n_phi == other.n_phi
        )

    def __repr__(self):
        return (
            f"VelocityGrid(n={self.n}, l={self.l}, "
            f"n_theta={self.n_theta}, n_phi={self.n_phi})"
        )


def build_grid(n, l, n_theta=8, n_phi=8) -> VelocityGrid:
    """Construct a velocity grid; validates sizes (n even >= 8, rule even)."""
    return VelocityGrid(n, l, n_theta, n_phi)


class DistributionField:
    """Grid-sampled density with its quantum parameter eps.

    Enforces 0 <= f <= 1/eps (up to a 1e-12 relative slack) and finiteness at
    construction; ``values`` is a flat, C-ordered float64 array of length n^3.
    """

    def __init__(self, grid: VelocityGrid, values, eps: float):
        values = np.ascontiguousarray(values, dtype=np.float64).ravel()
        if values.size != grid.size:
            raise FieldError(
                f"field size {values.size} does not match grid size {grid.size}"
            )
        if not np.all(np.isfinite(values)):
            raise FieldError("field contains NaN or Inf")
        if eps < 0:
            raise FieldError(f"eps must be >= 0, got {eps}")
        if np.any(values < 0.0):
            low = float(values.min())
            raise FieldError(f"field has negative entries (min {low})")
        if eps > 0:
            cap = (1.0 / eps) * (1.0 + 1e-12)
            if np.any(values > cap):
                raise FieldError(
                    f"Pauli bound violated: max f = {values.max()} > 1/eps = {1.0 / eps}"
                )
            np.minimum(values, 1.0 / eps, out=values)
        self.grid = grid
        self.values = values
        self.eps = float(eps)

    def copy(self) -> "DistributionField":
        return DistributionField(self.grid, self.values.copy(), self.eps)

    def pauli_margin(self) -> float:
        """min over nodes of 1 - eps*f (identically 1 for eps = 0)."""
        if self.eps == 0.0:
            return 1.0
        return float(np.min(1.0 - self.eps * self.values))

    def sup(self) -> float:
        return float(np.max(self.values))


@dataclass(frozen=True)
class Moments:
    rho: float
    u: np.ndarray  # bulk velocity, shape (3,)
    e: float  # energy parameter: int f |v-u|^2 = 3 rho e


def post_collision(v, v_star, sigma):
    """Outgoing pair of an elastic collision with scattering direction sigma.

    v' = (v+v*)/2 + |v-v*|/2 sigma and v'* the mirror point; conserves
    momentum and kinetic energy identically.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    ns = float(np.linalg.norm(sigma))
    if abs(ns - 1.0) > 1e-12:
        raise ValueError(f"sigma must be a unit vector, |sigma| = {ns}")
    center = 0.5 * (v + v_star)
    half = 0.5 * float(np.linalg.norm(v - v_star)) * sigma
    return center + half, center - half


def moments(f: DistributionField) -> Moments:
    """Discrete (rho, u, e) with int f |v-u|^2 = 3 rho e."""
    g = f.grid
    w = g.dv**3
    rho = w * float(np.sum(f.values))
    if rho <= 0.0:
        raise FieldError("moments undefined for a zero field")
    v = g.nodes
    u = w * (f.values @ v) / rho
    d2 = np.sum((v - u) ** 2, axis=1)
    e = w * float(f.values @ d2) / (3.0 * rho)
    return Moments(rho=rho, u=u, e=e)


def _weight(grid: VelocityGrid, k: float):
    if k == 0.0:
        return 1.0
    return (1.0 + np.sum(grid.nodes**2, axis=1)) ** (k / 2.0)


def weighted_lp_norm(grid: VelocityGrid, values: np.ndarray, p: float, k: float = 0.0) -> float:
    """||<v>^k g||_p for a raw nodal array g (midpoint rule; p = inf -> sup)."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    wk = _weight(grid, k)
    if np.isinf(p):
        return float(np.max(np.abs(values) * wk))
    vals = np.abs(values) ** p * wk**p
    return (grid.dv**3 * float(np.sum(vals))) ** (1.0 / p)


def lebesgue_norm(f: DistributionField, p: float, k: float = 0.0) -> float:
    """Weighted Lebesgue norm ||<v>^k f||_p on the grid (midpoint rule).

    p = inf returns the weighted sup over nodes.
    """
    return weighted_lp_norm(f.grid, f.values, p, k)


def l1k_log_norm(f: DistributionField, k: float = 0.0) -> float:
    """int <v>^k |f| |log|f||, with the x log x -> 0 convention at f = 0."""
    vals = np.abs(f.values)
    out = np.zeros_like(vals)
    mask = vals > 0.0
    out[mask] = vals[mask] * np.abs(np.log(vals[mask]))
    wk = _weight(f.grid, k)
    return f.grid.dv**3 * float(np.sum(out * wk))
