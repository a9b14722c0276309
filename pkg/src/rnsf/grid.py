"""Collocated grid on [0, 1] and the finite-difference/quadrature toolbox.

The grid carries N interior nodes plus both boundary nodes, dx = 1/(N+1).
All derivative operators are second-order centered in the interior; the
boundary closures differ by purpose:

* ``d1``        -- generic first derivative, 2nd-order one-sided rows.
* ``d1_flux``   -- first derivative whose trapezoid-weighted row sums
                   telescope exactly to f[-1] - f[0].  Used for the
                   v-equation so that discrete mass is conserved to
                   round-off when u vanishes on the boundary.  The
                   boundary rows are the one-sided two-point formula,
                   first order pointwise; global accuracy stays second
                   order (classical boundary-closure order reduction does
                   not contaminate the interior at this order).
* ``d1_neumann``-- first derivative whose boundary rows return exactly 0.
                   Used for the temperature gradient inside the heat-flux
                   law: q = 0 on the boundary forces kappa*theta_x = 0
                   there for all time, so the zero row is the exact value,
                   not an approximation.
* ``d2``        -- second derivative, 2nd-order one-sided 4-point rows.

All operators accept stacked fields of shape (..., M) and act on the last
axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """N interior nodes plus the two boundary nodes of [0, 1]."""

    n_interior: int
    x: np.ndarray = field(repr=False)
    dx: float

    @classmethod
    def make(cls, n_interior: int) -> "Grid":
        if n_interior < 8:
            raise ValueError(f"need at least 8 interior nodes, got {n_interior}")
        x = np.linspace(0.0, 1.0, n_interior + 2)
        return cls(n_interior=n_interior, x=x, dx=1.0 / (n_interior + 1))

    @property
    def m(self) -> int:
        """Total node count including boundaries."""
        return self.n_interior + 2

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.m, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


def d1(f: np.ndarray, dx: float) -> np.ndarray:
    out = np.empty_like(f)
    inv2 = 0.5 / dx
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) * inv2
    out[..., 0] = (-3.0 * f[..., 0] + 4.0 * f[..., 1] - f[..., 2]) * inv2
    out[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) * inv2
    return out


def d1_flux(f: np.ndarray, dx: float) -> np.ndarray:
    out = np.empty_like(f)
    inv2 = 0.5 / dx
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) * inv2
    out[..., 0] = (f[..., 1] - f[..., 0]) / dx
    out[..., -1] = (f[..., -1] - f[..., -2]) / dx
    return out


def d1_neumann(f: np.ndarray, dx: float) -> np.ndarray:
    out = np.empty_like(f)
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) * (0.5 / dx)
    out[..., 0] = 0.0
    out[..., -1] = 0.0
    return out


def d2(f: np.ndarray, dx: float) -> np.ndarray:
    out = np.empty_like(f)
    inv = 1.0 / (dx * dx)
    out[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) * inv
    out[..., 0] = (2.0 * f[..., 0] - 5.0 * f[..., 1] + 4.0 * f[..., 2] - f[..., 3]) * inv
    out[..., -1] = (2.0 * f[..., -1] - 5.0 * f[..., -2] + 4.0 * f[..., -3] - f[..., -4]) * inv
    return out


def integrate(grid: Grid, f: np.ndarray) -> float:
    """Trapezoid integral over [0, 1]."""
    return float(np.dot(grid.weights, f))


def l2_norm_sq(grid: Grid, f: np.ndarray) -> float:
    return float(np.dot(grid.weights, f * f))


def l2_norm(grid: Grid, f: np.ndarray) -> float:
    return float(np.sqrt(l2_norm_sq(grid, f)))


def sobolev_norm_sq(grid: Grid, f: np.ndarray, order: int) -> float:
    """Discrete H^order squared norm: L2 of f and its x-derivatives."""
    total = l2_norm_sq(grid, f)
    if order >= 1:
        total += l2_norm_sq(grid, d1(f, grid.dx))
    if order >= 2:
        total += l2_norm_sq(grid, d2(f, grid.dx))
    if order > 2:
        raise ValueError("only H^0..H^2 norms are supported")
    return total


def sobolev_norm(grid: Grid, f: np.ndarray, order: int) -> float:
    return float(np.sqrt(sobolev_norm_sq(grid, f, order)))
