"""Pointwise thermodynamics: pressure law, relaxed internal energy, coefficients.

The gas is ideal, p = R*theta/v in Lagrangian variables.  Heat conduction and
stress relax with time scales tau*g(theta) and tau; the internal energy picks
up the flux-squared correction

    e(theta, q) = Cv*theta + a(theta)*q^2,
    a(theta)    = Z(theta)/theta - Z'(theta)/2,
    Z(theta)    = tau*g(theta)/kappa(theta).

The coefficient functions kappa and g are analytic descriptors (constant,
power law, cubic polynomial) carrying exact derivatives up to third order;
everything downstream (Jacobians, energy weights, hyperbolicity gates) uses
those exact derivatives.  All functions broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError

# Admissible sampling band for v and theta used by validation and tests.
BAND_LO = 0.75
BAND_HI = 1.25


@dataclass(frozen=True)
class CoeffFn:
    """Analytic positive coefficient function of temperature.

    kinds:
      "const"  -- identically 1
      "pow"    -- theta**alpha          (params = (alpha,))
      "poly"   -- c0 + c1 t + c2 t^2 + c3 t^3   (params = (c0, c1, c2, c3))
    """

    kind: str
    params: tuple = ()

    def __call__(self, theta):
        # Constant coefficients return scalars so hot loops broadcast for free.
        if self.kind == "const":
            return 1.0
        if self.kind == "pow":
            (alpha,) = self.params
            return np.asarray(theta, dtype=float) ** alpha
        c0, c1, c2, c3 = self.params
        t = np.asarray(theta, dtype=float)
        return c0 + t * (c1 + t * (c2 + t * c3))

    def deriv(self, theta, order: int):
        if order == 0:
            return self(theta)
        if self.kind == "const":
            return 0.0
        t = np.asarray(theta, dtype=float)
        if self.kind == "pow":
            (alpha,) = self.params
            coef = 1.0
            for j in range(order):
                coef *= alpha - j
            return coef * t ** (alpha - order)
        c0, c1, c2, c3 = self.params
        if order == 1:
            return c1 + t * (2.0 * c2 + t * (3.0 * c3))
        if order == 2:
            return 2.0 * c2 + 6.0 * c3 * t
        if order == 3:
            return np.full_like(t, 6.0 * c3)
        return np.zeros_like(t)

    # -- serialization (config file grammar) --------------------------------

    def descriptor(self) -> str:
        if self.kind == "const":
            return "const"
        if self.kind == "pow":
            return f"pow:alpha={self.params[0]:.17g}"
        return "poly:" + ",".join(f"{c:.17g}" for c in self.params)

    @classmethod
    def parse(cls, text: str) -> "CoeffFn":
        s = text.strip()
        if s == "const":
            return cls("const")
        if s.startswith("pow:"):
            body = s[len("pow:"):]
            if not body.startswith("alpha="):
                raise ValueError(f"bad power-law descriptor {text!r}")
            return cls("pow", (float(body[len("alpha="):]),))
        if s.startswith("poly:"):
            coeffs = tuple(float(c) for c in s[len("poly:"):].split(","))
            if len(coeffs) != 4:
                raise ValueError(f"poly descriptor needs 4 coefficients, got {len(coeffs)}")
            return cls("poly", coeffs)
        raise ValueError(f"unknown coefficient descriptor {text!r}")

    def positive_on_band(self, lo: float = 0.5, hi: float = 1.5) -> bool:
        t = np.linspace(lo, hi, 201)
        return bool(np.all(self(t) > 0.0))


CONST_ONE = CoeffFn("const")


@dataclass(frozen=True)
class PhysParams:
    """Gas constant, heat capacity, viscosity, relaxation time, coefficients.

    Both relaxation times are the same tau; the heat-flux one carries the
    extra smooth factor g(theta).
    """

    R: float = 1.0
    Cv: float = 1.5
    mu: float = 1.0
    tau: float = 1e-2
    kappa: CoeffFn = CONST_ONE
    g: CoeffFn = CONST_ONE
    normalized: bool = True

    def __post_init__(self):
        for name in ("R", "Cv", "mu", "tau"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("kappa", "g"):
            if not getattr(self, name).positive_on_band():
                raise ValueError(f"{name} must be positive on the admissible band")
        if self.normalized:
            for name in ("kappa", "g"):
                val = float(getattr(self, name)(1.0))
                if abs(val - 1.0) > 1e-12:
                    raise ValueError(f"normalized parameters require {name}(1) = 1, got {val}")

    def with_tau(self, tau: float) -> "PhysParams":
        return PhysParams(self.R, self.Cv, self.mu, tau, self.kappa, self.g, self.normalized)


@dataclass(frozen=True)
class ThermoPoint:
    """One thermodynamic sample: specific volume, temperature, heat flux, stress."""

    v: float
    theta: float
    q: float = 0.0
    S: float = 0.0

    def admissible(self, pp: PhysParams) -> bool:
        if self.v <= 0.0 or self.theta <= 0.0:
            return False
        return float(e_theta(self.theta, self.q, pp)) > 0.0


# ---------------------------------------------------------------------------
# scalar/array constitutive evaluations


def pressure(v, theta, pp: PhysParams):
    """Ideal-gas pressure in Lagrangian variables, R*theta/v."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0.0):
        raise AdmissibilityError("v > 0", "pressure needs positive specific volume")
    return pp.R * np.asarray(theta, dtype=float) / v


def h_derivs(theta, pp: PhysParams):
    """h = g/kappa and its first three derivatives (tau-free part of Z)."""
    k0 = pp.kappa(theta)
    if np.any(k0 <= 0.0):
        raise AdmissibilityError("kappa > 0")
    g0 = pp.g(theta)
    if np.any(g0 <= 0.0):
        raise AdmissibilityError("g > 0")
    k1 = pp.kappa.deriv(theta, 1)
    k2 = pp.kappa.deriv(theta, 2)
    k3 = pp.kappa.deriv(theta, 3)
    g1 = pp.g.deriv(theta, 1)
    g2 = pp.g.deriv(theta, 2)
    g3 = pp.g.deriv(theta, 3)

    h0 = g0 / k0
    h1 = (g1 - h0 * k1) / k0
    h2 = (g2 - 2.0 * h1 * k1 - h0 * k2) / k0
    h3 = (g3 - 3.0 * h2 * k1 - 3.0 * h1 * k2 - h0 * k3) / k0
    return h0, h1, h2, h3


def z_of_theta(theta, pp: PhysParams):
    """Z = tau*g/kappa with first and second derivatives."""
    h0, h1, h2, _ = h_derivs(theta, pp)
    return pp.tau * h0, pp.tau * h1, pp.tau * h2


def a_of_theta(theta, pp: PhysParams):
    """Energy-weight a = Z/theta - Z'/2 with first and second derivatives."""
    t = np.asarray(theta, dtype=float)
    h0, h1, h2, h3 = h_derivs(theta, pp)
    a0 = pp.tau * (h0 / t - 0.5 * h1)
    a1 = pp.tau * (h1 / t - h0 / t**2 - 0.5 * h2)
    a2 = pp.tau * (h2 / t - 2.0 * h1 / t**2 + 2.0 * h0 / t**3 - 0.5 * h3)
    return a0, a1, a2


def internal_energy(theta, q, pp: PhysParams):
    """e = Cv*theta + a(theta) q^2."""
    a0, _, _ = a_of_theta(theta, pp)
    return pp.Cv * np.asarray(theta, dtype=float) + a0 * np.asarray(q, dtype=float) ** 2


def e_theta(theta, q, pp: PhysParams):
    """d e / d theta = Cv + a'(theta) q^2; must stay positive (hyperbolicity)."""
    _, a1, _ = a_of_theta(theta, pp)
    return pp.Cv + a1 * np.asarray(q, dtype=float) ** 2


def e_second_derivs(theta, q, pp: PhysParams):
    """(e_theta_theta, e_theta_q) = (a'' q^2, 2 a' q)."""
    q = np.asarray(q, dtype=float)
    _, a1, a2 = a_of_theta(theta, pp)
    return a2 * q * q, 2.0 * a1 * q


def total_energy_density(u, theta, q, S, pp: PhysParams):
    """Kinetic + relaxed stress potential + internal energy."""
    u = np.asarray(u, dtype=float)
    S = np.asarray(S, dtype=float)
    return 0.5 * u * u + (pp.tau / (2.0 * pp.mu)) * S * S + internal_energy(theta, q, pp)


def check_thermo_relation(pt: ThermoPoint, pp: PhysParams) -> float:
    """Residual |rho^2 e_rho - (p - theta p_theta)|.

    The internal energy has no volume dependence and p = R*rho*theta, so both
    sides vanish identically; the evaluation keeps the structural identity
    executable and guards future equation-of-state extensions.
    """
    if pt.v <= 0.0 or pt.theta <= 0.0:
        raise AdmissibilityError("v > 0" if pt.v <= 0.0 else "theta > 0")
    rho = 1.0 / pt.v
    lhs = rho * rho * 0.0  # e_rho == 0 for e(theta, q)
    r_rho = pp.R * rho  # p_theta of R*rho*theta
    rhs = r_rho * pt.theta - pt.theta * r_rho
    return abs(lhs - rhs)


def assert_admissible(v, theta, q, pp: PhysParams) -> None:
    """Raise AdmissibilityError on the first failed runtime gate."""
    if np.any(np.asarray(v) <= 0.0):
        raise AdmissibilityError("v > 0")
    if np.any(np.asarray(theta) <= 0.0):
        raise AdmissibilityError("theta > 0")
    if np.any(e_theta(theta, q, pp) <= 0.0):
        raise AdmissibilityError("e_theta > 0")
