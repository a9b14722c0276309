"""First-order symmetric form, characteristic speeds, and boundary algebra.

The five unknowns are U = (v, u, theta, q, S).  In symmetrized form

    A0(U) U_t + A1(U) U_x + B(U) U = F(U),

with A0 diagonal positive, A1 symmetric, and B diagonal nonnegative.  The
epsilon-regularized system puts the extra advection eps*b(x)*S_x into the
(S, S) entry of A1 through the weight b(x) = 2x - 1, which makes the boundary
non-characteristic for any eps > 0 while the original system (eps = 0) has a
uniformly characteristic boundary, det((A0)^-1 A1) = 0.

The boundary condition selects u = q = 0; its matrix M keeps kernel
span{e_v, e_theta, e_S}.  ``check_maximal_nonnegativity`` verifies that the
normal flux form is nonnegative on ker M and strictly negative somewhere on
each strictly larger invariant subspace.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .constitutive import PhysParams, a_of_theta, e_theta, z_of_theta
from .errors import AdmissibilityError

V, U, TH, Q, S = range(5)


def bweight(x):
    """Regularization profile b(x) = 2x - 1 (negative at x=0, positive at x=1)."""
    return 2.0 * np.asarray(x, dtype=float) - 1.0


@dataclass(frozen=True)
class SystemMatrices:
    """Symmetrized matrices at one state point; A0, B stored as full 5x5."""

    A0: np.ndarray
    A1: np.ndarray
    B: np.ndarray
    F: np.ndarray
    epsilon: float
    x: float


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary matrix selecting the u and q rows, with outward normal."""

    M: np.ndarray
    side: str  # "left" (x=0) or "right" (x=1)

    @property
    def nu(self) -> float:
        return -1.0 if self.side == "left" else 1.0

    @property
    def x(self) -> float:
        return 0.0 if self.side == "left" else 1.0


def boundary_spec(side: str) -> BoundarySpec:
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    M = np.zeros((5, 5))
    M[U, U] = 1.0
    M[Q, Q] = 1.0
    return BoundarySpec(M=M, side=side)


def assemble(Uvec, x: float, pp: PhysParams, eps: float = 0.0) -> SystemMatrices:
    """Evaluate the symmetrized matrices at one state point."""
    v, u, th, q, s = (float(c) for c in Uvec)
    if v <= 0.0:
        raise AdmissibilityError("v > 0")
    if th <= 0.0:
        raise AdmissibilityError("theta > 0")
    eth = float(e_theta(th, q, pp))
    if eth <= 0.0:
        raise AdmissibilityError("e_theta > 0")

    z0, _, _ = z_of_theta(th, pp)
    z0 = float(z0)
    a0, _, _ = a_of_theta(th, pp)
    a0 = float(a0)
    kap = float(pp.kappa(th))
    gv = float(pp.g(th))
    R, mu, tau = pp.R, pp.mu, pp.tau
    b = float(bweight(x))

    A0 = np.diag([R * th / v**2, 1.0, eth / th, z0 / th, tau / mu])

    # Upper triangle, then mirror: symmetry holds exactly by construction.
    A1 = np.zeros((5, 5))
    A1[V, U] = -R * th / v**2
    A1[U, TH] = R / v
    A1[U, S] = -1.0
    A1[TH, Q] = 1.0 / th
    A1[TH, TH] = -2.0 * a0 * q / (th * z0)
    A1[S, S] = (tau * eps / mu) * b
    A1 = A1 + np.triu(A1, 1).T

    B = np.diag([0.0, 0.0, 0.0, v / (th * kap), v / mu])

    F = np.zeros(5)
    F[TH] = (v / th) * (2.0 * a0 * q**2 / (tau * gv) + s**2 / mu)

    return SystemMatrices(A0=A0, A1=A1, B=B, F=F, epsilon=eps, x=x)


def characteristic_speeds(mats: SystemMatrices) -> np.ndarray:
    """Real eigenvalues of (A0)^-1 A1, sorted ascending.

    Computed through the symmetric generalized problem A1 w = lambda A0 w via
    the diagonal congruence A0^{-1/2} A1 A0^{-1/2}.
    """
    d = np.diag(mats.A0)
    if np.any(d <= 0.0):
        raise AdmissibilityError("A0 > 0")
    inv_sqrt = 1.0 / np.sqrt(d)
    sym = mats.A1 * np.outer(inv_sqrt, inv_sqrt)
    return np.sort(np.linalg.eigvalsh(sym))


def boundary_det(Uvec, x: float, pp: PhysParams, eps: float = 0.0) -> float:
    """det((A0)^-1 A1) at a state point."""
    mats = assemble(Uvec, x, pp, eps)
    return float(np.linalg.det(np.linalg.solve(mats.A0, mats.A1)))


def boundary_det_closed_form(Uvec, x: float, pp: PhysParams, eps: float = 0.0) -> float:
    """Closed form eps*R*b(x)*theta / (v^2 Z(theta) e_theta)."""
    v, _, th, q, _ = (float(c) for c in Uvec)
    z0, _, _ = z_of_theta(th, pp)
    eth = float(e_theta(th, q, pp))
    return eps * pp.R * float(bweight(x)) * th / (v**2 * float(z0) * eth)


def kernel_form_closed_form(Uvec, side: str, pp: PhysParams, eps: float, xi3: float) -> float:
    """(tau*eps/mu) * xi3^2: value of the normal flux form on ker M at q = 0.

    b(x)*nu = +1 at both boundary points, so the expression is side-free.
    """
    del Uvec, side
    return (pp.tau * eps / pp.mu) * xi3 * xi3


_DESIGN_26 = None


def kernel_design_26() -> np.ndarray:
    """Deterministic 26-point unit-sphere design in ker M coordinates.

    All nonzero integer triples in {-1,0,1}^3, normalized, lexicographic order.
    """
    global _DESIGN_26
    if _DESIGN_26 is None:
        pts = [p for p in product((-1, 0, 1), repeat=3) if p != (0, 0, 0)]
        arr = np.array(pts, dtype=float)
        arr /= np.linalg.norm(arr, axis=1)[:, None]
        _DESIGN_26 = arr
    return _DESIGN_26


# Maximality witnesses for the three proper invariant enlargements of ker M:
# spans adding e_u, e_q, and e_u + e_q respectively.
PSI_1 = np.array([1.0, 1.0, 0.0, 0.0, 0.0])
PSI_2 = np.array([0.0, 0.0, 1.0, -1.0, 0.0])
PSI_3 = np.array([1.0, 1.0, 0.0, 1.0, 0.0])


@dataclass(frozen=True)
class MaxNonnegReport:
    side: str
    det: float
    kernel_min: float
    psi1: float
    psi2: float
    psi3: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "det": self.det,
            "kernel_min": self.kernel_min,
            "psi1": self.psi1,
            "psi2": self.psi2,
            "psi3": self.psi3,
            "verdict": "pass" if self.passed else "fail",
        }


def check_maximal_nonnegativity(Uvec, side: str, pp: PhysParams, eps: float) -> MaxNonnegReport:
    """Verify the boundary condition is maximally nonnegative at one boundary state.

    Requires q = 0 at the boundary (the heat-flux boundary condition; the
    psi_2 evaluation relies on it).  The kernel form xi^T (A1 nu) xi is
    sampled on the fixed 26-point design and must be nonnegative.  For the
    enlarged subspaces, a subspace fails to be nonnegative iff it contains a
    vector with a strictly negative form; at the left boundary (nu = -1) the
    witnesses are the same vectors with the sign of their u- and q-components
    flipped, which lie in the same subspaces and take the same form values as
    on the right.  psi2 is reported literally (its sign flips with nu and is
    only asserted negative at x = 1).
    """
    v, u, th, q, s = (float(c) for c in Uvec)
    if q != 0.0:
        raise ValueError("boundary check requires q = 0 at the boundary")
    spec = boundary_spec(side)
    mats = assemble(Uvec, spec.x, pp, eps)
    a1nu = mats.A1 * spec.nu

    basis = np.zeros((3, 5))
    basis[0, V] = 1.0
    basis[1, TH] = 1.0
    basis[2, S] = 1.0
    design = kernel_design_26() @ basis
    kernel_vals = np.einsum("ij,jk,ik->i", design, a1nu, design)
    kernel_min = float(kernel_vals.min())

    flip = np.ones(5)
    if spec.nu < 0.0:
        flip[U] = -1.0
        flip[Q] = -1.0

    def form(vec):
        return float(vec @ a1nu @ vec)

    psi1 = form(PSI_1 * flip)
    psi2 = form(PSI_2)  # literal, per-side sign
    psi3 = form(PSI_3 * flip)

    passed = kernel_min >= 0.0 and psi1 < 0.0 and psi3 < 0.0
    if side == "right":
        passed = passed and psi2 < 0.0

    det = float(np.linalg.det(np.linalg.solve(mats.A0, mats.A1)))
    return MaxNonnegReport(
        side=side, det=det, kernel_min=kernel_min, psi1=psi1, psi2=psi2, psi3=psi3, passed=passed
    )
