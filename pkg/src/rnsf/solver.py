"""Time integration of the relaxed system and its eps-regularized variant.

Unknowns (v, u, theta, q, S) live on a collocated grid over [0, 1] with
u = q = 0 pinned at both boundary nodes.  The semi-discrete equations:

    v_t = u_x
    u_t + p_x = S_x
    e_theta theta_t - (2a/Z) q theta_x + (R theta / v) u_x + q_x
        = (2a/tau(theta)) q^2 v + S^2 v / mu
    tau(theta) q_t + v q + kappa(theta) theta_x = 0
    tau (S_t + eps b(x) S_x) + v S = mu u_x

The stepper is a two-stage, second-order IMEX scheme: transport and flux
terms are explicit (strong-stability-preserving pair), while the stiff
relaxation algebra of the q and S equations is solved implicitly per node,
so the admissible step size never scales with tau.  The q/S update keeps the
full right-hand sides -(v q + kappa theta_x) and (mu u_x - v S) inside the
implicit solve: dropping the gradient parts would park q and S at zero
instead of at their local equilibria as tau -> 0.

Step-size policy: the explicit part must respect both the tau-free acoustic
speed sqrt(R theta (1 + R/e_theta))/v and the diffusive bound
~ dx^2 * min(e_theta v / kappa, v / mu) that the relaxed fluxes inherit from
their parabolic limit.  The stiff wave speeds ~ 1/sqrt(tau) of the full
spectrum do NOT restrict the step: those waves are damped inside the
implicit solve (von Neumann analysis of the q-theta and u-S blocks gives a
tau-uniform stability bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .constitutive import PhysParams, h_derivs
from .errors import AdmissibilityError, NewtonError, SolverAbort
from .grid import Grid, d1, d1_flux, d1_neumann
from .structure import bweight

IV, IU, ITH, IQ, IS = range(5)
FIELD_NAMES = ("v", "u", "theta", "q", "S")

_GAMMA = 1.0 - math.sqrt(0.5)

# Fraction of the theoretical diffusive stability bound dx^2 * e_theta v / kappa
# (and dx^2 v / mu) used by the step controller; calibrated empirically, see
# tests for the stability scan at the acceptance configurations.
DIFFUSIVE_SAFETY = 0.5

ForcingFn = Callable[[float], np.ndarray]  # t -> (5, M) source arrays


@dataclass
class State:
    """Five fields over the grid nodes at one time level."""

    t: float
    v: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    q: np.ndarray
    S: np.ndarray

    @classmethod
    def from_array(cls, t: float, arr: np.ndarray) -> "State":
        return cls(t, arr[IV].copy(), arr[IU].copy(), arr[ITH].copy(),
                   arr[IQ].copy(), arr[IS].copy())

    def as_array(self) -> np.ndarray:
        return np.stack([self.v, self.u, self.theta, self.q, self.S])

    def copy(self) -> "State":
        return State(self.t, self.v.copy(), self.u.copy(), self.theta.copy(),
                     self.q.copy(), self.S.copy())

    @property
    def m(self) -> int:
        return self.v.shape[0]


@dataclass(frozen=True)
class SchemeConfig:
    """Step-size policy, regularization, and run horizon."""

    cfl: float = 0.8
    dt: Optional[float] = None  # fixed step when set, CFL-driven otherwise
    eps: float = 0.0
    imex: bool = True
    t_end: float = 1.0
    cadence: float = 0.1
    max_halvings: int = 4

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"CFL must lie in (0, 1], got {self.cfl}")
        if self.t_end < 0.0:
            raise ValueError("t_end must be nonnegative")
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")


# ---------------------------------------------------------------------------
# pointwise thermodynamic helper used by every tendency evaluation


def _thermo(th, q, pp: PhysParams):
    """(e_th, 2a/Z, 2a/(tau g), a/tau, kappa, g) with admissibility gates.

    The three coefficient ratios are tau-free combinations of h = g/kappa:
        a/Z = 1/theta - h'/(2h),   a/(tau g) = (h/theta - h'/2)/g,
        a'/tau = h'/theta - h/theta^2 - h''/2.
    """
    if np.any(th <= 0.0):
        raise AdmissibilityError("theta > 0")
    h0, h1, h2, _ = h_derivs(th, pp)
    a_over_tau = h0 / th - 0.5 * h1
    l_theta = h1 / th - h0 / th**2 - 0.5 * h2
    e_th = pp.Cv + pp.tau * l_theta * q * q
    if np.any(e_th <= 0.0):
        raise AdmissibilityError("e_theta > 0")
    two_a_over_z = 2.0 * a_over_tau / h0
    gv = pp.g(th)
    two_a_over_tg = 2.0 * a_over_tau / gv
    kap = pp.kappa(th)
    return e_th, two_a_over_z, two_a_over_tg, a_over_tau, kap, gv


def _pde_first(arrs: np.ndarray, pp: PhysParams, eps: float, grid: Grid,
               forcing_vals: Optional[np.ndarray] = None):
    """Raw time derivatives of all five fields (no boundary pinning).

    Returns (T, aux) where T is the (5, M) tendency stack and aux carries the
    reusable spatial derivatives and coefficients.
    """
    dx = grid.dx
    v, u, th, q, s = arrs
    if np.any(v <= 0.0):
        raise AdmissibilityError("v > 0")
    e_th, two_a_over_z, two_a_over_tg, _, kap, gv = _thermo(th, q, pp)

    p = pp.R * th / v
    der = d1(np.stack([u, q, s, p]), dx)
    ux, qx, sx, px = der
    thx = d1(th, dx)
    thx_n = thx.copy()
    thx_n[0] = thx_n[-1] = 0.0
    b = bweight(grid.x)

    tg = pp.tau * gv
    T = np.empty_like(arrs)
    T[IV] = d1_flux(u, dx)
    T[IU] = sx - px
    T[ITH] = (two_a_over_z * q * thx - (pp.R * th / v) * ux - qx
              + (two_a_over_tg * q * q + s * s / pp.mu) * v)
    T[IQ] = -(v * q + kap * thx_n) / tg
    T[IS] = (pp.mu * ux - v * s) / pp.tau - eps * b * sx
    if forcing_vals is not None:
        T[IV] += forcing_vals[IV]
        T[IU] += forcing_vals[IU]
        T[ITH] += forcing_vals[ITH]
        T[IQ] += forcing_vals[IQ] / tg
        T[IS] += forcing_vals[IS] / pp.tau
    T[ITH] /= e_th

    aux = {
        "ux": ux, "qx": qx, "sx": sx, "px": px, "thx": thx, "thx_n": thx_n,
        "p": p, "e_th": e_th, "kap": kap, "g": gv, "b": b,
    }
    return T, aux


def rhs(state: State, pp: PhysParams, eps: float = 0.0,
        forcing_vals: Optional[np.ndarray] = None) -> np.ndarray:
    """Tendency stack with the boundary rows of u and q pinned to zero."""
    arrs = state.as_array()
    T, _ = _pde_first(arrs, pp, eps, Grid.make(state.m - 2), forcing_vals)
    T[IU, 0] = T[IU, -1] = 0.0
    T[IQ, 0] = T[IQ, -1] = 0.0
    return T


def time_derivatives(arrs: np.ndarray, pp: PhysParams, grid: Grid,
                     eps: float = 0.0, order: int = 1,
                     forcing_vals: Optional[np.ndarray] = None):
    """First (and optionally second) time derivatives through the equations.

    The second derivatives differentiate each equation once in time and
    substitute the first derivatives; x-derivatives of computed fields use
    the same discrete operators as the solver.  Works at any time level, not
    just t = 0.  Returns (first, second) stacks; second is None for order 1.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    first, aux = _pde_first(arrs, pp, eps, grid, forcing_vals)
    if order == 1:
        return first, None
    if forcing_vals is not None:
        raise ValueError("second time derivatives support unforced states only")

    dx = grid.dx
    v, u, th, q, s = arrs
    vt, ut, tht, qt, st = first
    e_th = aux["e_th"]
    kap, gv, b = aux["kap"], aux["g"], aux["b"]
    ux, qx, sx, thx, thx_n = aux["ux"], aux["qx"], aux["sx"], aux["thx"], aux["thx_n"]

    h0, h1, h2, h3 = h_derivs(th, pp)
    tau = pp.tau
    a_over_tau = h0 / th - 0.5 * h1
    l_theta = h1 / th - h0 / th**2 - 0.5 * h2          # a'/tau
    a2_over_tau = h2 / th - 2.0 * h1 / th**2 + 2.0 * h0 / th**3 - 0.5 * h3
    a0 = tau * a_over_tau
    a1 = tau * l_theta
    a2 = tau * a2_over_tau
    two_a_over_z = 2.0 * a_over_tau / h0
    # d/dtheta of (a/Z) and of (a/(tau g))
    d_a_over_z = -1.0 / th**2 - (h2 * h0 - h1 * h1) / (2.0 * h0 * h0)
    g1 = pp.g.deriv(th, 1)
    kap1 = pp.kappa.deriv(th, 1)
    d_a_over_tg = (l_theta * gv - a_over_tau * g1) / (gv * gv)

    der_t = d1(np.stack([ut, qt, st]), dx)
    uxt, qxt, sxt = der_t
    thxt = d1(tht, dx)
    thxt_n = thxt.copy()
    thxt_n[0] = thxt_n[-1] = 0.0

    second = np.empty_like(arrs)
    second[IV] = d1_flux(ut, dx)
    pt = pp.R * (tht / v - th * vt / (v * v))
    second[IU] = d1(st - pt, dx)

    tg = tau * gv
    second[IQ] = (-(vt * q + v * qt + kap1 * tht * thx_n + kap * thxt_n)
                  - tau * g1 * tht * qt) / tg
    second[IS] = (pp.mu * uxt - vt * s - v * st) / tau - eps * b * sxt

    e_th_t = a2 * q * q * tht + 2.0 * a1 * q * qt
    rhs_t = (2.0 * d_a_over_z * tht * q * thx + two_a_over_z * (qt * thx + q * thxt)
             - pp.R * (tht / v - th * vt / (v * v)) * ux - (pp.R * th / v) * uxt
             - qxt
             + 2.0 * d_a_over_tg * tht * q * q * v
             + (2.0 * a_over_tau / gv) * (2.0 * q * qt * v + q * q * vt)
             + (2.0 * s * st * v + s * s * vt) / pp.mu)
    second[ITH] = (rhs_t - e_th_t * tht) / e_th
    return first, second


# ---------------------------------------------------------------------------
# IMEX stepping


def _stage(arrs: np.ndarray, c: float, pp: PhysParams, eps: float, grid: Grid,
           bx: Optional[np.ndarray], gq, gs, gexp):
    """One IMEX stage on the (5, M) stack.

    Implicitly relaxes (q, S) over a substep of length c with coefficients
    frozen at the stage fields, then evaluates the explicit tendencies at the
    relaxed stage state.  The relaxation algebra is linear per node; the
    Newton sweep (tol 1e-12, <= 10 iterations) certifies convergence and
    guards future nonlinear couplings.

    Returns (liq, lis, le): the implicit q/S tendencies and the explicit
    tendency stack.
    """
    dx = grid.dx
    v = arrs[IV]
    u = arrs[IU]
    th = arrs[ITH]
    q0 = arrs[IQ]
    s0 = arrs[IS]
    if v.min() <= 0.0:
        raise AdmissibilityError("v > 0")
    if th.min() <= 0.0:
        raise AdmissibilityError("theta > 0")
    R, mu, tau, Cv = pp.R, pp.mu, pp.tau, pp.Cv

    inv_th = 1.0 / th
    if pp.kappa.kind == "const" and pp.g.kind == "const":
        kap = gv = 1.0
        two_a_over_z = 2.0 * inv_th
        two_a_over_tg = two_a_over_z
        l_theta = -inv_th * inv_th
    else:
        h0, h1, h2, _ = h_derivs(th, pp)
        kap = pp.kappa(th)
        gv = pp.g(th)
        a_over_tau = h0 * inv_th - 0.5 * h1
        l_theta = h1 * inv_th - h0 * inv_th * inv_th - 0.5 * h2
        two_a_over_z = 2.0 * a_over_tau / h0
        two_a_over_tg = 2.0 * a_over_tau / gv

    p = R * th / v
    base = np.empty((3, v.shape[0]))
    base[0] = u
    base[1] = p
    base[2] = th
    dbase = d1(base, dx)
    ux, px, thx = dbase
    thx_n = thx.copy()
    thx_n[0] = thx_n[-1] = 0.0

    # implicit node-local relaxation
    rq = c / (tau * gv)
    bq = -(kap * thx_n)
    if gq is not None:
        bq = bq + gq
    den_q = 1.0 + rq * v
    qh = (q0 + rq * bq) / den_q
    rs = c / tau
    bs = mu * ux
    if gs is not None:
        bs = bs + gs
    den_s = 1.0 + rs * v
    sh = (s0 + rs * bs) / den_s

    scale = 1.0 + max(float(np.max(np.abs(qh))), float(np.max(np.abs(sh))))
    for _ in range(10):
        fq = qh - (q0 + rq * (bq - v * qh))
        fs = sh - (s0 + rs * (bs - v * sh))
        err = max(float(np.max(np.abs(fq))), float(np.max(np.abs(fs))))
        if err <= 1e-12 * scale:
            break
        qh -= fq / den_q
        sh -= fs / den_s
    else:
        raise NewtonError(f"relaxation solve stalled at residual {err:.3e}")
    qh[0] = qh[-1] = 0.0

    liq = (qh - q0) / c
    lis = (sh - s0) / c

    qq = qh * qh
    e_th = Cv + (tau * l_theta) * qq
    if e_th.min() <= 0.0:
        raise AdmissibilityError("e_theta > 0")

    dqs = d1(np.stack([qh, sh]), dx)
    qx, sx = dqs

    le = np.empty_like(arrs)
    le[IV] = d1_flux(u, dx)
    le[IU] = sx - px
    th_rhs = (two_a_over_z * qh) * thx - p * ux - qx + (two_a_over_tg * qq + sh * sh / mu) * v
    if gexp is not None:
        le[IV] += gexp[IV]
        le[IU] += gexp[IU]
        th_rhs = th_rhs + gexp[ITH]
    le[ITH] = th_rhs / e_th
    le[IQ] = 0.0
    if eps != 0.0:
        le[IS] = (-eps * bx) * sx
    else:
        le[IS] = 0.0
    le[IU, 0] = le[IU, -1] = 0.0
    return liq, lis, le


def _use_fast_path(pp: PhysParams, cfg: SchemeConfig, forcing) -> bool:
    return (_kernels.HAVE_NUMBA and cfg.imex and forcing is None
            and pp.kappa.kind == "const" and pp.g.kind == "const")


def _raise_gate(code: int) -> None:
    name = _kernels.GATE_NAMES.get(code, str(code))
    if code == 4:
        raise NewtonError("relaxation solve stalled")
    raise AdmissibilityError(name)


def step_increment(arrs: np.ndarray, t: float, dt: float, pp: PhysParams,
                   cfg: SchemeConfig, grid: Grid,
                   forcing: Optional[ForcingFn] = None,
                   bx: Optional[np.ndarray] = None) -> np.ndarray:
    """One IMEX (or fully explicit) step; returns the state increment."""
    eps = cfg.eps
    if bx is None:
        bx = bweight(grid.x)
    if _use_fast_path(pp, cfg, forcing):
        dU, code = _kernels.step_const(arrs, dt, pp.R, pp.Cv, pp.mu, pp.tau,
                                       eps, grid.dx, bx)
        if code != 0:
            _raise_gate(code)
        return dU
    if not cfg.imex:
        forc = forcing(t) if forcing is not None else None
        t1, _ = _pde_first(arrs, pp, eps, grid, forc)
        t1[IU, 0] = t1[IU, -1] = 0.0
        t1[IQ, 0] = t1[IQ, -1] = 0.0
        mid = arrs + dt * t1
        forc2 = forcing(t + dt) if forcing is not None else None
        t2, _ = _pde_first(mid, pp, eps, grid, forc2)
        t2[IU, 0] = t2[IU, -1] = 0.0
        t2[IQ, 0] = t2[IQ, -1] = 0.0
        dU = 0.5 * dt * (t1 + t2)
        dU[IU, 0] = dU[IU, -1] = 0.0
        dU[IQ, 0] = dU[IQ, -1] = 0.0
        return dU

    gdt = _GAMMA * dt
    if forcing is not None:
        f_imp1 = forcing(t + _GAMMA * dt)
        f_imp2 = forcing(t + (1.0 - _GAMMA) * dt)
        f_exp1 = forcing(t)
        f_exp2 = forcing(t + dt)
        gq1, gs1 = f_imp1[IQ], f_imp1[IS]
        gq2, gs2 = f_imp2[IQ], f_imp2[IS]
    else:
        f_exp1 = f_exp2 = None
        gq1 = gs1 = gq2 = gs2 = None

    # stage 1: purely implicit relaxation, then explicit evaluation there
    li1q, li1s, le1 = _stage(arrs, gdt, pp, eps, grid, bx, gq1, gs1, f_exp1)

    # stage 2
    k = arrs + dt * le1
    w = (1.0 - 2.0 * _GAMMA) * dt
    k[IQ] += w * li1q
    k[IS] += w * li1s
    li2q, li2s, le2 = _stage(k, gdt, pp, eps, grid, bx, gq2, gs2, f_exp2)

    dU = 0.5 * dt * (le1 + le2)
    dU[IQ] += 0.5 * dt * (li1q + li2q)
    dU[IS] += 0.5 * dt * (li1s + li2s)
    dU[IU, 0] = dU[IU, -1] = 0.0
    dU[IQ, 0] = dU[IQ, -1] = 0.0
    return dU


def acoustic_speed(arrs: np.ndarray, pp: PhysParams):
    """Tau-free sound speed sqrt(R theta (1 + R/e_theta)) / v per node."""
    v, _, th, q, _ = arrs
    e_th, two_a_over_z, _, _, _, _ = _thermo(th, q, pp)
    return np.sqrt(pp.R * th * (1.0 + pp.R / e_th)) / v, e_th, two_a_over_z


def _gate_and_dt(arrs: np.ndarray, pp: PhysParams, cfg: SchemeConfig,
                 grid: Grid) -> tuple:
    """Admissibility gates plus the largest safe step (pre-CFL), one pass.

    The explicit part must resolve the tau-free acoustic speed and the
    diffusive bound dx^2 * min(e_theta v / kappa, v / mu) inherited from the
    parabolic relaxation limit; the stiff 1/sqrt(tau) wave speeds are damped
    inside the implicit solve and impose no restriction.
    """
    dx = grid.dx
    v, _, th, q, _ = arrs
    if v.min() <= 0.0:
        raise AdmissibilityError("v > 0")
    if th.min() <= 0.0:
        raise AdmissibilityError("theta > 0")
    inv_th = 1.0 / th
    if pp.kappa.kind == "const" and pp.g.kind == "const":
        kap = 1.0
        two_a_over_z = 2.0 * inv_th
        l_theta = -inv_th * inv_th
    else:
        h0, h1, h2, _ = h_derivs(th, pp)
        kap = pp.kappa(th)
        a_over_tau = h0 * inv_th - 0.5 * h1
        l_theta = h1 * inv_th - h0 * inv_th * inv_th - 0.5 * h2
        two_a_over_z = 2.0 * a_over_tau / h0
    e_th = pp.Cv + (pp.tau * l_theta) * q * q
    min_e_th = float(e_th.min())
    if min_e_th <= 0.0:
        raise AdmissibilityError("e_theta > 0")
    cmax = float(np.max(np.sqrt(pp.R * th * (1.0 + pp.R / e_th)) / v
                        + np.abs(two_a_over_z * q) / e_th)) + cfg.eps
    dt = min(dx / cmax,
             DIFFUSIVE_SAFETY * dx * dx * float(np.min(np.minimum(e_th * v / kap, v / pp.mu))))
    if not cfg.imex:
        gv = pp.g(th)
        dt = min(dt, 0.5 * float(np.min(pp.tau * gv / v)), 0.5 * float(np.min(pp.tau / v)))
    return dt, min_e_th


def stable_dt(arrs: np.ndarray, pp: PhysParams, cfg: SchemeConfig, grid: Grid) -> float:
    """Largest safe step before the CFL factor is applied."""
    return _gate_and_dt(arrs, pp, cfg, grid)[0]


@dataclass
class IntegrationResult:
    final: State
    snapshots: list = field(default_factory=list)          # list[State]
    probe_rows: list = field(default_factory=list)         # list[(t, outputs)]
    summary: dict = field(default_factory=dict)


def integrate(initial: State, pp: PhysParams, cfg: SchemeConfig,
              probes: Sequence[Callable[[State], object]] = (),
              forcing: Optional[ForcingFn] = None,
              record_snapshots: bool = True) -> IntegrationResult:
    """Advance to t_end, probing at the configured cadence.

    Deterministic: identical inputs produce bit-identical trajectories.  The
    field updates use compensated (Kahan) accumulation so conserved
    functionals drift only at round-off level over long runs.  Steps whose
    result violates an admissibility gate or whose relaxation solve fails
    are retried with half the step; after ``max_halvings`` consecutive
    failures the run aborts with the failing time.
    """
    grid = Grid.make(initial.m - 2)
    arrs = initial.as_array().astype(float)
    comp = np.zeros_like(arrs)
    t = float(initial.t)
    t_end = t + cfg.t_end

    accepted = rejected = 0
    dt_min = math.inf
    dt_max = 0.0
    soft_gate_steps = 0
    result = IntegrationResult(final=initial.copy())

    def emit(tval: float):
        st = State.from_array(tval, arrs)
        if record_snapshots:
            result.snapshots.append(st)
        if probes:
            result.probe_rows.append((tval, tuple(p(st) for p in probes)))

    emit(t)
    next_probe = t + cfg.cadence if cfg.cadence > 0 else math.inf
    bx = bweight(grid.x)
    fast = _use_fast_path(pp, cfg, forcing)

    def gate_and_dt(state_arrs):
        if fast:
            dt_raw, min_eth, code = _kernels.gate_and_dt_const(
                state_arrs, pp.R, pp.Cv, pp.mu, pp.tau, cfg.eps, grid.dx,
                DIFFUSIVE_SAFETY)
            if code != 0:
                _raise_gate(code)
            return dt_raw, min_eth
        return _gate_and_dt(state_arrs, pp, cfg, grid)

    tiny = 1e-12 * max(1.0, abs(t_end))
    dt_stable_next: Optional[float] = None
    while t_end - t > tiny:
        if cfg.dt is not None:
            base = cfg.dt
        else:
            if dt_stable_next is None:
                dt_stable_next = gate_and_dt(arrs)[0]
            base = cfg.cfl * dt_stable_next
        dt = min(base, t_end - t)
        halvings = 0
        while True:
            try:
                dU = step_increment(arrs, t, dt, pp, cfg, grid, forcing, bx)
                trial = arrs + dU
                # gates on the trial state; its stable dt feeds the next step
                dt_stable_next, min_e_th = gate_and_dt(trial)
                break
            except (AdmissibilityError, NewtonError) as exc:
                rejected += 1
                halvings += 1
                if halvings >= cfg.max_halvings:
                    raise SolverAbort(t, str(exc)) from exc
                dt *= 0.5
        # compensated commit, then exact boundary pinning
        y = dU - comp
        tsum = arrs + y
        comp = (tsum - arrs) - y
        arrs = tsum
        for row in (IU, IQ):
            arrs[row, 0] = arrs[row, -1] = 0.0
            comp[row, 0] = comp[row, -1] = 0.0
        t += dt
        accepted += 1
        dt_min = min(dt_min, dt)
        dt_max = max(dt_max, dt)
        if min_e_th < 0.5 * pp.Cv:
            soft_gate_steps += 1
        if t >= next_probe - tiny or t_end - t <= tiny:
            emit(t)
            while next_probe <= t + tiny:
                next_probe += cfg.cadence

    if accepted == 0 and not result.snapshots:
        emit(t)
    result.final = State.from_array(t, arrs)
    result.summary = {
        "steps_accepted": accepted,
        "steps_rejected": rejected,
        "dt_min": None if accepted == 0 else dt_min,
        "dt_max": None if accepted == 0 else dt_max,
        "t_final": t,
        "soft_gate_steps": soft_gate_steps,
        "aborted": False,
        "abort_reason": None,
    }
    return result


