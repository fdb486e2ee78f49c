"""Time steppers for the multi-field models.

Hyperbolic models (NSW, NSW with turbulent pressure, multi-layer NSW) use
a finite-volume Rusanov scheme with hydrostatic reconstruction in the
variables (zeta, Q = h v).  With q = eps*Q these are the usual shallow
water variables (h, q) with g = 1 and bottom beta*b, which is how the
well-balancing and entropy arguments carry over.  Every pressure term is
written through zeta differences so no 1/eps appears.

Dispersive models are discretised pseudo-spectrally (periodic grids, RK4);
SGN also runs on wall grids through the finite-difference operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    TOL_CONSTRAINT,
    Bathymetry,
    BoundaryUnsupported,
    CFLViolation,
    ConstraintDrift,
    DepthViolation,
    EnstrophyState,
    Grid1D,
    HydroState,
    IKState,
    IllPosedMode,
    MultiLayerState,
    NegativeEnstrophy,
    SimulationParams,
    ValidationError,
    depth,
)
from .dispersion import build_T_matrix, c2_ww
from .models_scalar import rk4
from .operators import (
    EVEN,
    ODD,
    assemble_peregrine_operator,
    assemble_sgn_operator,
    derivative,
    ik_constraint,
    rfft_wavenumbers,
    solve_helmholtz,
    solve_ik_block,
    spectral_derivative,
)

# ------------------------------------------------------------ boundaries


@dataclass(frozen=True)
class Periodic:
    pass


@dataclass(frozen=True)
class Wall:
    pass


@dataclass(frozen=True)
class Generating:
    """Prescribed surface elevation zeta = f(t) at the boundary."""

    f: Callable[[float], float] = field(default=lambda t: 0.0)


@dataclass(frozen=True)
class TransparentNSW:
    """Incoming Riemann invariant set to zero (outgoing waves leave freely)."""


N_GHOST = 2


def _scaled_invariants(zeta, v, h, h0):
    # r+- = R+-/eps with R+- = 2(sqrt(h) - sqrt(h0)) +- eps v
    s = 2 * zeta / (np.sqrt(h) + np.sqrt(h0))
    return s + v, s - v


def _state_from_s(s, v, h0, eps):
    # invert s = 2 zeta / (sqrt(h) + sqrt(h0)) with h = h0 + eps zeta
    zeta = s * np.sqrt(h0) + 0.25 * eps * s**2
    return zeta, v


def _side_ghost(bc, side, zeta, v, phi, b, params, t):
    """Ghost values (zeta, v, phi, b) on one side, ordered outward-to-inward."""
    ng = N_GHOST
    eps, beta = params.epsilon, params.beta
    if side == "left":
        zi, vi, pi, bi = zeta[:ng][::-1], v[:ng][::-1], phi[:ng][::-1], b[:ng][::-1]
        edge = 0
    else:
        zi, vi, pi, bi = zeta[-ng:][::-1], v[-ng:][::-1], phi[-ng:][::-1], b[-ng:][::-1]
        edge = -1
    if isinstance(bc, Wall):
        return zi, -vi, pi, bi
    be = b[edge]
    h0 = 1 - beta * be
    he = depth(zeta[edge], be, params)
    rp, rm = _scaled_invariants(zeta[edge], v[edge], he, h0)
    if isinstance(bc, TransparentNSW):
        if side == "right":
            zg, vg = _state_from_s(0.5 * rp, 0.5 * rp, h0, eps)
        else:
            zg, vg = _state_from_s(0.5 * rm, -0.5 * rm, h0, eps)
    elif isinstance(bc, Generating):
        zg = float(bc.f(t))
        hg = depth(zg, be, params)
        sg = 2 * zg / (np.sqrt(hg) + np.sqrt(h0))
        vg = sg - rm if side == "left" else rp - sg
    else:
        raise BoundaryUnsupported(f"unknown boundary condition {bc!r}")
    ones = np.ones(ng)
    return zg * ones, vg * ones, phi[edge] * ones, be * ones


def boundary_apply(state, bathy: Bathymetry, params: SimulationParams, left=None, right=None,
                   t: float = 0.0, model: str = "nsw", phi=None):
    """Pad (zeta, v, phi, b) with ghost cells enforcing the boundary conditions.

    Generating and transparent conditions are only defined for hyperbolic
    (NSW-type) models; dispersive models get BoundaryUnsupported.
    """
    grid = bathy.grid
    zeta, v = state.zeta, state.vbar
    phi = np.zeros_like(zeta) if phi is None else phi
    b = bathy.b
    ng = N_GHOST
    if grid.periodic:
        def wrap(x):
            return np.concatenate([x[-ng:], x, x[:ng]])
        return wrap(zeta), wrap(v), wrap(phi), wrap(b)
    left = Wall() if left is None else left
    right = Wall() if right is None else right
    for bc in (left, right):
        if isinstance(bc, (Generating, TransparentNSW)) and model not in ("nsw", "nsw_turbulent", "multilayer_nsw"):
            raise BoundaryUnsupported(f"{type(bc).__name__} boundaries are not available for model {model}")
        if isinstance(bc, Periodic):
            raise BoundaryUnsupported("periodic boundaries need a periodic grid")
    zl, vl, pl, bl = _side_ghost(left, "left", zeta, v, phi, b, params, t)
    zr, vr, pr, br = _side_ghost(right, "right", zeta, v, phi, b, params, t)
    cat = np.concatenate
    return (cat([zl[::-1], zeta, zr]), cat([vl[::-1], v, vr]),
            cat([pl[::-1], phi, pr]), cat([bl[::-1], b, br]))


# ------------------------------------------------------ finite volumes


@dataclass(frozen=True)
class NSWScheme:
    """Options of the finite-volume scheme.

    order 1: forward Euler, piecewise constant states.
    order 2: minmod MUSCL reconstruction with SSP-RK2.
    """

    order: int = 1
    cfl: float = 0.5
    left: object = None
    right: object = None

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValidationError("order must be 1 or 2")
        if not 0 < self.cfl < 1:
            raise ValidationError("cfl must lie in (0, 1)")


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _face_values(x, order):
    """Left/right traces at the n+1 faces around the interior cells of a padded array."""
    ng = N_GHOST
    if order == 1:
        return x[ng - 1:-ng], x[ng:-ng + 1 or None]
    d = np.diff(x)
    slope = np.zeros_like(x)
    slope[1:-1] = _minmod(d[:-1], d[1:])
    plus = x + 0.5 * slope  # value at the right edge of each cell
    minus = x - 0.5 * slope  # value at the left edge of each cell
    return plus[ng - 1:-ng], minus[ng:-ng + 1 or None], plus, minus


@dataclass
class FaceData:
    zL: np.ndarray
    zR: np.ndarray
    vL: np.ndarray
    vR: np.ndarray
    hL: np.ndarray  # reconstructed depths with b* = max(bL, bR)
    hR: np.ndarray
    a: np.ndarray
    inner: np.ndarray  # second-order in-cell pressure/topography term (zero at order 1)


def _faces(zg, vg, bg, phig, params, order, kappa=0.0):
    eps, beta = params.epsilon, params.beta
    if order == 1:
        zL, zR = _face_values(zg, 1)
        bL, bR = _face_values(bg, 1)
        vL, vR = _face_values(vg, 1)
        pL, pR = _face_values(phig, 1)
        inner = 0.0
    else:
        zL, zR, zp, zm = _face_values(zg, 2)
        bL, bR, bp, bm = _face_values(bg, 2)
        vL, vR, _, _ = _face_values(vg, 2)
        pL, pR, _, _ = _face_values(phig, 2)
        ng = N_GHOST
        sl = slice(ng, -ng)
        hp = 1 + eps * zp[sl] - beta * bp[sl]
        hm = 1 + eps * zm[sl] - beta * bm[sl]
        if np.any(hp < params.h_min) or np.any(hm < params.h_min):
            raise DepthViolation("reconstructed depth below h_min")
        inner = 0.5 * (hp + hm) * (zp[sl] - zm[sl])
    bstar = np.maximum(bL, bR)
    hL = 1 + eps * zL - beta * bstar
    hR = 1 + eps * zR - beta * bstar
    if np.any(hL < params.h_min) or np.any(hR < params.h_min):
        raise DepthViolation("hydrostatic reconstruction produced a depth below h_min")
    cL = np.sqrt(hL + 3 * kappa * hL**2 * np.maximum(pL, 0))
    cR = np.sqrt(hR + 3 * kappa * hR**2 * np.maximum(pR, 0))
    a = np.maximum(eps * np.abs(vL) + cL, eps * np.abs(vR) + cR)
    return FaceData(zL, zR, vL, vR, hL, hR, a, inner), (pL, pR)


def _max_speed(state_z, state_v, b, params, phi=None, kappa=0.0):
    h = depth(state_z, b, params)
    c2 = h if phi is None else h + 3 * kappa * h**2 * phi
    return float(np.max(params.epsilon * np.abs(state_v) + np.sqrt(c2)))


def _check_cfl(speed, dt, dx, cfl):
    if dt * speed > cfl * dx * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:.3e} exceeds the CFL bound {cfl * dx / speed:.3e}")


def _fv_tendency(zeta, v, phi, bathy, params, scheme, t, kappa=0.0, turb_weight=0.0, model="nsw"):
    """Semi-discrete tendencies (dzeta, dQ, dw) with w = h*phi."""
    grid = bathy.grid
    zg, vg, pg, bg = boundary_apply(HydroState(zeta, v), bathy, params, scheme.left, scheme.right,
                                    t, model=model, phi=phi)
    fd, (pL, pR) = _faces(zg, vg, bg, pg, params, scheme.order, kappa)
    eps = params.epsilon
    QL, QR = fd.hL * fd.vL, fd.hR * fd.vR
    fmass = 0.5 * (QL + QR) - 0.5 * fd.a * (fd.zR - fd.zL)
    fmom = 0.5 * eps * (QL * fd.vL + QR * fd.vR) - 0.5 * fd.a * (QR - QL)
    if turb_weight:
        fmom = fmom + 0.5 * turb_weight * (fd.hL**3 * pL + fd.hR**3 * pR)
    face_p = 0.25 * (fd.hL + fd.hR) * (fd.zR - fd.zL)
    press = face_p[1:] + face_p[:-1] + fd.inner
    dx = grid.dx
    dz = -np.diff(fmass) / dx
    dQ = -(np.diff(fmom) + press) / dx
    fw = 0.5 * eps * (QL * pL + QR * pR) - 0.5 * fd.a * (fd.hR * pR - fd.hL * pL)
    dw = -np.diff(fw) / dx
    return dz, dQ, dw, fd, fmass


def _advance(y0, tend, dt, order):
    """Forward Euler (order 1) or SSP-RK2 (order 2) on a tuple of arrays."""
    k1 = tend(y0, 0.0)
    y1 = tuple(a + dt * b for a, b in zip(y0, k1))
    if order == 1:
        return y1
    k2 = tend(y1, dt)
    return tuple(0.5 * a + 0.5 * (b + dt * c) for a, b, c in zip(y0, y1, k2))


def nsw_stable_dt(state: HydroState, bathy: Bathymetry, params: SimulationParams, cfl: float = 0.5):
    return cfl * bathy.grid.dx / _max_speed(state.zeta, state.vbar, bathy.b, params)


def nsw_step(state: HydroState, bathy: Bathymetry, params: SimulationParams, dt: float,
             scheme: NSWScheme | None = None, t: float = 0.0) -> HydroState:
    """One finite-volume step of the nonlinear shallow water equations."""
    scheme = scheme or NSWScheme()
    b = bathy.b
    h = depth(state.zeta, b, params)
    _check_cfl(_max_speed(state.zeta, state.vbar, b, params), dt, bathy.grid.dx, scheme.cfl)

    def tend(y, tau):
        z, Q = y
        v = Q / depth(z, b, params)
        dz, dQ, _, _, _ = _fv_tendency(z, v, None, bathy, params, scheme, t + tau)
        return dz, dQ

    z, Q = _advance((state.zeta, h * state.vbar), tend, dt, scheme.order)
    return HydroState(z, Q / depth(z, b, params))


def nsw_face_data(state: HydroState, bathy: Bathymetry, params: SimulationParams,
                  scheme: NSWScheme | None = None, t: float = 0.0) -> FaceData:
    """Face states and Rusanov speeds used by nsw_step (for energy budgets)."""
    scheme = scheme or NSWScheme()
    zg, vg, pg, bg = boundary_apply(state, bathy, params, scheme.left, scheme.right, t)
    return _faces(zg, vg, bg, pg, params, scheme.order)[0]


def turbulent_weight(params: SimulationParams, alpha: float) -> float:
    """Coupling eps*mu**(2 alpha) of the turbulent pressure (eps*mu at alpha = 1/2)."""
    if not 0 < alpha <= 0.5:
        raise ValidationError("alpha must lie in (0, 1/2]")
    return params.epsilon * params.mu ** (2 * alpha)


def nsw_turbulent_step(state: EnstrophyState, bathy: Bathymetry, params: SimulationParams, alpha: float,
                       dt: float, scheme: NSWScheme | None = None, boussinesq: bool = False,
                       t: float = 0.0) -> EnstrophyState:
    """NSW (or Boussinesq) with the turbulent pressure of strength alpha."""
    if not bathy.flat:
        raise ValidationError("the turbulent NSW model is implemented for flat bottoms")
    weight = turbulent_weight(params, alpha)
    if boussinesq:
        return _boussinesq_turbulent_step(state, bathy, params, weight, dt)
    scheme = scheme or NSWScheme()
    b = bathy.b
    kappa = params.epsilon * weight
    h = depth(state.zeta, b, params)
    _check_cfl(_max_speed(state.zeta, state.vbar, b, params, state.phi, kappa), dt, bathy.grid.dx, scheme.cfl)

    def tend(y, tau):
        z, Q, w = y
        hh = depth(z, b, params)
        dz, dQ, dw, _, _ = _fv_tendency(z, Q / hh, w / hh, bathy, params, scheme, t + tau,
                                        kappa=kappa, turb_weight=weight, model="nsw_turbulent")
        return dz, dQ, dw

    z, Q, w = _advance((state.zeta, h * state.vbar, h * state.phi), tend, dt, scheme.order)
    hn = depth(z, b, params)
    return EnstrophyState(HydroState(z, Q / hn), _limit_phi(w / hn))


def multilayer_nsw_step(state: MultiLayerState, bathy: Bathymetry, params: SimulationParams, dt: float,
                        scheme: NSWScheme | None = None, t: float = 0.0) -> MultiLayerState:
    """Multi-layer NSW: a shared surface with one momentum equation per layer."""
    scheme = scheme or NSWScheme()
    b = bathy.b
    l = state.layer_fractions
    n_layers = l.size
    h = depth(state.zeta, b, params)
    speed = max(_max_speed(state.zeta, vj, b, params) for vj in state.layer_velocities)
    _check_cfl(speed, dt, bathy.grid.dx, scheme.cfl)
    eps, dx = params.epsilon, bathy.grid.dx

    def tend(y, tau):
        z, Qs = y
        hh = depth(z, b, params)
        faces = []
        for j in range(n_layers):
            zg, vg, pg, bg = boundary_apply(HydroState(z, Qs[j] / hh), bathy, params, scheme.left,
                                            scheme.right, t + tau, model="multilayer_nsw")
            faces.append(_faces(zg, vg, bg, pg, params, scheme.order)[0])
        a = np.max([fd.a for fd in faces], axis=0)
        fmass, fmom = [], []
        for fd in faces:
            QL, QR = fd.hL * fd.vL, fd.hR * fd.vR
            fmass.append(0.5 * (QL + QR) - 0.5 * a * (fd.zR - fd.zL))
            fmom.append(0.5 * eps * (QL * fd.vL + QR * fd.vR) - 0.5 * a * (QR - QL))
        fd = faces[0]
        face_p = 0.25 * (fd.hL + fd.hR) * (fd.zR - fd.zL)
        press = face_p[1:] + face_p[:-1] + fd.inner
        div = [np.diff(f) for f in fmass]
        div_tot = sum(lj * dj for lj, dj in zip(l, div))
        dz = -div_tot / dx
        dQ = np.array([
            -(np.diff(fmom[j]) + press) / dx + eps * (Qs[j] / hh) * (div[j] - div_tot) / dx
            for j in range(n_layers)
        ])
        return dz, dQ

    z, Qs = _advance((state.zeta, h * state.layer_velocities), tend, dt, scheme.order)
    return MultiLayerState(z, l, Qs / depth(z, b, params))


# ------------------------------------------------------ spectral systems


def _require_periodic(grid: Grid1D, what: str):
    if not grid.periodic:
        raise BoundaryUnsupported(f"{what} is discretised spectrally and needs a periodic grid")


def _check_abcd(a, b, c, d):
    if abs(a + b + c + d - 1 / 3) > 1e-12:
        raise ValidationError("abcd parameters must satisfy a+b+c+d = 1/3")
    if b < 0 or d < 0:
        raise IllPosedMode("abcd stepping needs b, d >= 0 (invertible Helmholtz factors)")


def abcd_rhs(zeta, v, coeffs, b, params: SimulationParams, grid: Grid1D):
    a, bb, c, d = coeffs
    mu, eps = params.mu, params.epsilon
    h = depth(zeta, b, params)
    D = spectral_derivative
    rz = -D(h * v, grid) - mu * a * D(v, grid, 3)
    rv = -D(zeta, grid) - eps * v * D(v, grid) - mu * c * D(zeta, grid, 3)
    return solve_helmholtz(rz, mu * bb, grid), solve_helmholtz(rv, mu * d, grid)


def abcd_step(state: HydroState, coeffs, bathy: Bathymetry, params: SimulationParams, dt: float) -> HydroState:
    """RK4 step of the abcd Boussinesq family, (a, b, c, d) = coeffs."""
    grid = bathy.grid
    _require_periodic(grid, "the abcd family")
    _check_abcd(*coeffs)
    n = grid.n_cells

    def f(y):
        return np.concatenate(abcd_rhs(y[:n], y[n:], coeffs, bathy.b, params, grid))

    y = rk4(np.concatenate([state.zeta, state.vbar]), f, dt)
    depth(y[:n], bathy.b, params)
    return HydroState(y[:n], y[n:])


def peregrine_step(state: HydroState, bathy: Bathymetry, params: SimulationParams, dt: float) -> HydroState:
    """RK4 step of the Boussinesq-Peregrine equations over the bottom b."""
    grid = bathy.grid
    _require_periodic(grid, "the Peregrine model")
    op = assemble_peregrine_operator(bathy.b, params, grid)
    n = grid.n_cells
    D = spectral_derivative

    def f(y):
        z, v = y[:n], y[n:]
        h = depth(z, bathy.b, params)
        return np.concatenate([-D(h * v, grid), op.solve(-D(z, grid) - params.epsilon * v * D(v, grid))])

    y = rk4(np.concatenate([state.zeta, state.vbar]), f, dt)
    depth(y[:n], bathy.b, params)
    return HydroState(y[:n], y[n:])


def _limit_phi(phi, rel_tol=1e-10):
    """Clip round-off negatives of the enstrophy; genuine negatives are an error."""
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0):
        floor = -rel_tol * max(float(np.max(np.abs(phi))), 1.0)
        if np.min(phi) < floor:
            raise NegativeEnstrophy(f"enstrophy became negative ({np.min(phi):.3e})")
        phi = np.maximum(phi, 0.0)
    return phi


def sgn_rhs(zeta, v, b, params: SimulationParams, grid: Grid1D, w=None, Cp=0.0, Cr=0.0):
    """Tendencies of the SGN system, optionally with enstrophy w = h*phi.

    Returns (zeta_t, v_t, w_t, dissipation density) where the last two are
    None without enstrophy.
    """
    eps, mu, beta = params.epsilon, params.mu, params.beta
    h = depth(zeta, b, params)

    def Dv(u):  # derivative of a velocity-like (odd) field
        return derivative(u, grid, 1, ODD)

    def De(u):  # derivative of an elevation-like (even) field
        return derivative(u, grid, 1, EVEN)

    vx = Dv(v)
    zeta_t = -Dv(h * v)
    # Q1 = -2 R1(vx^2) + beta R2(v^2 b_xx)
    q1 = (2 / (3 * h)) * De(h**3 * vx**2)
    if beta and np.any(b):
        bx = De(b)
        bxx = derivative(b, grid, 2, EVEN)
        q1 = q1 + beta * h * vx**2 * bx
        w2 = v**2 * bxx
        q1 = q1 + beta * (De(h**2 * w2) / (2 * h) + beta * w2 * bx)
    force = -De(zeta) - eps * mu * q1
    w_t = diss = None
    if w is not None:
        phi = w / h
        phip = np.maximum(phi, 0.0)
        nu_t = Cp * h**2 * np.sqrt(phip)
        force = force - eps * mu * De(h**3 * phi - nu_t * h * vx) / h
        diss = 0.5 * Cr * h**2 * phip**1.5
        w_t = -eps * Dv(v * w) + 2 * eps * nu_t * vx**2 / h - 2 * diss / (mu * h**2)
    op = assemble_sgn_operator(h, b, params, grid)
    v_t = op.solve(force) - eps * v * vx
    return zeta_t, v_t, w_t, diss


def sgn_step(state: HydroState, bathy: Bathymetry, params: SimulationParams, dt: float) -> HydroState:
    """RK4 step of the Serre-Green-Naghdi equations (flat or variable bottom)."""
    grid, b = bathy.grid, bathy.b
    n = grid.n_cells

    def f(y):
        zt, vt, _, _ = sgn_rhs(y[:n], y[n:], b, params, grid)
        return np.concatenate([zt, vt])

    y = rk4(np.concatenate([state.zeta, state.vbar]), f, dt)
    depth(y[:n], b, params)
    return HydroState(y[:n], y[n:])


def _sgn_enstrophy_step(state: EnstrophyState, bathy, params, dt, Cp, Cr, with_dissipation=False):
    if not bathy.flat:
        raise ValidationError("the enstrophy models are implemented for flat bottoms")
    grid, b = bathy.grid, bathy.b
    n = grid.n_cells
    h0 = depth(state.zeta, b, params)

    def f(y):
        zt, vt, wt, diss = sgn_rhs(y[:n], y[n:2 * n], b, params, grid, w=y[2 * n:3 * n], Cp=Cp, Cr=Cr)
        return np.concatenate([zt, vt, wt, [np.sum(diss) * grid.dx]])

    y = rk4(np.concatenate([state.zeta, state.vbar, h0 * state.phi, [0.0]]), f, dt)
    h = depth(y[:n], b, params)
    new = EnstrophyState(HydroState(y[:n], y[n:2 * n]), _limit_phi(y[2 * n:3 * n] / h))
    return (new, y[-1]) if with_dissipation else new


def sgn_vorticity_step(state: EnstrophyState, bathy: Bathymetry, params: SimulationParams,
                       dt: float) -> EnstrophyState:
    """SGN with the turbulent pressure of the enstrophy phi (flat bottom)."""
    return _sgn_enstrophy_step(state, bathy, params, dt, 0.0, 0.0)


def wave_breaking_step(state: EnstrophyState, params: SimulationParams, Cp: float, Cr: float, dt: float,
                       bathy: Bathymetry | None = None, return_dissipation: bool = False):
    """SGN-enstrophy step with eddy viscosity nu_T = Cp h^2 sqrt(phi) and
    dissipation D = Cr h^2 phi^(3/2) / 2.

    The production term in the enstrophy equation is the exact counterpart
    of the viscous work in the momentum equation, so the total energy
    decreases by the integral of D.  With return_dissipation the
    time-integrated dissipation over the step is returned as well.
    """
    if Cp < 0 or Cr < 0:
        raise ValidationError("closure constants must be nonnegative")
    if bathy is None:
        raise ValidationError("wave_breaking_step needs the (flat) bathymetry for its grid")
    return _sgn_enstrophy_step(state, bathy, params, dt, Cp, Cr, with_dissipation=return_dissipation)


def _boussinesq_turbulent_step(state: EnstrophyState, bathy, params, weight, dt):
    grid, b = bathy.grid, bathy.b
    _require_periodic(grid, "the Boussinesq model with vorticity")
    n = grid.n_cells
    eps, mu = params.epsilon, params.mu
    D = spectral_derivative

    def f(y):
        z, v, w = y[:n], y[n:2 * n], y[2 * n:]
        h = depth(z, b, params)
        rv = -D(z, grid) - eps * v * D(v, grid) - weight * D(h**2 * w, grid) / h
        return np.concatenate([-D(h * v, grid), solve_helmholtz(rv, mu / 3, grid), -eps * D(v * w, grid)])

    h0 = depth(state.zeta, b, params)
    y = rk4(np.concatenate([state.zeta, state.vbar, h0 * state.phi]), f, dt)
    h = depth(y[:n], b, params)
    return EnstrophyState(HydroState(y[:n], y[n:2 * n]), _limit_phi(y[2 * n:] / h))


class _ModalInverse:
    """Per-Fourier-mode inverse of diag(l) + mu k^2 T."""

    def __init__(self, l, mu, grid):
        T = build_T_matrix(l)
        k2 = rfft_wavenumbers(grid) ** 2
        mats = np.diag(l)[None, :, :] + mu * k2[:, None, None] * T[None, :, :]
        self.inv = np.linalg.inv(mats)

    def apply(self, rhs):  # rhs shape (N, n)
        n = rhs.shape[1]
        R = np.fft.rfft(rhs, axis=1)  # (N, m)
        out = np.einsum("mij,jm->im", self.inv, R)
        return np.fft.irfft(out, n=n, axis=1)


def multilayer_boussinesq_step(state: MultiLayerState, params: SimulationParams, dt: float,
                               grid: Grid1D) -> MultiLayerState:
    """Multi-layer Boussinesq equations (flat bottom, periodic grid)."""
    _require_periodic(grid, "the multi-layer Boussinesq model")
    l = state.layer_fractions
    N, n = l.size, grid.n_cells
    inv = _ModalInverse(l, params.mu, grid)
    eps = params.epsilon
    zero_b = np.zeros(n)
    D = spectral_derivative

    def f(y):
        z = y[:n]
        V = y[n:].reshape(N, n)
        h = depth(z, zero_b, params)
        zt = -D(h * (l @ V), grid)
        Vx = np.array([D(vj, grid) for vj in V])
        rhs = -l[:, None] * (eps * V * Vx + D(z, grid)[None, :])
        return np.concatenate([zt, inv.apply(rhs).ravel()])

    y = rk4(np.concatenate([state.zeta, state.layer_velocities.ravel()]), f, dt)
    depth(y[:n], zero_b, params)
    return MultiLayerState(y[:n], l, y[n:].reshape(N, n))


# ------------------------------------------------------- Isobe-Kakinuma


def ik_rhs(zeta, phi0, phi1, params: SimulationParams, grid: Grid1D):
    eps, mu = params.epsilon, params.mu
    h = depth(zeta, np.zeros_like(zeta), params)
    D = spectral_derivative
    p0x, p1x = D(phi0, grid), D(phi1, grid)
    flux = h * p0x + (mu / 3) * h**3 * p1x
    zeta_t = -D(flux, grid)
    F1 = -(h**2) * p0x * p1x - 2 * h**2 * phi1**2
    # time derivative of the constraint, with h_t = eps * zeta_t
    F2 = -0.2 * h * D(phi1, grid, 2) * zeta_t
    rhs0 = -zeta - 0.5 * eps * p0x**2 + eps * mu * F1
    rhs1 = eps * mu * F2
    d0, d1 = solve_ik_block(h, mu, grid, rhs0, rhs1)
    return zeta_t, d0, d1


def ik_step(state: IKState, params: SimulationParams, dt: float, grid: Grid1D,
            tol_constraint: float = TOL_CONSTRAINT) -> IKState:
    """RK4 step of the Isobe-Kakinuma model (N = 1, flat bottom)."""
    _require_periodic(grid, "the Isobe-Kakinuma model")
    n = grid.n_cells

    def f(y):
        return np.concatenate(ik_rhs(y[:n], y[n:2 * n], y[2 * n:], params, grid))

    y = rk4(np.concatenate([state.zeta, state.phi0, state.phi1]), f, dt)
    new = IKState(y[:n], y[n:2 * n], y[2 * n:])
    res = ik_constraint_residual(new, params, grid)
    if res > 10 * tol_constraint:
        raise ConstraintDrift(f"constraint residual {res:.3e} exceeds {10 * tol_constraint:.1e}")
    return new


def ik_constraint_residual(state: IKState, params: SimulationParams, grid: Grid1D) -> float:
    h = depth(state.zeta, np.zeros_like(state.zeta), params)
    return float(np.max(np.abs(ik_constraint(state.phi0, state.phi1, h, params.mu, grid))))


def ik_initial_state(zeta, phi1, params: SimulationParams, grid: Grid1D) -> IKState:
    """Constraint-satisfying potentials for a given surface and trial phi1.

    A constant is added to phi1 so the constraint's source has zero mean,
    then phi0 is obtained from the constraint by Fourier division.
    """
    _require_periodic(grid, "the Isobe-Kakinuma model")
    zeta = np.asarray(zeta, dtype=float)
    h = depth(zeta, np.zeros_like(zeta), params)
    phi1 = np.asarray(phi1, dtype=float)
    src = phi1 + (params.mu / 10) * h**2 * spectral_derivative(phi1, grid, 2)
    phi1 = phi1 - np.mean(src)
    src = src - np.mean(src)
    k2 = rfft_wavenumbers(grid) ** 2
    S = np.fft.rfft(src)
    P0 = np.zeros_like(S)
    P0[1:] = 2 * S[1:] / k2[1:]  # 1/2 phi0_xx = -src  =>  phi0_hat = 2 src_hat / k^2
    phi0 = np.fft.irfft(P0, n=grid.n_cells)
    return IKState(zeta, phi0, phi1)


# ------------------------------------------------------ linear reference


def linear_reference_evolve(zeta0, psi0, params: SimulationParams, grid: Grid1D, t: float):
    """Exact solution of zeta_t = omega(D)^2 psi, psi_t = -zeta."""
    _require_periodic(grid, "the linear reference")
    k = rfft_wavenumbers(grid)
    om = np.abs(k) * np.sqrt(c2_ww(k, params.mu))
    Z, P = np.fft.rfft(zeta0), np.fft.rfft(psi0)
    cos, sin = np.cos(om * t), np.sin(om * t)
    safe = np.where(om > 0, om, 1.0)
    Zt = Z * cos + om * P * sin
    Pt = P * cos - np.where(om > 0, Z * sin / safe, Z * t)
    n = grid.n_cells
    return np.fft.irfft(Zt, n=n), np.fft.irfft(Pt, n=n)


# ------------------------------------------------------ model registry


SYSTEM_KINDS = (
    "nsw", "abcd", "boussinesq", "peregrine", "sgn", "sgn_vorticity", "sgn_wave_breaking",
    "nsw_turbulent", "multilayer_nsw", "multilayer_boussinesq", "ik", "linear_reference",
)


@dataclass(frozen=True)
class SystemModelSpec:
    kind: str
    params: SimulationParams
    abcd: tuple = (0.0, 0.0, 0.0, 1 / 3)
    Cp: float = 0.0
    Cr: float = 0.0
    alpha: float = 0.5
    boussinesq: bool = False
    layer_fractions: tuple | None = None
    scheme: NSWScheme = field(default_factory=NSWScheme)

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in SYSTEM_KINDS:
            raise ValidationError(f"unknown system model {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "abcd":
            _check_abcd(*self.abcd)
        if self.Cp < 0 or self.Cr < 0:
            raise ValidationError("Cp and Cr must be nonnegative")
        if kind.startswith("multilayer") and self.layer_fractions is None:
            raise ValidationError("multi-layer models need layer_fractions")

    @property
    def hyperbolic(self) -> bool:
        return self.kind in ("nsw", "multilayer_nsw") or (self.kind == "nsw_turbulent" and not self.boussinesq)


def nsw_spectral_step(state: HydroState, bathy: Bathymetry, params: SimulationParams, dt: float) -> HydroState:
    """Pseudo-spectral RK4 step of NSW in (zeta, v), for smooth comparisons with the dispersive models."""
    grid, b = bathy.grid, bathy.b
    _require_periodic(grid, "spectral NSW")
    n = grid.n_cells
    D = spectral_derivative

    def f(y):
        z, v = y[:n], y[n:]
        h = depth(z, b, params)
        return np.concatenate([-D(h * v, grid), -D(z, grid) - params.epsilon * v * D(v, grid)])

    y = rk4(np.concatenate([state.zeta, state.vbar]), f, dt)
    depth(y[:n], b, params)
    return HydroState(y[:n], y[n:])
