"""Unidirectional (scalar) shallow-water models and their time stepping.

Every model is written as u_t = rhs(u).  Dispersive factors acting on u_t
are inverted inside the right-hand side.  Nonlinear tendencies are passed
through the 2/3 spectral filter on periodic grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    DepthViolation,
    FieldKind,
    Grid1D,
    HydroState,
    IllPosedMode,
    ScalarState,
    SimulationParams,
    StabilityViolation,
    ValidationError,
    depth,
)
from .operators import (
    MultiplierSymbol,
    apply_multiplier,
    dealias,
    derivative,
    rfft_wavenumbers,
    solve_helmholtz,
)

SCALAR_KINDS = (
    "burgers_zeta",
    "burgers_v",
    "linear_fulldisp_zeta",
    "whitham_zeta",
    "whitham_v",
    "kdvbbm",
    "ch_v",
    "ch_zeta",
    "ch_zeta_expanded",
)

_FIELD = {
    "burgers_zeta": FieldKind.SURFACE_ELEVATION,
    "burgers_v": FieldKind.VELOCITY,
    "linear_fulldisp_zeta": FieldKind.SURFACE_ELEVATION,
    "whitham_zeta": FieldKind.SURFACE_ELEVATION,
    "whitham_v": FieldKind.VELOCITY,
    "kdvbbm": FieldKind.SURFACE_ELEVATION,
    "ch_v": FieldKind.VELOCITY,
    "ch_zeta": FieldKind.SURFACE_ELEVATION,
    "ch_zeta_expanded": FieldKind.SURFACE_ELEVATION,
}


@dataclass(frozen=True)
class ScalarModelSpec:
    kind: str
    params: SimulationParams
    grid: Grid1D
    p: float | None = None
    dealias: bool = True
    higher_order: bool = True  # the eps*mu terms of the Camassa-Holm family

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in SCALAR_KINDS:
            raise ValidationError(f"unknown scalar model {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind in ("kdvbbm", "ch_v", "ch_zeta", "ch_zeta_expanded") and self.p is None:
            raise ValidationError(f"{kind} needs the parameter p")
        needs_fourier = kind in ("linear_fulldisp_zeta", "whitham_zeta", "whitham_v")
        if needs_fourier and not self.grid.periodic:
            raise ValidationError(f"{kind} uses a Fourier multiplier and needs a periodic grid")

    @property
    def field_kind(self) -> FieldKind:
        return _FIELD[self.kind]

    @property
    def coefficients(self):
        return ch_coefficients(self.p) if self.p is not None else None


def ch_coefficients(p: float):
    """Coefficients (a, b, c, d) of the Camassa-Holm family."""
    return p, p - 1 / 6, -1.5 * p - 1 / 6, -4.5 * p - 23 / 24


def ch_compatibility(p: float, tol: float = 1e-12) -> dict:
    """Check the conditions relating the family member p to the Camassa-Holm equation.

    The conditions are b < 0, a != b, b = -2c and d = 2c.  The last two
    fix p = -1/4 and p = -5/12 respectively, so no member satisfies all of
    them; the report says which ones hold.
    """
    a, b, c, d = ch_coefficients(p)
    conds = {
        "b_negative": b < 0,
        "a_ne_b": abs(a - b) > tol,
        "b_eq_minus_2c": abs(b + 2 * c) <= tol,
        "d_eq_2c": abs(d - 2 * c) <= tol,
    }
    conds["compatible"] = all(conds.values())
    return conds


# ------------------------------------------------------------ nonlinearity


def _sqrt_ratio(zeta, eps):
    """2*zeta/(1 + sqrt(1 + eps*zeta)), i.e. (2/eps)(sqrt(1+eps*zeta) - 1) without cancellation."""
    zeta = np.asarray(zeta, dtype=float)
    rad = 1 + eps * zeta
    if np.any(rad <= 0):
        raise DepthViolation("1 + epsilon*zeta must be positive")
    return 2 * zeta / (1 + np.sqrt(rad))


def burgers_speed(u, kind: str, eps: float):
    """Nonlinear part N(u) of the transport speed 1 + N(u)."""
    if kind == "zeta":
        return 1.5 * eps * _sqrt_ratio(u, eps)
    return 1.5 * eps * np.asarray(u, dtype=float)


def _filter(term, spec: ScalarModelSpec):
    if spec.dealias and spec.grid.periodic:
        return dealias(term, spec.grid)
    return term


def _invert_factor(rhs, coeff: float, grid: Grid1D):
    """Solve (1 + coeff * d_xx) u = rhs."""
    if coeff <= 0:
        return solve_helmholtz(rhs, -coeff, grid)
    if not grid.periodic:
        raise IllPosedMode("a positive d_xx factor on a wall grid is not supported")
    k2 = rfft_wavenumbers(grid) ** 2
    sym = 1 - coeff * k2
    if np.any(sym <= 0):
        raise IllPosedMode("dispersive factor loses invertibility on this grid")
    return np.fft.irfft(np.fft.rfft(rhs) / sym, n=grid.n_cells)


# --------------------------------------------------------------- the RHSs


def rhs_burgers(state: ScalarState, spec: ScalarModelSpec) -> np.ndarray:
    u, g, eps = state.u, spec.grid, spec.params.epsilon
    ux = derivative(u, g)
    form = "zeta" if spec.kind == "burgers_zeta" else "v"
    return -ux - _filter(burgers_speed(u, form, eps) * ux, spec)


def rhs_whitham(state: ScalarState, spec: ScalarModelSpec) -> np.ndarray:
    u, g, par = state.u, spec.grid, spec.params
    ux = derivative(u, g)
    lin = apply_multiplier(ux, MultiplierSymbol("cww", mu=par.mu), g)
    if spec.kind == "linear_fulldisp_zeta":
        return -lin
    form = "zeta" if spec.kind == "whitham_zeta" else "v"
    return -lin - _filter(burgers_speed(u, form, par.epsilon) * ux, spec)


def rhs_kdv_bbm(state: ScalarState, p: float, params: SimulationParams, grid: Grid1D, dealiased=True):
    """(1 + (p - 1/6) mu d_xx) u_t = -(u_x + mu p u_xxx + 3/2 eps u u_x)."""
    u, mu, eps = state.u, params.mu, params.epsilon
    ux = derivative(u, grid)
    nl = 1.5 * eps * u * ux
    if dealiased and grid.periodic:
        nl = dealias(nl, grid)
    explicit = ux + mu * p * derivative(u, grid, 3) + nl
    return _invert_factor(-explicit, (p - 1 / 6) * mu, grid)


def rhs_camassa_holm(state: ScalarState, p: float, spec: ScalarModelSpec) -> np.ndarray:
    u, g, par = state.u, spec.grid, spec.params
    eps, mu = par.epsilon, par.mu
    a, b, c, d = ch_coefficients(p)
    ux = derivative(u, g)
    uxx = derivative(u, g, 2)
    uxxx = derivative(u, g, 3)
    if spec.kind == "ch_v":
        nl = 1.5 * eps * u * ux
    elif spec.kind == "ch_zeta":
        nl = burgers_speed(u, "zeta", eps) * ux
    else:
        nl = (1.5 * eps * u - 0.375 * eps**2 * u**2 + 0.1875 * eps**3 * u**3) * ux
    if spec.higher_order:
        nl = nl - eps * mu * (c * u * uxxx + d * ux * uxx)
    explicit = ux + mu * a * uxxx + _filter(nl, spec)
    return _invert_factor(-explicit, b * mu, g)


def rhs_scalar(state: ScalarState, spec: ScalarModelSpec) -> np.ndarray:
    """Dispatch on the model kind."""
    kind = spec.kind
    if state.field_kind is not spec.field_kind:
        raise ValidationError(f"{kind} evolves {spec.field_kind.value}, state holds {state.field_kind.value}")
    if kind.startswith("burgers"):
        return rhs_burgers(state, spec)
    if kind in ("linear_fulldisp_zeta", "whitham_zeta", "whitham_v"):
        return rhs_whitham(state, spec)
    if kind == "kdvbbm":
        return rhs_kdv_bbm(state, spec.p, spec.params, spec.grid, spec.dealias)
    return rhs_camassa_holm(state, spec.p, spec)


def companion_field(state: ScalarState, spec: ScalarModelSpec) -> np.ndarray:
    """The field slaved to the evolved one (velocity for zeta-models and vice versa)."""
    u, g, par = state.u, spec.grid, spec.params
    eps = par.epsilon
    kind = spec.kind
    if kind in ("burgers_zeta", "kdvbbm", "ch_zeta", "ch_zeta_expanded"):
        return _sqrt_ratio(u, eps)
    if kind in ("burgers_v", "ch_v"):
        return u + 0.25 * eps * u**2
    if kind == "linear_fulldisp_zeta":
        return apply_multiplier(u, MultiplierSymbol("cww", mu=par.mu), g)
    if kind == "whitham_zeta":
        return apply_multiplier(u, MultiplierSymbol("cww", mu=par.mu), g) + _sqrt_ratio(u, eps) - u
    if kind == "whitham_v":
        return apply_multiplier(u, MultiplierSymbol("cww_inverse", mu=par.mu), g) + 0.25 * eps * u**2
    raise ValidationError(f"no companion relation for {kind}")


def riemann_invariants(state: HydroState, params: SimulationParams, b=None):
    """R+-, lambda+- of the shallow-water system.

    R+- = 2(sqrt(h) - 1) +- eps*v and lambda+- = +-eps*v + sqrt(h); the
    difference sqrt(h) - 1 is evaluated as (h - 1)/(sqrt(h) + 1).
    """
    b = np.zeros_like(state.zeta) if b is None else np.asarray(b, dtype=float)
    h = depth(state.zeta, b, params)
    sh = np.sqrt(h)
    base = 2 * (params.epsilon * state.zeta - params.beta * b) / (1 + sh)
    ev = params.epsilon * state.vbar
    return base + ev, base - ev, ev + sh, -ev + sh


# ------------------------------------------------------------ time stepping


def rk4(y: np.ndarray, f: Callable[[np.ndarray], np.ndarray], dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step on a flat or stacked array."""
    if not dt > 0:
        raise ValidationError("dt must be positive")
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    out = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise StabilityViolation("time step produced non-finite values")
    return out


def step_rk4(state: ScalarState, rhs_fn: Callable[[ScalarState], np.ndarray], dt: float) -> ScalarState:
    kind, meta = state.field_kind, state.meta

    def f(u):
        return rhs_fn(ScalarState(u, kind, meta))

    return ScalarState(rk4(state.u, f, dt), kind, meta)


def scalar_step(state: ScalarState, spec: ScalarModelSpec, dt: float) -> ScalarState:
    new = step_rk4(state, lambda s: rhs_scalar(s, spec), dt)
    if new.field_kind is FieldKind.SURFACE_ELEVATION:
        new.check(spec.params)
    return new
