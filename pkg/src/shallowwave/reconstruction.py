"""Vertical structure of velocity and non-hydrostatic pressure.

Profiles are the O(mu^2)-truncated expansions in terms of the averaged
unknowns, evaluated with the grid's own derivative operators.  Vertical
averages use 8-point Gauss-Legendre quadrature, exact for the cubic
polynomials that appear here.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Bathymetry, NotZeroMean, OutOfColumn, SimulationParams, depth
from .operators import EVEN, ODD, derivative

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class VerticalProfile:
    z: np.ndarray
    values: np.ndarray
    name: str = ""


def column_bounds(zeta, b, params: SimulationParams, i: int):
    return -1 + params.beta * b[i], params.epsilon * zeta[i]


def column_average(f: Callable[[np.ndarray], np.ndarray], bottom: float, top: float) -> float:
    """Gauss-Legendre mean of f over [bottom, top]."""
    z = 0.5 * (top - bottom) * GL_NODES + 0.5 * (top + bottom)
    return float(0.5 * np.sum(GL_WEIGHTS * f(z)))


def _check_column(z, bottom, top, tol=1e-12):
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z < bottom - tol) or np.any(z > top + tol):
        raise OutOfColumn(f"z samples must lie in [{bottom:.6g}, {top:.6g}]")
    return z


def _horizontal(zeta, vbar, bathy: Bathymetry):
    g = bathy.grid
    vx = derivative(vbar, g, 1, ODD)
    vxx = derivative(vbar, g, 2, ODD)
    bx = derivative(bathy.b, g, 1, EVEN)
    bvx = derivative(bx * vbar, g, 1, EVEN)
    return vx, vxx, bx, bvx


def _irrotational(zeta, vbar, bathy, params, i, z):
    eps, mu, beta = params.epsilon, params.mu, params.beta
    b = bathy.b
    h = depth(zeta, b, params)
    vx, vxx, bx, bvx = _horizontal(zeta, vbar, bathy)
    s = 1 + z - beta * b[i]  # height above the bottom
    V = vbar[i] - 0.5 * mu * (s**2 - h[i] ** 2 / 3) * vxx[i]
    if beta:
        # the topographic correction is O(mu beta), as irrotationality requires
        V = V + mu * beta * (z - eps * zeta[i] + 0.5 * h[i]) * (bx[i] * vx[i] + bvx[i])
    w = -mu * (s * vx[i] - beta * bx[i] * vbar[i])
    return V, w


def velocity_profile(zeta, vbar, bathy: Bathymetry, params: SimulationParams, x_index: int, z_samples):
    """Horizontal and vertical velocity V(z), w(z) above cell x_index."""
    zeta, vbar = np.asarray(zeta, float), np.asarray(vbar, float)
    bottom, top = column_bounds(zeta, bathy.b, params, x_index)
    z = _check_column(z_samples, bottom, top)
    V, w = _irrotational(zeta, vbar, bathy, params, x_index, z)
    return VerticalProfile(z, V, "V"), VerticalProfile(z, w, "w")


def pressure_nh_profile(zeta, vbar, dt_vbar, bathy: Bathymetry, params: SimulationParams, x_index: int,
                        z_samples, scaled: bool = False):
    """Non-hydrostatic pressure P_NH(z) (or P_NH/eps when scaled=True).

    dt_vbar is the time derivative of the averaged velocity as given by the
    model in use; it is never estimated from stored time levels.
    """
    eps, mu, beta = params.epsilon, params.mu, params.beta
    zeta, vbar, dt_vbar = (np.asarray(a, float) for a in (zeta, vbar, dt_vbar))
    g, b, i = bathy.grid, bathy.b, x_index
    bottom, top = column_bounds(zeta, b, params, i)
    z = _check_column(z_samples, bottom, top)
    h = depth(zeta, b, params)
    vx, vxx, bx, bvx = _horizontal(zeta, vbar, bathy)
    dt_vx = derivative(dt_vbar, g, 1, ODD)
    s = 1 + z - beta * b[i]
    lagr = dt_vx[i] + eps * vbar[i] * vxx[i] - eps * vx[i] ** 2
    # h^2 - s^2 = (eps*zeta - z)(h + s), written so the surface value is exactly zero
    p = -0.5 * mu * (eps * zeta[i] - z) * (h[i] + s) * lagr
    if beta:
        p = p + mu * (eps * zeta[i] - z) * h[i] * beta * (bx[i] * dt_vbar[i] + eps * vbar[i] * bvx[i])
    if not scaled:
        p = eps * p
    return VerticalProfile(z, p, "P_NH")


def velocity_profile_rotational(zeta, vbar, vsh_star: Callable[[np.ndarray], np.ndarray], bathy: Bathymetry,
                                params: SimulationParams, x_index: int, z_samples, tol: float = 1e-10):
    """Irrotational profile plus sqrt(mu) times the shear fluctuation V*_sh(z).

    vsh_star must have zero vertical mean over the column.  The mu^(3/2)
    corrector is not included.
    """
    zeta, vbar = np.asarray(zeta, float), np.asarray(vbar, float)
    bottom, top = column_bounds(zeta, bathy.b, params, x_index)
    mean = column_average(vsh_star, bottom, top) * (top - bottom)
    if abs(mean) > tol:
        raise NotZeroMean(f"shear fluctuation has nonzero column integral {mean:.3e}")
    z = _check_column(z_samples, bottom, top)
    V, w = _irrotational(zeta, vbar, bathy, params, x_index, z)
    V = V + np.sqrt(params.mu) * np.asarray(vsh_star(z), dtype=float)
    return VerticalProfile(z, V, "V"), VerticalProfile(z, w, "w")


def incompressibility_residual(zeta, vbar, bathy: Bathymetry, params: SimulationParams, sigma):
    """mu dV/dx + dw/dz of the reconstructed flat-bottom field on the whole grid.

    Points are placed at the relative heights sigma in [0, 1] of each
    column, so the residual is evaluated at fixed sigma along x (the
    sigma-coordinate chain rule is included).
    """
    mu, eps = params.mu, params.epsilon
    g = bathy.grid
    zeta, vbar = np.asarray(zeta, float), np.asarray(vbar, float)
    h = depth(zeta, bathy.b, params)
    hx = derivative(h, g, 1, EVEN)
    vx = derivative(vbar, g, 1, ODD)
    vxx = derivative(vbar, g, 2, ODD)
    vxxx = derivative(vbar, g, 3, ODD)
    out = []
    for sg in np.atleast_1d(sigma):
        s = sg * h  # height above the flat bottom, z = s - 1
        # V = v - mu/2 (s^2 - h^2/3) v_xx; d/dx at fixed z with s_x = 0
        Vx = vx - 0.5 * mu * (s**2 - h**2 / 3) * vxxx + mu / 3 * h * hx * vxx
        wz = -mu * vx
        out.append(mu * Vx + wz)
    return np.array(out)


def profiles_to_csv(rows) -> str:
    """rows: iterable of (x, z, V, w, P_NH) tuples."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["x", "z", "V", "w", "P_NH"])
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
