"""Discrete spatial operators.

Periodic grids are handled pseudo-spectrally; wall grids use second-order
centred differences with reflection ghost cells (velocity odd, elevation
and bottom even).  Elliptic solves are always checked through their
residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .core import (
    BoundaryUnsupported,
    Grid1D,
    SimulationParams,
    SolveFailure,
    ValidationError,
    depth,
)
from .dispersion import c2_ww

EVEN = "even"
ODD = "odd"


# ---------------------------------------------------------------- spectral


@lru_cache(maxsize=64)
def _spectral_tables(n: int, length: float):
    k = 2 * np.pi * np.fft.rfftfreq(n, d=length / n)
    ik_odd = 1j * k
    if n % 2 == 0:
        ik_odd = ik_odd.copy()
        ik_odd[-1] = 0.0
    k.setflags(write=False)
    ik_odd.setflags(write=False)
    cutoff = (2.0 / 3.0) * np.abs(k).max()
    mask = (np.abs(k) <= cutoff).astype(float)
    mask.setflags(write=False)
    return k, ik_odd, mask


def rfft_wavenumbers(grid: Grid1D) -> np.ndarray:
    return _spectral_tables(grid.n_cells, grid.length)[0]


def _symbol_derivative(grid: Grid1D, order: int) -> np.ndarray:
    k, ik_odd, _ = _spectral_tables(grid.n_cells, grid.length)
    if order % 2:
        return ik_odd * (-(k**2)) ** (order // 2)
    return (-(k**2)) ** (order // 2) + 0j


def spectral_derivative(u: np.ndarray, grid: Grid1D, order: int = 1) -> np.ndarray:
    if order == 0:
        return np.array(u, dtype=float)
    return np.fft.irfft(_symbol_derivative(grid, order) * np.fft.rfft(u), n=grid.n_cells)


def dealias(u: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Zero the upper third of the spectrum (2/3 rule)."""
    mask = _spectral_tables(grid.n_cells, grid.length)[2]
    return np.fft.irfft(mask * np.fft.rfft(u), n=grid.n_cells)


@lru_cache(maxsize=16)
def spectral_matrix(n: int, length: float, order: int = 1) -> np.ndarray:
    """Dense matrix of the spectral derivative, built column by column."""
    grid = Grid1D(n, length)
    sym = _symbol_derivative(grid, order)
    cols = np.fft.irfft(sym[:, None] * np.fft.rfft(np.eye(n), axis=0), n=n, axis=0)
    cols.setflags(write=False)
    return cols


@dataclass(frozen=True)
class MultiplierSymbol:
    """Fourier multiplier m(D): one of cww, cww_inverse, derivative, helmholtz_inverse, custom."""

    kind: str
    order: int = 1
    gamma: float = 0.0
    mu: float = 1.0
    values: tuple | None = None

    def evaluate(self, grid: Grid1D) -> np.ndarray:
        k = rfft_wavenumbers(grid)
        kind = self.kind.lower()
        if kind == "identity":
            return np.ones_like(k) + 0j
        if kind == "cww":
            return np.sqrt(c2_ww(k, self.mu)) + 0j
        if kind == "cww_inverse":
            return 1 / np.sqrt(c2_ww(k, self.mu)) + 0j
        if kind == "derivative":
            return _symbol_derivative(grid, self.order)
        if kind == "helmholtz_inverse":
            if self.gamma < 0:
                raise ValidationError("gamma must be nonnegative")
            return 1 / (1 + self.gamma * k**2) + 0j
        if kind == "custom":
            vals = np.asarray(self.values, dtype=complex)
            if vals.shape != k.shape:
                raise ValidationError(f"custom symbol needs {k.size} values (rfft layout)")
            if not np.all(np.isfinite(vals)):
                raise ValidationError("custom symbol must be finite")
            return vals
        raise ValidationError(f"unknown multiplier kind {self.kind!r}")


def apply_multiplier(field: np.ndarray, symbol: MultiplierSymbol, grid: Grid1D) -> np.ndarray:
    if not grid.periodic:
        raise BoundaryUnsupported("Fourier multipliers need a periodic grid")
    return np.fft.irfft(symbol.evaluate(grid) * np.fft.rfft(field), n=grid.n_cells)


# ------------------------------------------------------- finite differences


def _ghost(u: np.ndarray, parity: str):
    sign = 1.0 if parity == EVEN else -1.0
    return np.concatenate([[sign * u[0]], u, [sign * u[-1]]])


def fd_derivative(u: np.ndarray, grid: Grid1D, parity: str = EVEN) -> np.ndarray:
    ug = _ghost(np.asarray(u, dtype=float), parity)
    return (ug[2:] - ug[:-2]) / (2 * grid.dx)


def fd_second_derivative(u: np.ndarray, grid: Grid1D, parity: str = EVEN) -> np.ndarray:
    ug = _ghost(np.asarray(u, dtype=float), parity)
    return (ug[2:] - 2 * ug[1:-1] + ug[:-2]) / grid.dx**2


def fd_matrix(n: int, dx: float, order: int, parity: str) -> sparse.csr_matrix:
    sign = 1.0 if parity == EVEN else -1.0
    if order == 1:
        A = sparse.lil_matrix(sparse.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1]) / (2 * dx))
        A[0, 0] += -sign / (2 * dx)
        A[n - 1, n - 1] += sign / (2 * dx)
    elif order == 2:
        A = sparse.lil_matrix(
            sparse.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / dx**2
        )
        A[0, 0] += sign / dx**2
        A[n - 1, n - 1] += sign / dx**2
    else:
        raise ValidationError("only first and second order FD matrices are provided")
    return A.tocsr()


def derivative(u: np.ndarray, grid: Grid1D, order: int = 1, parity: str = EVEN) -> np.ndarray:
    """Derivative with the discretisation native to the grid."""
    if grid.periodic:
        return spectral_derivative(u, grid, order)
    if order == 1:
        return fd_derivative(u, grid, parity)
    if order == 2:
        return fd_second_derivative(u, grid, parity)
    if order == 3:
        return fd_derivative(fd_second_derivative(u, grid, parity), grid, parity)
    raise ValidationError("wall grids support derivatives up to order 3")


# ------------------------------------------------------------- Helmholtz


def solve_helmholtz(rhs, gamma: float, grid: Grid1D, parity: str = EVEN, check=True) -> np.ndarray:
    """Solve (1 - gamma d_xx) u = rhs."""
    if gamma < 0:
        raise ValidationError("gamma must be nonnegative")
    rhs = np.asarray(rhs, dtype=float)
    if gamma == 0:
        return rhs.copy()
    if grid.periodic:
        k = rfft_wavenumbers(grid)
        u = np.fft.irfft(np.fft.rfft(rhs) / (1 + gamma * k**2), n=grid.n_cells)
        D2u = spectral_derivative(u, grid, 2)
    else:
        n, dx = grid.n_cells, grid.dx
        sign = 1.0 if parity == EVEN else -1.0
        ab = np.zeros((3, n))
        ab[0, 1:] = -gamma / dx**2
        ab[2, :-1] = -gamma / dx**2
        ab[1, :] = 1 + 2 * gamma / dx**2
        ab[1, 0] -= sign * gamma / dx**2
        ab[1, -1] -= sign * gamma / dx**2
        try:
            u = scipy.linalg.solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolveFailure(str(exc)) from exc
        D2u = fd_second_derivative(u, grid, parity)
    if check:
        res = np.max(np.abs(u - gamma * D2u - rhs))
        scale = max(np.max(np.abs(rhs)), 1e-300)
        if res > 1e-10 * scale and res > 1e-300:
            raise SolveFailure(f"Helmholtz residual {res:.2e} exceeds tolerance")
    return u


# ------------------------------------------------------------ SGN operator


class DispersiveOperator:
    """The operator (1 + mu*T[h, beta*b]) of the fully nonlinear equations.

    ``weighted`` is h*(1 + mu*T), which is symmetric and positive; solves
    are done on that form.  ``apply`` returns (1 + mu*T) u.
    """

    def __init__(self, h, b, params: SimulationParams, grid: Grid1D, rtol: float = 1e-10):
        self.grid = grid
        self.params = params
        self.h = np.asarray(h, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if np.any(self.h < params.h_min):
            from .core import DepthViolation

            raise DepthViolation("operator assembled on a state below h_min")
        self.rtol = rtol
        self.bx = derivative(self.b, grid, 1, EVEN) if np.any(self.b) else np.zeros_like(self.h)
        self._matrix = None

    # pointwise (matrix-free) evaluation
    def weighted_apply(self, u: np.ndarray) -> np.ndarray:
        g, mu, beta = self.grid, self.params.mu, self.params.beta
        h, bx = self.h, self.bx
        ux = derivative(u, g, 1, ODD)
        out = h * u - (mu / 3) * derivative(h**3 * ux, g, 1, EVEN)
        if beta and np.any(bx):
            out = out + mu * (
                0.5 * beta * (derivative(h**2 * bx * u, g, 1, EVEN) - h**2 * bx * ux)
                + beta**2 * h * bx**2 * u
            )
        return out

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.weighted_apply(u) / self.h

    @property
    def matrix(self):
        """Assembled h*(1 + mu*T): dense on periodic grids, sparse on walls."""
        if self._matrix is None:
            self._matrix = self._assemble()
        return self._matrix

    def _assemble(self):
        g, mu, beta = self.grid, self.params.mu, self.params.beta
        h, bx = self.h, self.bx
        n = g.n_cells
        if g.periodic:
            D = spectral_matrix(n, g.length, 1)
            A = np.diag(h) - (mu / 3) * D @ (h[:, None] ** 3 * D)
            if beta and np.any(bx):
                m = h**2 * bx
                A += mu * (0.5 * beta * (D * m[None, :] - m[:, None] * D) + np.diag(beta**2 * h * bx**2))
            return A
        De = fd_matrix(n, g.dx, 1, EVEN)
        Do = fd_matrix(n, g.dx, 1, ODD)
        H3 = sparse.diags(h**3)
        A = sparse.diags(h) - (mu / 3) * De @ H3 @ Do
        if beta and np.any(bx):
            M = sparse.diags(h**2 * bx)
            A = A + mu * (0.5 * beta * (De @ M - M @ Do) + sparse.diags(beta**2 * h * bx**2))
        return A.tocsc()

    def _preconditioner(self):
        g = self.grid
        k = rfft_wavenumbers(g)
        hm = float(np.mean(self.h))
        sym = hm + (self.params.mu / 3) * hm**3 * k**2
        n = g.n_cells
        return spla.LinearOperator((n, n), matvec=lambda r: np.fft.irfft(np.fft.rfft(r) / sym, n=n))

    def solve(self, f: np.ndarray) -> np.ndarray:
        """Return u with (1 + mu*T) u = f."""
        rhs = self.h * np.asarray(f, dtype=float)
        scale = np.max(np.abs(rhs))
        if scale == 0:
            return np.zeros_like(rhs)
        n = self.grid.n_cells
        u = None
        if self.grid.periodic:
            op = spla.LinearOperator((n, n), matvec=self.weighted_apply)
            u, info = spla.cg(op, rhs, rtol=1e-13, atol=0.0, maxiter=200, M=self._preconditioner())
            if info != 0 or not self._ok(u, rhs, scale):
                u = None
            if u is None:
                try:
                    u = scipy.linalg.solve(self.matrix, rhs, assume_a="sym")
                except np.linalg.LinAlgError as exc:
                    raise SolveFailure(str(exc)) from exc
        else:
            try:
                u = spla.spsolve(self.matrix, rhs)
            except RuntimeError as exc:
                raise SolveFailure(str(exc)) from exc
        if not self._ok(u, rhs, scale):
            res = np.max(np.abs(self.weighted_apply(u) - rhs)) / scale
            raise SolveFailure(f"dispersive solve residual {res:.2e} exceeds {self.rtol:g}")
        return u

    def _ok(self, u, rhs, scale) -> bool:
        if u is None or not np.all(np.isfinite(u)):
            return False
        if self.grid.periodic:
            res = np.max(np.abs(self.weighted_apply(u) - rhs))
        else:
            res = np.max(np.abs(self.matrix @ u - rhs))
        return res <= self.rtol * scale


def assemble_sgn_operator(h, b, params: SimulationParams, grid: Grid1D) -> DispersiveOperator:
    return DispersiveOperator(h, b, params, grid)


def assemble_peregrine_operator(b, params: SimulationParams, grid: Grid1D) -> DispersiveOperator:
    """(1 + mu*T_b) built on the still-water depth h_b = 1 - beta*b."""
    b = np.asarray(b, dtype=float)
    hb = depth(np.zeros_like(b), b, params)
    return DispersiveOperator(hb, b, params, grid)


# -------------------------------------------------------- Isobe-Kakinuma


def _ik_block_apply(x, h2, mu, grid):
    n = grid.n_cells
    x0, x1 = x[:n], x[n:]
    D2x1 = spectral_derivative(x1, grid, 2)
    top = x0 + mu * h2 * x1
    bot = 0.5 * spectral_derivative(x0, grid, 2) + x1 + (mu / 10) * h2 * D2x1
    return np.concatenate([top, bot])


def solve_ik_block(h, mu: float, grid: Grid1D, rhs0, rhs1, rtol: float = 1e-9):
    """Solve [[1, mu h^2], [D2/2, 1 + mu h^2 D2/10]] (a0, a1) = (rhs0, rhs1)."""
    if not grid.periodic:
        raise BoundaryUnsupported("the Isobe-Kakinuma block solve needs a periodic grid")
    h = np.asarray(h, dtype=float)
    n = grid.n_cells
    h2 = h**2
    rhs = np.concatenate([np.asarray(rhs0, float), np.asarray(rhs1, float)])
    scale = np.max(np.abs(rhs))
    if scale == 0:
        return np.zeros(n), np.zeros(n)

    k2 = rfft_wavenumbers(grid) ** 2
    hm2 = float(np.mean(h2))
    det = 1 + 0.4 * mu * hm2 * k2  # determinant of the constant-coefficient block

    def precond(r):
        r0, r1 = np.fft.rfft(r[:n]), np.fft.rfft(r[n:])
        a0 = ((1 - mu * hm2 * k2 / 10) * r0 - mu * hm2 * r1) / det
        a1 = (0.5 * k2 * r0 + r1) / det
        return np.concatenate([np.fft.irfft(a0, n=n), np.fft.irfft(a1, n=n)])

    op = spla.LinearOperator((2 * n, 2 * n), matvec=lambda x: _ik_block_apply(x, h2, mu, grid))
    M = spla.LinearOperator((2 * n, 2 * n), matvec=precond)
    x, info = spla.gmres(op, rhs, rtol=1e-13, atol=0.0, restart=40, maxiter=5, M=M)

    def residual(x):
        return np.max(np.abs(_ik_block_apply(x, h2, mu, grid) - rhs)) / scale

    if info != 0 or not np.all(np.isfinite(x)) or residual(x) > rtol:
        D2 = spectral_matrix(n, grid.length, 2)
        I = np.eye(n)
        A = np.block([[I, mu * np.diag(h2)], [0.5 * D2, I + (mu / 10) * h2[:, None] * D2]])
        try:
            x = scipy.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolveFailure(str(exc)) from exc
        if residual(x) > rtol:
            raise SolveFailure(f"IK block residual {residual(x):.2e} exceeds {rtol:g}")
    return x[:n], x[n:]


def ik_constraint(phi0, phi1, h, mu: float, grid: Grid1D) -> np.ndarray:
    """Pointwise residual of 1/2 phi0_xx + (1 + mu h^2 d_xx / 10) phi1."""
    return 0.5 * spectral_derivative(phi0, grid, 2) + phi1 + (mu / 10) * h**2 * spectral_derivative(phi1, grid, 2)

