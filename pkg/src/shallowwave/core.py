"""Dimensionless parameters, grids, bathymetry and the state containers.

All fields are collocated at cell centres.  States are small frozen
dataclasses holding numpy arrays; steppers always return new instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

H_MIN = 1e-6
TOL_CONSTRAINT = 1e-8


class ShallowWaveError(Exception):
    """Base class for every error raised by the package."""


class DepthViolation(ShallowWaveError):
    pass


class ValidationError(ShallowWaveError):
    pass


class FractionError(ShallowWaveError):
    pass


class IllPosedMode(ShallowWaveError):
    pass


class EigenFailure(ShallowWaveError):
    pass


class SolveFailure(ShallowWaveError):
    pass


class BoundaryUnsupported(ShallowWaveError):
    pass


class StabilityViolation(ShallowWaveError):
    pass


class CFLViolation(ShallowWaveError):
    pass


class NegativeEnstrophy(ShallowWaveError):
    pass


class ConstraintDrift(ShallowWaveError):
    pass


class OutOfColumn(ShallowWaveError):
    pass


class NotZeroMean(ShallowWaveError):
    pass


class MismatchedRuns(ShallowWaveError):
    pass


class DegenerateFit(ShallowWaveError):
    pass


class Boundary(str, Enum):
    PERIODIC = "periodic"
    WALL = "wall"


class FieldKind(str, Enum):
    SURFACE_ELEVATION = "zeta"
    VELOCITY = "v"


@dataclass(frozen=True)
class SimulationParams:
    """Amplitude (epsilon), shallowness (mu) and topography (beta) ratios."""

    epsilon: float = 0.1
    mu: float = 0.1
    beta: float = 0.0
    h_min: float = H_MIN

    def __post_init__(self):
        if not (0.0 < self.mu <= 1.0):
            raise ValidationError(f"mu must lie in (0, 1], got {self.mu}")
        if self.epsilon < 0 or self.beta < 0:
            raise ValidationError("epsilon and beta must be nonnegative")
        if self.h_min <= 0:
            raise ValidationError("h_min must be positive")

    def with_(self, **changes) -> "SimulationParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class Grid1D:
    n_cells: int
    length: float
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise ValidationError("n_cells must be an integer >= 8")
        if not self.length > 0:
            raise ValidationError("length must be positive")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers matching ``np.fft.fft`` ordering."""
        return 2 * np.pi * np.fft.fftfreq(self.n_cells, d=self.dx)


def _as_field(values, n: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValidationError(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class Bathymetry:
    """Bottom profile b sampled at cell centres, normalised so max|b| <= 1."""

    grid: Grid1D
    b: np.ndarray = None

    def __post_init__(self):
        n = self.grid.n_cells
        b = np.zeros(n) if self.b is None else _as_field(self.b, n, "b")
        if np.max(np.abs(b)) > 1 + 1e-12:
            raise ValidationError("bathymetry must be normalised so that max|b| <= 1")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @property
    def flat(self) -> bool:
        return not np.any(self.b)

    @classmethod
    def flat_bottom(cls, grid: Grid1D) -> "Bathymetry":
        return cls(grid)

    @classmethod
    def gaussian_bump(cls, grid: Grid1D, height=1.0, width=1.0, center=None):
        center = grid.length / 2 if center is None else center
        return cls(grid, height * np.exp(-(((grid.x - center) / width) ** 2)))


def depth(zeta, b, params: SimulationParams, check=True) -> np.ndarray:
    h = 1.0 + params.epsilon * np.asarray(zeta) - params.beta * np.asarray(b)
    if check and np.any(h < params.h_min):
        i = int(np.argmin(h))
        raise DepthViolation(f"water depth {h[i]:.3e} < h_min={params.h_min:g} at cell {i}")
    return h


@dataclass(frozen=True, eq=False)
class HydroState:
    zeta: np.ndarray
    vbar: np.ndarray

    def __post_init__(self):
        zeta = _as_field(self.zeta, np.size(self.zeta), "zeta")
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "vbar", _as_field(self.vbar, zeta.size, "vbar"))

    @property
    def n(self) -> int:
        return self.zeta.size

    def check(self, bathy: Bathymetry, params: SimulationParams) -> "HydroState":
        depth(self.zeta, bathy.b, params)
        return self

    def copy(self) -> "HydroState":
        return HydroState(self.zeta.copy(), self.vbar.copy())


@dataclass(frozen=True, eq=False)
class EnstrophyState:
    hydro: HydroState
    phi: np.ndarray

    def __post_init__(self):
        phi = _as_field(self.phi, self.hydro.n, "phi")
        if np.any(phi < 0):
            raise NegativeEnstrophy(f"enstrophy must be nonnegative (min {phi.min():.3e})")
        object.__setattr__(self, "phi", phi)

    @property
    def zeta(self):
        return self.hydro.zeta

    @property
    def vbar(self):
        return self.hydro.vbar


@dataclass(frozen=True, eq=False)
class MultiLayerState:
    zeta: np.ndarray
    layer_fractions: np.ndarray
    layer_velocities: np.ndarray  # shape (N, n_cells)

    def __post_init__(self):
        zeta = _as_field(self.zeta, np.size(self.zeta), "zeta")
        fractions = check_fractions(self.layer_fractions)
        vel = np.array(self.layer_velocities, dtype=float)
        if vel.ndim == 1:
            vel = vel[None, :]
        if vel.shape != (fractions.size, zeta.size):
            raise ValidationError(
                f"layer_velocities must have shape {(fractions.size, zeta.size)}, got {vel.shape}"
            )
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "layer_fractions", fractions)
        object.__setattr__(self, "layer_velocities", vel)

    @property
    def n_layers(self) -> int:
        return self.layer_fractions.size

    def depth_averaged_velocity(self) -> np.ndarray:
        return self.layer_fractions @ self.layer_velocities


def check_fractions(l: Sequence[float]) -> np.ndarray:
    l = np.atleast_1d(np.array(l, dtype=float))
    if l.ndim != 1 or l.size == 0:
        raise FractionError("layer fractions must be a nonempty 1-d array")
    if np.any(l <= 0) or np.any(l > 1):
        raise FractionError("layer fractions must lie in (0, 1]")
    if abs(l.sum() - 1.0) > 1e-12:
        raise FractionError(f"layer fractions must sum to 1 (sum={l.sum()!r})")
    return l


@dataclass(frozen=True, eq=False)
class IKState:
    """Isobe-Kakinuma (N=1) unknowns: surface and the two potentials."""

    zeta: np.ndarray
    phi0: np.ndarray
    phi1: np.ndarray

    def __post_init__(self):
        zeta = _as_field(self.zeta, np.size(self.zeta), "zeta")
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "phi0", _as_field(self.phi0, zeta.size, "phi0"))
        object.__setattr__(self, "phi1", _as_field(self.phi1, zeta.size, "phi1"))


@dataclass(frozen=True, eq=False)
class ScalarState:
    u: np.ndarray
    field_kind: FieldKind = FieldKind.SURFACE_ELEVATION
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "u", _as_field(self.u, np.size(self.u), "u"))
        object.__setattr__(self, "field_kind", FieldKind(self.field_kind))

    def check(self, params: SimulationParams) -> "ScalarState":
        if self.field_kind is FieldKind.SURFACE_ELEVATION:
            if np.any(1 + params.epsilon * self.u < params.h_min):
                raise DepthViolation("1 + epsilon*u falls below h_min")
        return self


def water_height(state: HydroState, bathy: Bathymetry, params: SimulationParams) -> np.ndarray:
    """h = 1 + eps*zeta - beta*b, raising DepthViolation below h_min."""
    if state.n != bathy.b.size:
        raise ValidationError("state and bathymetry sizes differ")
    return depth(state.zeta, bathy.b, params)


def discharge_from_velocity(state: HydroState, bathy: Bathymetry, params: SimulationParams) -> np.ndarray:
    return water_height(state, bathy, params) * state.vbar


def velocity_from_discharge(zeta, Q, bathy: Bathymetry, params: SimulationParams) -> np.ndarray:
    h = depth(zeta, bathy.b, params)
    return np.asarray(Q, dtype=float) / h
