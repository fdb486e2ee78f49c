"""Energies, budgets, run records and inter-model error metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Bathymetry,
    DegenerateFit,
    EnstrophyState,
    HydroState,
    MismatchedRuns,
    SimulationParams,
    ValidationError,
    depth,
)
from .operators import EVEN, ODD, derivative

SCHEMA_VERSION = 1


@dataclass
class EnergyBudget:
    kind: str
    density: np.ndarray
    flux: np.ndarray | None
    total: float
    drift: float = 0.0

    def relative_to(self, reference_total: float) -> "EnergyBudget":
        ref = abs(reference_total) if reference_total else 1.0
        self.drift = (self.total - reference_total) / ref
        return self


def energy_nsw(state: HydroState, bathy: Bathymetry, params: SimulationParams) -> EnergyBudget:
    """e = (zeta^2 + h v^2)/2 and F = (zeta + eps v^2/2) h v."""
    h = depth(state.zeta, bathy.b, params)
    v = state.vbar
    dens = 0.5 * (state.zeta**2 + h * v**2)
    flux = (state.zeta + 0.5 * params.epsilon * v**2) * h * v
    return EnergyBudget("nsw", dens, flux, float(np.sum(dens) * bathy.grid.dx))


def energy_sgn(state: HydroState, bathy: Bathymetry, params: SimulationParams, dt_vbar=None) -> EnergyBudget:
    """SGN energy density (zeta^2 + h v^2 + mu h^3 v_x^2 / 3)/2 (flat bottom).

    The flux needs v_t; it is computed from the SGN right-hand side when
    not supplied.
    """
    if not bathy.flat:
        raise ValidationError("the SGN energy is defined here for flat bottoms")
    grid = bathy.grid
    eps, mu = params.epsilon, params.mu
    h = depth(state.zeta, bathy.b, params)
    v = state.vbar
    vx = derivative(v, grid, 1, ODD)
    dens = 0.5 * (state.zeta**2 + h * v**2 + (mu / 3) * h**3 * vx**2)
    if dt_vbar is None:
        from .models_system import sgn_rhs

        dt_vbar = sgn_rhs(state.zeta, v, bathy.b, params, grid)[1]
    h_t = -eps * derivative(h * v, grid, 1, ODD)
    dt_hvx = h_t * vx + h * derivative(dt_vbar, grid, 1, ODD)
    adv = eps * v * derivative(h * vx, grid, 1, EVEN)
    flux = (state.zeta + 0.5 * eps * v**2 + eps * mu / 6 * h**2 * vx**2 - mu / 3 * h * (dt_hvx + adv)) * h * v
    return EnergyBudget("sgn", dens, flux, float(np.sum(dens) * grid.dx))


def energy_rotational(state: EnstrophyState, params: SimulationParams, b=None, dx: float = 1.0) -> EnergyBudget:
    """Turbulent energy E/2 = h^3 phi / 2 with flux 3/2 E v (one dimension)."""
    b = np.zeros_like(state.zeta) if b is None else b
    h = depth(state.zeta, b, params)
    E = h**3 * state.phi
    dens = 0.5 * E
    return EnergyBudget("rotational", dens, 1.5 * E * state.vbar, float(np.sum(dens) * dx))


def energy_total_enstrophy(state: EnstrophyState, bathy: Bathymetry, params: SimulationParams) -> float:
    """Conserved energy of the SGN-enstrophy system: e_SGN + mu * e_rot, integrated."""
    dx = bathy.grid.dx
    e1 = energy_sgn(state.hydro, bathy, params, dt_vbar=np.zeros_like(state.zeta)).total
    e2 = energy_rotational(state, params, bathy.b, dx).total
    return e1 + params.mu * e2


def nsw_energy_residual(old: HydroState, new: HydroState, bathy: Bathymetry, params: SimulationParams,
                        dt: float, scheme=None, t: float = 0.0) -> np.ndarray:
    """Cell-wise discrete energy balance of one first-order NSW step.

    e_i^{n+1} - e_i^n + dt/dx (G_{i+1/2} - G_{i-1/2}) with the Rusanov
    energy flux G = (F_L + F_R)/2 - a (e_R - e_L)/2.  Nonpositive values
    mean the step only dissipates energy.
    """
    from .models_system import nsw_face_data

    if not bathy.flat:
        raise ValidationError("the discrete energy balance is implemented for flat bottoms")
    fd = nsw_face_data(old, bathy, params, scheme, t)
    eps = params.epsilon

    def e_f(z, v):
        h = 1 + eps * z
        return 0.5 * (z**2 + h * v**2), (z + 0.5 * eps * v**2) * h * v

    eL, FL = e_f(fd.zL, fd.vL)
    eR, FR = e_f(fd.zR, fd.vR)
    G = 0.5 * (FL + FR) - 0.5 * fd.a * (eR - eL)
    e_old = energy_nsw(old, bathy, params).density
    e_new = energy_nsw(new, bathy, params).density
    return e_new - e_old + dt / bathy.grid.dx * np.diff(G)


# ----------------------------------------------------------- run records


@dataclass
class RunRecord:
    """Time series of one model run on a fixed grid."""

    model: str
    x: np.ndarray
    times: list = field(default_factory=list)
    fields: dict = field(default_factory=dict)  # name -> list of arrays
    energies: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def append(self, t: float, energy: float | None = None, **arrays):
        if self.times and not t > self.times[-1]:
            raise ValidationError("run record times must be strictly increasing")
        self.times.append(float(t))
        for name, arr in arrays.items():
            arr = np.array(arr, dtype=float)
            series = self.fields.setdefault(name, [])
            if series and series[0].shape != arr.shape:
                raise ValidationError(f"snapshot shape of {name} changed")
            series.append(arr)
        if energy is not None:
            self.energies.append(float(energy))

    def field_array(self, name: str = "zeta") -> np.ndarray:
        return np.array(self.fields[name])

    @property
    def final(self) -> dict:
        return {k: v[-1] for k, v in self.fields.items()}


GAP_NORMS = ("sup_at_final", "sup_in_time", "l2_in_time")


def model_gap(runA: RunRecord, runB: RunRecord, norm: str = "sup_in_time", name: str = "zeta") -> float:
    """Distance between the surface elevations of two runs."""
    if norm not in GAP_NORMS:
        raise ValidationError(f"norm must be one of {GAP_NORMS}")
    if runA.x.shape != runB.x.shape or not np.allclose(runA.x, runB.x, rtol=0, atol=1e-12):
        raise MismatchedRuns("runs use different grids")
    if len(runA.times) != len(runB.times) or not np.allclose(runA.times, runB.times, rtol=0, atol=1e-12):
        raise MismatchedRuns("runs are sampled at different times")
    if name not in runA.fields or name not in runB.fields:
        raise MismatchedRuns(f"field {name!r} missing from one of the runs")
    diff = runA.field_array(name) - runB.field_array(name)
    if norm == "sup_at_final":
        return float(np.max(np.abs(diff[-1])))
    if norm == "sup_in_time":
        return float(np.max(np.abs(diff)))
    dx = float(runA.x[1] - runA.x[0]) if runA.x.size > 1 else 1.0
    sq = np.sum(diff**2, axis=1) * dx
    t = np.asarray(runA.times)
    if t.size < 2:
        return float(np.sqrt(sq[0]))
    return float(np.sqrt(np.sum(0.5 * (sq[1:] + sq[:-1]) * np.diff(t))))


def convergence_rate(errors, parameters) -> float:
    """Least-squares slope of log(error) against log(parameter)."""
    e = np.asarray(errors, dtype=float)
    p = np.asarray(parameters, dtype=float)
    if e.shape != p.shape or e.ndim != 1 or e.size < 3:
        raise DegenerateFit("need at least three (parameter, error) pairs")
    if np.any(p <= 0) or np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise DegenerateFit("errors and parameters must be positive and finite")
    if np.ptp(np.log(p)) == 0:
        raise DegenerateFit("parameters must not all coincide")
    slope, _ = np.polyfit(np.log(p), np.log(e), 1)
    return float(slope)


def run_summary(record: RunRecord, params: SimulationParams, gaps: dict | None = None) -> dict:
    energies = record.energies
    drift = None
    if len(energies) >= 2 and energies[0] != 0:
        drift = (energies[-1] - energies[0]) / abs(energies[0])
    return {
        "schema_version": SCHEMA_VERSION,
        "model": record.model,
        "params": {"epsilon": params.epsilon, "mu": params.mu, "beta": params.beta},
        "energy_drift": drift,
        "invariant_residuals": {k: float(np.max(np.abs(v))) for k, v in record.residuals.items()},
        "gap_table": gaps or {},
    }


def summary_json(record: RunRecord, params: SimulationParams, gaps: dict | None = None) -> str:
    return json.dumps(run_summary(record, params, gaps), indent=2, sort_keys=True)
