import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shallowwave.core import (
    Bathymetry,
    DegenerateFit,
    EnstrophyState,
    Grid1D,
    HydroState,
    MismatchedRuns,
    SimulationParams,
    ValidationError,
)
from shallowwave.diagnostics import (
    SCHEMA_VERSION,
    RunRecord,
    convergence_rate,
    energy_nsw,
    energy_rotational,
    energy_sgn,
    model_gap,
    nsw_energy_residual,
    run_summary,
    summary_json,
)
from shallowwave.models_system import nsw_step, sgn_step

N = 64


@pytest.fixture
def g():
    return Grid1D(N, 20.0)


def test_energy_nsw_examples(g):
    bathy = Bathymetry.flat_bottom(g)
    p = SimulationParams(epsilon=0.1, mu=0.1)
    rest = energy_nsw(HydroState(np.zeros(N), np.zeros(N)), bathy, p)
    assert rest.total == 0.0 and np.all(rest.flux == 0)
    e = energy_nsw(HydroState(np.ones(N), np.zeros(N)), bathy, p)
    assert np.allclose(e.density, 0.5, atol=1e-15)
    assert e.total == pytest.approx(0.5 * 20.0, rel=1e-14)


def test_energy_nsw_flux_formula(g):
    bathy = Bathymetry.flat_bottom(g)
    p = SimulationParams(epsilon=0.2, mu=0.1)
    z, v = np.full(N, 0.5), np.full(N, 0.3)
    e = energy_nsw(HydroState(z, v), bathy, p)
    h = 1.1
    assert np.allclose(e.flux, (0.5 + 0.1 * 0.09) * h * 0.3, atol=1e-15)


def test_energy_sgn_rest_and_single_mode(g):
    bathy = Bathymetry.flat_bottom(g)
    p = SimulationParams(epsilon=0.1, mu=0.1)
    assert energy_sgn(HydroState(np.zeros(N), np.zeros(N)), bathy, p).total == 0.0
    k0 = 2 * np.pi * 3 / 20.0
    v = 0.4 * np.sin(k0 * g.x)
    vx = 0.4 * k0 * np.cos(k0 * g.x)
    e = energy_sgn(HydroState(np.zeros(N), v), bathy, p)
    expected = 0.5 * np.sum(v**2 + p.mu / 3 * vx**2) * g.dx
    assert e.total == pytest.approx(expected, rel=1e-13)


def test_energy_sgn_coefficient_is_conserved_one(g):
    """The mu/3 density is conserved by SGN; the mu/6 alternative drifts."""
    bathy = Bathymetry.flat_bottom(g)
    p = SimulationParams(epsilon=0.1, mu=0.3)
    s = HydroState(np.exp(-((g.x - 10) / 2) ** 2), np.zeros(N))

    def alt(state):
        h = 1 + p.epsilon * state.zeta
        k = 2 * np.pi * np.fft.rfftfreq(N, d=g.dx)
        vx = np.fft.irfft(1j * k * np.fft.rfft(state.vbar), n=N)
        return 0.5 * np.sum(state.zeta**2 + h * state.vbar**2 + p.mu / 6 * h**3 * vx**2) * g.dx

    e0, a0 = energy_sgn(s, bathy, p).total, alt(s)
    for _ in range(40):
        s = sgn_step(s, bathy, p, 0.05)
    assert abs(energy_sgn(s, bathy, p).total - e0) < 1e-7 * e0
    assert abs(alt(s) - a0) > 1e-4 * a0


def test_energy_sgn_local_budget(g):
    """d/dt e + d/dx F = 0 pointwise, with e_t from the SGN right-hand side."""
    from shallowwave.models_system import sgn_rhs
    from shallowwave.operators import spectral_derivative

    bathy = Bathymetry.flat_bottom(g)
    p = SimulationParams(epsilon=0.1, mu=0.1)
    s = HydroState(0.5 * np.exp(-((g.x - 10) / 2) ** 2), 0.3 * np.exp(-((g.x - 9) / 2.5) ** 2))
    zt, vt, _, _ = sgn_rhs(s.zeta, s.vbar, bathy.b, p, g)
    e = energy_sgn(s, bathy, p, dt_vbar=vt)
    delta = 1e-6
    sp = HydroState(s.zeta + delta * zt, s.vbar + delta * vt)
    sm = HydroState(s.zeta - delta * zt, s.vbar - delta * vt)
    et = (energy_sgn(sp, bathy, p).density - energy_sgn(sm, bathy, p).density) / (2 * delta)
    assert np.max(np.abs(et + spectral_derivative(e.flux, g))) < 1e-6


def test_energy_sgn_refuses_topography(g):
    p = SimulationParams(epsilon=0.1, mu=0.1, beta=0.2)
    with pytest.raises(ValidationError):
        energy_sgn(HydroState(np.zeros(N), np.zeros(N)), Bathymetry.gaussian_bump(g), p)


def test_energy_rotational_examples():
    p = SimulationParams(epsilon=0.0, mu=0.1)
    s = EnstrophyState(HydroState(np.zeros(8), np.ones(8)), np.full(8, 2.0))
    e = energy_rotational(s, p)
    assert np.array_equal(e.density, np.ones(8))
    assert np.array_equal(e.flux, np.full(8, 3.0))
    zero = energy_rotational(EnstrophyState(HydroState(np.zeros(8), np.ones(8)), np.zeros(8)), p)
    assert zero.total == 0.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=8, max_size=8), st.lists(st.floats(-3, 3), min_size=8, max_size=8))
def test_energy_rotational_nonnegative(phi, zeta):
    p = SimulationParams(epsilon=0.1, mu=0.1)
    e = energy_rotational(EnstrophyState(HydroState(np.array(zeta), np.zeros(8)), np.array(phi)), p)
    assert np.all(e.density >= 0)


def test_nsw_energy_residual_rest_is_zero():
    g = Grid1D(40, 10.0, "wall")
    bathy = Bathymetry.flat_bottom(g)
    p = SimulationParams(epsilon=0.5, mu=0.1)
    s = HydroState(np.zeros(40), np.zeros(40))
    new = nsw_step(s, bathy, p, 0.05)
    assert np.array_equal(nsw_energy_residual(s, new, bathy, p, 0.05), np.zeros(40))


def _record(model, x, fields, times=None):
    r = RunRecord(model, x)
    for i, f in enumerate(fields):
        r.append(times[i] if times else 0.1 * i, energy=float(np.sum(f**2)), zeta=f)
    return r


def test_run_record_invariants():
    r = RunRecord("nsw", np.arange(4.0))
    r.append(0.0, zeta=np.zeros(4))
    with pytest.raises(ValidationError):
        r.append(0.0, zeta=np.zeros(4))
    with pytest.raises(ValidationError):
        r.append(1.0, zeta=np.zeros(5))


def test_model_gap_examples():
    x = np.linspace(0, 1, 5)
    a = _record("a", x, [np.zeros(5), np.ones(5)])
    b = _record("b", x, [np.zeros(5), np.full(5, 3.0)])
    for norm in ("sup_at_final", "sup_in_time", "l2_in_time"):
        assert model_gap(a, a, norm) == 0.0
    assert model_gap(a, b, "sup_at_final") == 2.0
    assert model_gap(a, b, "sup_in_time") == 2.0
    # squared L2 in space: 0 then 4*5*0.25 = 5; trapezoid over dt = 0.1 gives 0.25
    assert model_gap(a, b, "l2_in_time") == pytest.approx(0.5, rel=1e-14)
    with pytest.raises(ValidationError):
        model_gap(a, b, "max")


def test_model_gap_mismatches():
    x = np.linspace(0, 1, 5)
    a = _record("a", x, [np.zeros(5), np.ones(5)])
    with pytest.raises(MismatchedRuns):
        model_gap(a, _record("b", np.linspace(0, 2, 5), [np.zeros(5), np.ones(5)]))
    with pytest.raises(MismatchedRuns):
        model_gap(a, _record("b", x, [np.zeros(5), np.ones(5)], times=[0.0, 0.2]))
    with pytest.raises(MismatchedRuns):
        model_gap(a, _record("b", x, [np.zeros(5)]))
    with pytest.raises(MismatchedRuns):
        model_gap(a, a, name="vbar")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["sup_at_final", "sup_in_time", "l2_in_time"]))
def test_model_gap_pseudometric(seed, norm):
    rng = np.random.default_rng(seed)
    x = np.linspace(0, 1, 6)
    runs = [_record(m, x, list(rng.normal(size=(3, 6)))) for m in "abc"]
    a, b, c = runs
    assert model_gap(a, b, norm) == model_gap(b, a, norm)
    assert model_gap(a, c, norm) <= model_gap(a, b, norm) + model_gap(b, c, norm) + 1e-12


def test_convergence_rate_examples():
    p = np.array([0.1, 0.05, 0.025, 0.0125])
    assert convergence_rate(p**2, p) == pytest.approx(2.0, abs=1e-10)
    assert convergence_rate(3.7 * p, p) == pytest.approx(1.0, abs=1e-10)
    rng = np.random.default_rng(0)
    noisy = p**2 * np.exp(0.05 * rng.normal(size=4))
    assert abs(convergence_rate(noisy, p) - 2.0) < 0.1


def test_convergence_rate_degenerate():
    with pytest.raises(DegenerateFit):
        convergence_rate([1.0, 0.5], [0.1, 0.05])
    with pytest.raises(DegenerateFit):
        convergence_rate([1.0, 0.5, 0.0], [0.1, 0.05, 0.025])
    with pytest.raises(DegenerateFit):
        convergence_rate([1.0, 0.5, 0.2], [0.1, 0.1, 0.1])
    with pytest.raises(DegenerateFit):
        convergence_rate([1.0, np.nan, 0.2], [0.1, 0.05, 0.025])


def test_summary_golden_schema():
    x = np.linspace(0, 1, 5)
    r = _record("sgn", x, [np.ones(5), np.full(5, 2.0)])
    r.residuals["mass"] = np.array([0.0, -3e-15])
    p = SimulationParams(epsilon=0.1, mu=0.2, beta=0.0)
    data = json.loads(summary_json(r, p, {"nsw:sgn": 0.1}))
    assert sorted(data) == ["energy_drift", "gap_table", "invariant_residuals", "model", "params", "schema_version"]
    assert data["schema_version"] == SCHEMA_VERSION == 1
    assert data["model"] == "sgn"
    assert data["params"] == {"epsilon": 0.1, "mu": 0.2, "beta": 0.0}
    assert data["energy_drift"] == pytest.approx(3.0)
    assert data["invariant_residuals"] == {"mass": 3e-15}
    assert data["gap_table"] == {"nsw:sgn": 0.1}
    assert run_summary(RunRecord("a", x), p)["energy_drift"] is None
