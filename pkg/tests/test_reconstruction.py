import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shallowwave.core import Bathymetry, Grid1D, NotZeroMean, OutOfColumn, SimulationParams, depth
from shallowwave.reconstruction import (
    column_average,
    column_bounds,
    incompressibility_residual,
    pressure_nh_profile,
    profiles_to_csv,
    velocity_profile,
    velocity_profile_rotational,
)

N, L = 64, 20.0


def _fields(grid, seed=0):
    rng = np.random.default_rng(seed)
    k = 2 * np.pi * np.arange(1, 4) / grid.length
    zeta = sum(0.5 * rng.normal() * np.cos(kk * grid.x + rng.random() * 6) for kk in k)
    vbar = sum(0.5 * rng.normal() * np.sin(kk * grid.x + rng.random() * 6) for kk in k)
    vt = sum(0.5 * rng.normal() * np.cos(kk * grid.x + rng.random() * 6) for kk in k)
    return zeta, vbar, vt


@pytest.fixture
def setup():
    g = Grid1D(N, L)
    return g, Bathymetry.flat_bottom(g), SimulationParams(epsilon=0.1, mu=0.1)


def _column(zeta, bathy, params, i, n=9):
    lo, hi = column_bounds(zeta, bathy.b, params, i)
    return np.linspace(lo, hi, n)


def test_constant_velocity(setup):
    g, bathy, p = setup
    zeta = np.zeros(N)
    vbar = np.full(N, 0.4)
    z = _column(zeta, bathy, p, 5)
    V, w = velocity_profile(zeta, vbar, bathy, p, 5, z)
    assert np.allclose(V.values, 0.4, atol=1e-15)
    assert np.allclose(w.values, 0.0, atol=1e-15)
    assert np.array_equal(V.z, z)


@pytest.mark.parametrize("beta", [0.0, 0.3])
def test_vertical_mean_is_vbar(beta):
    g = Grid1D(N, L)
    p = SimulationParams(epsilon=0.1, mu=0.1, beta=beta)
    bathy = Bathymetry.gaussian_bump(g, 1.0, 2.0) if beta else Bathymetry.flat_bottom(g)
    zeta, vbar, _ = _fields(g)
    for i in (3, 20, 32, 50):
        lo, hi = column_bounds(zeta, bathy.b, p, i)
        mean = column_average(lambda z: velocity_profile(zeta, vbar, bathy, p, i, z)[0].values, lo, hi)
        assert abs(mean - vbar[i]) < 1e-10


def test_column_average_exact_for_polynomials():
    assert column_average(lambda z: z**3, -1.0, 1.0) == pytest.approx(0.0, abs=1e-16)
    assert column_average(lambda z: z**2, 0.0, 3.0) == pytest.approx(3.0, abs=1e-14)


def test_bottom_vertical_velocity_flat(setup):
    g, bathy, p = setup
    zeta, vbar, _ = _fields(g, 1)
    for i in range(0, N, 7):
        _, w = velocity_profile(zeta, vbar, bathy, p, i, [-1.0])
        assert w.values[0] == 0.0


def test_bottom_kinematic_condition_with_topography():
    g = Grid1D(N, L)
    zeta, vbar, _ = _fields(g, 2)
    gaps = []
    for mu in (0.1, 0.05):
        p = SimulationParams(epsilon=0.1, mu=mu, beta=0.3)
        bathy = Bathymetry.gaussian_bump(g, 1.0, 3.0)
        bx = -2 * (g.x - L / 2) / 9.0 * bathy.b  # exact slope of the bump
        gap = 0.0
        for i in range(0, N, 5):
            lo, _ = column_bounds(zeta, bathy.b, p, i)
            V, w = velocity_profile(zeta, vbar, bathy, p, i, [lo])
            gap = max(gap, abs(w.values[0] - p.beta * mu * bx[i] * V.values[0]))
        gaps.append(gap)
    # w_b - beta mu b_x V_b is of second order in mu
    assert gaps[1] < gaps[0] / 3.5


def test_pressure_rest_state(setup):
    g, bathy, p = setup
    z = _column(np.zeros(N), bathy, p, 4)
    P = pressure_nh_profile(np.zeros(N), np.zeros(N), np.zeros(N), bathy, p, 4, z)
    assert np.array_equal(P.values, np.zeros_like(z))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, N - 1), st.floats(0.0, 0.4))
def test_pressure_vanishes_at_surface(seed, i, beta):
    g = Grid1D(N, L)
    p = SimulationParams(epsilon=0.1, mu=0.1, beta=beta)
    bathy = Bathymetry.gaussian_bump(g, 1.0, 2.0)
    zeta, vbar, vt = _fields(g, seed)
    top = p.epsilon * zeta[i]
    P = pressure_nh_profile(zeta, vbar, vt, bathy, p, i, [top])
    assert P.values[0] == 0.0
    Ps = pressure_nh_profile(zeta, vbar, vt, bathy, p, i, [top], scaled=True)
    assert Ps.values[0] == 0.0


def test_pressure_scaling(setup):
    g, bathy, p = setup
    zeta, vbar, vt = _fields(g, 3)
    z = _column(zeta, bathy, p, 10)
    a = pressure_nh_profile(zeta, vbar, vt, bathy, p, 10, z).values
    b = pressure_nh_profile(zeta, vbar, vt, bathy, p, 10, z, scaled=True).values
    assert np.allclose(a, p.epsilon * b, rtol=1e-15, atol=0)


def test_pressure_single_mode_closed_form(setup):
    """Linear (eps -> 0 in the bracket) flat case: P/eps = -mu (h^2 - s^2)/2 d_x v_t."""
    g, bathy, p = setup
    k0 = 2 * np.pi * 2 / L
    vt = np.cos(k0 * g.x)
    zeta = np.zeros(N)
    i = 7
    z = _column(zeta, bathy, p, i)
    P = pressure_nh_profile(zeta, np.zeros(N), vt, bathy, p, i, z, scaled=True)
    s = 1 + z
    expected = -p.mu * 0.5 * (1 - s**2) * (-k0 * np.sin(k0 * g.x[i]))
    assert np.allclose(P.values, expected, atol=1e-13)


def test_out_of_column(setup):
    g, bathy, p = setup
    zeta, vbar, vt = _fields(g)
    with pytest.raises(OutOfColumn):
        velocity_profile(zeta, vbar, bathy, p, 0, [-1.5])
    with pytest.raises(OutOfColumn):
        pressure_nh_profile(zeta, vbar, vt, bathy, p, 0, [p.epsilon * zeta[0] + 0.1])


def test_rotational_zero_shear_matches(setup):
    g, bathy, p = setup
    zeta, vbar, _ = _fields(g)
    z = _column(zeta, bathy, p, 9)
    V0, w0 = velocity_profile(zeta, vbar, bathy, p, 9, z)
    V1, w1 = velocity_profile_rotational(zeta, vbar, lambda zz: np.zeros_like(zz), bathy, p, 9, z)
    assert np.array_equal(V0.values, V1.values) and np.array_equal(w0.values, w1.values)


def test_rotational_rejects_nonzero_mean(setup):
    g, bathy, p = setup
    zeta, vbar, _ = _fields(g)
    z = _column(zeta, bathy, p, 9)
    with pytest.raises(NotZeroMean):
        velocity_profile_rotational(zeta, vbar, lambda zz: np.ones_like(zz), bathy, p, 9, z)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.integers(0, N - 1))
def test_rotational_mean_preserved(coeffs, i):
    g = Grid1D(N, L)
    bathy = Bathymetry.flat_bottom(g)
    p = SimulationParams(epsilon=0.1, mu=0.1)
    zeta, vbar, _ = _fields(g, 4)
    lo, hi = column_bounds(zeta, bathy.b, p, i)

    def raw(z):
        t = (z - lo) / (hi - lo)
        return coeffs[0] * t + coeffs[1] * t**2 + coeffs[2] * t**3

    m = column_average(raw, lo, hi)

    def shear(z):
        return raw(z) - m

    mean = column_average(lambda z: velocity_profile_rotational(zeta, vbar, shear, bathy, p, i, z)[0].values, lo, hi)
    assert abs(mean - vbar[i]) < 1e-10


def test_linear_shear_surface_drifter(setup):
    """Constant vorticity: the surface exceeds the mean by sqrt(mu) * omega0 * h / 2."""
    g, bathy, p = setup
    zeta = 0.5 * np.cos(2 * np.pi * g.x / L)
    vbar = np.full(N, 0.2)
    omega0 = 0.7
    i = 12
    lo, hi = column_bounds(zeta, bathy.b, p, i)
    h = hi - lo

    def shear(z):
        return omega0 * (z - lo - 0.5 * h)

    V, _ = velocity_profile_rotational(zeta, vbar, shear, bathy, p, i, [hi])
    assert V.values[0] - vbar[i] == pytest.approx(np.sqrt(p.mu) * omega0 * h / 2, abs=1e-14)


def test_incompressibility_order():
    g = Grid1D(N, L)
    bathy = Bathymetry.flat_bottom(g)
    k0 = 2 * np.pi * 2 / L
    zeta = 0.3 * np.cos(k0 * g.x)
    vbar = 0.3 * np.sin(k0 * g.x)
    mus = np.array([0.1, 0.05, 0.025])
    norms = []
    for mu in mus:
        p = SimulationParams(epsilon=0.1, mu=mu)
        norms.append(np.max(np.abs(incompressibility_residual(zeta, vbar, bathy, p, [0.0, 0.3, 0.7, 1.0]))))
    slopes = np.diff(np.log(norms)) / np.diff(np.log(mus))
    assert np.all(slopes >= 1.9)


def test_profiles_csv():
    text = profiles_to_csv([(0.0, -1.0, 0.5, 0.0, 0.0), (0.0, 0.0, 0.25, -0.1, 0.0)])
    lines = text.strip().splitlines()
    assert lines[0] == "x,z,V,w,P_NH"
    assert len(lines) == 3
    assert [float(v) for v in lines[2].split(",")] == [0.0, 0.0, 0.25, -0.1, 0.0]


def test_depth_used_in_bounds(setup):
    g, bathy, p = setup
    zeta, _, _ = _fields(g)
    lo, hi = column_bounds(zeta, bathy.b, p, 3)
    assert hi - lo == pytest.approx(depth(zeta, bathy.b, p)[3], abs=1e-15)


def test_irrotational_with_topography():
    """dV/dz = dw/dx at a fixed height crossing every column."""
    from shallowwave.operators import spectral_derivative

    g = Grid1D(N, L)
    p = SimulationParams(epsilon=0.1, mu=0.1, beta=0.3)
    bathy = Bathymetry.gaussian_bump(g, 1.0, 2.0)  # decays to 1e-11 at the ends
    zeta, vbar, _ = _fields(g, 5)
    vbar = np.fft.irfft(np.fft.rfft(vbar) * (np.arange(N // 2 + 1) < N // 3), n=N)
    z0, dz = -0.5, 1e-3
    w = np.array([velocity_profile(zeta, vbar, bathy, p, i, [z0])[1].values[0] for i in range(N)])
    dVdz = np.array([
        np.diff(velocity_profile(zeta, vbar, bathy, p, i, [z0 - dz, z0 + dz])[0].values)[0] / (2 * dz)
        for i in range(N)
    ])
    # V is quadratic in z, so the centred difference is exact up to round-off
    assert np.max(np.abs(dVdz - spectral_derivative(w, g))) < 1e-9
