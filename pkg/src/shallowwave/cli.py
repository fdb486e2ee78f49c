"""Scenario runner and comparison harness.

Configuration is an INI file with the sections [model], [params], [grid],
[ic], [bathymetry], [output] and optionally [compare].  Any key can be
overridden from the command line with ``--set section.key=value``.

Exit status: 0 on success, 2 for invalid input, 3 for numerical failure.
Errors are also reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    Bathymetry,
    BoundaryUnsupported,
    CFLViolation,
    ConstraintDrift,
    DegenerateFit,
    DepthViolation,
    EigenFailure,
    EnstrophyState,
    FieldKind,
    FractionError,
    Grid1D,
    HydroState,
    IllPosedMode,
    MismatchedRuns,
    MultiLayerState,
    NegativeEnstrophy,
    NotZeroMean,
    OutOfColumn,
    ScalarState,
    ShallowWaveError,
    SimulationParams,
    SolveFailure,
    StabilityViolation,
    ValidationError,
)
from . import diagnostics as dg
from . import dispersion as disp
from . import models_scalar as ms
from . import models_system as sy
from . import reconstruction as rc
from .operators import ODD, derivative, spectral_derivative

OUTPUT_ENV = "SHALLOWWAVE_OUTPUT"
SCHEMA_VERSION = dg.SCHEMA_VERSION

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

_VALIDATION_ERRORS = (ValidationError, FractionError, BoundaryUnsupported, MismatchedRuns,
                      OutOfColumn, NotZeroMean, configparser.Error, FileNotFoundError,
                      KeyError, ValueError)
_NUMERICAL_ERRORS = (CFLViolation, DepthViolation, StabilityViolation, NegativeEnstrophy, ConstraintDrift,
                     SolveFailure, EigenFailure, IllPosedMode, DegenerateFit)

DEFAULTS = {
    "model": {"kinds": "nsw", "order": "1", "cfl": "0.5", "left": "wall", "right": "wall",
              "abcd": "0, 0, 0, 0.3333333333333333", "cp": "0", "cr": "0", "alpha": "0.5",
              "layers": "2", "generating_amplitude": "0", "generating_period": "1"},
    "params": {"epsilon": "0.1", "mu": "0.1", "beta": "0"},
    "grid": {"n": "256", "length": "40", "boundary": "periodic"},
    "ic": {"type": "GaussianHump", "amplitude": "1", "width": "2"},
    "bathymetry": {"type": "Flat", "height": "1", "width": "1"},
    "output": {"t_end": "1", "dt": "0.01", "every": "10", "name": "run", "seed": "0"},
    "compare": {"norm": "sup_in_time", "pairs": "", "sweep_mu": "", "eps_equals_mu": "true"},
}


class RunFailure(ShallowWaveError):
    """A solver error tagged with the model and time at which it happened."""

    def __init__(self, model: str, t: float, cause: Exception):
        super().__init__(f"{model} failed at t={t:.6g}: {cause}")
        self.model, self.t, self.cause = model, t, cause


# ------------------------------------------------------------ config


def load_config(path=None, overrides=(), text: str | None = None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    cfg.read_dict(DEFAULTS)
    if text is not None:
        cfg.read_string(text)
    elif path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file {path} not found")
        cfg.read(path)
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot:
            raise ValidationError(f"--set expects section.key=value, got {item!r}")
        if not cfg.has_section(section):
            cfg.add_section(section)
        cfg.set(section, option, value.strip())
    return cfg


def config_hash(cfg: configparser.ConfigParser) -> str:
    canon = json.dumps({s: dict(sorted(cfg[s].items())) for s in sorted(cfg.sections())}, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _names(text: str) -> list[str]:
    return [x.strip().lower() for x in text.split(",") if x.strip()]


def make_params(cfg) -> SimulationParams:
    s = cfg["params"]
    return SimulationParams(epsilon=s.getfloat("epsilon"), mu=s.getfloat("mu"), beta=s.getfloat("beta"))


def make_grid(cfg) -> Grid1D:
    s = cfg["grid"]
    return Grid1D(s.getint("n"), s.getfloat("length"), s.get("boundary").strip().lower())


def _read_columns(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path} holds no data rows")
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def make_bathymetry(cfg, grid: Grid1D) -> Bathymetry:
    s = cfg["bathymetry"]
    kind = s.get("type").strip().lower()
    if kind == "flat":
        return Bathymetry.flat_bottom(grid)
    if kind == "gaussianbump":
        return Bathymetry.gaussian_bump(grid, s.getfloat("height"), s.getfloat("width"),
                                        s.getfloat("center", fallback=grid.length / 2))
    if kind == "fromfile":
        cols = _read_columns(s.get("path"))
        return Bathymetry(grid, cols["b"])
    raise ValidationError(f"unknown bathymetry type {s.get('type')!r}")


def make_initial(cfg, grid: Grid1D, params: SimulationParams, bathy: Bathymetry):
    """Surface elevation and depth-averaged velocity of the initial condition."""
    s = cfg["ic"]
    kind = s.get("type").strip().lower()
    x, L = grid.x, grid.length
    zero = np.zeros(grid.n_cells)
    if kind == "reststate":
        return zero, zero.copy()
    if kind == "gaussianhump":
        c = s.getfloat("center", fallback=L / 2)
        return s.getfloat("amplitude") * np.exp(-(((x - c) / s.getfloat("width")) ** 2)), zero
    if kind == "dambreak":
        xi = s.getfloat("interface", fallback=L / 2)
        return np.where(x < xi, s.getfloat("left"), s.getfloat("right")), zero
    if kind == "simplewaveright":
        if not bathy.flat:
            raise ValidationError("SimpleWaveRight needs a flat bottom")
        c = s.getfloat("center", fallback=L / 2)
        zeta = s.getfloat("amplitude") * np.exp(-(((x - c) / s.getfloat("width")) ** 2))
        return zeta, ms._sqrt_ratio(zeta, params.epsilon)  # R- = 0
    if kind == "singlemode":
        if not grid.periodic:
            raise ValidationError("SingleMode needs a periodic grid")
        k = s.getfloat("k")
        m = k * L / (2 * np.pi)
        if abs(m - round(m)) > 1e-9:
            raise ValidationError(f"k={k} is not a wavenumber of the periodic grid")
        return s.getfloat("amplitude") * np.cos(k * x), zero
    if kind == "fromfile":
        cols = _read_columns(s.get("path"))
        return cols["zeta"], cols.get("v", zero)
    raise ValidationError(f"unknown initial condition {s.get('type')!r}")


def _boundary(name: str, cfg):
    name = name.strip().lower()
    if name == "wall":
        return sy.Wall()
    if name == "transparent":
        return sy.TransparentNSW()
    if name == "generating":
        a = cfg["model"].getfloat("generating_amplitude")
        T = cfg["model"].getfloat("generating_period")
        return sy.Generating(lambda t: a * np.sin(2 * np.pi * t / T))
    if name == "periodic":
        return sy.Periodic()
    raise ValidationError(f"unknown boundary condition {name!r}")


# ------------------------------------------------------------ model runners

SPECTRAL_ONLY = {"abcd", "boussinesq", "peregrine", "nsw_spectral", "multilayer_boussinesq", "ik",
                 "linear_reference", "linear_fulldisp_zeta", "whitham_zeta", "whitham_v", "nsw_turbulent_boussinesq"}
OPEN_BOUNDARY_MODELS = {"nsw", "multilayer_nsw", "nsw_turbulent"}
FLAT_ONLY = {"abcd", "boussinesq", "sgn_vorticity", "sgn_wave_breaking", "nsw_turbulent",
             "nsw_turbulent_boussinesq", "multilayer_boussinesq", "ik", "linear_reference"}
SCALAR_ALIASES = {"kdv": ("kdvbbm", 1 / 6), "bbm": ("kdvbbm", 0.0)}
CLI_MODELS = (
    "nsw", "nsw_spectral", "abcd", "boussinesq", "peregrine", "sgn", "sgn_vorticity", "sgn_wave_breaking",
    "nsw_turbulent", "nsw_turbulent_boussinesq", "multilayer_nsw", "multilayer_boussinesq", "ik",
    "linear_reference", "kdv", "bbm",
) + ms.SCALAR_KINDS


def validate(cfg) -> None:
    """Reject unsupported model / grid / boundary / bathymetry combinations before running."""
    grid = make_grid(cfg)
    kinds = _names(cfg["model"].get("kinds"))
    if not kinds:
        raise ValidationError("no models configured")
    flat = cfg["bathymetry"].get("type").strip().lower() == "flat"
    left, right = (cfg["model"].get(k).strip().lower() for k in ("left", "right"))
    for kind in kinds:
        if kind not in CLI_MODELS:
            raise ValidationError(f"unknown model {kind!r}; choose from {', '.join(CLI_MODELS)}")
        if kind in SPECTRAL_ONLY and not grid.periodic:
            raise ValidationError(f"unsupported pair ({kind}, {grid.boundary.value} grid): model needs a periodic grid")
        if not grid.periodic:
            for bc in (left, right):
                if bc in ("transparent", "generating") and kind not in OPEN_BOUNDARY_MODELS:
                    raise ValidationError(f"unsupported pair ({kind}, {bc} boundary)")
        if kind in FLAT_ONLY and not flat:
            raise ValidationError(f"unsupported pair ({kind}, non-flat bathymetry)")
    o = cfg["output"]
    if not o.getfloat("dt") > 0 or o.getfloat("t_end") < 0 or o.getint("every") < 1:
        raise ValidationError("need dt > 0, t_end >= 0 and every >= 1")


@dataclass
class Runner:
    """Uniform wrapper: a native state, a step and accessors for output fields."""

    kind: str
    state: object
    stepper: object
    zeta_of: object
    v_of: object
    energy_of: object = None
    extra_of: object = None

    def step(self, dt, t):
        self.state = self.stepper(self.state, dt, t)


def make_runner(kind: str, cfg, grid, params, bathy, zeta0, v0) -> Runner:
    m = cfg["model"]
    scheme = sy.NSWScheme(order=m.getint("order"), cfl=m.getfloat("cfl"),
                          left=_boundary(m.get("left"), cfg), right=_boundary(m.get("right"), cfg))
    hydro = HydroState(zeta0, v0)

    def hz(s):
        return s.zeta

    def hv(s):
        return s.vbar

    def e_nsw(s):
        return dg.energy_nsw(s if isinstance(s, HydroState) else s.hydro, bathy, params).total

    if kind == "nsw":
        return Runner(kind, hydro, lambda s, dt, t: sy.nsw_step(s, bathy, params, dt, scheme, t), hz, hv, e_nsw)
    if kind == "nsw_spectral":
        return Runner(kind, hydro, lambda s, dt, t: sy.nsw_spectral_step(s, bathy, params, dt), hz, hv, e_nsw)
    if kind in ("abcd", "boussinesq"):
        coeffs = tuple(_floats(m.get("abcd"))) if kind == "abcd" else (0.0, 0.0, 0.0, 1 / 3)
        if len(coeffs) != 4:
            raise ValidationError("abcd needs four coefficients")
        return Runner(kind, hydro, lambda s, dt, t: sy.abcd_step(s, coeffs, bathy, params, dt), hz, hv)
    if kind == "peregrine":
        return Runner(kind, hydro, lambda s, dt, t: sy.peregrine_step(s, bathy, params, dt), hz, hv)
    if kind == "sgn":
        energy = (lambda s: dg.energy_sgn(s, bathy, params).total) if bathy.flat else None
        return Runner(kind, hydro, lambda s, dt, t: sy.sgn_step(s, bathy, params, dt), hz, hv, energy)
    phi0 = np.full(grid.n_cells, float(cfg["ic"].get("phi", "0")))
    if kind in ("sgn_vorticity", "sgn_wave_breaking"):
        Cp, Cr = (m.getfloat("cp"), m.getfloat("cr")) if kind == "sgn_wave_breaking" else (0.0, 0.0)

        def step(s, dt, t):
            return sy.wave_breaking_step(s, params, Cp, Cr, dt, bathy=bathy)

        return Runner(kind, EnstrophyState(hydro, phi0), step, hz, hv,
                      lambda s: dg.energy_total_enstrophy(s, bathy, params), lambda s: {"phi": s.phi})
    if kind in ("nsw_turbulent", "nsw_turbulent_boussinesq"):
        bous = kind.endswith("boussinesq")
        alpha = m.getfloat("alpha")

        def step(s, dt, t):
            return sy.nsw_turbulent_step(s, bathy, params, alpha, dt, scheme, boussinesq=bous, t=t)

        return Runner(kind, EnstrophyState(hydro, phi0), step, hz, hv, None, lambda s: {"phi": s.phi})
    if kind in ("multilayer_nsw", "multilayer_boussinesq"):
        N = m.getint("layers")
        l = np.full(N, 1.0 / N)
        l[-1] = 1.0 - l[:-1].sum()
        state = MultiLayerState(zeta0, l, np.tile(v0, (N, 1)))
        if kind == "multilayer_nsw":
            def step(s, dt, t):
                return sy.multilayer_nsw_step(s, bathy, params, dt, scheme, t)
        else:
            def step(s, dt, t):
                return sy.multilayer_boussinesq_step(s, params, dt, grid)
        return Runner(kind, state, step, hz, lambda s: s.depth_averaged_velocity(), None,
                      lambda s: {f"v{j}": vj for j, vj in enumerate(s.layer_velocities)})
    if kind == "ik":
        state = sy.ik_initial_state(zeta0, np.zeros(grid.n_cells), params, grid)
        return Runner(kind, state, lambda s, dt, t: sy.ik_step(s, params, dt, grid), hz,
                      lambda s: spectral_derivative(s.phi0, grid),
                      None, lambda s: {"phi0": s.phi0, "phi1": s.phi1})
    if kind == "linear_reference":
        psi0 = np.zeros(grid.n_cells)
        state = (0.0, zeta0.copy(), psi0)

        def step(s, dt, t):
            z, _ = sy.linear_reference_evolve(zeta0, psi0, params, grid, s[0] + dt)
            return (s[0] + dt, z, None)

        return Runner(kind, state, step, lambda s: s[1], lambda s: np.zeros(grid.n_cells))
    # scalar models
    base, p = SCALAR_ALIASES.get(kind, (kind, None))
    if p is None and base in ("kdvbbm", "ch_v", "ch_zeta", "ch_zeta_expanded"):
        p = m.getfloat("p")
    spec = ms.ScalarModelSpec(base, params, grid, p=p)
    velocity = spec.field_kind is FieldKind.VELOCITY
    u0 = v0 if velocity and np.any(v0) else (ms._sqrt_ratio(zeta0, params.epsilon) if velocity else zeta0)
    state = ScalarState(u0, spec.field_kind)

    def companion(s):
        return ms.companion_field(s, spec)

    return Runner(kind, state, lambda s, dt, t: ms.scalar_step(s, spec, dt),
                  companion if velocity else (lambda s: s.u), (lambda s: s.u) if velocity else companion)


def simulate(kind: str, cfg, params: SimulationParams | None = None) -> dg.RunRecord:
    """Run one model of the scenario and return its record (nothing is written)."""
    grid = make_grid(cfg)
    params = params or make_params(cfg)
    bathy = make_bathymetry(cfg, grid)
    zeta0, v0 = make_initial(cfg, grid, params, bathy)
    o = cfg["output"]
    dt, t_end, every = o.getfloat("dt"), o.getfloat("t_end"), o.getint("every")
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValidationError("t_end must be an integer multiple of dt")
    runner = make_runner(kind, cfg, grid, params, bathy, zeta0, v0)
    rec = dg.RunRecord(kind, grid.x.copy(), meta={"config_hash": config_hash(cfg), "dt": dt})

    def snap(t):
        s = runner.state
        extra = runner.extra_of(s) if runner.extra_of else {}
        energy = runner.energy_of(s) if runner.energy_of else None
        rec.append(t, energy, zeta=runner.zeta_of(s), v=runner.v_of(s), **extra)

    snap(0.0)
    t = 0.0
    for i in range(1, n_steps + 1):
        try:
            runner.step(dt, t)
        except ShallowWaveError as exc:
            if isinstance(exc, _NUMERICAL_ERRORS + (RunFailure,)):
                raise RunFailure(kind, t, exc) from exc
            raise
        t = i * dt
        if i % every == 0 or i == n_steps:
            snap(t)
    rec.meta["bathymetry"] = bathy.b.copy()
    return rec


# ------------------------------------------------------------ output


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "shallowwave_runs"))


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_record(rec: dg.RunRecord, cfg, directory: Path) -> Path:
    """Snapshots as CSV plus a JSON manifest; every file is written atomically."""
    params = make_params(cfg)
    names = list(rec.fields)
    files = []
    for i, t in enumerate(rec.times):
        fname = f"snapshot_{i:05d}.csv"
        cols = [rec.x] + [rec.fields[n][i] for n in names]
        atomic_write(directory / fname, _csv_text(["x"] + names, cols))
        files.append({"time": t, "file": fname})
    b = rec.meta.get("bathymetry", np.zeros_like(rec.x))
    atomic_write(directory / "bathymetry.csv", _csv_text(["x", "b"], [rec.x, b]))
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "model": rec.model,
        "config_hash": rec.meta.get("config_hash"),
        "config": {s: dict(cfg[s]) for s in cfg.sections()},
        "fields": names,
        "snapshots": files,
        "energies": rec.energies,
        "summary": dg.run_summary(rec, params),
    }
    atomic_write(directory / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def cmd_run(cfg) -> dict:
    validate(cfg)
    root = output_root() / cfg["output"].get("name")
    out = {}
    for kind in _names(cfg["model"].get("kinds")):
        rec = simulate(kind, cfg)
        out[kind] = str(write_record(rec, cfg, root / kind))
    return {"status": "ok", "outputs": out}


# ------------------------------------------------------------ compare


def _pairs(cfg, kinds):
    text = cfg["compare"].get("pairs")
    pairs = []
    for item in [p for p in text.split(",") if p.strip()]:
        a, sep, b = item.partition(":")
        if not sep:
            raise ValidationError(f"pairs are written modelA:modelB, got {item!r}")
        pairs.append((a.strip().lower(), b.strip().lower()))
    if not pairs:
        pairs = [(kinds[i], kinds[j]) for i in range(len(kinds)) for j in range(i + 1, len(kinds))]
    return pairs


def compare_records(records: dict, pairs, norm: str) -> dict:
    gaps = {}
    for a, b in pairs:
        if a not in records or b not in records:
            raise MismatchedRuns(f"pair ({a}, {b}) refers to a model that was not run")
        gaps[f"{a}:{b}"] = dg.model_gap(records[a], records[b], norm)
    return gaps


def cmd_compare(cfg) -> dict:
    validate(cfg)
    kinds = _names(cfg["model"].get("kinds"))
    pairs = _pairs(cfg, kinds)
    for a, b in pairs:
        if a not in kinds or b not in kinds:
            raise MismatchedRuns(f"pair ({a}, {b}) refers to a model that is not configured")
    norm = cfg["compare"].get("norm").strip()
    base = make_params(cfg)
    sweep = _floats(cfg["compare"].get("sweep_mu")) or [base.mu]
    tie = cfg["compare"].getboolean("eps_equals_mu")
    rows = []
    for mu in sweep:
        params = base.with_(mu=mu, epsilon=mu if tie else base.epsilon)
        recs = {k: simulate(k, cfg, params) for k in kinds}
        for pair, gap in compare_records(recs, pairs, norm).items():
            rows.append({"pair": pair, "mu": mu, "epsilon": params.epsilon, "gap": gap})
    slopes = {}
    if len(sweep) >= 3:
        for a, b in pairs:
            key = f"{a}:{b}"
            g = [r["gap"] for r in rows if r["pair"] == key]
            slopes[key] = dg.convergence_rate(g, sweep)
    report = {"schema_version": SCHEMA_VERSION, "norm": norm, "config_hash": config_hash(cfg),
              "gaps": rows, "slopes": slopes}
    root = output_root() / cfg["output"].get("name")
    atomic_write(root / "gap_report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pair", "mu", "epsilon", "gap"])
    for r in rows:
        w.writerow([r["pair"], repr(r["mu"]), repr(r["epsilon"]), repr(r["gap"])])
    atomic_write(root / "gap_report.csv", buf.getvalue())
    return report


# ------------------------------------------------------------ dispersion


def cmd_dispersion(model: str, mu: float, kmax: float, nk: int, p=None, abcd=None, layers=None) -> str:
    params = {}
    kind = model.lower()
    if kind == "abcd":
        params = dict(zip("abcd", abcd or (0.0, 0.0, 0.0, 1 / 3)))
    elif kind == "kdvbbm":
        if p is None:
            raise ValidationError("kdvbbm needs --p")
        params = {"p": p}
    elif kind == "multilayer":
        N = layers or 2
        params = {"l": [1.0 / N] * N}
    spec = disp.DispersionSpec(kind, params)
    if not kmax > 0 or nk < 2:
        raise ValidationError("need kmax > 0 and at least two wavenumbers")
    ks = np.linspace(0.0, kmax, nk)
    return disp.table_to_csv(disp.dispersion_table([(kind, spec)], [mu], ks))


# ------------------------------------------------------------ reconstruct


def _dt_vbar(model: str, zeta, v, b, params, grid, cfg):
    eps = params.epsilon
    if model == "sgn":
        return sy.sgn_rhs(zeta, v, b, params, grid)[1]
    if model in ("nsw", "nsw_spectral"):
        return -derivative(zeta, grid) - eps * v * derivative(v, grid, 1, ODD)
    if model in ("abcd", "boussinesq"):
        coeffs = tuple(_floats(cfg["model"]["abcd"])) if model == "abcd" else (0.0, 0.0, 0.0, 1 / 3)
        return sy.abcd_rhs(zeta, v, coeffs, b, params, grid)[1]
    raise ValidationError(f"vertical reconstruction is not available for model {model!r}")


def cmd_reconstruct(run_dir, x: float, time: float, nz: int = 9) -> str:
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError("unsupported manifest schema version")
    cfg = load_config()
    cfg.read_dict(manifest["config"])
    grid, params = make_grid(cfg), make_params(cfg)
    times = np.array([s["time"] for s in manifest["snapshots"]])
    j = int(np.argmin(np.abs(times - time)))
    if abs(times[j] - time) > 1e-9 * max(1.0, abs(time)):
        raise ValidationError(f"no snapshot at t={time}; available: {times.tolist()}")
    cols = _read_columns(run_dir / manifest["snapshots"][j]["file"])
    b = _read_columns(run_dir / "bathymetry.csv")["b"]
    bathy = Bathymetry(grid, b)
    zeta, v = cols["zeta"], cols["v"]
    i = int(np.argmin(np.abs(grid.x - x)))
    if abs(grid.x[i] - x) > grid.dx:
        raise OutOfColumn(f"x={x} lies outside the domain")
    dtv = _dt_vbar(manifest["model"], zeta, v, b, params, grid, cfg)
    bottom, top = rc.column_bounds(zeta, b, params, i)
    z = np.linspace(bottom, top, nz)
    V, w = rc.velocity_profile(zeta, v, bathy, params, i, z)
    P = rc.pressure_nh_profile(zeta, v, dtv, bathy, params, i, z)
    return rc.profiles_to_csv((grid.x[i], zz, a, c, d) for zz, a, c, d in zip(z, V.values, w.values, P.values))


# ------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shallowwave", description="Shallow-water model hierarchy runner")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("run", "compare"):
        p = sub.add_parser(verb)
        p.add_argument("config")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p = sub.add_parser("dispersion")
    p.add_argument("model", choices=disp.DispersionSpec.KINDS)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--kmax", type=float, required=True)
    p.add_argument("--nk", type=int, default=51)
    p.add_argument("--p", type=float)
    p.add_argument("--abcd", type=_floats)
    p.add_argument("--layers", type=int)
    p = sub.add_parser("reconstruct")
    p.add_argument("run")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--nz", type=int, default=9)
    return ap


def _error_json(exc: Exception, code: int) -> str:
    info = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, RunFailure):
        info.update(error=type(exc.cause).__name__, model=exc.model, time=exc.t)
    return json.dumps(info, sort_keys=True)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        if args.verb == "run":
            print(json.dumps(cmd_run(load_config(args.config, args.set)), sort_keys=True))
        elif args.verb == "compare":
            print(json.dumps(cmd_compare(load_config(args.config, args.set)), indent=2, sort_keys=True))
        elif args.verb == "dispersion":
            sys.stdout.write(cmd_dispersion(args.model, args.mu, args.kmax, args.nk, args.p, args.abcd, args.layers))
        else:
            sys.stdout.write(cmd_reconstruct(args.run, args.x, args.time, args.nz))
    except RunFailure as exc:
        print(_error_json(exc, EXIT_NUMERICAL), file=sys.stderr)
        return EXIT_NUMERICAL
    except _NUMERICAL_ERRORS as exc:
        print(_error_json(exc, EXIT_NUMERICAL), file=sys.stderr)
        return EXIT_NUMERICAL
    except _VALIDATION_ERRORS as exc:
        print(_error_json(exc, EXIT_VALIDATION), file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
