"""Scenario configuration, orchestration and result files.

Config files are flat ``key = value`` text with ``#`` comments::

    name = fig1
    sigma = 0.02
    x0 = 0.5
    num_levels = 30       # or: c_const = 1e-3
    horizon = 100         # or: energy = ...
    models = rwa, analytic

Lengths are in units of the well width unless ``length`` says otherwise.
Outputs land in ``<output_dir>/<name>/``; ``output_dir`` defaults to the
``WELLSQUEEZE_OUTPUT_DIR`` environment variable, then ``./results``.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .control import adiabaticity_check, check_boundary_condition, duration_from_energy, envelope_energy, synthesize, total_energy
from .diagnostics import (
    DEFAULT_RIPPLE,
    ScenarioReport,
    compare_models,
    dispersion,
    fidelity,
    monotonicity_report,
    validity_window,
    width_series,
)
from .dynamics import MODELS, TrajectoryRecord, propagate, reconstruct_wavefunction
from .errors import ConfigError
from .targetgen import TargetSpec, choose_truncation, target_coefficients
from .welltrap import WellSpec, build_resonance_table, coupling_matrix, parse_profile

OUTPUT_ENV = "WELLSQUEEZE_OUTPUT_DIR"
MIN_DENSITY_GRID = 256

_write_lock = threading.Lock()


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "results")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    sigma: float
    x0: Optional[float] = None
    length: float = 1.0
    mass: float = 1.0
    hbar: float = 1.0
    num_levels: Optional[int] = None
    c_const: Optional[float] = None
    horizon: Optional[float] = None
    energy: Optional[float] = None
    models: Tuple[str, ...] = ("rwa", "analytic")
    profile: str = "linear"
    grid_size: int = 2048
    density_grid: int = 512
    samples: int = 200
    tol: float = 1e-10
    ripple: float = DEFAULT_RIPPLE
    output_dir: Optional[str] = None

    def __post_init__(self):
        errors = []
        if not self.name or any(c in self.name for c in "/\\"):
            errors.append("name: must be a non-empty plain file name")
        if (self.num_levels is None) == (self.c_const is None):
            errors.append("num_levels/c_const: exactly one must be given")
        if (self.horizon is None) == (self.energy is None):
            errors.append("horizon/energy: exactly one must be given")
        if not self.models:
            errors.append("models: at least one model is required")
        bad = [m for m in self.models if m not in MODELS]
        if bad:
            errors.append(f"models: unknown tag(s) {bad}; valid: {list(MODELS)}")
        if len(set(self.models)) != len(self.models):
            errors.append("models: duplicates")
        if not self.length > 0 or not self.mass > 0 or not self.hbar > 0:
            errors.append("length/mass/hbar: must be positive")
        if not 0 < self.sigma < self.length:
            errors.append("sigma: must lie in (0, length)")
        x0 = self.resolved_x0
        if not 0 < x0 < self.length:
            errors.append("x0: must lie inside the well")
        if self.num_levels is not None and self.num_levels < 2:
            errors.append("num_levels: must be >= 2")
        if self.c_const is not None and not 0 < self.c_const <= 1:
            errors.append("c_const: must lie in (0, 1]")
        if self.horizon is not None and not self.horizon > 0:
            errors.append("horizon: must be positive")
        if self.energy is not None and not self.energy > 0:
            errors.append("energy: must be positive")
        if self.grid_size < MIN_DENSITY_GRID or self.density_grid < MIN_DENSITY_GRID:
            errors.append(f"grid_size/density_grid: must be >= {MIN_DENSITY_GRID}")
        if self.samples < 2:
            errors.append("samples: must be >= 2")
        if not 1e-12 <= self.tol <= 1e-4:
            errors.append("tol: must lie in [1e-12, 1e-4]")
        try:
            parse_profile(self.profile)
        except ValueError as exc:
            errors.append(f"profile: {exc}")
        if errors:
            raise ConfigError("invalid scenario config:\n  " + "\n  ".join(errors))

    @property
    def resolved_x0(self) -> float:
        return self.length / 2 if self.x0 is None else self.x0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["models"] = list(self.models)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        if "models" in d:
            d["models"] = tuple(d["models"])
        return cls(**d)


_INT_KEYS = {"num_levels", "grid_size", "density_grid", "samples"}
_FLOAT_KEYS = {"sigma", "x0", "length", "mass", "hbar", "c_const", "horizon", "energy", "tol", "ripple"}
_STR_KEYS = {"name", "profile", "output_dir"}


def parse_config(text: str) -> ScenarioConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key in _STR_KEYS:
                values[key] = value
            elif key == "models":
                values[key] = tuple(m.strip() for m in value.split(",") if m.strip())
            elif key == "units":
                if value != "internal":
                    raise ConfigError(f"line {lineno}: units must be 'internal'")
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from None
    if "name" not in values or "sigma" not in values:
        raise ConfigError("config must define 'name' and 'sigma'")
    return ScenarioConfig(**values)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# N = 10, sigma = L/10, T = 500 periods of the 1 -> 2 carrier
_FULLCHECK_T = 500 * 2 * np.pi / (1.5 * np.pi**2)

BUILTIN_SCENARIOS = {
    "fig1": ScenarioConfig("fig1", sigma=0.02, x0=0.5, num_levels=30, horizon=100.0, models=("rwa", "analytic")),
    "smallsigma": ScenarioConfig("smallsigma", sigma=0.01, x0=0.5, c_const=1e-3, horizon=100.0, models=("rwa", "reduced")),
    "fullcheck": ScenarioConfig(
        "fullcheck", sigma=0.1, x0=0.5, num_levels=10, horizon=_FULLCHECK_T, models=("full", "rwa"), samples=201
    ),
}


def resolve_config(ref: str) -> ScenarioConfig:
    """A config file path, or the name of a built-in scenario."""
    if Path(ref).is_file():
        return load_config(ref)
    if ref in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[ref]
    raise ConfigError(f"{ref!r} is neither a config file nor a built-in scenario {sorted(BUILTIN_SCENARIOS)}")


@dataclass(frozen=True, eq=False)
class Setup:
    """Everything derived from a config before any propagation."""

    config: ScenarioConfig
    well: WellSpec
    target_spec: TargetSpec
    target: object
    couplings: object
    schedule: object


def prepare(cfg: ScenarioConfig) -> Setup:
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tspec = TargetSpec(cfg.sigma, cfg.resolved_x0, cfg.length)
    n = cfg.num_levels if cfg.num_levels is not None else choose_truncation(tspec, cfg.c_const)
    well = WellSpec(cfg.length, cfg.mass, cfg.hbar, n)
    couplings = coupling_matrix(well, parse_profile(cfg.profile))
    target = target_coefficients(tspec, well)
    T = cfg.horizon if cfg.horizon is not None else duration_from_energy(target, couplings, cfg.energy)
    schedule = synthesize(target, couplings, T)
    return Setup(cfg, well, tspec, target, couplings, schedule)


def run_models(setup: Setup, models=None) -> dict:
    """Propagate each requested model concurrently; returns ``{tag: TrajectoryRecord}``."""
    cfg = setup.config
    models = tuple(models or cfg.models)
    table = build_resonance_table(setup.well) if "rwa" in models else None

    def job(m):
        return propagate(m, setup.schedule, setup.couplings, samples=cfg.samples, tol=cfg.tol, table=table)

    with ThreadPoolExecutor(max_workers=len(models)) as pool:
        results = list(pool.map(job, models))
    return dict(zip(models, results))


def run_scenario(cfg: ScenarioConfig, write: bool = True, output_dir=None) -> ScenarioReport:
    """Synthesize, propagate every requested model, evaluate, and persist."""
    setup = prepare(cfg)
    trajs = run_models(setup)
    report = evaluate(setup, trajs)
    if write:
        out = Path(output_dir or cfg.output_dir or default_output_dir()) / cfg.name
        write_outputs(out, setup, trajs, report)
    return report


def evaluate(setup: Setup, trajs: dict) -> ScenarioReport:
    cfg = setup.config
    s = setup.schedule
    window = validity_window(cfg.sigma, cfg.length, s.horizon)
    report = ScenarioReport(
        scenario=cfg.name,
        horizon=s.horizon,
        num_levels=setup.well.num_levels,
        boundary_residuals=check_boundary_condition(s, setup.target, setup.couplings),
        energy_b_form=total_energy(s),
        energy_v_form=envelope_energy(s),
        window=window,
        adiabaticity=adiabaticity_check(s, setup.couplings),
        truncated_norm=setup.target.excited_norm(),
    )
    for m, tr in trajs.items():
        w, pk = width_series(tr, setup.well, cfg.grid_size, frame="interaction")
        report.widths[m] = w
        report.peaks[m] = pk
        report.width_violations[m] = monotonicity_report(w, cfg.ripple, "decreasing")
        report.peak_violations[m] = monotonicity_report(pk, cfg.ripple, "increasing")
        report.final_fidelity[m] = fidelity(tr.final, setup.target)
        lab = reconstruct_wavefunction(tr.final, setup.well, cfg.grid_size, frame="lab")
        report.lab_final_widths[m] = dispersion(lab, renormalize=True)
    names = list(trajs)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            dev = compare_models(trajs[a], trajs[b], (window.start, window.end))
            report.deviations[f"{a}-{b}"] = dev.max_deviation
    return report


# -- persistence -----------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def summary_dict(setup: Setup, trajs: dict, report: ScenarioReport) -> dict:
    s = setup.schedule
    models = {}
    for m, tr in trajs.items():
        models[m] = {
            "width_initial": float(report.widths[m][0]),
            "width_final": float(report.widths[m][-1]),
            "width_final_lab_frame": report.lab_final_widths[m],
            "peak_initial": float(report.peaks[m][0]),
            "peak_final": float(report.peaks[m][-1]),
            "width_violations": report.width_violations[m],
            "peak_violations": report.peak_violations[m],
            "final_fidelity": report.final_fidelity[m],
            "max_norm_drift": float(np.max(np.abs(tr.norms - 1.0))),
            "integrator": {k: (float(v) if isinstance(v, np.floating) else v) for k, v in tr.metadata.items()},
        }
    adi = report.adiabaticity
    return {
        "config": setup.config.to_dict(),
        "scenario": report.scenario,
        "num_levels": report.num_levels,
        "horizon": report.horizon,
        "truncated_norm": report.truncated_norm,
        "energy": {"sum_B2_T": report.energy_b_form, "sum_V2_T": report.energy_v_form},
        "schedule": {
            "modes": list(s.modes),
            "slopes": [float(b) for b in s.slopes],
            "carriers": [float(w) for w in s.carriers],
        },
        "boundary_residual_max": float(np.max(report.boundary_residuals, initial=0.0)),
        "validity_window": {"start": report.window.start, "end": report.window.end, "degenerate": report.window.degenerate},
        "adiabaticity": {
            "envelope_derivative_max": adi.envelope_derivative_max,
            "envelope_criterion_satisfied": adi.envelope_criterion_satisfied,
            "rwa_ratio": adi.rwa_ratio,
            "weak_coupling": adi.weak_coupling,
        },
        "model_deviation_in_window": report.deviations,
        "models": models,
    }


def write_timeseries(path: Path, trajs: dict, report: ScenarioReport):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "t", "norm", "width", "p_ground", "p_excited"])
        for m, tr in trajs.items():
            for i, t in enumerate(tr.times):
                w.writerow(
                    [
                        m,
                        _fmt(t),
                        _fmt(tr.norms[i]),
                        _fmt(report.widths[m][i]),
                        _fmt(tr.ground_population[i]),
                        _fmt(tr.excited_population[i]),
                    ]
                )


def write_outputs(out: Path, setup: Setup, trajs: dict, report: ScenarioReport):
    with _write_lock:
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary_dict(setup, trajs, report), indent=2, sort_keys=True) + "\n")
        write_timeseries(out / "timeseries.csv", trajs, report)
        for m, tr in trajs.items():
            emit_density_map(tr, setup.well, setup.config.density_grid, out / f"density_{m}")


def config_from_summary(path) -> ScenarioConfig:
    data = json.loads(Path(path).read_text())
    return ScenarioConfig.from_dict(data["config"])


def density_matrix(traj: TrajectoryRecord, spec: WellSpec, grid_size: int, frame: str = "interaction"):
    rows = [reconstruct_wavefunction(traj.state(i), spec, grid_size, frame).density for i in range(len(traj))]
    x = np.linspace(0.0, spec.length, grid_size)
    return x, np.array(rows)


def emit_density_map(traj: TrajectoryRecord, spec: WellSpec, grid_size: int, path, frame: str = "interaction"):
    """Write ``|Psi(x_i, t_s)|^2`` as ``<path>.txt`` (one row per sample) and ``<path>.png``."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if grid_size < MIN_DENSITY_GRID:
        raise ValueError(f"grid_size must be >= {MIN_DENSITY_GRID}, got {grid_size}")
    path = Path(path)
    x, rho = density_matrix(traj, spec, grid_size, frame)
    T = float(traj.times[-1])
    txt, png = path.with_suffix(".txt"), path.with_suffix(".png")
    try:
        with open(txt, "w") as fh:
            fh.write(f"# M={grid_size} samples={len(traj)} L={_fmt(spec.length)} T={_fmt(T)}\n")
            np.savetxt(fh, rho, fmt="%.17g")
        _render_heatmap(x, traj.times, rho, spec.length, traj.model, png)
    except OSError as exc:
        raise OSError(f"writing density map to {path}: {exc}") from exc
    return txt, png


def _render_heatmap(x, times, rho, L, model, png):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    t_hi = times[-1] if times[-1] > times[0] else times[0] + 1.0
    im = ax.imshow(
        rho,
        origin="lower",
        aspect="auto",
        extent=(0.0, x[-1] / L, times[0], t_hi),
        cmap="inferno",
        interpolation="nearest",
    )
    ax.set_xlabel("x / L")
    ax.set_ylabel("t")
    ax.set_title(f"|Psi(x,t)|^2 ({model})")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(png, dpi=100, metadata={"Software": None})
    plt.close(fig)
