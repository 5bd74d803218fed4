"""Observables and cross-checks: width, fidelity, model deviation, monotonicity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import GridWavefunction, TrajectoryRecord, reconstruct_wavefunction
from .errors import NormalizationError
from .targetgen import SpectralVector
from .welltrap import WellSpec

DEFAULT_RIPPLE = 0.02


def _moments(psi: GridWavefunction):
    rho = psi.density
    x = psi.x
    norm = np.trapezoid(rho, x)
    mean = np.trapezoid(x * rho, x) / norm
    var = np.trapezoid((x - mean) ** 2 * rho, x) / norm
    return norm, mean, var


def dispersion(psi: GridWavefunction, renormalize: bool = False) -> float:
    """Spatial width ``(<x^2> - <x>^2)^(1/2)`` by trapezoidal quadrature.

    Raises :class:`NormalizationError` when the grid norm is off by more than
    1e-6, unless ``renormalize`` is set (for truncated, sub-unit vectors).
    """
    norm, _, var = _moments(psi)
    if not renormalize and abs(norm - 1.0) > 1e-6:
        raise NormalizationError(f"wavefunction norm {norm:.9f} deviates from 1")
    return float(np.sqrt(max(var, 0.0)))


def mean_position(psi: GridWavefunction) -> float:
    return float(_moments(psi)[1])


def peak_density(psi: GridWavefunction) -> float:
    return float(np.max(psi.density))


def fidelity(a: SpectralVector, b: SpectralVector) -> float:
    """``|<a|b>|^2``.

    Both vectors are compared at a common time stamp, where the free phases
    ``exp(-i E_j t / hbar)`` multiply both sides identically and cancel, so the
    overlap of interaction-picture amplitudes is the lab-frame overlap.
    """
    if a.num_levels != b.num_levels:
        raise ValueError(f"dimension mismatch: {a.num_levels} vs {b.num_levels}")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


@dataclass(frozen=True, eq=False)
class DeviationReport:
    models: Tuple[str, str]
    window: Tuple[float, float]
    times: np.ndarray = field(repr=False)
    per_time: np.ndarray = field(repr=False)
    max_deviation: float = 0.0

    @property
    def argmax_time(self) -> float:
        return float(self.times[int(np.argmax(self.per_time))]) if len(self.times) else float("nan")


def compare_models(
    t1: TrajectoryRecord, t2: TrajectoryRecord, window: Optional[Tuple[float, float]] = None
) -> DeviationReport:
    """Largest absolute amplitude difference ``max_j |a_j^(1)(t) - a_j^(2)(t)|``.

    ``window`` is a half-open ``[start, end)`` interval of sample times; by
    default every sample is used.
    """
    if t1.times.shape != t2.times.shape or not np.array_equal(t1.times, t2.times):
        raise ValueError("trajectories are sampled on different time grids")
    if t1.amplitudes.shape != t2.amplitudes.shape:
        raise ValueError("trajectories have different numbers of levels")
    if window is None:
        window = (float(t1.times[0]), np.inf)
        mask = np.ones(len(t1.times), dtype=bool)
    else:
        mask = (t1.times >= window[0]) & (t1.times < window[1])
    dev = np.max(np.abs(t1.amplitudes - t2.amplitudes), axis=1)[mask]
    return DeviationReport(
        (t1.model, t2.model),
        (float(window[0]), float(window[1])),
        t1.times[mask],
        dev,
        float(np.max(dev)) if dev.size else 0.0,
    )


def monotonicity_report(
    series: Sequence[float], ripple: float = DEFAULT_RIPPLE, direction: str = "decreasing"
) -> List[int]:
    """Indices ``i`` at which the step ``i -> i+1`` breaks monotonicity beyond ``ripple``.

    For a decreasing series a violation is ``s[i+1] > s[i] (1 + ripple)``; for
    an increasing one it is ``s[i+1] (1 + ripple) < s[i]``.
    """
    s = np.asarray(series, dtype=float)
    if s.size < 2:
        raise ValueError("series needs at least two samples")
    if direction == "decreasing":
        bad = s[1:] > s[:-1] * (1.0 + ripple)
    elif direction == "increasing":
        bad = s[1:] * (1.0 + ripple) < s[:-1]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return [int(i) for i in np.nonzero(bad)[0]]


@dataclass(frozen=True)
class ValidityWindow:
    start: float
    end: float
    degenerate: bool

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t)
        return (t >= self.start) & (t < self.end)

    @property
    def fraction(self) -> float:
        return self.end


def validity_window(sigma: float, L: float, T: float) -> ValidityWindow:
    """``[0, T - 2 T sqrt(sigma/L) / pi)``: where ground-state dominance holds.

    The window collapses (``degenerate``) once ``sigma / L >= (pi/2)^2``.
    """
    if not (sigma > 0 and L > 0 and T > 0):
        raise ValueError("sigma, L and T must be positive")
    end = T * (1.0 - 2.0 * np.sqrt(sigma / L) / np.pi)
    if end <= 0.0:
        return ValidityWindow(0.0, 0.0, True)
    return ValidityWindow(0.0, float(end), False)


def width_series(traj: TrajectoryRecord, spec: WellSpec, grid_size: int = 2048, frame: str = "interaction"):
    """Width and peak density at every sample of a trajectory."""
    widths = np.empty(len(traj))
    peaks = np.empty(len(traj))
    for i in range(len(traj)):
        psi = reconstruct_wavefunction(traj.state(i), spec, grid_size, frame=frame)
        widths[i] = dispersion(psi)
        peaks[i] = peak_density(psi)
    return widths, peaks


@dataclass(eq=False)
class ScenarioReport:
    """Everything one scenario run establishes about the squeezing claims."""

    scenario: str
    horizon: float
    num_levels: int
    widths: dict = field(default_factory=dict, repr=False)
    peaks: dict = field(default_factory=dict, repr=False)
    lab_final_widths: dict = field(default_factory=dict)
    final_fidelity: dict = field(default_factory=dict)
    boundary_residuals: np.ndarray = field(default=None, repr=False)
    energy_b_form: float = 0.0
    energy_v_form: float = 0.0
    width_violations: dict = field(default_factory=dict)
    peak_violations: dict = field(default_factory=dict)
    window: Optional[ValidityWindow] = None
    adiabaticity: object = None
    truncated_norm: float = 0.0
    deviations: dict = field(default_factory=dict)
