"""Propagation of the spectral amplitudes under four models of decreasing fidelity.

All models work with interaction-picture amplitudes ``a_j(t)``: the free
phases ``exp(-i E_j t / hbar)`` are factored out and reinstated only when a
position-space wavefunction is reconstructed.

``full``
    carrier-resolved equations, adaptive Dormand-Prince.
``rwa``
    rotating-wave generator keeping every exactly resonant pair, including
    resonances between excited levels; exact exponential.
``reduced``
    ground-state-dominant (arrowhead) generator; closed-form exponential.
``analytic``
    the closed-form amplitudes in terms of ``theta_k(t)`` and ``R(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh, expm

from . import _dopri
from .control import ControlSchedule
from .errors import IntegrationError
from .targetgen import SpectralVector
from .welltrap import CouplingMatrix, ResonanceTable, WellSpec, basis_matrix, build_resonance_table

MODELS = ("full", "rwa", "reduced", "analytic")
_SINC_SERIES_BELOW = 1e-6


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Time-sampled amplitudes under one dynamical model."""

    model: str
    times: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)  # (samples, N)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("times", "amplitudes"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> SpectralVector:
        return SpectralVector(self.amplitudes[i], time=float(self.times[i]), model=self.model)

    @property
    def final(self) -> SpectralVector:
        return self.state(len(self.times) - 1)

    @property
    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    @property
    def ground_population(self) -> np.ndarray:
        return np.abs(self.amplitudes[:, 0]) ** 2

    @property
    def excited_population(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes[:, 1:]) ** 2, axis=1)


@dataclass(frozen=True, eq=False)
class GridWavefunction:
    x: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    time: float = 0.0

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    @property
    def norm(self) -> float:
        return float(np.trapezoid(self.density, self.x))


def ground_state(well: WellSpec) -> SpectralVector:
    a = np.zeros(well.num_levels, dtype=complex)
    a[0] = 1.0
    return SpectralVector(a, 0.0, "initial")


def _initial(psi0, well):
    if psi0 is None:
        return ground_state(well).amplitudes.copy()
    a = np.array(psi0.amplitudes if isinstance(psi0, SpectralVector) else psi0, dtype=complex)
    if a.shape != (well.num_levels,):
        raise ValueError(f"initial state must have {well.num_levels} levels")
    if abs(np.sum(np.abs(a) ** 2) - 1.0) > 1e-9:
        raise ValueError("initial state must be normalized")
    return a


def _sample_times(s: ControlSchedule, samples: int, times=None) -> np.ndarray:
    if times is not None:
        t = np.asarray(times, dtype=float)
        if t.ndim != 1 or len(t) < 1 or np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > s.horizon:
            raise ValueError("sample times must increase strictly within [0, T]")
        return t
    if samples < 2:
        raise ValueError("need at least two samples")
    return np.linspace(0.0, s.horizon, samples)


def carrier_step_cap(s: ControlSchedule, well: WellSpec) -> float:
    """``1 / (20 w_max)`` with ``w_max`` = largest carrier + largest level spacing."""
    spacing = (well.energies[-1] - well.energies[0]) / well.hbar
    w_max = (float(np.max(s.carriers)) if len(s) else 0.0) + spacing
    return 1.0 / (20.0 * w_max)


def propagate_full(
    s: ControlSchedule,
    couplings: CouplingMatrix,
    psi0=None,
    tol: float = 1e-10,
    samples: int = 200,
    times=None,
    max_steps: int = 200_000_000,
) -> TrajectoryRecord:
    """Integrate the carrier-resolved equations with adaptive Dormand-Prince 5(4).

    The local error per step (max-norm over levels) is held below ``tol``.
    Samples are not renormalized, so any norm drift stays visible.
    ``times`` may also run backwards (from larger to smaller ``t``) to check
    reversibility.
    """
    if not 1e-12 <= tol <= 1e-4:
        raise ValueError("tol must lie in [1e-12, 1e-4]")
    well = couplings.well
    y0 = _initial(psi0, well)
    if times is None:
        t_out = _sample_times(s, samples)
    else:
        t_out = np.asarray(times, dtype=float)
        d = np.diff(t_out)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("sample times must be strictly monotone")
    h_max = carrier_step_cap(s, well)
    out, status, t_fail, n_acc, n_rej, n_eval = _dopri.integrate(
        y0,
        t_out,
        well.energies.astype(float),
        np.ascontiguousarray(couplings.elements, dtype=float),
        np.ascontiguousarray(s.amplitudes, dtype=float),
        np.ascontiguousarray(s.carriers, dtype=float),
        float(well.hbar),
        0.0,
        float(s.horizon),
        float(tol),
        float(h_max),
        int(max_steps),
    )
    if status == _dopri.STATUS_UNDERFLOW:
        raise IntegrationError("step size underflow", float(t_fail))
    if status == _dopri.STATUS_MAXSTEPS:
        raise IntegrationError("step budget exhausted", float(t_fail))
    meta = {
        "integrator": "dormand-prince-5(4)",
        "tol": tol,
        "max_step": h_max,
        "steps": int(n_acc),
        "rejected": int(n_rej),
        "evaluations": int(n_eval),
    }
    return TrajectoryRecord("full", t_out, out, meta)


def rwa_generator(s: ControlSchedule, couplings: CouplingMatrix, table: Optional[ResonanceTable] = None) -> np.ndarray:
    """Real symmetric ``G`` with ``i hbar da/dt = G a`` under the rotating-wave approximation.

    ``G[j, k] = V_p d_kj / 2`` for every pair resonant with a driven carrier ``p``.
    """
    N = couplings.well.num_levels
    table = table or build_resonance_table(couplings.well)
    if table.num_levels != N:
        raise ValueError("resonance table and couplings disagree on N")
    G = np.zeros((N, N))
    d = couplings.elements
    for p, v in zip(s.modes, s.amplitudes):
        for k, j in table[p]:
            G[j - 1, k - 1] += 0.5 * v * d[k - 1, j - 1]
    return G


def reduced_generator(s: ControlSchedule, couplings: CouplingMatrix) -> np.ndarray:
    """Arrowhead generator keeping only ground <-> excited couplings ``B_k d_k1``."""
    N = couplings.well.num_levels
    c = s.slope_vector() * couplings.ground_column
    G = np.zeros((N, N))
    G[0, 1:] = c[1:]
    G[1:, 0] = c[1:]
    return G


def _evolve_hermitian(G, hbar, a0, times):
    w, v = eigh(G)
    c0 = v.T @ a0
    phases = np.exp(-1j * np.outer(times, w) / hbar)
    return (phases * c0[None, :]) @ v.T


def propagate_rwa(
    s: ControlSchedule,
    couplings: CouplingMatrix,
    table: Optional[ResonanceTable] = None,
    psi0=None,
    samples: int = 200,
    times=None,
) -> TrajectoryRecord:
    """Exact exponential of the (time-independent) rotating-wave generator."""
    well = couplings.well
    a0 = _initial(psi0, well)
    t = _sample_times(s, samples, times)
    G = rwa_generator(s, couplings, table)
    out = _evolve_hermitian(G, well.hbar, a0, t)
    return TrajectoryRecord("rwa", t, out, {"method": "eigendecomposition"})


def _reduced_propagator(s: ControlSchedule, couplings: CouplingMatrix, t: float) -> np.ndarray:
    # G has eigenvalues +-|c| on span{e1, c_hat} and 0 elsewhere, so
    # exp(-iGt/hbar) = (1 - P) + cos(|c|t/hbar) P - i sin(|c|t/hbar) G/|c|
    G = reduced_generator(s, couplings)
    c = G[1:, 0]
    norm = np.linalg.norm(c)
    N = G.shape[0]
    if norm == 0.0:
        return np.eye(N, dtype=complex)
    hbar = couplings.well.hbar
    P = np.zeros((N, N))
    P[0, 0] = 1.0
    chat = c / norm
    P[1:, 1:] = np.outer(chat, chat)
    phi = norm * t / hbar
    return (np.eye(N) - P) + np.cos(phi) * P - 1j * np.sin(phi) * G / norm


def propagate_reduced(
    s: ControlSchedule,
    couplings: CouplingMatrix,
    psi0=None,
    samples: int = 200,
    times=None,
) -> TrajectoryRecord:
    """Ground-state-dominant model through its closed-form two-dimensional rotation."""
    well = couplings.well
    a0 = _initial(psi0, well)
    t = _sample_times(s, samples, times)
    out = np.array([_reduced_propagator(s, couplings, ti) @ a0 for ti in t])
    return TrajectoryRecord("reduced", t, out, {"method": "closed-form rotation"})


def _check_time(s, t):
    if t < 0 or t > s.horizon * (1 + 1e-12):
        raise ValueError(f"t = {t!r} outside [0, {s.horizon!r}]")
    return min(float(t), s.horizon)


def analytic_amplitudes(
    s: ControlSchedule, couplings: CouplingMatrix, t: float, convention: str = "schrodinger"
) -> SpectralVector:
    """Closed-form amplitudes from the ground state.

    ``a_1 = cos(R/hbar)`` and ``a_j = -i d_j1 theta_j sin(R/hbar) / R`` with
    ``theta_k = B_k t`` and ``R = (sum theta_k^2 d_k1^2)^(1/2)``. The ``-i`` is
    what ``exp(-i G t / hbar)`` produces for the arrowhead generator;
    ``convention="real"`` drops it and returns the real-valued form, which is
    what the terminal identity ``a_j(T) = a_j^T sin(pi s/2)/s`` is stated in.
    """
    if convention not in ("schrodinger", "real"):
        raise ValueError(f"unknown convention {convention!r}")
    t = _check_time(s, t)
    hbar = couplings.well.hbar
    theta = s.theta(t)
    d = couplings.ground_column
    R = float(np.sqrt(np.sum((theta[1:] * d[1:]) ** 2)))
    u = R / hbar
    # sin(R/hbar)/R, written as sinc(u)/hbar to survive R -> 0
    sinc = 1.0 - u * u / 6.0 if u < _SINC_SERIES_BELOW else np.sin(u) / u
    a = np.zeros(couplings.well.num_levels, dtype=complex)
    a[0] = np.cos(u)
    phase = -1j if convention == "schrodinger" else 1.0
    a[1:] = phase * d[1:] * theta[1:] * sinc / hbar
    return SpectralVector(a, time=t, model="analytic")


def propagate_analytic(s: ControlSchedule, couplings: CouplingMatrix, samples: int = 200, times=None) -> TrajectoryRecord:
    t = _sample_times(s, samples, times)
    out = np.array([analytic_amplitudes(s, couplings, ti).amplitudes for ti in t])
    return TrajectoryRecord("analytic", t, out, {"method": "closed form"})


def magnus_first_order(s: ControlSchedule, couplings: CouplingMatrix, t: float, psi0=None) -> SpectralVector:
    """First Magnus term ``exp(int_0^t Z)`` of the reduced system via dense ``expm``.

    With constant envelopes every higher Magnus term vanishes, so this is
    exact for the reduced model.
    """
    t = _check_time(s, t)
    a0 = _initial(psi0, couplings.well)
    Z = -1j * reduced_generator(s, couplings) / couplings.well.hbar
    return SpectralVector(expm(Z * t) @ a0, time=t, model="magnus")


def propagate(model: str, s: ControlSchedule, couplings: CouplingMatrix, samples: int = 200, tol: float = 1e-10, table=None) -> TrajectoryRecord:
    """Dispatch by model tag, starting from the ground state."""
    if model == "full":
        return propagate_full(s, couplings, tol=tol, samples=samples)
    if model == "rwa":
        return propagate_rwa(s, couplings, table=table, samples=samples)
    if model == "reduced":
        return propagate_reduced(s, couplings, samples=samples)
    if model == "analytic":
        return propagate_analytic(s, couplings, samples=samples)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def reconstruct_wavefunction(
    a: SpectralVector, spec: WellSpec, grid_size: int = 2048, frame: str = "lab"
) -> GridWavefunction:
    """``Psi(x, t) = sum_j a_j e^{-i E_j t / hbar} psi_j(x)`` on a uniform grid.

    ``frame="interaction"`` omits the free phases, i.e. it shows the packet in
    the frame where the terminal condition ``a_j(T) = a_j^T`` is posed.
    """
    if grid_size < 256:
        raise ValueError(f"grid_size must be >= 256, got {grid_size}")
    if frame not in ("lab", "interaction"):
        raise ValueError(f"unknown frame {frame!r}")
    if a.num_levels > spec.num_levels:
        raise ValueError("vector has more levels than the well spec")
    x = np.linspace(0.0, spec.length, grid_size)
    psi = basis_matrix(spec, x, a.num_levels)
    psi[:, 0] = 0.0
    psi[:, -1] = 0.0
    coeff = a.amplitudes
    if frame == "lab":
        E = spec.energies[: a.num_levels]
        coeff = coeff * np.exp(-1j * E * a.time / spec.hbar)
    return GridWavefunction(x, coeff @ psi, float(a.time))
