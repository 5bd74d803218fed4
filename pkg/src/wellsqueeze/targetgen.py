"""Antisymmetric squeezed target packet and its eigenbasis coefficients.

The target is the first excited state of a harmonic oscillator placed at
``x0``::

    Psi_T(x) = B (x - x0) exp(-(x - x0)^2 / sigma^2),   0 <= x <= L

normalized over the well. Coefficients are obtained by quadrature; the
Gaussian/sine closed forms below serve as cross-checks only.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import InvalidTargetError, TruncationError
from .welltrap import WellSpec, integrate_converged

N_MAX = 512
DEFAULT_C_CONST = 1e-3
# the packet is below exp(-144) beyond this many widths from its center
_SUPPORT_WIDTHS = 12.0


@dataclass(frozen=True, eq=False)
class SpectralVector:
    """Complex amplitudes ``a_j`` (``j = 1..N``) at one instant."""

    amplitudes: np.ndarray = field(repr=False)
    time: float = 0.0
    model: str = ""

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.ndim != 1:
            raise ValueError("amplitudes must be one-dimensional")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    def __len__(self):
        return len(self.amplitudes)

    def __getitem__(self, j: int) -> complex:
        """Amplitude of level ``j`` (1-based)."""
        if j < 1:
            raise IndexError("levels are 1-based")
        return complex(self.amplitudes[j - 1])

    @property
    def num_levels(self) -> int:
        return len(self.amplitudes)

    @property
    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def excited_norm(self) -> float:
        """``s = (sum_{j>=2} |a_j|^2)^(1/2)``."""
        return float(np.sqrt(np.sum(np.abs(self.amplitudes[1:]) ** 2)))


@dataclass(frozen=True)
class TargetSpec:
    sigma: float
    x0: float
    length: float = 1.0
    shape: str = "gaussian-derivative"

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidTargetError(f"sigma must be positive, got {self.sigma!r}")
        if not self.sigma < self.length:
            raise InvalidTargetError("sigma must be smaller than the well width")
        if not 0 < self.x0 < self.length:
            raise InvalidTargetError("x0 must lie strictly inside the well")
        if self.shape != "gaussian-derivative":
            raise InvalidTargetError(f"unsupported shape {self.shape!r}")
        if self.x0 - 5 * self.sigma <= 0 or self.x0 + 5 * self.sigma >= self.length:
            warnings.warn(
                f"target (sigma={self.sigma}, x0={self.x0}) is clipped by the well walls",
                stacklevel=3,
            )

    @property
    def support(self):
        lo = max(0.0, self.x0 - _SUPPORT_WIDTHS * self.sigma)
        hi = min(self.length, self.x0 + _SUPPORT_WIDTHS * self.sigma)
        return lo, hi


def _shape(t: TargetSpec, x):
    u = np.asarray(x, dtype=float) - t.x0
    return u * np.exp(-(u * u) / t.sigma**2)


@lru_cache(maxsize=256)
def normalization_constant(t: TargetSpec) -> float:
    """``B`` such that the target has unit norm on ``[0, L]`` (quadrature)."""
    lo, hi = t.support
    sq = integrate_converged(lambda x, w: np.dot(w, _shape(t, x) ** 2), lo, hi, rtol=1e-13)
    return float(1.0 / np.sqrt(sq))


def normalization_closed_form(sigma: float) -> float:
    """Infinite-line value of ``B``: ``(sigma^3 sqrt(pi/32))^(-1/2)``."""
    return float((sigma**3 * np.sqrt(np.pi / 32.0)) ** -0.5)


def target_wavefunction(t: TargetSpec, x):
    """Normalized target amplitude; zero outside the well."""
    x = np.asarray(x, dtype=float)
    val = normalization_constant(t) * _shape(t, x)
    val = np.where((x < 0) | (x > t.length), 0.0, val)
    return float(val) if val.ndim == 0 else val


def _projections(t: TargetSpec, levels: np.ndarray) -> np.ndarray:
    L = t.length
    B = normalization_constant(t)
    lo, hi = t.support

    def integrand(x, w):
        psi = np.sqrt(2.0 / L) * np.sin(levels[:, None] * np.pi * x[None, :] / L)
        return psi @ (w * B * _shape(t, x))

    # resolve the highest mode across the support from the start
    start = max(8, int(np.ceil(levels.max() * (hi - lo) / L)) + 1)
    return integrate_converged(integrand, lo, hi, panels=start, rtol=1e-12)


@lru_cache(maxsize=64)
def _cached_projections(t: TargetSpec, n: int) -> np.ndarray:
    out = _projections(t, np.arange(1, n + 1))
    out.setflags(write=False)
    return out


def target_coefficients(t: TargetSpec, spec: WellSpec) -> SpectralVector:
    """``a_j^T = int_0^L psi_j Psi_T dx`` for ``j = 1..N`` (real-valued)."""
    if not np.isclose(t.length, spec.length, rtol=1e-14, atol=0):
        raise InvalidTargetError("target and well disagree on the well width")
    return SpectralVector(_cached_projections(t, spec.num_levels), time=0.0, model="target")


def coefficients_closed_form(t: TargetSpec, num_levels: int) -> np.ndarray:
    """Infinite-line approximation of the coefficients.

    Extending the overlap integral to the whole line gives
    ``a_j = sqrt(2/L) B cos(k x0) (sqrt(pi) sigma^3 k / 2) exp(-(k sigma / 2)^2)``
    with ``k = j pi / L``; ``B`` is the closed-form normalization. Only the
    wall-clipped tails are missing, so this is accurate for ``sigma`` well
    inside the box.
    """
    k = np.arange(1, num_levels + 1) * np.pi / t.length
    B = normalization_closed_form(t.sigma)
    return (
        np.sqrt(2.0 / t.length)
        * B
        * np.cos(k * t.x0)
        * np.sqrt(np.pi)
        * t.sigma**3
        * k
        / 2.0
        * np.exp(-((k * t.sigma / 2.0) ** 2))
    )


def truncation_residual(t: TargetSpec, num_levels: int) -> float:
    """Spectral weight of the target above level ``num_levels``.

    Uses completeness of the eigenbasis, ``1 - sum_{j<=N} |a_j^T|^2``, which is
    exact up to quadrature error because the target is normalized on the well.
    """
    a = _cached_projections(t, num_levels)
    return float(max(0.0, 1.0 - np.sum(a**2)))


def choose_truncation(t: TargetSpec, C_const: float = DEFAULT_C_CONST, n_max: int = N_MAX) -> int:
    """Smallest ``N >= 2`` whose discarded weight is below ``C_const``."""
    if not 0 < C_const <= 1:
        raise ValueError("C_const must lie in (0, 1]")
    a = _cached_projections(t, n_max)
    residual = np.maximum(0.0, 1.0 - np.cumsum(a**2))
    ok = np.nonzero(residual[1:] < C_const)[0]
    if ok.size == 0:
        raise TruncationError(
            f"residual {residual[-1]:.3e} still above {C_const} at N_max = {n_max}"
        )
    return int(ok[0] + 2)


def kinetic_energy(t: TargetSpec, spec: Optional[WellSpec] = None) -> float:
    """``<Psi_T | p^2 / 2m | Psi_T> = hbar^2 / (2m) int |Psi_T'|^2 dx``."""
    spec = spec or WellSpec(length=t.length)
    B = normalization_constant(t)
    lo, hi = t.support

    def integrand(x, w):
        u = x - t.x0
        deriv = B * (1.0 - 2.0 * u * u / t.sigma**2) * np.exp(-(u * u) / t.sigma**2)
        return np.dot(w, deriv**2)

    grad_sq = integrate_converged(integrand, lo, hi, rtol=1e-12)
    return float(spec.hbar**2 / (2 * spec.mass) * grad_sq)
