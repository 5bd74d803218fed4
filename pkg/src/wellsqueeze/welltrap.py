"""Infinite square well: eigenbasis, coupling elements and resonance structure.

Levels are indexed from 1 throughout the public API (``j = 1`` is the ground
state); arrays are stored 0-based, so level ``j`` lives at index ``j - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from .errors import InvalidCarrierError, InvalidLevelError, ProfileError

# quadrature settings shared by every converged integral in the package
GL_ORDER = 24
QUAD_RTOL = 1e-10
_MAX_PANELS = 1 << 16


@dataclass(frozen=True)
class WellSpec:
    """Geometry, particle constants and basis truncation of the trap.

    The defaults are the dimensionless units ``hbar = m = L = 1`` used for all
    internal work.
    """

    length: float = 1.0
    mass: float = 1.0
    hbar: float = 1.0
    num_levels: int = 30

    def __post_init__(self):
        if not (self.length > 0 and self.mass > 0 and self.hbar > 0):
            raise ValueError("length, mass and hbar must be positive")
        if int(self.num_levels) != self.num_levels or self.num_levels < 2:
            raise ValueError(f"num_levels must be an integer >= 2, got {self.num_levels!r}")

    @property
    def levels(self) -> np.ndarray:
        return np.arange(1, self.num_levels + 1)

    @property
    def energies(self) -> np.ndarray:
        return eigenenergy(self, self.levels)

    @property
    def ground_energy(self) -> float:
        return float(np.pi**2 * self.hbar**2 / (2 * self.mass * self.length**2))


# -- inhomogeneity profiles ------------------------------------------------------


@dataclass(frozen=True)
class LinearProfile:
    """``U_in(x) = x``: the long-wavelength (constant force) limit."""

    name = "linear"

    def __call__(self, x):
        return np.asarray(x, dtype=float)

    def describe(self) -> str:
        return "linear"


@dataclass(frozen=True)
class SinusoidalProfile:
    """``U_in(x) = sin(beta x) / beta``; reduces to the linear profile as beta -> 0."""

    beta: float
    name = "sinusoidal"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def __call__(self, x):
        return np.sin(self.beta * np.asarray(x, dtype=float)) / self.beta

    def describe(self) -> str:
        return f"sin:{self.beta!r}"


@dataclass(frozen=True)
class CustomProfile:
    func: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"
    name = "custom"

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def describe(self) -> str:
        return self.label


LINEAR = LinearProfile()


def parse_profile(text: str):
    """Parse ``"linear"`` or ``"sin:<beta>"``."""
    text = text.strip().lower()
    if text == "linear":
        return LINEAR
    if text.startswith("sin:"):
        return SinusoidalProfile(float(text[4:]))
    raise ValueError(f"unknown profile {text!r} (expected 'linear' or 'sin:<beta>')")


# -- eigenbasis ------------------------------------------------------------------


def _check_level(j, minimum=1, exc=InvalidLevelError):
    arr = np.asarray(j)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise exc(f"level index must be an integer, got {j!r}")
    if np.any(arr < minimum):
        raise exc(f"level index must be >= {minimum}, got {j!r}")
    return arr


def eigenenergy(spec: WellSpec, j):
    """``E_j = j^2 pi^2 hbar^2 / (2 m L^2)``; accepts scalars or arrays of levels."""
    j = _check_level(j)
    return j.astype(float) ** 2 * spec.ground_energy if j.ndim else float(j) ** 2 * spec.ground_energy


def eigenfunction(spec: WellSpec, j, x):
    """Normalized eigenfunction ``sqrt(2/L) sin(j pi x / L)``, zero outside ``[0, L]``."""
    j = _check_level(j)
    x = np.asarray(x, dtype=float)
    L = spec.length
    val = np.sqrt(2.0 / L) * np.sin(j * np.pi * x / L)
    val = np.where((x < 0) | (x > L), 0.0, val)
    return float(val) if val.ndim == 0 else val


def basis_matrix(spec: WellSpec, x, num_levels=None) -> np.ndarray:
    """Eigenfunctions on a set of points, shape ``(num_levels, len(x))``."""
    n = spec.num_levels if num_levels is None else num_levels
    x = np.asarray(x, dtype=float)
    j = np.arange(1, n + 1)[:, None]
    psi = np.sqrt(2.0 / spec.length) * np.sin(j * np.pi * x[None, :] / spec.length)
    psi[:, (x < 0) | (x > spec.length)] = 0.0
    return psi


def transition_frequency(spec: WellSpec, j):
    """Carrier frequency ``(E_j - E_1) / hbar`` for ``j >= 2``."""
    j = _check_level(j, minimum=2, exc=InvalidCarrierError)
    return (eigenenergy(spec, j) - spec.ground_energy) / spec.hbar


# -- quadrature ------------------------------------------------------------------


def gauss_legendre_panels(a: float, b: float, panels: int, order: int = GL_ORDER):
    """Nodes and weights of composite Gauss-Legendre on ``[a, b]``."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    return x, w


def integrate_converged(integrand, a, b, panels=8, rtol=QUAD_RTOL, order=GL_ORDER, atol=0.0):
    """Integrate a (possibly array-valued) function, doubling panels until stable.

    ``integrand(x, w)`` receives nodes and weights and returns the weighted sum.
    Convergence is declared when doubling changes every component by less than
    ``rtol`` relative to its magnitude, with a floor tied to the largest
    component plus ``atol``, so exact zeros do not stall the loop.
    """
    x, w = gauss_legendre_panels(a, b, panels, order)
    prev = np.asarray(integrand(x, w))
    while panels < _MAX_PANELS:
        panels *= 2
        x, w = gauss_legendre_panels(a, b, panels, order)
        cur = np.asarray(integrand(x, w))
        biggest = np.max(np.abs(cur), initial=0.0)
        scale = np.maximum(np.abs(cur), 1e-4 * biggest)
        # rounding noise of a sum over many nodes sits near 1e-14 of its largest term
        if np.all(np.abs(cur - prev) <= rtol * scale + 1e-14 * biggest + atol + 1e-300):
            return cur
        prev = cur
    raise RuntimeError("quadrature failed to converge")


# -- couplings -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Matrix elements ``d[k][j] = <psi_k | U_in | psi_j>`` for levels ``1..N``."""

    well: WellSpec
    profile: object
    elements: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.elements.setflags(write=False)

    def element(self, k: int, j: int) -> float:
        return float(self.elements[k - 1, j - 1])

    @property
    def ground_column(self) -> np.ndarray:
        """``d_j1`` for ``j = 1..N`` (index ``j - 1``)."""
        return self.elements[:, 0]

    @property
    def zero_threshold(self) -> float:
        # couplings below this are treated as exact selection-rule zeros
        return 1e-12 * self.well.length


def coupling_element_linear(spec: WellSpec, k: int, j: int) -> float:
    """Closed-form ``<psi_k | x | psi_j>`` in the infinite well.

    Off-diagonal elements vanish when ``k + j`` is even and equal
    ``-8 L k j / (pi^2 (k^2 - j^2)^2)`` otherwise; the diagonal is ``L / 2``.
    """
    _check_level(k)
    _check_level(j)
    k, j = int(k), int(j)
    L = spec.length
    if k == j:
        return 0.5 * L
    if (k + j) % 2 == 0:
        return 0.0
    return -8.0 * L * k * j / (np.pi**2 * float(k * k - j * j) ** 2)


def coupling_element_cosine_form(spec: WellSpec, j: int) -> float:
    """``d_j1`` in the ``cos(pi j)`` form, ``-4L j (1 + cos(pi j)) / (pi^2 (j^2 - 1)^2)``; singular at ``j = 1``."""
    j = int(_check_level(j, minimum=2))
    return -4 * spec.length * (np.cos(np.pi * j) * j + j) / (np.pi**2 * (1 - 2 * j**2 + j**4))


def _linear_matrix(spec: WellSpec) -> np.ndarray:
    k = spec.levels[:, None].astype(float)
    j = spec.levels[None, :].astype(float)
    odd = (spec.levels[:, None] + spec.levels[None, :]) % 2 == 1
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(odd, -8.0 * spec.length * k * j / (np.pi**2 * (k * k - j * j) ** 2), 0.0)
    d[np.diag_indices(spec.num_levels)] = 0.5 * spec.length
    return d


def _quadrature_matrix(spec: WellSpec, profile, levels_k, levels_j) -> np.ndarray:
    L = spec.length
    kmax = int(max(np.max(levels_k), np.max(levels_j)))
    probe = profile(np.linspace(0.0, L, 257))
    # integrand magnitude is at most (2/L) max|U_in| over a length L
    atol = 1e-15 * 2.0 * float(np.max(np.abs(probe))) if np.all(np.isfinite(probe)) else 0.0

    def integrand(x, w):
        u = profile(x)
        if not np.all(np.isfinite(u)):
            raise ProfileError(f"profile {profile.describe()} is not finite on [0, L]")
        pk = np.sqrt(2.0 / L) * np.sin(np.asarray(levels_k)[:, None] * np.pi * x[None, :] / L)
        pj = np.sqrt(2.0 / L) * np.sin(np.asarray(levels_j)[:, None] * np.pi * x[None, :] / L)
        return (pk * (w * u)[None, :]) @ pj.T

    return integrate_converged(integrand, 0.0, L, panels=max(4, kmax), atol=atol)


def coupling_element_general(spec: WellSpec, k: int, j: int, profile=LINEAR) -> float:
    """``<psi_k | U_in | psi_j>`` by converged Gauss-Legendre quadrature."""
    _check_level(k)
    _check_level(j)
    return float(_quadrature_matrix(spec, profile, [int(k)], [int(j)])[0, 0])


def coupling_matrix(spec: WellSpec, profile=LINEAR, method: str = "auto") -> CouplingMatrix:
    """Full ``N x N`` coupling matrix.

    ``method="auto"`` uses the closed form for the linear profile and quadrature
    for everything else; ``"quadrature"`` forces quadrature.
    """
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto" and isinstance(profile, LinearProfile):
        d = _linear_matrix(spec)
    else:
        d = _quadrature_matrix(spec, profile, spec.levels, spec.levels)
        d = 0.5 * (d + d.T)
    return CouplingMatrix(spec, profile, np.array(d, dtype=float))


# -- resonances ------------------------------------------------------------------


@dataclass(frozen=True)
class ResonanceTable:
    """For each carrier ``p`` the ordered pairs ``(k, j)`` with ``E_k - E_j = +/- hbar w_1p``."""

    num_levels: int
    pairs: Dict[int, Tuple[Tuple[int, int], ...]]

    def __getitem__(self, p: int):
        return self.pairs[p]

    def accidental(self, p: int):
        """Pairs resonant with carrier ``p`` that do not involve the ground state."""
        return tuple(pr for pr in self.pairs[p] if 1 not in pr)


def build_resonance_table(spec: WellSpec, method: str = "brute") -> ResonanceTable:
    """Enumerate all resonant pairs using exact integer arithmetic.

    A pair resonates with carrier ``p`` when ``k^2 - j^2 = +/-(p^2 - 1)``.
    ``method="brute"`` scans every ``(k, j, p)``; ``"divisor"`` factors
    ``p^2 - 1 = (k - j)(k + j)`` instead. Both must give the same table.
    """
    N = spec.num_levels
    if method == "brute":
        lv = np.arange(1, N + 1, dtype=np.int64)
        diff = np.abs(lv[:, None] ** 2 - lv[None, :] ** 2)
        pairs = {}
        for p in range(2, N + 1):
            kk, jj = np.nonzero(diff == p * p - 1)
            pairs[p] = tuple(sorted((int(a) + 1, int(b) + 1) for a, b in zip(kk, jj)))
    elif method == "divisor":
        pairs = {}
        for p in range(2, N + 1):
            n = p * p - 1
            found = []
            for lo in range(1, int(np.sqrt(n)) + 1):
                if n % lo:
                    continue
                hi = n // lo
                if (lo + hi) % 2:
                    continue
                k, j = (hi + lo) // 2, (hi - lo) // 2
                if 1 <= j and k <= N:
                    found += [(k, j), (j, k)]
            pairs[p] = tuple(sorted(found))
    else:
        raise ValueError(f"unknown method {method!r}")
    return ResonanceTable(N, pairs)
