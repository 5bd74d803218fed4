import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from wellsqueeze import (
    CustomProfile,
    LinearProfile,
    SinusoidalProfile,
    WellSpec,
    build_resonance_table,
    coupling_element_general,
    coupling_element_linear,
    coupling_matrix,
    eigenenergy,
    eigenfunction,
    transition_frequency,
)
from wellsqueeze.errors import InvalidCarrierError, InvalidLevelError, ProfileError
from wellsqueeze.welltrap import coupling_element_cosine_form, integrate_converged

WELL = WellSpec(num_levels=30)


def quad_coupling(k, j, u, L=1.0):
    """Independent oracle: adaptive QUADPACK integration of psi_k u psi_j."""
    f = lambda x: 2.0 / L * np.sin(k * np.pi * x / L) * u(x) * np.sin(j * np.pi * x / L)
    return quad(f, 0.0, L, limit=500, epsabs=1e-14, epsrel=1e-13)[0]


class TestSpectrum:
    def test_ground_energy(self):
        assert eigenenergy(WELL, 1) == pytest.approx(np.pi**2 / 2, rel=1e-15)

    def test_ratio_and_scaling(self):
        assert eigenenergy(WELL, 2) / eigenenergy(WELL, 1) == 4.0
        assert eigenenergy(WELL, 30) == pytest.approx(900 * np.pi**2 / 2, rel=1e-15)

    def test_strictly_increasing(self):
        assert np.all(np.diff(WELL.energies) > 0)

    def test_si_units(self):
        spec = WellSpec(length=2.0, mass=3.0, hbar=0.5)
        assert eigenenergy(spec, 3) == pytest.approx(9 * np.pi**2 * 0.25 / (2 * 3.0 * 4.0))

    @pytest.mark.parametrize("j", [0, -1, 1.5])
    def test_invalid_level(self, j):
        with pytest.raises(InvalidLevelError):
            eigenenergy(WELL, j)

    def test_eigenfunction_values(self):
        assert eigenfunction(WELL, 1, 0.5) == pytest.approx(np.sqrt(2.0))
        assert eigenfunction(WELL, 2, 0.5) == pytest.approx(0.0, abs=1e-15)
        assert eigenfunction(WELL, 1, 0.0) == 0.0
        assert eigenfunction(WELL, 3, -0.1) == 0.0

    @pytest.mark.parametrize("j", [1, 2, 7, 30, 100])
    def test_eigenfunction_normalized(self, j):
        val = integrate_converged(lambda x, w: np.dot(w, eigenfunction(WELL, j, x) ** 2), 0.0, 1.0)
        assert abs(val - 1.0) < 1e-12

    def test_transition_frequency(self):
        assert transition_frequency(WELL, 2) == pytest.approx(3 * np.pi**2 / 2, rel=1e-15)
        assert transition_frequency(WELL, 30) == pytest.approx(899 * np.pi**2 / 2, rel=1e-15)
        with pytest.raises(InvalidCarrierError):
            transition_frequency(WELL, 1)


class TestLinearCoupling:
    def test_odd_selection_rule(self):
        assert coupling_element_linear(WELL, 3, 1) == 0.0

    def test_k2(self):
        expected = -16.0 / (9 * np.pi**2)
        assert coupling_element_linear(WELL, 2, 1) == pytest.approx(expected, rel=1e-15)
        assert quad_coupling(2, 1, lambda x: x) == pytest.approx(expected, rel=1e-10)
        assert expected == pytest.approx(-0.18013, abs=1e-5)

    def test_k30(self):
        expected = -240.0 / (np.pi**2 * 808201)
        assert coupling_element_linear(WELL, 30, 1) == pytest.approx(expected, rel=1e-14)
        assert quad_coupling(30, 1, lambda x: x) == pytest.approx(expected, rel=1e-8)
        assert expected == pytest.approx(-3.007e-5, rel=1e-3)

    @pytest.mark.parametrize("j", range(2, 31))
    def test_matches_cosine_form(self, j):
        cosine = coupling_element_cosine_form(WELL, j)
        assert coupling_element_linear(WELL, j, 1) == pytest.approx(cosine, rel=1e-12, abs=1e-15)

    def test_scales_with_length(self):
        spec = WellSpec(length=1e-6)
        assert coupling_element_linear(spec, 2, 1) == pytest.approx(-16e-6 / (9 * np.pi**2))

    @pytest.mark.parametrize("k,j", [(2, 3), (5, 8), (4, 1), (10, 7)])
    def test_general_elements_vs_oracle(self, k, j):
        assert coupling_element_linear(WELL, k, j) == pytest.approx(quad_coupling(k, j, lambda x: x), rel=1e-9)

    def test_diagonal(self):
        assert coupling_element_linear(WELL, 4, 4) == 0.5


class TestGeneralCoupling:
    def test_small_beta_recovers_linear(self):
        val = coupling_element_general(WELL, 2, 1, SinusoidalProfile(1e-4))
        assert val == pytest.approx(coupling_element_linear(WELL, 2, 1), rel=1e-6)

    def test_small_beta_keeps_parity(self):
        assert abs(coupling_element_general(WELL, 3, 1, SinusoidalProfile(1e-4))) < 1e-10

    def test_beta_pi_against_adaptive_oracle(self):
        prof = SinusoidalProfile(np.pi)
        oracle = quad_coupling(2, 1, prof)
        assert coupling_element_general(WELL, 2, 1, prof) == pytest.approx(oracle, rel=1e-10)

    def test_linear_profile_by_quadrature(self):
        assert coupling_element_general(WELL, 30, 1, LinearProfile()) == pytest.approx(
            coupling_element_linear(WELL, 30, 1), rel=1e-10
        )

    def test_nonfinite_profile(self):
        bad = CustomProfile(lambda x: np.where(x > 0.5, np.inf, x))
        with pytest.raises(ProfileError):
            coupling_element_general(WELL, 2, 1, bad)


class TestCouplingInvariants:
    @pytest.mark.parametrize(
        "profile",
        [LinearProfile(), SinusoidalProfile(1e-4), SinusoidalProfile(2.0), CustomProfile(lambda x: np.exp(x) - x**2)],
        ids=["linear", "sin-small", "sin-2", "custom"],
    )
    def test_symmetric(self, profile):
        d = coupling_matrix(WellSpec(num_levels=12), profile).elements
        assert np.max(np.abs(d - d.T)) < 1e-12

    def test_parity(self):
        d = coupling_matrix(WELL).elements
        for k, j in itertools.product(range(1, 31), repeat=2):
            if k != j and (k + j) % 2 == 0:
                assert abs(d[k - 1, j - 1]) < 1e-12

    def test_closed_form_vs_quadrature_all_pairs(self):
        closed = coupling_matrix(WELL).elements
        quadr = coupling_matrix(WELL, SinusoidalProfile(1e-4)).elements
        nonzero = np.abs(closed) > 1e-12
        rel = np.abs(quadr[nonzero] - closed[nonzero]) / np.abs(closed[nonzero])
        assert rel.max() < 1e-6
        # sin(bx)/b differs from x by at most b^2 L^3 / 6, which bounds parity-forbidden elements
        assert np.max(np.abs(quadr[~nonzero])) < (1e-4) ** 2 / 6

    def test_forced_quadrature_matches_closed_form(self):
        spec = WellSpec(num_levels=16)
        a = coupling_matrix(spec).elements
        b = coupling_matrix(spec, LinearProfile(), method="quadrature").elements
        np.testing.assert_allclose(b, a, rtol=1e-9, atol=1e-13)


def brute_force_table(N):
    out = {}
    for p in range(2, N + 1):
        out[p] = sorted(
            (k, j) for k in range(1, N + 1) for j in range(1, N + 1) if k * k - j * j in (p * p - 1, -(p * p - 1))
        )
    return out


class TestResonances:
    def test_n4(self):
        assert set(build_resonance_table(WellSpec(num_levels=4))[2]) == {(2, 1), (1, 2)}

    def test_n13_p7(self):
        pairs = set(build_resonance_table(WellSpec(num_levels=13))[7])
        for pr in [(7, 1), (8, 4), (13, 11)]:
            assert pr in pairs and pr[::-1] in pairs
        assert len(pairs) == 6

    def test_n3(self):
        assert set(build_resonance_table(WellSpec(num_levels=3))[3]) == {(3, 1), (1, 3)}

    @pytest.mark.parametrize("N", [2, 5, 13, 30, 47])
    def test_methods_agree_with_oracle(self, N):
        oracle = brute_force_table(N)
        for method in ("brute", "divisor"):
            table = build_resonance_table(WellSpec(num_levels=N), method)
            assert {p: sorted(v) for p, v in table.pairs.items()} == oracle

    def test_no_accidental_below_seven(self):
        table = build_resonance_table(WellSpec(num_levels=6))
        assert all(not table.accidental(p) for p in range(2, 7))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=2, max_value=60))
    def test_integer_identity_and_ground_pairs(self, N):
        table = build_resonance_table(WellSpec(num_levels=N), "divisor")
        for p, pairs in table.pairs.items():
            assert (p, 1) in pairs and (1, p) in pairs
            for k, j in pairs:
                assert abs(k * k - j * j) == p * p - 1
