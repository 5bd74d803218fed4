import numpy as np
import pytest
from scipy.linalg import expm
from scipy.stats import spearmanr

from conftest import FIG1_T
from wellsqueeze import (
    ControlSchedule,
    SpectralVector,
    WellSpec,
    analytic_amplitudes,
    build_resonance_table,
    compare_models,
    coupling_matrix,
    ground_state,
    magnus_first_order,
    propagate_full,
    propagate_reduced,
    propagate_rwa,
    reconstruct_wavefunction,
    synthesize,
    target_wavefunction,
    validity_window,
)
from wellsqueeze.dynamics import propagate, propagate_analytic, reduced_generator, rwa_generator
from wellsqueeze.errors import IntegrationError
from wellsqueeze.welltrap import LINEAR, ResonanceTable


def random_schedule(rng, N=None):
    N = N or int(rng.integers(3, 16))
    well = WellSpec(num_levels=N)
    cm = coupling_matrix(well)
    a = np.zeros(N)
    a[1::2] = rng.normal(size=len(a[1::2]))
    a *= rng.uniform(0.2, 1.0) / np.linalg.norm(a)
    return synthesize(SpectralVector(a), cm, rng.uniform(1.0, 300.0)), cm


def empty_schedule(well, T=5.0):
    return ControlSchedule(T, (), [], [], well, LINEAR)


@pytest.fixture(scope="module")
def small():
    """Two driven modes in a four-level well, short horizon: cheap for the full model."""
    well = WellSpec(num_levels=4)
    cm = coupling_matrix(well)
    s = synthesize(SpectralVector([0, 0.6, 0, 0.8]), cm, 20.0)
    return s, cm


@pytest.fixture(scope="module")
def fig1_trajs(fig1):
    s, cm = fig1["sched"], fig1["cm"]
    return propagate_rwa(s, cm, samples=200), propagate_reduced(s, cm, samples=200)


class TestFull:
    def test_free_evolution(self):
        well = WellSpec(num_levels=5)
        tr = propagate_full(empty_schedule(well), coupling_matrix(well), samples=11)
        np.testing.assert_array_equal(tr.amplitudes[:, 0], 1.0)
        assert np.all(tr.amplitudes[:, 1:] == 0)

    def test_rabi_two_level(self):
        well = WellSpec(num_levels=2)
        cm = coupling_matrix(well)
        s = synthesize(SpectralVector([0.0, 1.0]), cm, 200.0)
        full = propagate_full(s, cm, samples=101)
        rwa = propagate_rwa(s, cm, samples=101)
        win = validity_window(0.1, 1.0, s.horizon)
        assert compare_models(full, rwa, (win.start, win.end)).max_deviation < 0.01
        # the Rabi oracle itself: |a_2| = |sin(V d t / 2 hbar)|
        rabi = np.abs(np.sin(s.amplitudes[0] * cm.element(2, 1) * full.times / 2))
        assert np.max(np.abs(np.abs(full.amplitudes[:, 1]) - rabi)) < 0.01

    def test_first_sample_exact_and_norm(self, small):
        tr = propagate_full(*small, samples=50)
        assert tr.amplitudes[0, 0] == 1.0 and np.all(tr.amplitudes[0, 1:] == 0)
        assert np.max(np.abs(tr.norms - 1)) < 1e-9
        assert tr.metadata["steps"] > 0 and tr.metadata["tol"] == 1e-10

    def test_linearity(self, small, rng):
        s, cm = small
        u = rng.normal(size=4) + 1j * rng.normal(size=4)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
        al, be = 0.6, 0.8j
        w = al * u + be * v
        w_norm = np.linalg.norm(w)
        times = np.linspace(0, s.horizon, 5)
        fu = propagate_full(s, cm, psi0=u, times=times).final.amplitudes
        fv = propagate_full(s, cm, psi0=v, times=times).final.amplitudes
        fw = propagate_full(s, cm, psi0=w / w_norm, times=times).final.amplitudes * w_norm
        assert np.max(np.abs(fw - (al * fu + be * fv))) < 1e-7

    def test_reversibility(self, small):
        s, cm = small
        tol = 1e-10
        T10 = s.horizon / 10
        fw = propagate_full(s, cm, tol=tol, times=np.linspace(0, T10, 6))
        bw = propagate_full(s, cm, psi0=fw.final, tol=tol, times=np.linspace(T10, 0, 6))
        assert np.max(np.abs(bw.final.amplitudes - ground_state(cm.well).amplitudes)) < 10 * tol

    def test_step_budget(self, small):
        with pytest.raises(IntegrationError) as exc:
            propagate_full(*small, max_steps=50)
        assert 0 < exc.value.time < small[0].horizon

    @pytest.mark.parametrize("tol", [1e-13, 1e-3])
    def test_tolerance_range(self, small, tol):
        with pytest.raises(ValueError):
            propagate_full(*small, tol=tol)

    def test_unnormalized_initial_state(self, small):
        with pytest.raises(ValueError):
            propagate_full(*small, psi0=[1, 1, 0, 0])


class TestRWA:
    def test_empty_identity(self):
        well = WellSpec(num_levels=6)
        psi0 = np.array([0.6, 0, 0.8j, 0, 0, 0])
        tr = propagate_rwa(empty_schedule(well), coupling_matrix(well), psi0=psi0, samples=7)
        assert np.max(np.abs(tr.amplitudes - psi0)) < 1e-15

    def test_ground_pairs_suffice_below_seven(self, rng):
        well = WellSpec(num_levels=6)
        cm = coupling_matrix(well)
        s = synthesize(SpectralVector([0, 0.5, 0, 0.5, 0, np.sqrt(0.5)]), cm, 40.0)
        full_table = build_resonance_table(well)
        ground_only = ResonanceTable(6, {p: [(p, 1), (1, p)] for p in range(2, 7)})
        np.testing.assert_array_equal(rwa_generator(s, cm, full_table), rwa_generator(s, cm, ground_only))
        a = propagate_rwa(s, cm, full_table, samples=20)
        b = propagate_rwa(s, cm, ground_only, samples=20)
        np.testing.assert_array_equal(a.amplitudes, b.amplitudes)

    def test_generator_symmetric_and_unitary(self, fig1, fig1_trajs):
        G = rwa_generator(fig1["sched"], fig1["cm"])
        assert np.array_equal(G, G.T)
        assert np.max(np.abs(fig1_trajs[0].norms - 1)) < 1e-12

    def test_accidental_couplings_present(self, fig1):
        # carrier 4 also drives 7 <-> 8, so the RWA generator is not an arrowhead
        G = rwa_generator(fig1["sched"], fig1["cm"])
        assert G[6, 7] != 0.0 and G[6, 7] == G[7, 6]

    @pytest.mark.xfail(
        strict=True,
        reason="excited-excited resonances (e.g. 7<->8 under carrier 4) pull the RWA endpoint 0.38 away from the closed form",
    )
    def test_fig1_endpoint_matches_closed_form(self, fig1, fig1_trajs):
        expected = analytic_amplitudes(fig1["sched"], fig1["cm"], FIG1_T).amplitudes
        assert np.max(np.abs(fig1_trajs[0].final.amplitudes - expected)) < 1e-12


class TestReduced:
    def test_single_mode_rotation(self):
        well = WellSpec(num_levels=2)
        cm = coupling_matrix(well)
        s = synthesize(SpectralVector([0.0, 1.0]), cm, 10.0)
        t = 3.7
        exact = expm(-1j * np.array([[0, 1], [1, 0]]) * s.slopes[0] * cm.element(2, 1) * t) @ [1, 0]
        got = propagate_reduced(s, cm, times=[0.0, t]).final.amplitudes
        assert np.max(np.abs(got - exact)) < 1e-14
        phi = s.slopes[0] * cm.element(2, 1) * t
        assert got[0] == pytest.approx(np.cos(phi)) and got[1] == pytest.approx(-1j * np.sin(phi))

    def test_t0(self, fig1):
        tr = propagate_reduced(fig1["sched"], fig1["cm"], times=[0.0])
        np.testing.assert_array_equal(tr.amplitudes[0], ground_state(fig1["well"]).amplitudes)

    def test_matches_analytic(self, fig1):
        s, cm = fig1["sched"], fig1["cm"]
        red = propagate_reduced(s, cm, samples=100)
        ana = propagate_analytic(s, cm, samples=100)
        assert compare_models(red, ana).max_deviation < 1e-12

    def test_generator_is_arrowhead(self, fig1):
        G = reduced_generator(fig1["sched"], fig1["cm"])
        assert np.all(G[1:, 1:] == 0) and G[0, 0] == 0


class TestAnalytic:
    def test_t0(self, fig1):
        a = analytic_amplitudes(fig1["sched"], fig1["cm"], 0.0)
        np.testing.assert_array_equal(a.amplitudes, ground_state(fig1["well"]).amplitudes)

    def test_norm_identity(self, rng):
        for _ in range(200):
            s, cm = random_schedule(rng)
            assert abs(analytic_amplitudes(s, cm, rng.uniform(0, s.horizon)).norm_squared - 1) < 1e-12

    def test_terminal_identity(self, fig1):
        s, cm, target = fig1["sched"], fig1["cm"], fig1["target"]
        sn = target.excited_norm()
        a = analytic_amplitudes(s, cm, s.horizon, convention="real").amplitudes
        expected = target.amplitudes[1:] * np.sin(np.pi * sn / 2) / sn
        assert np.max(np.abs(a[1:] - expected)) < 1e-12
        b = analytic_amplitudes(s, cm, s.horizon).amplitudes
        assert np.max(np.abs(b[1:] + 1j * expected)) < 1e-12
        assert b[0] == pytest.approx(np.cos(np.pi * sn / 2), abs=1e-12)

    def test_small_rotation_series(self, fig1):
        s, cm = fig1["sched"], fig1["cm"]
        t = 1e-9
        a = analytic_amplitudes(s, cm, t, convention="real").amplitudes
        # sin(R)/R -> 1, so a_j -> d_j1 B_j t
        np.testing.assert_allclose(a[1:].real, cm.ground_column[1:] * s.slope_vector()[1:] * t, rtol=1e-12)

    @pytest.mark.parametrize("t", [-1.0, 100.5])
    def test_outside_horizon(self, fig1, t):
        with pytest.raises(ValueError):
            analytic_amplitudes(fig1["sched"], fig1["cm"], t)

    def test_unknown_convention(self, fig1):
        with pytest.raises(ValueError):
            analytic_amplitudes(fig1["sched"], fig1["cm"], 1.0, convention="other")


class TestMagnus:
    def test_matches_analytic(self, rng):
        worst = 0.0
        for _ in range(100):
            s, cm = random_schedule(rng)
            t = rng.uniform(0, s.horizon)
            worst = max(worst, np.max(np.abs(magnus_first_order(s, cm, t).amplitudes - analytic_amplitudes(s, cm, t).amplitudes)))
        assert worst < 1e-10

    def test_t0(self, fig1):
        a = magnus_first_order(fig1["sched"], fig1["cm"], 0.0)
        np.testing.assert_array_equal(a.amplitudes, ground_state(fig1["well"]).amplitudes)

    def test_quarter_rotation(self):
        well = WellSpec(num_levels=2)
        cm = coupling_matrix(well)
        s = synthesize(SpectralVector([0.0, 1.0]), cm, 4.0)
        a = magnus_first_order(s, cm, 4.0).amplitudes
        assert abs(a[0]) < 1e-14 and abs(abs(a[1]) - 1) < 1e-14


class TestReconstruct:
    def test_ground_state(self):
        well = WellSpec(num_levels=8)
        psi = reconstruct_wavefunction(ground_state(well), well, 512)
        np.testing.assert_allclose(psi.values.real, np.sqrt(2) * np.sin(np.pi * psi.x), atol=1e-14)
        assert psi.values[0] == 0 and psi.values[-1] == 0

    def test_target_pointwise(self, fig1):
        target, well, tspec = fig1["target"], fig1["well"], fig1["tspec"]
        psi = reconstruct_wavefunction(target, well, 2048)
        err = psi.values.real - target_wavefunction(tspec, psi.x)
        # L2 error of a truncated expansion is the discarded weight; compare in that norm
        l2 = np.sqrt(np.trapezoid(err**2, psi.x))
        assert l2 == pytest.approx(np.sqrt(1 - target.norm_squared), rel=1e-4)

    def test_grid_norm(self, rng):
        well = WellSpec(num_levels=30)
        a = rng.normal(size=30) + 1j * rng.normal(size=30)
        v = SpectralVector(a / np.linalg.norm(a), time=1.3)
        for frame in ("lab", "interaction"):
            assert abs(reconstruct_wavefunction(v, well, 2048, frame).norm - 1) < 1e-6

    def test_lab_phases(self):
        well = WellSpec(num_levels=3)
        v = SpectralVector([0, 1, 0], time=0.25)
        psi = reconstruct_wavefunction(v, well, 256)
        lab = np.exp(-1j * well.energies[1] * 0.25)
        np.testing.assert_allclose(psi.values, lab * np.sqrt(2) * np.sin(2 * np.pi * psi.x) * (psi.x % 1 != 0), atol=1e-13)

    def test_coarse_grid(self):
        well = WellSpec(num_levels=3)
        with pytest.raises(ValueError):
            reconstruct_wavefunction(ground_state(well), well, 255)


class TestHierarchy:
    def test_dispatch(self, fig1):
        with pytest.raises(ValueError):
            propagate("magic", fig1["sched"], fig1["cm"])

    def test_deviation_grows_with_excitation(self, fig1_trajs):
        rwa, red = fig1_trajs
        dev = compare_models(rwa, red).per_time
        rho = spearmanr(red.excited_population, dev).statistic
        assert rho > 0.9

    @pytest.mark.xfail(
        strict=True,
        reason="RWA-reduced deviation of several levels peaks inside the window, not at its edge",
    )
    def test_validity_window_edge_bounds_deviation(self, fig1, fig1_trajs):
        rwa, red = fig1_trajs
        win = validity_window(fig1["tspec"].sigma, 1.0, FIG1_T)
        inside = np.nonzero(win.contains(rwa.times))[0]
        dev = np.abs(rwa.amplitudes - red.amplitudes)[inside]
        assert np.all(dev.max(axis=0) <= dev[-1] + 1e-12)
