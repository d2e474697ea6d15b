import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from oracles import ring_hamiltonian, schrodinger_ode
from tbcreset.analytic import ModelParams, p_site_reset, p_site_reset_curve
from tbcreset.lattice import (
    ConfigurationError,
    Lattice,
    ResetTrajectory,
    apply_reset,
    build_operators,
    default_dt_max,
    ensemble_average,
    evolve_unitary,
    finite_size_flag,
    finite_size_margin,
    hermiticity_residual,
    no_reset_trajectory,
    projector,
    run_trajectory,
    sample_reset_times,
    step_propagator,
)

FIG1 = dict(delta=1.0, f0=1.0, lam=0.25, n0=1, n_reset=10)


def fig1(omega=0.1, **kw):
    return ModelParams.build(**{**FIG1, "omega": omega, **kw})


def test_lattice_validation():
    with pytest.raises(ConfigurationError):
        Lattice((1, 2, 4, 5))
    with pytest.raises(ConfigurationError):
        Lattice((1, 2, 3))
    lat = Lattice.from_range(1, 30)
    assert lat.n_sites == 30 and 30 in lat and 31 not in lat
    with pytest.raises(ConfigurationError):
        lat.index(0)


def test_centered_labels():
    assert Lattice.centered(30, 1, 10).labels[0] == -9
    assert Lattice.centered(30, 1, 10).labels[-1] == 20
    assert Lattice.centered(12, 1, 10).labels == tuple(range(0, 12))


def test_sites_must_be_on_lattice():
    with pytest.raises(ConfigurationError):
        build_operators(fig1(), Lattice.from_range(0, 8))


def test_operators():
    lat = Lattice.from_range(-3, 9)
    ops = build_operators(fig1(n0=0, n_reset=2), lat)
    h = ops.hamiltonian(2.7)
    assert np.allclose(h, h.conj().T)
    expected = -0.5 * fig1().delta * ops.hop + math.cos(0.1 * 2.7) * np.diag(lat.positions)
    assert np.allclose(h, expected)
    # hopping is a circulant with eigenvalues 2 cos(2 pi k / N)
    evals = np.sort(np.linalg.eigvalsh(ops.hop))
    assert np.allclose(evals, np.sort(2 * np.cos(2 * np.pi * np.arange(9) / 9)))


def test_step_propagator_unitary():
    ops = build_operators(fig1(), Lattice.from_range(0, 12))
    u = step_propagator(ops, 1.3, 0.05)
    assert np.allclose(u @ u.conj().T, np.eye(12), atol=1e-14)


@pytest.mark.parametrize("m", [1, 3, -4, 6])
def test_no_field_exact_solution(m):
    params = ModelParams.build(delta=1.0, f0=0.0, n0=1, n_reset=1)
    lat = Lattice.centered(30, 1, 1)
    ops = build_operators(params, lat)
    rho = projector(lat, 1)
    t = 0.0
    for t_next in np.linspace(0.5, 15 - abs(m - 1) - 1.0, 5):
        rho = evolve_unitary(rho, ops, t, t_next, 0.05)
        t = t_next
        assert rho[lat.index(m), lat.index(m)].real == pytest.approx(special.jv(m - 1, t) ** 2, abs=1e-6)


def test_driven_propagation_against_ode():
    lat = Lattice.from_range(-3, 8)
    params = ModelParams.build(delta=1.0, f0=1.0, omega=0.7, n0=0, n_reset=0)
    ops = build_operators(params, lat)
    psi0 = np.zeros(8, dtype=complex)
    psi0[lat.index(0)] = 1.0
    psi = schrodinger_ode(ring_hamiltonian(8, lat.labels, 1.0, 1.0, 0.7), psi0, 6.0)
    exact = np.outer(psi, psi.conj())
    errs = []
    for h in (0.02, 0.01):
        rho = evolve_unitary(projector(lat, 0), ops, 0.0, 6.0, h)
        errs.append(np.max(np.abs(rho - exact)))
    assert errs[1] < 2e-5
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_evolve_composes():
    lat = Lattice.from_range(0, 10)
    ops = build_operators(fig1(omega=2.0, n_reset=5), lat)
    rho = projector(lat, 4)
    whole = evolve_unitary(rho, ops, 0.0, 3.0, 0.01)
    split = evolve_unitary(evolve_unitary(rho, ops, 0.0, 1.0, 0.01), ops, 1.0, 3.0, 0.01)
    assert np.allclose(whole, split, atol=1e-13)
    assert hermiticity_residual(whole) < 1e-14
    with pytest.raises(ValueError):
        evolve_unitary(rho, ops, 2.0, 1.0, 0.01)


def test_apply_reset():
    lat = Lattice.from_range(0, 6)
    rho = np.full((6, 6), 1.0 / 6, dtype=complex)
    out = apply_reset(rho, lat, 3)
    assert out[3, 3] == 1.0 and np.count_nonzero(out) == 1
    with pytest.raises(ValueError):
        apply_reset(2 * rho, lat, 3)


def test_reset_times_deterministic():
    a = sample_reset_times(0.25, 30.0, 42)
    b = sample_reset_times(0.25, 30.0, 42)
    assert np.array_equal(a.reset_times, b.reset_times)
    assert not np.array_equal(a.reset_times, sample_reset_times(0.25, 30.0, 43).reset_times)
    assert np.all(np.diff(a.reset_times) > 0) and (a.reset_times < 30.0).all()


def test_reset_statistics():
    lam, horizon = 0.5, 200.0
    gaps, counts = [], []
    for seed in range(200):
        traj = sample_reset_times(lam, horizon, seed)
        gaps.extend(traj.gaps)
        counts.append(len(traj.reset_times))
    assert stats.kstest(gaps, "expon", args=(0, 1 / lam)).pvalue > 1e-3
    mean, se = np.mean(counts), np.std(counts) / math.sqrt(len(counts))
    assert abs(mean - lam * horizon) < 4 * se
    assert np.var(counts, ddof=1) == pytest.approx(lam * horizon, rel=0.3)


def test_longest_stretch_includes_tail():
    traj = ResetTrajectory(np.array([1.0, 2.5]), 10.0, 0)
    assert traj.longest_stretch == 7.5
    assert np.allclose(traj.gaps, [1.0, 1.5])


def test_trajectory_diagnostics():
    params = fig1()
    lat = Lattice.centered(30, 1, 10)
    times = np.linspace(0.0, 30.0, 31)
    res = run_trajectory(params, lat, sample_reset_times(0.25, 30.0, 5), times)
    assert np.allclose(res.diagonals.sum(axis=1), 1.0, atol=1e-10)
    assert res.max_trace_error < 1e-12
    assert res.max_hermiticity_error < 1e-10
    assert res.min_eigenvalue >= -1e-10
    assert (res.diagonals >= -1e-12).all() and (res.diagonals <= 1 + 1e-12).all()


def test_trajectory_deterministic():
    params = fig1(omega=10.0)
    lat = Lattice.centered(20, 1, 10)
    times = np.linspace(0.0, 8.0, 9)
    traj = sample_reset_times(0.25, 8.0, 11)
    a = run_trajectory(params, lat, traj, times)
    b = run_trajectory(params, lat, traj, times)
    assert np.array_equal(a.diagonals, b.diagonals)


def test_sample_before_reset_at_same_time():
    params = fig1()
    lat = Lattice.centered(20, 1, 10)
    traj = ResetTrajectory(np.array([2.0]), 4.0, 0)
    res = run_trajectory(params, lat, traj, [2.0, 4.0])
    free = run_trajectory(params, lat, no_reset_trajectory(4.0), [2.0])
    assert np.allclose(res.diagonals[0], free.diagonals[0], atol=1e-14)


@pytest.mark.parametrize("clock", ["restart", "absolute"])
def test_post_reset_segment(clock):
    params = fig1()
    lat = Lattice.centered(24, 1, 10)
    ops = build_operators(params, lat)
    dt = default_dt_max(params)
    s, t = 3.0, 7.0
    res = run_trajectory(params, lat, ResetTrajectory(np.array([s]), t, 0), [t], dt, clock)
    start, stop = (0.0, t - s) if clock == "restart" else (s, t)
    ref = evolve_unitary(projector(lat, 10), ops, start, stop, dt)
    assert np.allclose(res.diagonals[0], ref.diagonal().real, atol=1e-12)


def test_clocks_agree_without_field():
    params = fig1(f0=0.0)
    lat = Lattice.centered(24, 1, 10)
    traj = sample_reset_times(0.25, 10.0, 3)
    a = run_trajectory(params, lat, traj, [5.0, 10.0], clock="restart")
    b = run_trajectory(params, lat, traj, [5.0, 10.0], clock="absolute")
    assert np.allclose(a.diagonals, b.diagonals, atol=1e-12)


def test_finite_size_guard():
    params = fig1()
    lat = Lattice.centered(30, 1, 10)
    assert finite_size_margin(params, lat, [9, 10]) == 15 - 9
    assert not finite_size_flag(params, lat, 5.9, [9, 10])
    assert finite_size_flag(params, lat, 6.1, [9, 10])


def test_ensemble_workers_do_not_change_output():
    params = fig1(omega=10.0)
    lat = Lattice.centered(16, 1, 10)
    times = np.linspace(0.0, 4.0, 5)
    a = ensemble_average(params, lat, 6, times, seed=9, workers=1)
    b = ensemble_average(params, lat, 6, times, seed=9, workers=2)
    assert np.array_equal(a.p_site, b.p_site)
    assert np.array_equal(a.msd, b.msd)
    assert a.metadata["seed"] == 9 and a.n_realizations == 6


def test_ensemble_flags_and_se():
    params = fig1()
    lat = Lattice.centered(30, 1, 10)
    times = np.linspace(0.0, 30.0, 7)
    s = ensemble_average(params, lat, 10, times, seed=0, query_sites=(9, 10))
    expected = sum(
        finite_size_flag(params, lat, sample_reset_times(0.25, 30.0, i).longest_stretch, (9, 10)) for i in range(10)
    )
    assert s.n_flagged == expected
    assert np.allclose(s.p_se(9), s.p_site_sd[:, s.column(9)] / math.sqrt(10))
    assert np.allclose(s.p_site.sum(axis=1), 1.0, atol=1e-10)


def test_ensemble_needs_two():
    with pytest.raises(ValueError):
        ensemble_average(fig1(), Lattice.centered(30, 1, 10), 1, [0.0, 1.0])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([0.1, 10.0]))
def test_trajectory_conserves_probability(seed, omega):
    params = fig1(omega=omega)
    lat = Lattice.centered(14, 1, 10)
    res = run_trajectory(params, lat, sample_reset_times(1.0, 6.0, seed), np.linspace(0.0, 6.0, 7))
    assert np.allclose(res.diagonals.sum(axis=1), 1.0, atol=1e-10)
    assert res.min_eigenvalue >= -1e-10


@pytest.mark.parametrize("clock", ["absolute", "restart"])
def test_monte_carlo_matches_renewal_for_each_clock(clock):
    params = fig1()
    lat = Lattice.centered(30, 1, 10)
    times = np.linspace(0.0, 10.0, 21)[1:]
    s = ensemble_average(params, lat, 300, times, seed=2024, clock=clock)
    for m in (9, 10):
        if clock == "restart":
            exact = p_site_reset_curve(params, m, times)
        else:
            exact = np.array([p_site_reset(params, m, t, clock="absolute") for t in times])
        z = np.abs(s.p(m) - exact) / np.maximum(s.p_se(m), 1e-12)
        assert np.mean(z < 3.0) >= 0.95
