import math

import mpmath
import numpy as np
import pytest

from hrsolve.analysis import (
    ConstantsReport,
    absorbing_time,
    compute_constants,
    gronwall_envelope,
    homogeneous_equilibria,
    lyapunov_series,
    spike_train_metrics,
    tail_slope,
    translation_modulus,
    verify_dissipativity,
)
from hrsolve.grid import Field, constant_field, make_grid
from hrsolve.integrate import MONITOR_COLUMNS, SolverConfig, Trajectory, run
from hrsolve.model import HRParameters, constant_state, reaction, typical_parameters

EQ = (-0.6835120963130256, -1.3359439290311337, 3.665951614747898)


def mp_constants(volume=1.0):
    """Independent high-precision evaluation of the constants chain."""
    mpmath.mp.dps = 50
    a, b, al, be = map(mpmath.mpf, ("3", "1", "1", "5"))
    q, r, J, c = map(mpmath.mpf, ("0.0084", "0.0021", "3.281", "-1.6"))
    C1 = (be**2 + 4) / b
    C2 = (C1 * a) ** 4 + C1 * J**2 + (C1**2 * (2 + 1 / r) + C1) ** 2 \
        + 2 * al**2 + q**2 * c**2 / r + q**4 / r**2
    r1 = mpmath.mpf("0.5") * min(1, r)
    M = (2 * C2 + C1**2 / 32) / r1
    K1 = M * volume / min(C1, 1) + 1
    return C1, C2, r1, M, K1


class TestConstants:
    def test_exact_values(self):
        rep = compute_constants(typical_parameters(), 1.0)
        assert rep.C1 == 29.0
        assert rep.r1 == 0.00105

    def test_against_high_precision_oracle(self):
        rep = compute_constants(typical_parameters(), 1.0)
        C1, C2, r1, M, K1 = mp_constants()
        for got, want in ((rep.C2, C2), (rep.M, M), (rep.K1, K1)):
            assert abs(got - float(want)) <= 1e-12 * float(want)

    def test_self_consistency_bit_for_bit(self):
        p = typical_parameters()
        rep = compute_constants(p, 1.0)
        assert rep.C1 == (p.beta**2 + 4.0) / p.b
        assert rep.r1 == 0.5 * min(1.0, p.r)
        assert rep.M == (2.0 * rep.C2 + rep.C1 * rep.C1 / 32.0) / rep.r1
        assert rep.K1 == rep.M * rep.volume / min(rep.C1, 1.0) + 1.0

    def test_beta_monotonicity(self):
        p = typical_parameters()
        p2 = typical_parameters()
        p2.beta = 2 * p.beta
        assert compute_constants(p2, 1.0).C1 > compute_constants(p, 1.0).C1

    def test_degenerate_parameters_rejected(self):
        p = typical_parameters()
        p.r = 0.0
        with pytest.raises(ValueError, match="r > 0"):
            compute_constants(p, 1.0)
        p = typical_parameters()
        p.b = 0.0
        with pytest.raises(ValueError, match="b > 0"):
            compute_constants(p, 1.0)

    def test_overflow_reported(self):
        p = typical_parameters()
        p.J = 1e200
        with pytest.raises(ValueError, match="overflow"):
            compute_constants(p, 1.0)

    def test_field_current_uses_sup_bound(self):
        dom = make_grid(1, [1.0], [8])
        p = typical_parameters()
        p.J = Field(dom, np.linspace(-2.0, 3.0, 8))
        rep = compute_constants(p, dom.volume)
        p2 = typical_parameters()
        p2.J = 3.0
        assert rep.C2 == compute_constants(p2, dom.volume).C2

    def test_text_round_trip(self):
        rep = compute_constants(typical_parameters(), 2.0)
        again = ConstantsReport.from_text(rep.to_text())
        assert again == rep


class TestAbsorbingTime:
    def test_unit_ball(self):
        rep = compute_constants(typical_parameters(), 1.0)
        expect = math.log(29.0) / 0.00105
        assert absorbing_time(rep, 1.0) == pytest.approx(expect, rel=1e-12)
        assert absorbing_time(rep, 1.0) == pytest.approx(3206.948, rel=1e-6)

    def test_log_one_is_zero(self):
        rep = compute_constants(typical_parameters(), 1.0)
        R = 29.0 ** -0.5
        assert abs(absorbing_time(rep, R)) <= 1e-12

    def test_doubling_shift(self):
        rep = compute_constants(typical_parameters(), 1.0)
        shift = absorbing_time(rep, 2.0) - absorbing_time(rep, 1.0)
        assert shift == pytest.approx(2.0 * math.log(2.0) / rep.r1, rel=1e-12)

    def test_nonpositive_radius(self):
        rep = compute_constants(typical_parameters(), 1.0)
        with pytest.raises(ValueError):
            absorbing_time(rep, 0.0)


class TestEnvelope:
    def test_at_zero(self):
        rep = compute_constants(typical_parameters(), 1.0)
        assert gronwall_envelope(rep, 7.0, 0.0) == pytest.approx(7.0 + rep.M, rel=1e-15)

    def test_long_time_limit(self):
        rep = compute_constants(typical_parameters(), 1.0)
        assert gronwall_envelope(rep, 7.0, 1e9) == pytest.approx(rep.M, rel=1e-12)

    def test_paper_arithmetic_example(self):
        rep = compute_constants(typical_parameters(), 1.0)
        got = gronwall_envelope(rep, 10.0, 1000.0)
        assert got == pytest.approx(10.0 * math.exp(-1.05) + rep.M, rel=1e-12)

    def test_monotone_nonincreasing_and_floored(self):
        rep = compute_constants(typical_parameters(), 1.0)
        t = np.linspace(0, 5000, 200)
        env = gronwall_envelope(rep, 123.0, t)
        assert np.all(np.diff(env) <= 0)
        assert np.all(env >= rep.M * rep.volume)

    def test_negative_time_rejected(self):
        rep = compute_constants(typical_parameters(), 1.0)
        with pytest.raises(ValueError):
            gronwall_envelope(rep, 1.0, -1.0)


class TestVerifyDissipativity:
    def test_equilibrium_run_passes(self):
        dom = make_grid(1, [1.0], [4])
        p = typical_parameters()
        traj = run(dom, p, SolverConfig(dt=1e-3, t_end=10.0, monitor_every=100),
                   constant_state(dom, EQ))
        rep = compute_constants(p, dom.volume)
        report = verify_dissipativity(rep, traj, slack=0.05)
        assert report.passed
        assert report.first_violation is None

    def test_synthetic_violation_fails_at_first_sample(self):
        dom = make_grid(1, [1.0], [4])
        rep = compute_constants(typical_parameters(), dom.volume)
        times = np.linspace(0.0, 10.0, 11)
        monitor = np.zeros((11, len(MONITOR_COLUMNS)))
        monitor[:, 0] = times
        w0 = 4.0
        env = gronwall_envelope(rep, w0, times)
        monitor[:, MONITOR_COLUMNS.index("weighted")] = 2.0 * env
        monitor[0, MONITOR_COLUMNS.index("weighted")] = w0  # defines the envelope start
        monitor[:, MONITOR_COLUMNS.index("L2u")] = 1.0
        traj = Trajectory(domain=dom, times=times, monitor=monitor)
        report = verify_dissipativity(rep, traj, slack=0.05)
        assert not report.passed
        assert report.first_violation == times[1]

    def test_empty_trajectory_rejected(self):
        dom = make_grid(1, [1.0], [4])
        rep = compute_constants(typical_parameters(), dom.volume)
        traj = Trajectory(domain=dom, times=np.array([]),
                          monitor=np.zeros((0, len(MONITOR_COLUMNS))))
        with pytest.raises(ValueError, match="samples"):
            verify_dissipativity(rep, traj)

    def test_csv_layout(self, tmp_path):
        dom = make_grid(1, [1.0], [4])
        p = typical_parameters()
        traj = run(dom, p, SolverConfig(dt=1e-3, t_end=1.0), constant_state(dom, EQ))
        rep = compute_constants(p, dom.volume)
        path = tmp_path / "verification.csv"
        verify_dissipativity(rep, traj).to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,weighted,envelope,pass"
        assert lines[1].endswith(",1")


class TestLyapunov:
    def test_equilibrium_is_stationary(self):
        dom = make_grid(1, [1.0], [2])
        p = typical_parameters()
        cfg = SolverConfig(dt=1e-3, t_end=1.0, scheme="rk4", monitor_every=1,
                           snapshot_every=1)
        traj = run(dom, p, cfg, constant_state(dom, EQ))
        ls = lyapunov_series(traj, p, dom)
        assert np.abs(ls.gamma - ls.gamma[0]).max() <= 1e-10
        assert np.abs(ls.dissipation).max() <= 1e-10
        assert np.abs(ls.residual).max() <= 1e-10

    def test_ode_identity_residual(self):
        dom = make_grid(1, [1.0], [2])
        p = typical_parameters()
        cfg = SolverConfig(dt=1e-3, t_end=20.0, scheme="rk4", monitor_every=1,
                           snapshot_every=1)
        traj = run(dom, p, cfg, constant_state(dom, (1.0, 0.0, 0.0)))
        ls = lyapunov_series(traj, p, dom)
        bound = 1e-2 * np.maximum(1.0, np.abs(ls.dissipation))
        assert np.all(np.abs(ls.residual) <= bound)
        # gamma should essentially never increase along the flow
        assert np.diff(ls.gamma).max() <= 1e-6

    def test_residual_scales_quadratically_in_dt(self):
        dom = make_grid(1, [1.0], [2])
        p = typical_parameters()
        maxres = {}
        for dt in (1e-3, 5e-4):
            cfg = SolverConfig(dt=dt, t_end=20.0, scheme="rk4", monitor_every=1,
                               snapshot_every=1)
            traj = run(dom, p, cfg, constant_state(dom, (1.0, 0.0, 0.0)))
            maxres[dt] = np.abs(lyapunov_series(traj, p, dom).residual).max()
        ratio = maxres[1e-3] / maxres[5e-4]
        assert 3.0 <= ratio <= 5.0

    def test_needs_two_states(self):
        dom = make_grid(1, [1.0], [2])
        p = typical_parameters()
        traj = run(dom, p, SolverConfig(dt=1e-3, t_end=0.0, snapshot_every=1),
                   constant_state(dom, EQ))
        with pytest.raises(ValueError, match="2 stored states"):
            lyapunov_series(traj, p, dom)


def bisect_cubic(p, lo, hi, n=20000):
    """Independent root finder: sign scan plus bisection on the reduced cubic."""
    def f(u):
        return -p.b * u**3 + (p.a - p.beta) * u**2 - (p.q / p.r) * u \
            + (p.alpha + p.J + p.q * p.c / p.r)

    grid = np.linspace(lo, hi, n)
    vals = f(grid)
    roots = []
    for i in range(n - 1):
        if vals[i] == 0.0:
            roots.append(grid[i])
        elif vals[i] * vals[i + 1] < 0:
            a_, b_ = grid[i], grid[i + 1]
            for _ in range(200):
                m = 0.5 * (a_ + b_)
                if f(a_) * f(m) <= 0:
                    b_ = m
                else:
                    a_ = m
            roots.append(0.5 * (a_ + b_))
    return roots


class TestEquilibria:
    def test_typical_set(self):
        p = typical_parameters()
        eqs = homogeneous_equilibria(p)
        assert len(eqs) == 1
        e = eqs.equilibria[0]
        oracle = bisect_cubic(p, -14.0, 14.0)
        assert len(oracle) == 1
        assert abs(e.u - oracle[0]) <= 1e-10
        assert e.u == pytest.approx(-0.684, abs=5e-4)
        assert e.v == pytest.approx(1 - 5 * e.u**2, rel=1e-12)
        assert e.w == pytest.approx(4.0 * (e.u + 1.6), rel=1e-12)
        assert e.residual <= 1e-12
        assert e.stability == "unstable"

    def test_reaction_vanishes_at_equilibria(self):
        p = typical_parameters()
        dom = make_grid(1, [1.0], [2])
        for e in homogeneous_equilibria(p):
            f = reaction(p, constant_state(dom, (e.u, e.v, e.w)))
            for comp in (f.u, f.v, f.w):
                assert np.abs(comp.values).max() <= 1e-10

    def test_constructed_single_root(self):
        # a == beta and alpha + J + q*c/r == 0 reduce the cubic to -b*u^3 - (q/r)*u
        p = HRParameters(a=3.0, b=1.0, alpha=1.0, beta=3.0, q=0.5, r=0.5, J=0.0, c=-1.0)
        eqs = homogeneous_equilibria(p)
        assert len(eqs) == 1
        assert abs(eqs.equilibria[0].u) <= 1e-12

    def test_constructed_three_roots(self):
        p = HRParameters(a=4.0, b=1.0, alpha=1.0, beta=1.0, q=0.001, r=0.1, J=0.0, c=-200.0)
        eqs = homogeneous_equilibria(p)
        assert len(eqs) == 3
        us = [e.u for e in eqs]
        assert us == sorted(us)
        assert min(np.diff(us)) > 1e-8
        oracle = bisect_cubic(p, -14.0, 14.0)
        assert np.abs(np.array(us) - np.array(oracle)).max() <= 1e-9
        for e in eqs:
            assert e.residual <= 1e-10

    def test_r_zero_rejected(self):
        p = typical_parameters()
        p.r = 0.0
        with pytest.raises(ValueError, match="r > 0"):
            homogeneous_equilibria(p)

    def test_field_current_rejected(self):
        dom = make_grid(1, [1.0], [4])
        p = typical_parameters()
        p.J = Field(dom, np.zeros(4))
        with pytest.raises(ValueError, match="constant"):
            homogeneous_equilibria(p)


class TestTranslationModulus:
    def test_zero_field(self):
        dom = make_grid(1, [1.0], [16])
        assert translation_modulus(dom, constant_field(dom, 0.0), (0.25,), 2) == 0.0

    def test_unit_box_analytic(self):
        # f == 1, y = 0.25: the zero-extended shift differs on a strip of measure 1/4
        dom = make_grid(1, [1.0], [16])
        got = translation_modulus(dom, constant_field(dom, 1.0), (0.25,), 2)
        assert got == pytest.approx(0.5, abs=1e-12)

    def test_zero_offset(self):
        dom = make_grid(1, [1.0], [16])
        f = Field(dom, np.random.default_rng(6).uniform(-1, 1, 16))
        assert translation_modulus(dom, f, (0.0,), 2) == 0.0

    def test_dyadic_decay_for_smooth_field(self):
        # sin vanishes at both ends, so the zero-extension strip stays small
        dom = make_grid(1, [1.0], [64])
        x = (np.arange(64) + 0.5) * dom.spacing[0]
        f = Field(dom, np.sin(np.pi * x))
        h = dom.spacing[0]
        mods = [translation_modulus(dom, f, (k * h,), 2) for k in (8, 4, 2, 1)]
        assert all(a > b for a, b in zip(mods, mods[1:]))
        assert mods[-1] < 0.1


class TestSpikeTrainMetrics:
    def test_constant_series(self):
        t = np.linspace(0, 10, 101)
        m = spike_train_metrics(t, np.full_like(t, 0.2), 0.5)
        assert m.spike_count == 0
        assert m.burst_count == 0

    def test_sine_crossings(self):
        t = np.arange(0, 3.0 + 1e-12, 1e-4)
        m = spike_train_metrics(t, np.sin(2 * np.pi * t), 0.0)
        assert m.spike_count == 3
        assert np.allclose(m.isi, 1.0, atol=1e-6)
        assert m.burst_count == 1

    def test_synthetic_two_bursts(self):
        t = np.linspace(0, 20, 20001)
        u = np.zeros_like(t)
        for c in (1, 2, 3, 11, 12, 13):
            u[(t >= c) & (t < c + 0.3)] = 1.0
        m = spike_train_metrics(t, u, 0.5)
        assert m.spike_count == 6
        assert m.burst_count == 2
        assert m.isi_cv > 0.5

    def test_non_monotone_times_rejected(self):
        with pytest.raises(ValueError, match="increasing"):
            spike_train_metrics([0.0, 1.0, 0.5], [0.0, 1.0, 0.0], 0.5)


class TestTailSlope:
    def test_linear_series(self):
        t = np.linspace(0, 100, 1001)
        assert tail_slope(t, 2.0 + 0.3 * t) == pytest.approx(0.3, rel=1e-10)

    def test_flat_series(self):
        t = np.linspace(0, 100, 1001)
        assert abs(tail_slope(t, np.full_like(t, 4.0))) <= 1e-14
