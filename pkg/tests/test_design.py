import io

import numpy as np
import pytest

from afrelay.channel import ChannelModel, CorrelationParams, ErrorStats, build_model
from afrelay.design import (
    DesignConfig,
    IterTrace,
    alternate,
    f_of_lambda,
    f_step,
    g_step,
    initial_point,
    lambda_upper_bound,
    p_step,
    qmp_params,
)
from afrelay.matkit import herm
from afrelay.objective import PowerBudget, Transceiver, mse, r_x, relay_tx_power
from afrelay.qmp import QmpInfeasible, constraint_values, qmp_objective
from afrelay.validation import mse_gradient_fd, random_feasible_precoder, random_transceiver


def scalar_model():
    z = ErrorStats([[0.0]], [[0.0]])
    return ChannelModel([[1.0]], [[1.0]], z, z, [[1.0]], [[1.0]], 1)


ONE = np.ones((1, 1))


class TestGStep:
    def test_scalar(self):
        assert g_step(ONE, ONE, scalar_model())[0, 0] == pytest.approx(1 / 3, abs=1e-15)

    def test_zero_signal(self, ref_model):
        np.testing.assert_array_equal(g_step(np.eye(4), np.zeros((4, 4)), ref_model), 0)

    def test_stationary(self, ref_model, budget, rng):
        for _ in range(3):
            t = random_transceiver(ref_model, budget, rng)
            G = g_step(t.F, t.P, ref_model)
            g_opt = np.linalg.norm(mse_gradient_fd(Transceiver(t.P, t.F, G), ref_model))
            g_zero = np.linalg.norm(mse_gradient_fd(Transceiver(t.P, t.F, 0 * G), ref_model))
            assert g_opt <= 1e-6 * (1 + g_zero)

    def test_minimizes(self, ref_model, budget, rng):
        t = random_transceiver(ref_model, budget, rng)
        G = g_step(t.F, t.P, ref_model)
        best = mse(Transceiver(t.P, t.F, G), ref_model)
        for _ in range(50):
            D = 0.01 * (rng.standard_normal(G.shape) + 1j * rng.standard_normal(G.shape))
            assert mse(Transceiver(t.P, t.F, G + D), ref_model) >= best


class TestFStep:
    G = np.full((1, 1), 1 / 3)

    def test_f_of_lambda_scalar(self):
        assert f_of_lambda(0.0, self.G, ONE, scalar_model())[0, 0] == pytest.approx(1.5, abs=1e-14)
        assert f_of_lambda(1 / 18, self.G, ONE, scalar_model())[0, 0] == pytest.approx(1.0, abs=1e-14)
        assert f_of_lambda(1.0, np.zeros((1, 1)), ONE, scalar_model())[0, 0] == 0

    def test_bound_scalar(self):
        assert lambda_upper_bound(self.G, ONE, scalar_model(), 2.0) == pytest.approx(1 / 6, abs=1e-15)
        assert lambda_upper_bound(np.zeros((1, 1)), ONE, scalar_model(), 2.0) == 0

    def test_scalar_unconstrained(self):
        F, lam = f_step(self.G, ONE, scalar_model(), 4.5)
        assert lam == 0
        assert F[0, 0] == pytest.approx(1.5, abs=1e-14)

    def test_scalar_active(self):
        F, lam = f_step(self.G, ONE, scalar_model(), 2.0, tol=1e-12)
        assert F[0, 0] == pytest.approx(1.0, abs=1e-10)
        assert lam == pytest.approx(1 / 18, abs=1e-10)

    def test_bound_brackets_root(self, ref_model, budget, rng):
        for _ in range(50):
            t = random_transceiver(ref_model, budget, rng)
            hi = lambda_upper_bound(t.G, t.P, ref_model, budget.Pr)
            Rx = r_x(t.P, ref_model.stats_sr, ref_model.Hbar_sr, ref_model.Rn1)
            assert relay_tx_power(f_of_lambda(hi, t.G, t.P, ref_model), Rx) <= budget.Pr

    def test_power_strictly_decreasing(self, ref_model, budget, rng):
        for _ in range(50):
            t = random_transceiver(ref_model, budget, rng)
            hi = lambda_upper_bound(t.G, t.P, ref_model, budget.Pr)
            Rx = r_x(t.P, ref_model.stats_sr, ref_model.Hbar_sr, ref_model.Rn1)
            f = [relay_tx_power(f_of_lambda(l, t.G, t.P, ref_model), Rx) for l in np.linspace(0, hi, 100)]
            assert np.all(np.diff(f) < 0)

    def test_kkt(self, ref_model, budget, rng):
        for _ in range(20):
            t = random_transceiver(ref_model, budget, rng)
            F, lam = f_step(t.G, t.P, ref_model, budget.Pr)
            Rx = r_x(t.P, ref_model.stats_sr, ref_model.Hbar_sr, ref_model.Rn1)
            p = relay_tx_power(F, Rx)
            assert p <= budget.Pr * (1 + 1e-8)
            assert lam >= 0
            assert abs(lam * (p - budget.Pr)) <= 1e-6

    def test_beats_random_feasible_relay(self, ref_model, budget, rng):
        t = random_transceiver(ref_model, budget, rng)
        F, _ = f_step(t.G, t.P, ref_model, budget.Pr, tol=1e-12)
        best = mse(Transceiver(t.P, F, t.G), ref_model)
        Rx = r_x(t.P, ref_model.stats_sr, ref_model.Hbar_sr, ref_model.Rn1)
        for _ in range(300):
            Q = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            Q *= np.sqrt(rng.uniform() * budget.Pr / relay_tx_power(Q, Rx))
            assert best <= mse(Transceiver(t.P, Q, t.G), ref_model) + 1e-9

    def test_negative_lambda(self, ref_model):
        with pytest.raises(ValueError):
            f_of_lambda(-1.0, np.eye(4), np.eye(4), ref_model)


class TestQmpParams:
    def test_zero_error_reduction(self, ref_model, budget, rng):
        z = ref_model.without_errors()
        t = random_transceiver(z, budget, rng)
        prob = qmp_params(t.F, t.G, z, budget)
        C = t.G @ z.Hbar_rd @ t.F @ z.Hbar_sr
        np.testing.assert_allclose(prob.A0, herm(C) @ C, atol=1e-12)
        np.testing.assert_allclose(prob.B0, -herm(C), atol=1e-14)
        FH = t.F @ z.Hbar_sr
        np.testing.assert_allclose(prob.constraints[1][0], herm(FH) @ FH, atol=1e-12)

    def test_objective_matches_mse(self, ref_model, budget, rng):
        for _ in range(20):
            t = random_transceiver(ref_model, budget, rng)
            prob = qmp_params(t.F, t.G, ref_model, budget)
            P = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            assert qmp_objective(prob, P) == pytest.approx(mse(Transceiver(P, t.F, t.G), ref_model), rel=1e-9)

    def test_constraints_match_budgets(self, ref_model, budget, rng):
        for _ in range(20):
            t = random_transceiver(ref_model, budget, rng)
            prob = qmp_params(t.F, t.G, ref_model, budget)
            P = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            c1, c2 = constraint_values(prob, P)
            Rx = r_x(P, ref_model.stats_sr, ref_model.Hbar_sr, ref_model.Rn1)
            ref2 = relay_tx_power(t.F, Rx) - budget.Pr
            assert c2 == pytest.approx(ref2, rel=1e-9)
            assert c1 == pytest.approx(np.sum(np.abs(P) ** 2) - budget.Ps, rel=1e-12)


class TestPStep:
    def test_scalar_unconstrained(self):
        m = scalar_model()
        sol = p_step(ONE, ONE, m, PowerBudget(10, 10))
        prob = qmp_params(ONE, ONE, m, PowerBudget(10, 10))
        np.testing.assert_allclose(sol.P, -np.linalg.solve(prob.A0, prob.B0), atol=1e-8)
        assert sol.P[0, 0] == pytest.approx(1.0)

    def test_zero_equalizer(self, ref_model, budget):
        sol = p_step(np.eye(4), np.zeros((4, 4)), ref_model, budget)
        np.testing.assert_array_equal(sol.P, 0)

    def test_feasible_and_optimal(self, ref_model, budget, rng):
        t = random_transceiver(ref_model, budget, rng)
        sol = p_step(t.F, t.G, ref_model, budget)
        prob = qmp_params(t.F, t.G, ref_model, budget)
        assert np.sum(np.abs(sol.P) ** 2) <= budget.Ps * (1 + 1e-8)
        assert constraint_values(prob, sol.P)[1] <= 1e-8 * budget.Pr
        for _ in range(1000):
            assert sol.objective <= qmp_objective(prob, random_feasible_precoder(prob, rng)) + 1e-9

    def test_infeasible_relay_noise(self, ref_model, budget):
        with pytest.raises(QmpInfeasible):
            p_step(100 * np.eye(4), np.eye(4), ref_model, budget)


def scalar_grid_min(hs, hr, s1, s2, n1, n2, Ps, Pr, n=2000):
    """Exhaustive grid over |P| and |F| with the optimal equalizer plugged in."""
    p = np.linspace(0, np.sqrt(Ps), n)[:, None]
    rx = p**2 * (s1 + abs(hs) ** 2) + n1
    f = np.linspace(0, 1, n)[None, :] * np.sqrt(Pr / rx)
    num = (abs(hr) * f * abs(hs) * p) ** 2
    den = abs(hr) ** 2 * f**2 * rx + f**2 * rx * s2 + n2
    return float(np.min(1 - num / den))


class TestAlternate:
    def test_initial_point_meets_budgets(self, ref_model, budget):
        P, F = initial_point(ref_model, budget)
        assert np.sum(np.abs(P) ** 2) == pytest.approx(budget.Ps)
        Rx = r_x(P, ref_model.stats_sr, ref_model.Hbar_sr, ref_model.Rn1)
        assert relay_tx_power(F, Rx) == pytest.approx(budget.Pr)

    def test_scalar_grid(self):
        hs, hr, s1, s2, n1, n2, Ps, Pr = 0.8 + 0.3j, 1.1 - 0.2j, 0.05, 0.03, 0.1, 0.2, 1.0, 2.0
        m = ChannelModel([[hs]], [[hr]], ErrorStats([[s1]], [[1]]), ErrorStats([[s2]], [[1]]), [[n1]], [[n2]], 1)
        t, trace = alternate(m, PowerBudget(Ps, Pr))
        assert trace.converged and len(trace) <= 20
        assert abs(trace.mse[-1] - scalar_grid_min(hs, hr, s1, s2, n1, n2, Ps, Pr)) <= 1e-4

    def test_monotone_trace(self, ref_model, budget):
        t, trace = alternate(ref_model, budget, DesignConfig(max_iters=30))
        seq = np.r_[trace.initial_mse, trace.mse]
        assert np.all(np.diff(seq) <= 1e-9)
        assert mse(t, ref_model) == trace.mse[-1]
        assert len(trace) == 30 and not trace.converged

    def test_zero_error_matches_naive(self, preset, budget):
        m = build_model(*preset, CorrelationParams(0.5, 0.4, 0.0), 30, 20, 4, 4)
        cfg = DesignConfig(max_iters=20)
        _, a = alternate(m, budget, cfg)
        _, b = alternate(m.without_errors(), budget, cfg)
        assert abs(a.mse[-1] - b.mse[-1]) <= 1e-8

    def test_final_design_feasible(self, ref_model, budget):
        t, trace = alternate(ref_model, budget, DesignConfig(max_iters=10))
        assert np.sum(np.abs(t.P) ** 2) <= budget.Ps * (1 + 1e-8)
        Rx = r_x(t.P, ref_model.stats_sr, ref_model.Hbar_sr, ref_model.Rn1)
        assert relay_tx_power(t.F, Rx) <= budget.Pr * (1 + 1e-8)
        r = trace.records[-1]
        assert r.slack_ps >= -1e-8 and r.slack_pr >= -1e-8
        assert r.lam >= 0 and r.mu1 >= 0 and r.mu2 >= 0

    def test_trace_csv(self, ref_model, budget):
        _, trace = alternate(ref_model, budget, DesignConfig(max_iters=3))
        buf = io.StringIO()
        trace.write_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "iteration,mse,lambda,mu1,mu2,slack_ps,slack_pr"
        assert len(lines) == 4
        assert float(lines[-1].split(",")[1]) == trace.mse[-1]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DesignConfig(tol_mse=0)

    def test_empty_trace(self):
        assert len(IterTrace()) == 0
