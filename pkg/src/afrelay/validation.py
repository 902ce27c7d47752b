"""Oracle checks run by ``afrelay validate``.

Each check compares an implementation path against an independent one
(Monte-Carlo averages, finite differences, random feasible sampling, the
semidefinite lift) and reports pass/fail with a short detail string.
"""

from dataclasses import dataclass

import numpy as np

from . import design, objective, qmp
from .channel import true_channel
from .matkit import herm, real_trace, sample_cgaussian
from .objective import Transceiver


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_transceiver(model, budget, rng):
    """Random triple with ``P`` and ``F`` scaled to meet both budgets."""
    n_s, m_r, n_r, m_d = model.dims
    N = model.N
    P = sample_cgaussian(n_s, N, rng)
    P *= np.sqrt(budget.Ps / real_trace(P @ herm(P)))
    F = sample_cgaussian(n_r, m_r, rng)
    Rx = objective.r_x(P, model.stats_sr, model.Hbar_sr, model.Rn1)
    F *= np.sqrt(budget.Pr / objective.relay_tx_power(F, Rx))
    G = 0.3 * sample_cgaussian(N, m_d, rng)
    return Transceiver(P, F, G)


def random_feasible_precoder(prob, rng):
    """Random ``P`` inside both power constraints (radially scaled)."""
    P = sample_cgaussian(*prob.shape, rng)
    P = design_scale(prob, P) * rng.uniform() ** (1.0 / (2 * P.size)) * P
    return P


def design_scale(prob, P):
    """Largest ``s`` with ``s P`` feasible for every homogeneous constraint."""
    s = np.inf
    for A, _, c in prob.constraints:
        q = float(np.real(np.vdot(P, A @ P)))
        if q > 0:
            s = min(s, np.sqrt(-c / q))
    return s


def mse_gradient_fd(t, model, h=1e-6):
    """Central-difference gradient of the MSE w.r.t. real and imaginary
    parts of ``G``."""
    G = t.G
    grad = np.zeros(G.shape, dtype=np.complex128)
    for idx in np.ndindex(G.shape):
        for unit, part in ((1.0, "re"), (1j, "im")):
            Gp = G.copy()
            Gm = G.copy()
            Gp[idx] += unit * h
            Gm[idx] -= unit * h
            d = (objective.mse(Transceiver(t.P, t.F, Gp), model) - objective.mse(Transceiver(t.P, t.F, Gm), model)) / (
                2 * h
            )
            if part == "re":
                grad[idx] += d
            else:
                grad[idx] += 1j * d
    return grad


def check_pi_p(model, budget, rng, samples=100_000, n_se=3.0):
    P = np.sqrt(budget.Ps / model.N) * np.eye(model.dims[0], model.N)
    expected = objective.pi_p(P, model.stats_sr, model.Hbar_sr)
    acc = np.zeros_like(expected)
    acc2 = np.zeros(expected.shape)
    batch = 20_000
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        H = true_channel(model.Hbar_sr, model.stats_sr, rng, size=(b,))
        HP = H @ P
        X = HP @ herm(HP)
        acc += X.sum(axis=0)
        acc2 += (np.abs(X) ** 2).sum(axis=0)
        done += b
    mean = acc / samples
    var = (acc2 / samples - np.abs(mean) ** 2) * samples / (samples - 1)
    se = np.sqrt(np.clip(var, 0, None) / samples)
    z = np.abs(mean - expected) / np.where(se > 0, se, np.inf)
    worst = float(np.max(z))
    return CheckResult("pi_p_expectation", worst <= n_se, f"max |dev|/se = {worst:.2f} (limit {n_se})")


def check_mse_monte_carlo(model, budget, rng, n_transceivers=5, trials=20_000, n_se=4.0):
    worst = 0.0
    for _ in range(n_transceivers):
        t = random_transceiver(model, budget, rng)
        closed = objective.mse(t, model)
        est, se = objective.mse_monte_carlo(t, model, trials, rng)
        worst = max(worst, abs(est - closed) / se)
    return CheckResult("mse_monte_carlo", worst <= n_se, f"max |dev|/se = {worst:.2f} (limit {n_se})")


def check_g_step(model, budget, rng, n=5, rtol=1e-6):
    worst = 0.0
    for _ in range(n):
        t = random_transceiver(model, budget, rng)
        G = design.g_step(t.F, t.P, model)
        g_opt = np.linalg.norm(mse_gradient_fd(Transceiver(t.P, t.F, G), model))
        g_zero = np.linalg.norm(mse_gradient_fd(Transceiver(t.P, t.F, np.zeros_like(G)), model))
        worst = max(worst, g_opt / (1.0 + g_zero))
    return CheckResult("g_step_gradient", worst <= rtol, f"max relative gradient {worst:.2e} (limit {rtol:.0e})")


def check_f_step(model, budget, rng, n=20, tol=1e-6):
    worst = 0.0
    ok = True
    for _ in range(n):
        t = random_transceiver(model, budget, rng)
        F, lam = design.f_step(t.G, t.P, model, budget.Pr)
        Rx = objective.r_x(t.P, model.stats_sr, model.Hbar_sr, model.Rn1)
        p = objective.relay_tx_power(F, Rx)
        ok &= p <= budget.Pr * (1 + 1e-8) and lam >= 0
        worst = max(worst, abs(lam * (p - budget.Pr)))
    ok &= worst <= tol
    return CheckResult("f_step_kkt", bool(ok), f"max |lambda*(power-Pr)| = {worst:.2e}")


def check_f_monotone(model, budget, rng, n=10, points=100):
    bad = 0
    for _ in range(n):
        t = random_transceiver(model, budget, rng)
        hi = design.lambda_upper_bound(t.G, t.P, model, budget.Pr)
        Rx = objective.r_x(t.P, model.stats_sr, model.Hbar_sr, model.Rn1)
        grid = np.linspace(hi / points, hi, points)
        f = [objective.relay_tx_power(design.f_of_lambda(lam, t.G, t.P, model), Rx) for lam in grid]
        bad += int(np.any(np.diff(f) >= 0))
    return CheckResult("f_lambda_monotone", bad == 0, f"{bad}/{n} instances not strictly decreasing")


def check_p_step(model, budget, rng, n=10, samples=1000, tol=1e-6):
    worst_gap = 0.0
    worst_kkt = 0.0
    beaten = 0
    for _ in range(n):
        t = random_transceiver(model, budget, rng)
        prob = design.qmp_params(t.F, t.G, model, budget)
        sol = qmp.solve_dual(prob)
        worst_gap = max(worst_gap, abs(qmp.certify_sdr_gap(prob, sol)))
        worst_kkt = max(worst_kkt, sol.kkt_residual)
        for _ in range(samples):
            Q = random_feasible_precoder(prob, rng)
            if qmp.qmp_objective(prob, Q) < sol.objective - 1e-9:
                beaten += 1
    ok = worst_gap <= tol and worst_kkt <= tol and beaten == 0
    return CheckResult(
        "p_step_optimality", ok, f"gap {worst_gap:.1e}, kkt {worst_kkt:.1e}, {beaten} random points better"
    )


def check_qmp_params(model, budget, rng, n=10, rtol=1e-9):
    worst = 0.0
    for _ in range(n):
        t = random_transceiver(model, budget, rng)
        prob = design.qmp_params(t.F, t.G, model, budget)
        a = qmp.qmp_objective(prob, t.P)
        b = objective.mse(t, model)
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
        Rx = objective.r_x(t.P, model.stats_sr, model.Hbar_sr, model.Rn1)
        c2 = qmp.constraint_values(prob, t.P)[1]
        ref = objective.relay_tx_power(t.F, Rx) - budget.Pr
        worst = max(worst, abs(c2 - ref) / max(budget.Pr, abs(ref)))
    return CheckResult("qmp_params_consistency", worst <= rtol, f"max relative mismatch {worst:.1e}")


def check_sdr_lift(model, budget, rng, n=20, tol=1e-10):
    t = random_transceiver(model, budget, rng)
    prob = design.qmp_params(t.F, t.G, model, budget)
    omegas = qmp.sdr_lift(prob)
    worst = 0.0
    for _ in range(n):
        P = sample_cgaussian(*prob.shape, rng)
        X = qmp.lift_point(P)
        vals = [qmp.qmp_objective(prob, P)] + list(qmp.constraint_values(prob, P))
        for Om, v in zip(omegas, vals):
            worst = max(worst, abs(np.trace(Om @ X) - v) / (1.0 + abs(v)))
    return CheckResult("sdr_lift_consistency", worst <= tol, f"max relative mismatch {worst:.1e}")


def check_alternate(model, budget, config, slack=1e-9):
    try:
        _, trace = design.alternate(model, budget, config)
    except design.NumericalFailure as err:
        return CheckResult("alternate_monotone", False, str(err))
    seq = np.r_[trace.initial_mse, trace.mse]
    rise = float(np.max(np.diff(seq), initial=-np.inf))
    return CheckResult(
        "alternate_monotone",
        rise <= slack,
        f"{len(trace)} sweeps, largest increase {rise:.1e}, converged={trace.converged}",
    )


def run_all(model, budget, config, seed):
    """Run every check with its own random stream; a check that raises is
    reported as failed."""
    checks = [
        ("pi_p_expectation", lambda r: check_pi_p(model, budget, r)),
        ("mse_monte_carlo", lambda r: check_mse_monte_carlo(model, budget, r)),
        ("g_step_gradient", lambda r: check_g_step(model, budget, r)),
        ("f_step_kkt", lambda r: check_f_step(model, budget, r)),
        ("f_lambda_monotone", lambda r: check_f_monotone(model, budget, r)),
        ("qmp_params_consistency", lambda r: check_qmp_params(model, budget, r)),
        ("p_step_optimality", lambda r: check_p_step(model, budget, r)),
        ("sdr_lift_consistency", lambda r: check_sdr_lift(model, budget, r)),
        ("alternate_monotone", lambda r: check_alternate(model, budget, config)),
    ]
    results = []
    for i, (name, chk) in enumerate(checks):
        try:
            results.append(chk(np.random.default_rng([seed, i])))
        except Exception as err:  # noqa: BLE001 - any failure is a verdict
            results.append(CheckResult(name, False, f"raised {type(err).__name__}: {err}"))
    return results
