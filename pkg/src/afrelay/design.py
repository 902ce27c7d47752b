"""Alternating transceiver design: equalizer, relay matrix and precoder
updates, each an exact minimization of the averaged MSE over one block.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .matkit import herm, real_trace
from .objective import PowerBudget, Transceiver, k_matrix, mse, r_x, relay_tx_power
from .qmp import QmpInfeasible, QmpProblem, solve_dual

log = logging.getLogger(__name__)


class NumericalFailure(RuntimeError):
    """An invariant that exact arithmetic guarantees was violated."""


@dataclass(frozen=True)
class DesignConfig:
    tol_mse: float = 1e-6
    max_iters: int = 100
    tol_power: float = 1e-12
    tol_lambda: float = 1e-14
    tol_qmp: float = 1e-11
    monotone_slack: float = 1e-9

    def __post_init__(self):
        for name in ("tol_mse", "max_iters", "tol_power", "tol_lambda", "tol_qmp"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class IterRecord:
    iteration: int
    mse: float
    lam: float
    mu1: float
    mu2: float
    slack_ps: float
    slack_pr: float


@dataclass
class IterTrace:
    records: list = field(default_factory=list)
    converged: bool = False
    initial_mse: float = float("nan")

    @property
    def mse(self):
        return np.array([r.mse for r in self.records])

    def __len__(self):
        return len(self.records)

    def write_csv(self, path_or_file):
        header = ["iteration", "mse", "lambda", "mu1", "mu2", "slack_ps", "slack_pr"]
        rows = [
            [r.iteration, repr(r.mse), repr(r.lam), repr(r.mu1), repr(r.mu2), repr(r.slack_ps), repr(r.slack_pr)]
            for r in self.records
        ]
        if hasattr(path_or_file, "write"):
            w = csv.writer(path_or_file, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
            return
        with open(path_or_file, "w", newline="") as fh:
            self.write_csv(fh)


# -- G step ------------------------------------------------------------------


def g_step(F, P, model):
    """Wiener equalizer for fixed ``F`` and ``P``."""
    Rx = r_x(P, model.stats_sr, model.Hbar_sr, model.Rn1)
    K = k_matrix(F, Rx, model.stats_rd, model.Rn2)
    HF = model.Hbar_rd @ F
    inner = HF @ Rx @ herm(HF) + K
    cross = HF @ model.Hbar_sr @ P
    try:
        fac = cho_factor(0.5 * (inner + herm(inner)), lower=True)
    except np.linalg.LinAlgError as err:
        raise NumericalFailure("equalizer system matrix is singular") from err
    # G = cross^H inner^-1  <=>  inner G^H = cross
    return herm(cho_solve(fac, cross))


# -- F step ------------------------------------------------------------------


def _f_terms(G, P, model):
    """``(M, Y, Rx)`` with ``F(lam) = (M + lam I)^-1 Y``."""
    Rx = r_x(P, model.stats_sr, model.Hbar_sr, model.Rn1)
    GH = G @ model.Hbar_rd
    M = herm(GH) @ GH + model.stats_rd.Psi * real_trace(G @ model.stats_rd.Sigma @ herm(G))
    M = 0.5 * (M + herm(M))
    Y = herm(GH) @ herm(P) @ herm(model.Hbar_sr) @ np.linalg.inv(Rx)
    return M, Y, Rx


def f_of_lambda(lam, G, P, model):
    """Relay matrix solving the stationarity condition for multiplier ``lam``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    M, Y, _ = _f_terms(G, P, model)
    return _f_from_terms(lam, M, Y)


def _f_from_terms(lam, M, Y):
    A = M + lam * np.eye(M.shape[0])
    w = np.linalg.eigvalsh(A)
    if w[0] <= 1e-14 * max(w[-1], 1e-300):
        raise np.linalg.LinAlgError("relay system matrix is singular")
    return np.linalg.solve(A, Y)


def lambda_upper_bound(G, P, model, Pr):
    """Upper end of the multiplier search interval."""
    if Pr <= 0:
        raise ValueError("Pr must be positive")
    Rx = r_x(P, model.stats_sr, model.Hbar_sr, model.Rn1)
    Hsr, Hrd = model.Hbar_sr, model.Hbar_rd
    T = herm(Hrd) @ herm(G) @ herm(P) @ herm(Hsr) @ np.linalg.inv(Rx) @ Hsr @ P @ G @ Hrd
    return float(np.sqrt(max(real_trace(T), 0.0) / Pr))


def f_step(G, P, model, Pr, tol=1e-8, lam_tol=1e-14, max_bisect=200):
    """Relay matrix minimizing the MSE under the relay power budget.

    Returns ``(F, lam)``.  ``lam = 0`` when the unconstrained minimizer fits
    the budget; otherwise ``lam`` is found by bisection on the decreasing
    relay power ``f(lam)``, and ``F`` is taken from the feasible end of the
    final bracket.
    """
    M, Y, Rx = _f_terms(G, P, model)

    def power(lam):
        return relay_tx_power(_f_from_terms(lam, M, Y), Rx)

    try:
        F0 = _f_from_terms(0.0, M, Y)
        p0 = relay_tx_power(F0, Rx)
    except np.linalg.LinAlgError:
        F0, p0 = None, np.inf
    if p0 <= Pr:
        return F0, 0.0

    lo = 0.0
    hi = lambda_upper_bound(G, P, model, Pr)
    if hi <= 0:
        hi = 1e-12 * max(np.abs(M).max(), 1.0)
    p_hi = power(hi)
    doublings = 0
    while p_hi > Pr:
        if doublings >= 60:
            raise NumericalFailure("could not bracket the relay power root")
        lo, hi = hi, 2.0 * hi
        p_hi = power(hi)
        doublings += 1
    if doublings:
        log.debug("lambda bound needed %d doublings", doublings)

    p_lo = p0 if lo == 0.0 else power(lo)
    for _ in range(max_bisect):
        if abs(p_hi - Pr) <= tol * Pr or hi - lo <= lam_tol * max(hi, 1e-300):
            break
        mid = 0.5 * (lo + hi)
        p_mid = power(mid)
        if not p_lo >= p_mid >= p_hi:
            raise NumericalFailure("relay power is not decreasing in lambda")
        if p_mid > Pr:
            lo, p_lo = mid, p_mid
        else:
            hi, p_hi = mid, p_mid
    return _f_from_terms(hi, M, Y), hi


# -- P step ------------------------------------------------------------------


def qmp_params(F, G, model, budget):
    """QMP data of the precoder subproblem for fixed ``F`` and ``G``."""
    Hsr, Hrd = model.Hbar_sr, model.Hbar_rd
    Ssr, Psr = model.stats_sr.Sigma, model.stats_sr.Psi
    Srd, Prd = model.stats_rd.Sigma, model.stats_rd.Psi
    Rn1, Rn2 = model.Rn1, model.Rn2
    GH = G @ Hrd
    M = Prd * real_trace(G @ Srd @ herm(G)) + herm(GH) @ GH
    FH = F @ Hsr
    A0 = Psr * real_trace(F @ Ssr @ herm(F) @ M) + herm(FH) @ M @ FH
    B0 = -herm(GH @ FH)
    HF = Hrd @ F
    R1 = real_trace(F @ Rn1 @ herm(F) @ Prd) * Srd + HF @ Rn1 @ herm(HF)
    c0 = real_trace(G @ (R1 + Rn2) @ herm(G)) + model.N
    A2 = Psr * real_trace(F @ Ssr @ herm(F)) + herm(FH) @ FH
    c2 = real_trace(F @ Rn1 @ herm(F)) - budget.Pr
    n_s = Hsr.shape[1]
    zero = np.zeros_like(B0)
    return QmpProblem(
        A0=A0,
        B0=B0,
        c0=c0,
        constraints=[(np.eye(n_s), zero, -budget.Ps), (A2, zero, c2)],
    )


def p_step(F, G, model, budget, tol=1e-10):
    """Precoder minimizing the MSE under both power budgets."""
    prob = qmp_params(F, G, model, budget)
    c2 = prob.constraints[1][2]
    if c2 >= 0:
        raise QmpInfeasible(
            f"relay noise power alone ({c2 + budget.Pr:.4g}) exhausts the relay budget {budget.Pr:.4g}"
        )
    return solve_dual(prob, tol=tol)


# -- alternating loop --------------------------------------------------------


def initial_point(model, budget):
    """Scaled identity-shaped ``P`` and ``F`` meeting both budgets with equality."""
    n_s, m_r, n_r, m_d = model.dims
    N = model.N
    P = np.sqrt(budget.Ps / N) * np.eye(n_s, N, dtype=np.complex128)
    E = np.eye(n_r, m_r, dtype=np.complex128)
    Rx = r_x(P, model.stats_sr, model.Hbar_sr, model.Rn1)
    F = np.sqrt(budget.Pr / relay_tx_power(E, Rx)) * E
    return P, F


def alternate(model, budget=None, config=None):
    """Run the G -> F -> P sweeps until the MSE change drops below
    ``config.tol_mse``.  Returns ``(Transceiver, IterTrace)``."""
    if budget is None:
        n_s, _, n_r, _ = model.dims
        budget = PowerBudget(Ps=float(n_s), Pr=float(n_r))
    config = config or DesignConfig()
    P, F = initial_point(model, budget)
    G = g_step(F, P, model)
    prev = mse(Transceiver(P, F, G), model)
    trace = IterTrace(initial_mse=prev)

    def guard(value, ref, stage, it):
        if value > ref + config.monotone_slack:
            raise NumericalFailure(
                f"MSE increased in {stage} step of iteration {it}: {ref!r} -> {value!r}"
            )

    for it in range(1, config.max_iters + 1):
        G = g_step(F, P, model)
        m_g = mse(Transceiver(P, F, G), model)
        guard(m_g, prev, "G", it)
        F, lam = f_step(G, P, model, budget.Pr, tol=config.tol_power, lam_tol=config.tol_lambda)
        m_f = mse(Transceiver(P, F, G), model)
        guard(m_f, m_g, "F", it)
        sol = p_step(F, G, model, budget, tol=config.tol_qmp)
        P = sol.P
        t = Transceiver(P, F, G)
        cur = mse(t, model)
        guard(cur, m_f, "P", it)
        Rx = r_x(P, model.stats_sr, model.Hbar_sr, model.Rn1)
        trace.records.append(
            IterRecord(
                iteration=it,
                mse=cur,
                lam=lam,
                mu1=float(sol.mu[0]),
                mu2=float(sol.mu[1]),
                slack_ps=budget.Ps - real_trace(P @ herm(P)),
                slack_pr=budget.Pr - relay_tx_power(F, Rx),
            )
        )
        log.debug("iteration %d: mse=%.12g lambda=%.4g mu=%s", it, cur, lam, sol.mu)
        if abs(prev - cur) <= config.tol_mse:
            trace.converged = True
            break
        prev = cur
    return Transceiver(P, F, G), trace
