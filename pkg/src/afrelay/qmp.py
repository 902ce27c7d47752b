"""Convex quadratic matrix programs with trace-quadratic constraints.

A problem has the form::

    minimize    Tr(P^H A0 P) + 2 Re Tr(B0^H P) + c0
    subject to  Tr(P^H Ai P) + 2 Re Tr(Bi^H P) + ci <= 0,   i = 1..m

with Hermitian PSD ``Ai`` and ``Bi = 0`` for the constraints.  Under those
conditions the Lagrangian minimizer has the closed form
``P(mu) = -(A0 + sum mu_i Ai)^-1 B0`` and the dual gradient is the vector of
constraint values at ``P(mu)``, so the problem is solved by maximizing the
concave dual over ``mu >= 0``.

The semidefinite lift (``Omega_i`` blocks and the rank-one point ``X(P)``) is
provided for consistency checks only.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .matkit import as_cmatrix, as_hermitian, herm, vec


class QmpInfeasible(ValueError):
    pass


class QmpNotConverged(RuntimeError):
    pass


@dataclass(frozen=True)
class QmpProblem:
    A0: np.ndarray
    B0: np.ndarray
    c0: float
    constraints: list = field(default_factory=list)  # [(A_i, B_i, c_i)]

    def __post_init__(self):
        object.__setattr__(self, "A0", as_hermitian(self.A0))
        object.__setattr__(self, "B0", as_cmatrix(self.B0))
        object.__setattr__(self, "c0", float(self.c0))
        n = self.A0.shape[0]
        if self.B0.shape[0] != n:
            raise ValueError(f"B0 has {self.B0.shape[0]} rows, A0 is {n}x{n}")
        cons = []
        for A, B, c in self.constraints:
            A = as_hermitian(A)
            B = np.zeros_like(self.B0) if B is None else as_cmatrix(B)
            if A.shape != self.A0.shape or B.shape != self.B0.shape:
                raise ValueError("constraint dimensions do not match the objective")
            cons.append((A, B, float(c)))
        object.__setattr__(self, "constraints", cons)

    @property
    def shape(self):
        """Shape of the variable ``P``."""
        return self.B0.shape


@dataclass(frozen=True)
class QmpSolution:
    P: np.ndarray
    mu: np.ndarray
    kkt_residual: float
    objective: float
    iterations: int = 0


def _quad(A, B, c, P):
    val = np.vdot(P, A @ P) + 2.0 * np.real(np.vdot(B, P)) + c
    return float(np.real(val))


def qmp_objective(prob, P):
    return _quad(prob.A0, prob.B0, prob.c0, as_cmatrix(P))


def constraint_values(prob, P):
    P = as_cmatrix(P)
    return np.array([_quad(A, B, c, P) for A, B, c in prob.constraints])


def _ridge(A):
    scale = np.trace(A).real / A.shape[0]
    return 1e-10 * scale if scale > 0 else 1.0


def inner_minimizer(prob, mu):
    """``P(mu) = -(A0 + sum mu_i A_i)^-1 B0`` (constraint ``B_i`` assumed 0).

    A relative ridge is added when the weighted matrix is numerically
    singular, which picks the minimum-norm minimizer.
    """
    A = prob.A0.copy()
    for m, (Ai, _, _) in zip(mu, prob.constraints):
        A = A + m * Ai
    w, V = np.linalg.eigh(A)
    eps = _ridge(A)
    if w[0] <= eps:
        w = np.clip(w, 0.0, None) + eps
    return -(V / w) @ (herm(V) @ prob.B0)


def dual_value(prob, mu):
    """Dual function ``g(mu) = min_P L(P, mu)``."""
    P = inner_minimizer(prob, mu)
    return qmp_objective(prob, P) + float(np.dot(mu, constraint_values(prob, P)))


def kkt_residual(prob, P, mu):
    """Largest of the scaled primal violation, complementary slackness and
    stationarity residuals."""
    cons = constraint_values(prob, P)
    scale = np.array([max(abs(c), 1.0) for _, _, c in prob.constraints])
    viol = np.max(np.clip(cons, 0.0, None) / scale, initial=0.0)
    slack = np.max(np.abs(mu * cons), initial=0.0)
    A = prob.A0.copy()
    for m, (Ai, _, _) in zip(mu, prob.constraints):
        A = A + m * Ai
    stat = np.linalg.norm(A @ P + prob.B0) / (1.0 + np.linalg.norm(prob.B0))
    return float(max(viol, slack, stat, -np.min(mu, initial=0.0)))


def _restore_feasibility(prob, P):
    """Shrink ``P`` onto the feasible set; valid because every constraint is
    homogeneous-quadratic with negative offset."""
    scale = 1.0
    for A, _, c in prob.constraints:
        q = float(np.real(np.vdot(P, A @ P)))
        if q + c > 0:
            scale = min(scale, np.sqrt(-c / q))
    return P * scale


def _check_dual_applicable(prob):
    for A, B, c in prob.constraints:
        if np.any(B != 0):
            raise ValueError("solve_dual requires B_i = 0 for every constraint")
        if c > 0:
            raise QmpInfeasible(f"constraint offset c={c} > 0 excludes every point")
        if c == 0:
            raise QmpInfeasible("P = 0 is not strictly feasible (c = 0)")
        if np.linalg.eigvalsh(A)[0] < -1e-10 * max(1.0, np.abs(A).max()):
            raise ValueError("constraint matrix is not PSD")


def _constraint_at(prob, mu, i):
    P = inner_minimizer(prob, mu)
    A, B, c = prob.constraints[i]
    return _quad(A, B, c, P)


def _best_multipliers(prob, mu, i, xtol, counter):
    """Maximize the dual over ``mu[i:]`` with ``mu[:i]`` held fixed.

    Works one coordinate at a time: the partial maximum over the trailing
    coordinates is concave in ``mu[i]`` and its derivative is constraint
    ``i`` evaluated at the inner minimizer, which is non-increasing.  So the
    optimal ``mu[i]`` is either 0 or the root of that derivative.
    """
    k = len(prob.constraints)
    if i == k:
        return mu

    def slope(m):
        trial = mu.copy()
        trial[i] = m
        trial = _best_multipliers(prob, trial, i + 1, xtol, counter)
        counter[0] += 1
        return _constraint_at(prob, trial, i), trial

    s0, best0 = slope(0.0)
    if s0 <= 0.0:
        return best0
    lo, hi = 0.0, 1.0
    s_hi, _ = slope(hi)
    while s_hi > 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise QmpNotConverged("could not bracket the dual multiplier")
        s_hi, _ = slope(hi)
    root = brentq(lambda m: slope(m)[0], lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return slope(root)[1]


def solve_dual(prob, tol=1e-10):
    """Solve the QMP by maximizing its concave dual over ``mu >= 0``.

    The multipliers are found coordinate-wise by nested monotone root
    finding on the dual gradient; the result is returned with its KKT
    residual.
    """
    _check_dual_applicable(prob)
    k = len(prob.constraints)
    counter = [0]
    mu = _best_multipliers(prob, np.zeros(k), 0, xtol=1e-300, counter=counter)
    P = _restore_feasibility(prob, inner_minimizer(prob, mu))
    res = kkt_residual(prob, P, mu)
    if res > tol:
        raise QmpNotConverged(f"dual solution has KKT residual {res:.3e} > {tol:.1e}")
    return QmpSolution(P=P, mu=mu, kkt_residual=res, objective=qmp_objective(prob, P), iterations=counter[0])


def certify_sdr_gap(prob, sol):
    """Primal objective at ``sol.P`` minus the dual value at ``sol.mu``.

    A value within tolerance certifies that ``sol.P`` is globally optimal for
    the QMP, and therefore that the semidefinite relaxation is tight at this
    instance.
    """
    return qmp_objective(prob, sol.P) - dual_value(prob, sol.mu)


def sdr_lift(prob):
    """``Omega_i = [[I_N kron A_i, vec(B_i)], [vec(B_i)^H, c_i]]`` for the
    objective and every constraint."""
    n_cols = prob.B0.shape[1]
    out = []
    for A, B, c in [(prob.A0, prob.B0, prob.c0)] + list(prob.constraints):
        top = np.kron(np.eye(n_cols), A)
        b = vec(B)
        out.append(np.block([[top, b], [herm(b), np.array([[c]], dtype=np.complex128)]]))
    return tuple(out)


def lift_point(P):
    """Rank-one lift ``[vec(P); 1][vec(P); 1]^H``."""
    v = np.vstack([vec(P), np.ones((1, 1), dtype=np.complex128)])
    return v @ herm(v)
