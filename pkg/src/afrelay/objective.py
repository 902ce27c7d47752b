"""Error-averaged MSE of the relay link and its building blocks.

The closed form averages over data, both noises and both channel-estimation
errors.  :func:`mse_monte_carlo` estimates the same quantity by simulation
and is kept independent of the closed-form path so it can serve as a check.
"""

from dataclasses import dataclass

import numpy as np

from .matkit import as_cmatrix, herm, hermitian_sqrt, real_trace, sample_cgaussian
from .channel import sample_error


@dataclass(frozen=True)
class Transceiver:
    """Precoder ``P`` (N_S x N), relay matrix ``F`` (N_R x M_R) and
    equalizer ``G`` (N x M_D)."""

    P: np.ndarray
    F: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        for name in ("P", "F", "G"):
            object.__setattr__(self, name, as_cmatrix(getattr(self, name)))

    def check(self, model):
        n_s, m_r, n_r, m_d = model.dims
        N = model.N
        expected = {"P": (n_s, N), "F": (n_r, m_r), "G": (N, m_d)}
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, expected {shape}")


@dataclass(frozen=True)
class PowerBudget:
    Ps: float
    Pr: float

    def __post_init__(self):
        if not (self.Ps > 0 and self.Pr > 0):
            raise ValueError("power budgets must be positive")


def _check_mul(*mats):
    for a, b in zip(mats, mats[1:]):
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")


def pi_p(P, stats_sr, Hbar_sr):
    """``E[H_sr P P^H H_sr^H] = Tr(P P^H Psi) Sigma + Hbar P P^H Hbar^H``."""
    P = as_cmatrix(P)
    Hbar_sr = as_cmatrix(Hbar_sr)
    _check_mul(Hbar_sr, P)
    if stats_sr.shape != Hbar_sr.shape:
        raise ValueError("error stats do not match Hbar_sr")
    PPh = P @ herm(P)
    HP = Hbar_sr @ P
    out = real_trace(PPh @ stats_sr.Psi) * stats_sr.Sigma + HP @ herm(HP)
    return 0.5 * (out + herm(out))


def r_x(P, stats_sr, Hbar_sr, Rn1):
    """Relay receive autocorrelation ``Pi_P + Rn1``."""
    Pi = pi_p(P, stats_sr, Hbar_sr)
    Rn1 = as_cmatrix(Rn1)
    if Rn1.shape != Pi.shape:
        raise ValueError(f"Rn1 shape {Rn1.shape} does not match {Pi.shape}")
    return Pi + Rn1


def k_matrix(F, Rx, stats_rd, Rn2):
    """``Tr(F Rx F^H Psi_rd) Sigma_rd + Rn2``."""
    F = as_cmatrix(F)
    Rx = as_cmatrix(Rx)
    _check_mul(F, Rx)
    if stats_rd.Psi.shape[0] != F.shape[0]:
        raise ValueError("F rows do not match Psi_rd")
    if Rn2.shape != stats_rd.Sigma.shape:
        raise ValueError("Rn2 does not match Sigma_rd")
    return real_trace(F @ Rx @ herm(F) @ stats_rd.Psi) * stats_rd.Sigma + as_cmatrix(Rn2)


def relay_tx_power(F, Rx):
    F = as_cmatrix(F)
    _check_mul(F, as_cmatrix(Rx))
    return real_trace(F @ Rx @ herm(F))


def mse(t, model):
    """Closed-form error-averaged MSE of the transceiver ``t``."""
    t.check(model)
    P, F, G = t.P, t.F, t.G
    Hsr, Hrd = model.Hbar_sr, model.Hbar_rd
    Rx = r_x(P, model.stats_sr, Hsr, model.Rn1)
    K = k_matrix(F, Rx, model.stats_rd, model.Rn2)
    HF = Hrd @ F
    inner = HF @ Rx @ herm(HF) + K
    cross = np.trace(G @ HF @ Hsr @ P)
    total = np.trace(G @ inner @ herm(G)) + model.N - cross - np.conj(cross)
    if abs(total.imag) > 1e-10 * (1.0 + abs(total.real)):
        raise ValueError(f"MSE has imaginary residue {total.imag:.3e}")
    return float(total.real)


def mse_monte_carlo(t, model, trials, rng, batch=20000):
    """Simulated MSE: returns ``(mean, standard_error)`` over ``trials``
    independent draws of errors, data and noise."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    t.check(model)
    P, F, G = t.P, t.F, t.G
    N = model.N
    n_s, m_r, n_r, m_d = model.dims
    L1 = hermitian_sqrt(model.Rn1)
    L2 = hermitian_sqrt(model.Rn2)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        Hsr = model.Hbar_sr + sample_error(model.stats_sr, rng, size=(b,))
        Hrd = model.Hbar_rd + sample_error(model.stats_rd, rng, size=(b,))
        s = sample_cgaussian(N, 1, rng, size=(b,))
        n1 = L1 @ sample_cgaussian(m_r, 1, rng, size=(b,))
        n2 = L2 @ sample_cgaussian(m_d, 1, rng, size=(b,))
        x = Hsr @ (P @ s) + n1
        e = G @ (Hrd @ (F @ x) + n2) - s
        v = np.sum(np.abs(e[..., 0]) ** 2, axis=-1)
        total += v.sum()
        total_sq += (v**2).sum()
        done += b
    mean = total / trials
    if trials == 1:
        return mean, float("inf")
    var = max(total_sq / trials - mean**2, 0.0) * trials / (trials - 1)
    return mean, float(np.sqrt(var / trials))
