"""Monte-Carlo bit-error-rate harness: QPSK over sampled true channels,
robust design versus the design that trusts the estimated channels.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import CorrelationParams, build_model, load_preset, true_channel
from .design import DesignConfig, alternate
from .matkit import hermitian_sqrt, sample_cgaussian
from .objective import PowerBudget

ALGOS = ("robust", "naive")
CSV_HEADER = ["snr_rd_db", "sigma_e2", "algo", "bit_errors", "bits_total", "ber"]


@dataclass(frozen=True)
class SweepConfig:
    snr_rd_db: tuple = (10.0, 15.0, 20.0, 25.0, 30.0)
    sigma_e2: tuple = (0.0, 0.002, 0.01)
    snr_sr_db: float = 30.0
    alpha: float = 0.5
    beta: float = 0.4
    n_symbols: int = 10_000
    n_realizations: int = 100
    seed: int = 0
    budget: PowerBudget = field(default_factory=lambda: PowerBudget(4.0, 4.0))
    preset: str = "paper-4x4"
    design: DesignConfig = field(default_factory=DesignConfig)

    def __post_init__(self):
        object.__setattr__(self, "snr_rd_db", tuple(float(v) for v in np.atleast_1d(self.snr_rd_db)))
        object.__setattr__(self, "sigma_e2", tuple(float(v) for v in np.atleast_1d(self.sigma_e2)))
        if not self.snr_rd_db or not self.sigma_e2:
            raise ValueError("sweep lists must be non-empty")
        if self.n_symbols < 1 or self.n_realizations < 1:
            raise ValueError("symbol and realization counts must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class BerPoint:
    snr_rd_db: float
    sigma_e2: float
    algo: str
    bit_errors: int
    bits_total: int

    @property
    def ber(self):
        return self.bit_errors / self.bits_total

    @property
    def std_error(self):
        p = self.ber
        return float(np.sqrt(p * (1.0 - p) / self.bits_total))


def qpsk_modulate(bits):
    """Gray QPSK: bit pair ``(b0, b1)`` maps to ``((1-2b0) + 1j(1-2b1)) / sqrt(2)``."""
    b = np.asarray(bits, dtype=np.int8).ravel()
    if b.size % 2:
        raise ValueError("QPSK needs an even number of bits")
    pairs = b.reshape(-1, 2)
    return ((1 - 2 * pairs[:, 0]) + 1j * (1 - 2 * pairs[:, 1])) / np.sqrt(2.0)


def qpsk_demodulate(symbols):
    s = np.asarray(symbols).ravel()
    out = np.empty((s.size, 2), dtype=np.int8)
    out[:, 0] = s.real < 0
    out[:, 1] = s.imag < 0
    return out.ravel()


def run_link(t, H_sr, H_rd, Rn1, Rn2, bits, rng):
    """Send ``bits`` through both hops with transceiver ``t``; return the
    number of bit errors after equalization and slicing."""
    bits = np.asarray(bits, dtype=np.int8).ravel()
    N = t.P.shape[1]
    if bits.size % (2 * N):
        raise ValueError(f"bit count {bits.size} is not a multiple of 2N = {2 * N}")
    if H_sr.shape != (Rn1.shape[0], t.P.shape[0]) or t.F.shape[1] != H_sr.shape[0]:
        raise ValueError("first-hop dimensions do not match the transceiver")
    if H_rd.shape != (Rn2.shape[0], t.F.shape[0]) or t.G.shape[1] != H_rd.shape[0]:
        raise ValueError("second-hop dimensions do not match the transceiver")
    uses = bits.size // (2 * N)
    S = qpsk_modulate(bits).reshape(uses, N).T
    n1 = hermitian_sqrt(Rn1) @ sample_cgaussian(Rn1.shape[0], uses, rng)
    n2 = hermitian_sqrt(Rn2) @ sample_cgaussian(Rn2.shape[0], uses, rng)
    y = H_rd @ (t.F @ (H_sr @ (t.P @ S) + n1)) + n2
    s_hat = t.G @ y
    return int(np.count_nonzero(qpsk_demodulate(s_hat.T.ravel()) != bits))


def naive_design(model, budget, config=None):
    """Same alternating design, but run as if the estimated channels were exact."""
    return alternate(model.without_errors(), budget, config)


def point_model(cfg, snr_rd_db, sigma_e2):
    Hbar_sr, Hbar_rd = load_preset(cfg.preset)
    corr = CorrelationParams(cfg.alpha, cfg.beta, sigma_e2)
    return build_model(Hbar_sr, Hbar_rd, corr, cfg.snr_sr_db, snr_rd_db, cfg.budget.Ps, cfg.budget.Pr)


def ber_point(cfg, snr_rd_db, sigma_e2, point_index=0):
    """BER of the robust and naive designs at one sweep point.

    Both designs are computed once.  Realization ``r`` draws channels,
    bits and noise from a stream keyed on ``(seed, point_index, r)``, and the
    two designs see the same draws.
    """
    model = point_model(cfg, snr_rd_db, sigma_e2)
    designs = {
        "robust": alternate(model, cfg.budget, cfg.design)[0],
        "naive": naive_design(model, cfg.budget, cfg.design)[0],
    }
    errors = dict.fromkeys(ALGOS, 0)
    n_bits = 2 * model.N * cfg.n_symbols
    for r in range(cfg.n_realizations):
        for algo in ALGOS:
            rng = np.random.default_rng([cfg.seed, point_index, r])
            H_sr = true_channel(model.Hbar_sr, model.stats_sr, rng)
            H_rd = true_channel(model.Hbar_rd, model.stats_rd, rng)
            bits = rng.integers(0, 2, size=n_bits, dtype=np.int8)
            errors[algo] += run_link(designs[algo], H_sr, H_rd, model.Rn1, model.Rn2, bits, rng)
    total = n_bits * cfg.n_realizations
    return tuple(BerPoint(snr_rd_db, sigma_e2, algo, errors[algo], total) for algo in ALGOS)


def sweep(cfg, progress=None):
    """All ``snr_rd_db x sigma_e2`` points, both algorithms, in lexicographic
    order of ``(snr_rd_db, sigma_e2, algo)``."""
    points = sorted((s, e) for s in set(cfg.snr_rd_db) for e in set(cfg.sigma_e2))
    out = []
    for idx, (snr, s2) in enumerate(points):
        out.extend(ber_point(cfg, snr, s2, point_index=idx))
        if progress:
            progress(idx + 1, len(points))
    return sorted(out, key=lambda p: (p.snr_rd_db, p.sigma_e2, p.algo))


def write_csv(points, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in points:
        w.writerow([repr(p.snr_rd_db), repr(p.sigma_e2), p.algo, p.bit_errors, p.bits_total, repr(p.ber)])


def with_overrides(cfg, **kw):
    return replace(cfg, **kw)
