"""Two-hop channel model: estimated channels, estimation-error statistics
and noise covariances.

Estimation errors follow a matrix-variate complex Gaussian law and are drawn
as ``Sigma^{1/2} @ H_w @ Psi^{1/2}`` with ``H_w`` i.i.d. CN(0, 1), so that
``E[dH A dH^H] = Tr(A Psi) Sigma``.
"""

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .matkit import as_cmatrix, as_hermitian, hermitian_sqrt, sample_cgaussian

PRESET_DIR = Path(__file__).parent / "presets"


@dataclass(frozen=True)
class ErrorStats:
    """Row covariance ``Sigma`` (receive side) and column factor ``Psi``
    (transmit side) of a channel-estimation error."""

    Sigma: np.ndarray
    Psi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Sigma", as_hermitian(self.Sigma))
        object.__setattr__(self, "Psi", as_hermitian(self.Psi))

    @property
    def shape(self):
        return self.Sigma.shape[0], self.Psi.shape[0]

    @classmethod
    def zero(cls, rows, cols):
        return cls(np.zeros((rows, rows)), np.eye(cols))

    def scaled(self, c):
        return ErrorStats(c * self.Sigma, self.Psi)


@dataclass(frozen=True)
class ChannelModel:
    """Everything the designer knows about the two hops."""

    Hbar_sr: np.ndarray
    Hbar_rd: np.ndarray
    stats_sr: ErrorStats
    stats_rd: ErrorStats
    Rn1: np.ndarray
    Rn2: np.ndarray
    N: int

    def __post_init__(self):
        object.__setattr__(self, "Hbar_sr", as_cmatrix(self.Hbar_sr))
        object.__setattr__(self, "Hbar_rd", as_cmatrix(self.Hbar_rd))
        object.__setattr__(self, "Rn1", as_hermitian(self.Rn1))
        object.__setattr__(self, "Rn2", as_hermitian(self.Rn2))
        m_r, n_s = self.Hbar_sr.shape
        m_d, n_r = self.Hbar_rd.shape
        if self.stats_sr.shape != (m_r, n_s):
            raise ValueError(f"stats_sr shape {self.stats_sr.shape} does not match Hbar_sr {(m_r, n_s)}")
        if self.stats_rd.shape != (m_d, n_r):
            raise ValueError(f"stats_rd shape {self.stats_rd.shape} does not match Hbar_rd {(m_d, n_r)}")
        if self.Rn1.shape != (m_r, m_r) or self.Rn2.shape != (m_d, m_d):
            raise ValueError("noise covariance dimensions do not match the channels")
        for name, r in (("Rn1", self.Rn1), ("Rn2", self.Rn2)):
            if np.linalg.eigvalsh(r)[0] <= 0:
                raise ValueError(f"{name} must be positive definite")
        if not 1 <= self.N <= min(n_s, m_r, n_r, m_d):
            raise ValueError(f"stream count N={self.N} exceeds antenna counts")

    @property
    def dims(self):
        """``(N_S, M_R, N_R, M_D)``."""
        m_r, n_s = self.Hbar_sr.shape
        m_d, n_r = self.Hbar_rd.shape
        return n_s, m_r, n_r, m_d

    def without_errors(self):
        """Same model with both error covariances set to zero."""
        return replace(
            self,
            stats_sr=ErrorStats(np.zeros_like(self.stats_sr.Sigma), self.stats_sr.Psi),
            stats_rd=ErrorStats(np.zeros_like(self.stats_rd.Sigma), self.stats_rd.Psi),
        )


@dataclass(frozen=True)
class CorrelationParams:
    alpha: float
    beta: float
    sigma_e2: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name}={v} outside [0, 1)")
        if self.sigma_e2 < 0:
            raise ValueError("sigma_e2 must be non-negative")


def exp_correlation(n, rho):
    """Exponential correlation matrix with entries ``rho**|i-j|``."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho={rho} outside [0, 1)")
    idx = np.arange(n)
    return np.power(float(rho), np.abs(idx[:, None] - idx[None, :])).astype(np.complex128)


def error_stats(sigma_e2, R_T, R_R):
    """Error statistics for a hop with transmit/receive correlations ``R_T``,
    ``R_R``: ``Psi = R_T`` and ``Sigma = s (I + s R_R^-1)^-1``."""
    if sigma_e2 < 0:
        raise ValueError("sigma_e2 must be non-negative")
    R_T = as_hermitian(R_T)
    R_R = as_hermitian(R_R)
    n = R_R.shape[0]
    try:
        R_R_inv = np.linalg.inv(R_R)
    except np.linalg.LinAlgError as err:
        raise ValueError("receive correlation matrix is singular") from err
    if not np.all(np.isfinite(R_R_inv)) or np.linalg.cond(R_R) > 1e14:
        raise ValueError("receive correlation matrix is singular")
    Sigma = sigma_e2 * np.linalg.inv(np.eye(n) + sigma_e2 * R_R_inv)
    return ErrorStats(0.5 * (Sigma + Sigma.conj().T), R_T)


def sample_error(stats, rng, size=()):
    """Draw ``Sigma^{1/2} H_w Psi^{1/2}``; ``size`` adds leading batch axes."""
    m, n = stats.shape
    Hw = sample_cgaussian(m, n, rng, size=size)
    return hermitian_sqrt(stats.Sigma) @ Hw @ hermitian_sqrt(stats.Psi)


def true_channel(Hbar, stats, rng, size=()):
    Hbar = as_cmatrix(Hbar)
    if Hbar.shape != stats.shape:
        raise ValueError(f"Hbar shape {Hbar.shape} does not match error stats {stats.shape}")
    return Hbar + sample_error(stats, rng, size=size)


def noise_from_snr(total_power, snr_db, dim):
    """White noise covariance ``s2 I`` with ``total_power / Tr(R_n)`` equal to
    the linear SNR."""
    if total_power <= 0:
        raise ValueError("total_power must be positive")
    if dim < 1:
        raise ValueError("dim must be at least 1")
    s2 = total_power / (10.0 ** (snr_db / 10.0) * dim)
    return s2 * np.eye(dim, dtype=np.complex128)


def build_model(Hbar_sr, Hbar_rd, corr, snr_sr_db, snr_rd_db, Ps, Pr, N=None):
    """Assemble a :class:`ChannelModel` from correlation parameters and SNRs.

    Both hops use the same ``alpha`` (transmit) and ``beta`` (receive)
    exponential correlations.
    """
    Hbar_sr = as_cmatrix(Hbar_sr)
    Hbar_rd = as_cmatrix(Hbar_rd)
    m_r, n_s = Hbar_sr.shape
    m_d, n_r = Hbar_rd.shape
    stats_sr = error_stats(corr.sigma_e2, exp_correlation(n_s, corr.alpha), exp_correlation(m_r, corr.beta))
    stats_rd = error_stats(corr.sigma_e2, exp_correlation(n_r, corr.alpha), exp_correlation(m_d, corr.beta))
    if N is None:
        N = min(n_s, m_r, n_r, m_d)
    return ChannelModel(
        Hbar_sr=Hbar_sr,
        Hbar_rd=Hbar_rd,
        stats_sr=stats_sr,
        stats_rd=stats_rd,
        Rn1=noise_from_snr(Ps, snr_sr_db, m_r),
        Rn2=noise_from_snr(Pr, snr_rd_db, m_d),
        N=N,
    )


# -- plain-text matrix format ---------------------------------------------
#
# One complex entry per whitespace-separated token written as ``a+bi``; rows
# are lines; consecutive matrices are separated by blank lines.  Lines
# starting with ``#`` are comments.


def parse_complex(token):
    t = token.strip()
    if not t.endswith("i"):
        # purely real entry
        return complex(float(t), 0.0)
    try:
        return complex(t[:-1] + "j")
    except ValueError as err:
        raise ValueError(f"bad complex token {token!r}") from err


def format_complex(z):
    z = complex(z)
    return f"{z.real:.17g}{z.imag:+.17g}i"


def parse_matrices(text):
    """Parse every matrix block in ``text``; returns ``[(label, array), ...]``.

    ``label`` is taken from the last ``# name`` comment preceding a block,
    or ``None``.
    """
    blocks = []
    rows = []
    label = None
    pending = None

    def flush():
        nonlocal rows, label
        if rows:
            widths = {len(r) for r in rows}
            if len(widths) != 1:
                raise ValueError(f"ragged matrix rows in block {label!r}")
            blocks.append((label, np.array(rows, dtype=np.complex128)))
        rows = []
        label = None

    for line in text.splitlines():
        s = line.strip()
        if not s:
            flush()
            continue
        if s.startswith("#"):
            flush()
            pending = s.lstrip("#").strip() or None
            continue
        if not rows:
            label, pending = pending, None
        rows.append([parse_complex(tok) for tok in s.split()])
    flush()
    return blocks


def format_matrix(a, label=None):
    a = as_cmatrix(a)
    lines = [f"# {label}"] if label else []
    lines += [" ".join(format_complex(z) for z in row) for row in a]
    return "\n".join(lines) + "\n"


def format_matrices(named):
    return "\n".join(format_matrix(a, label) for label, a in named)


def load_matrices(path):
    return parse_matrices(Path(path).read_text())


def available_presets():
    return sorted(p.stem for p in PRESET_DIR.glob("*.txt"))


def load_preset(name):
    """Return ``(Hbar_sr, Hbar_rd)`` for a named preset or a matrix file path."""
    path = PRESET_DIR / f"{name}.txt"
    if not path.exists():
        path = Path(name)
        if not path.exists():
            raise ValueError(f"unknown channel preset {name!r} (available: {available_presets()})")
    blocks = load_matrices(path)
    if len(blocks) != 2:
        raise ValueError(f"preset {name!r} must hold exactly two matrices, found {len(blocks)}")
    return blocks[0][1], blocks[1][1]
