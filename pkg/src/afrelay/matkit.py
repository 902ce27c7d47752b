"""Dense complex matrix helpers shared by the rest of the package.

Matrices are plain 2-D ``numpy`` arrays of dtype ``complex128``.  The helpers
here only add the few operations the relay design code needs on top of
numpy: Hermitian checks, a PSD square root, column-stacking ``vec`` and
circularly-symmetric complex Gaussian sampling.
"""

import numpy as np

HERMITIAN_RTOL = 1e-10
PSD_RTOL = 1e-10


def as_cmatrix(a):
    """Return ``a`` as a finite 2-D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def herm(a):
    """Conjugate transpose."""
    return np.conj(np.swapaxes(a, -1, -2))


def is_hermitian(a, rtol=HERMITIAN_RTOL):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = 1.0 + np.max(np.abs(a), initial=0.0)
    return bool(np.max(np.abs(a - herm(a)), initial=0.0) <= rtol * scale)


def as_hermitian(a):
    """Validate ``a`` as Hermitian and return its exactly-symmetrized copy."""
    m = as_cmatrix(a)
    if not is_hermitian(m):
        raise ValueError("matrix is not Hermitian")
    return 0.5 * (m + herm(m))


def real_trace(a, atol=1e-10):
    """Trace of a matrix that must be real, e.g. the trace of a PSD product.

    The imaginary residue is checked against ``atol`` relative to the
    magnitude of the trace before being dropped.
    """
    t = complex(np.trace(a))
    if abs(t.imag) > atol * (1.0 + abs(t.real)):
        raise ValueError(f"trace has non-negligible imaginary part {t.imag:.3e}")
    return t.real


def hermitian_sqrt(a):
    """Hermitian PSD square root ``S`` with ``S @ S^H == a``.

    Eigenvalues slightly below zero (down to ``-1e-10 * ||a||_2``) are clamped
    to zero; anything more negative is rejected as not PSD.
    """
    m = as_cmatrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"hermitian_sqrt needs a square matrix, got {m.shape}")
    m = as_hermitian(m)
    w, v = np.linalg.eigh(m)
    norm = np.max(np.abs(w), initial=0.0)
    if w.size and w[0] < -PSD_RTOL * norm:
        raise ValueError(f"matrix is not PSD (smallest eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ herm(v)


def kron(a, b):
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def vec(a):
    """Stack the columns of ``a`` into an ``(m*n, 1)`` column vector."""
    m = as_cmatrix(a)
    return m.reshape(-1, 1, order="F")


def unvec(v, rows, cols):
    """Inverse of :func:`vec`."""
    return np.asarray(v, dtype=np.complex128).reshape(rows, cols, order="F")


def sample_cgaussian(m, n, rng, size=()):
    """Draw i.i.d. CN(0, 1) entries: real and imaginary parts have variance 1/2.

    ``size`` prepends batch dimensions, so the result has shape
    ``(*size, m, n)``.
    """
    shape = tuple(size) + (m, n)
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)
