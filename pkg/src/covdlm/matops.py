"""Dense symmetric-matrix utilities: spectral square roots, Kronecker
products, vec/vech stacking and the duplication matrix.

Square roots are the *symmetric* ones obtained from the spectral
decomposition (not Cholesky factors): for symmetric positive definite M,
``symmetric_sqrt(M)`` is the unique symmetric PSD root R with R @ R = M.
Eigenvalues slightly below zero are treated as rounding noise and floored;
genuinely negative spectra raise.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteInput, NotPositiveDefinite, NotSymmetric, Singular

# Relative eigenvalue floor: eigenvalues below EIGEN_FLOOR_REL * max(1, |lambda|_max)
# are clamped to that floor before taking powers.
EIGEN_FLOOR_REL = 1e-10

# Symmetry tolerance used when a caller hands in a matrix claimed symmetric.
SYMMETRY_RTOL = 1e-8


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return (M + M') / 2; filter recursions accumulate asymmetry in
    finite precision, so every stored covariance goes through this."""
    m = np.asarray(m, dtype=float)
    return (m + m.T) / 2.0


def _check_square(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetric(f"{name} must be a square matrix, got shape {m.shape}")
    return m


def _check_finite(m: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(m)):
        raise NonFiniteInput(f"{name} contains non-finite entries")


def eigen_floor(eigvals: np.ndarray) -> float:
    """Floor value for a spectrum: EIGEN_FLOOR_REL * max(1, |lambda|_max)."""
    scale = max(1.0, float(np.max(np.abs(eigvals))) if eigvals.size else 1.0)
    return EIGEN_FLOOR_REL * scale


def symmetric_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root of a symmetric PSD matrix.

    Eigenvalues in [-floor, floor] are clamped up to the floor; an
    eigenvalue below -floor raises NotPositiveDefinite.
    """
    m = _check_square(m, "matrix")
    _check_finite(m, "matrix")
    m = symmetrize(m)
    w, v = np.linalg.eigh(m)
    floor = eigen_floor(w)
    if np.any(w < -floor):
        raise NotPositiveDefinite(
            f"eigenvalue {w.min():.3e} below tolerance -{floor:.3e}"
        )
    w = np.maximum(w, floor)
    return symmetrize((v * np.sqrt(w)) @ v.T)


def symmetric_inv_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root: R with R @ M @ R = I.

    Raises Singular when any eigenvalue had to be clamped, i.e. the input
    is degenerate at the flooring tolerance.
    """
    m = _check_square(m, "matrix")
    _check_finite(m, "matrix")
    m = symmetrize(m)
    w, v = np.linalg.eigh(m)
    floor = eigen_floor(w)
    if np.any(w < -floor):
        raise NotPositiveDefinite(
            f"eigenvalue {w.min():.3e} below tolerance -{floor:.3e}"
        )
    if np.any(w <= floor):
        raise Singular(
            f"eigenvalue {w.min():.3e} at or below floor {floor:.3e}"
        )
    return symmetrize((v / np.sqrt(w)) @ v.T)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def vec(m: np.ndarray) -> np.ndarray:
    """Stack the columns of a matrix into one vector."""
    return np.asarray(m, dtype=float).flatten(order="F")


def vech(m: np.ndarray) -> np.ndarray:
    """Stack the lower-triangular part (including the diagonal) of a
    symmetric matrix column by column."""
    m = _check_square(m, "matrix")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("vech requires a symmetric matrix")
    rows, cols = np.tril_indices(m.shape[0])
    order = np.lexsort((rows, cols))  # column-major walk of the lower triangle
    return m[rows[order], cols[order]]


def unvech(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of vech: rebuild the symmetric matrix."""
    v = np.asarray(v, dtype=float)
    if dim is None:
        dim = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if dim * (dim + 1) // 2 != v.size:
        raise NotSymmetric(f"vector of length {v.size} is not a vech of any matrix")
    out = np.zeros((dim, dim))
    k = 0
    for j in range(dim):
        for i in range(j, dim):
            out[i, j] = v[k]
            out[j, i] = v[k]
            k += 1
    return out


def duplication_matrix(p: int) -> np.ndarray:
    """Duplication matrix D_p with D_p @ vech(M) = vec(M) for symmetric M."""
    d = np.zeros((p * p, p * (p + 1) // 2))
    k = 0
    for j in range(p):
        for i in range(j, p):
            d[i + j * p, k] = 1.0
            if i != j:
                d[j + i * p, k] = 1.0
            k += 1
    return d
