"""Dense linear-algebra helpers.

Linear solves go through LAPACK (LU with partial pivoting, via numpy);
definiteness checks use an explicit Cholesky factorization so the pivot
threshold stays under our control.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

# Cholesky pivot fails below this fraction of the matrix norm.
SPD_PIVOT_RTOL = 1e-12


def as_matrix(value, n: int, name: str = "matrix") -> np.ndarray:
    """Coerce a scalar, diagonal vector, or square array to an (n, n) float array.

    Scalars become ``value * I``; 1-D arrays of length n become diagonal
    matrices; 2-D input must already be (n, n).
    """
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        out = float(arr) * np.eye(n)
    elif arr.ndim == 1:
        if arr.shape[0] != n:
            raise ValidationError(f"{name}: expected {n} diagonal entries, got {arr.shape[0]}")
        out = np.diag(arr)
    elif arr.ndim == 2:
        if arr.shape != (n, n):
            raise ValidationError(f"{name}: expected shape ({n}, {n}), got {arr.shape}")
        out = arr.copy()
    else:
        raise ValidationError(f"{name}: too many dimensions ({arr.ndim})")
    if not np.all(np.isfinite(out)):
        raise ValidationError(f"{name} has non-finite entries")
    return out


def as_vector(value, n: int, name: str = "vector") -> np.ndarray:
    """Coerce a scalar or sequence to a length-n float vector."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        out = np.full(n, float(arr))
    elif arr.shape == (n,):
        out = arr.copy()
    else:
        raise ValidationError(f"{name}: expected {n} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(out)):
        raise ValidationError(f"{name} has non-finite entries")
    return out


def symmetry_error(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.T))) if a.size else 0.0


def is_symmetric(a: np.ndarray, rtol: float = 1e-9) -> bool:
    scale = max(float(np.max(np.abs(a))), 1.0) if a.size else 1.0
    return symmetry_error(a) <= rtol * scale


def cholesky_lower(a: np.ndarray, rtol: float = SPD_PIVOT_RTOL) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises ValueError when any pivot falls below ``rtol * ||a||_inf``.
    """
    n = a.shape[0]
    norm = float(np.max(np.abs(a))) if a.size else 0.0
    thresh = rtol * max(norm, np.finfo(float).tiny)
    L = np.zeros_like(a, dtype=float)
    for k in range(n):
        pivot = a[k, k] - L[k, :k] @ L[k, :k]
        if pivot < thresh:
            raise ValueError(f"pivot {pivot:.3e} below threshold {thresh:.3e} at index {k}")
        L[k, k] = np.sqrt(pivot)
        if k + 1 < n:
            L[k + 1:, k] = (a[k + 1:, k] - L[k + 1:, :k] @ L[k, :k]) / L[k, k]
    return L


def require_symmetric(a: np.ndarray, name: str, err=ValidationError, rtol: float = 1e-9) -> None:
    if not is_symmetric(a, rtol):
        raise err(f"{name} is not symmetric (asymmetry {symmetry_error(a):.3e})")


def require_spd(a: np.ndarray, name: str, err=ValidationError, sym_rtol: float = 1e-9) -> None:
    """Check symmetry and positive definiteness; raise ``err`` on failure."""
    require_symmetric(a, name, err, sym_rtol)
    try:
        cholesky_lower(0.5 * (a + a.T))
    except ValueError as exc:
        raise err(f"{name} is not positive definite ({exc})") from None


def require_psd(a: np.ndarray, name: str, err=ValidationError, sym_rtol: float = 1e-9) -> None:
    """Check symmetry and positive semidefiniteness; raise ``err`` on failure."""
    require_symmetric(a, name, err, sym_rtol)
    w = np.linalg.eigvalsh(0.5 * (a + a.T))
    scale = max(float(np.max(np.abs(a))), 1.0)
    if w.size and w[0] < -1e-10 * scale:
        raise err(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")


def min_eigenvalue_sym(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])


def solve(a: np.ndarray, b: np.ndarray, name: str, err=ValidationError) -> np.ndarray:
    """Solve ``a x = b`` via LU with partial pivoting; wrap singularity into ``err``."""
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise err(f"{name} is singular: {exc}") from None


def pencil_max_frequency(stiffness: np.ndarray, mass: np.ndarray) -> float:
    """Largest undamped natural frequency of (stiffness, mass), in rad/s.

    Solves the generalized symmetric eigenproblem by Cholesky reduction of
    the mass matrix; the result is sqrt(max eigenvalue), clipped at zero.
    """
    L = cholesky_lower(0.5 * (mass + mass.T))
    # B = L^-1 K L^-T, symmetric, same spectrum as the pencil
    y = np.linalg.solve(L, 0.5 * (stiffness + stiffness.T))
    B = np.linalg.solve(L, y.T).T
    w = np.linalg.eigvalsh(0.5 * (B + B.T))
    wmax = float(w[-1]) if w.size else 0.0
    return float(np.sqrt(max(wmax, 0.0)))
