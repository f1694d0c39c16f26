"""Minimal dense linear-algebra kernel.

Matrices are plain 2-D ``numpy`` float arrays.  The interface is real-valued;
complex arithmetic only appears internally in the spectral computations.
Problem sizes here are small (a few thousand at most), so everything is dense
and direct: LU with partial pivoting for solves, power iteration for the
two-norm, and a dense eigenvalue solve for the spectral radius.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonConvergence, SingularMatrix

# Pivots smaller than this fraction of the original column magnitude are
# treated as exact zeros.
PIVOT_RTOL = 1e-14


def as_matrix(a) -> np.ndarray:
    """Validate and return ``a`` as a 2-D float array with finite entries."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


@dataclass(frozen=True)
class LuFactorization:
    """PA = LU factorization with partial pivoting, as produced by :func:`lu_factor`."""

    factors: np.ndarray
    pivots: np.ndarray

    @property
    def n(self) -> int:
        return self.factors.shape[0]


def lu_factor(a) -> LuFactorization:
    """Factor a square matrix as PA = LU with partial pivoting.

    Raises :class:`SingularMatrix` when a pivot is negligible relative to the
    magnitude of its original column (a zero column always counts as singular).
    """
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got shape {m.shape}")
    col_scale = np.max(np.abs(m), axis=0)
    with warnings.catch_warnings():
        # exact zero pivots are reported below via SingularMatrix
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    diag = np.abs(np.diag(lu))
    bad = (col_scale == 0.0) | (diag < PIVOT_RTOL * col_scale) | (diag == 0.0)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise SingularMatrix(f"negligible pivot in column {j}")
    return LuFactorization(lu, piv)


def lu_solve(f: LuFactorization, b) -> np.ndarray:
    """Solve A x = b given the factorization of A.

    ``b`` may be a vector or carry multiple right-hand sides as columns.
    """
    rhs = np.asarray(b, dtype=float)
    if rhs.shape[0] != f.n:
        raise DimensionMismatch(f"rhs length {rhs.shape[0]} != matrix size {f.n}")
    return scipy.linalg.lu_solve((f.factors, f.pivots), rhs, check_finite=False)


def matrix_norm(a, kind: str) -> float:
    """Matrix norm of ``a``: ``"one"`` (max column sum), ``"inf"`` (max row sum)
    or ``"two"`` (largest singular value)."""
    m = as_matrix(a)
    if kind == "one":
        return float(np.max(np.sum(np.abs(m), axis=0)))
    if kind == "inf":
        return float(np.max(np.sum(np.abs(m), axis=1)))
    if kind == "two":
        return _two_norm(m)
    raise ValueError(f"unknown norm kind {kind!r}")


def _two_norm(m: np.ndarray) -> float:
    # Largest singular value via the LAPACK iterative QR-SVD.  Plain power
    # iteration on AᵀA stalls on near-identity matrices whose top singular
    # values cluster (the amplification matrices swept here do exactly that).
    try:
        return float(np.linalg.norm(m, 2))
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"singular-value iteration failed: {exc}") from exc


def spectral_radius(a) -> float:
    """Largest |λ| over the (possibly complex) eigenvalues of a square real matrix."""
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got shape {m.shape}")
    try:
        eigs = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"eigenvalue iteration failed: {exc}") from exc
    return float(np.max(np.abs(eigs)))
