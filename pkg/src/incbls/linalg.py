"""Dense matrix primitives used by the incremental update.

All routines work on float64 ndarrays and never mutate their inputs.
Explicit inverses are avoided; every ``(.)^-1 X`` product is a solve.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConvergenceError,
    DimensionError,
    NotPositiveDefinite,
    SingularGram,
    SingularSystem,
)

SYMMETRY_RTOL = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float64 array."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def default_rank_tol(shape: tuple[int, int]) -> float:
    return 1e-12 * max(shape)


def left_pinv(A, lam: float = 0.0) -> np.ndarray:
    """Ridge-regularized left inverse ``(A^T A + lam*I)^-1 A^T``.

    With ``lam == 0`` and full column rank this is the Moore-Penrose
    pseudoinverse. Raises :class:`SingularGram` if the Gram matrix is not
    numerically positive definite.
    """
    A = as_matrix(A, "A")
    l, k = A.shape
    if l < k:
        raise DimensionError(f"left_pinv needs rows >= cols, got {l}x{k}")
    if lam < 0:
        raise ValueError("ridge parameter must be nonnegative")
    gram = A.T @ A
    if lam:
        gram[np.diag_indices_from(gram)] += lam
    try:
        factor = sla.cho_factor(gram, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularGram(f"A^T A + {lam}*I is not positive definite") from exc
    # cho_factor only fails on a non-positive pivot; near-zero pivots slip through.
    diag = np.abs(np.diag(factor[0]))
    if diag.min() <= np.sqrt(np.finfo(float).eps) * 1e-4 * diag.max():
        raise SingularGram(f"A^T A + {lam}*I is numerically singular")
    return sla.cho_solve(factor, A.T, check_finite=False)


def svd_pinv(A, rank_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse through the SVD.

    Singular values at or below ``rank_tol * s_max`` are treated as zero.
    The default ``rank_tol`` is ``1e-12 * max(rows, cols)``.
    """
    A = as_matrix(A, "A")
    if rank_tol is None:
        rank_tol = default_rank_tol(A.shape)
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("SVD did not converge") from exc
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[1], A.shape[0]))
    keep = s > rank_tol * s[0]
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (Vt.T * inv_s) @ U.T


def _check_square(M: np.ndarray, name: str) -> None:
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got {M.shape}")


def solve_spd(M, rhs) -> np.ndarray:
    """Solve ``M X = rhs`` for symmetric positive definite ``M`` (Cholesky)."""
    M = as_matrix(M, "M")
    rhs = as_matrix(rhs, "RHS")
    _check_square(M, "M")
    if rhs.shape[0] != M.shape[0]:
        raise DimensionError(f"RHS has {rhs.shape[0]} rows, M is {M.shape}")
    scale = max(np.abs(M).max(), np.finfo(float).tiny)
    if np.abs(M - M.T).max() > SYMMETRY_RTOL * scale:
        raise NotPositiveDefinite("M is not symmetric")
    try:
        factor = sla.cho_factor(M, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Cholesky factorization failed") from exc
    return sla.cho_solve(factor, rhs, check_finite=False)


def _lu_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            return sla.solve(M, rhs, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgWarning) as exc:
            raise SingularSystem(str(exc)) from exc


def solve_with_fallback(
    M: np.ndarray, rhs: np.ndarray, symmetric: bool, fallback: bool = True
) -> tuple[np.ndarray, str]:
    """Solve ``M X = rhs`` trying Cholesky (if symmetric), LU, then SVD.

    Returns the solution and the name of the method that produced it.
    With ``fallback=False`` the first applicable method's failure raises
    :class:`SingularSystem`.
    """
    if symmetric:
        try:
            # Symmetrize away rounding before factorizing.
            return solve_spd(0.5 * (M + M.T), rhs), "cholesky"
        except NotPositiveDefinite as exc:
            if not fallback:
                raise SingularSystem(str(exc)) from exc
    try:
        return _lu_solve(M, rhs), "lu"
    except SingularSystem:
        if not fallback:
            raise
    return svd_pinv(M) @ rhs, "svd"


@dataclass(frozen=True)
class MPReport:
    """Outcome of the four Moore-Penrose conditions."""

    passed: tuple[bool, bool, bool, bool]
    deviations: tuple[float, float, float, float]

    @property
    def all_passed(self) -> bool:
        return all(self.passed)


def mp_conditions_check(A, Ap, tol: float) -> MPReport:
    """Check ``A Ap A = A``, ``Ap A Ap = Ap`` and symmetry of ``A Ap``, ``Ap A``.

    Deviations are max-abs entrywise.
    """
    A = as_matrix(A, "A")
    Ap = as_matrix(Ap, "Ap")
    if Ap.shape != A.shape[::-1]:
        raise DimensionError(f"Ap shape {Ap.shape} does not match A^T shape {A.shape[::-1]}")
    AAp = A @ Ap
    ApA = Ap @ A
    devs = (
        float(np.abs(AAp @ A - A).max()),
        float(np.abs(ApA @ Ap - Ap).max()),
        float(np.abs(AAp.T - AAp).max()),
        float(np.abs(ApA.T - ApA).max()),
    )
    return MPReport(passed=tuple(d <= tol for d in devs), deviations=devs)
