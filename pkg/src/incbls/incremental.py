"""Pseudoinverse and output-weight update for appended input rows.

Given the pseudoinverse ``Apinv`` of an ``l x k`` matrix ``A`` and ``q`` new
rows ``Ax``, the pseudoinverse of ``[A; Ax]`` is

    [Apinv - B Dt, B],    Dt = Ax Apinv,

and the weights move by ``W + B (Ya - Ax W)``. The ``k x q`` block ``B``
has four interchangeable formulas, see :class:`BStrategy`.
"""

from __future__ import annotations

import enum
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, StrategyMismatch
from .linalg import as_matrix, solve_with_fallback, svd_pinv

C_ZERO_RTOL = 1e-8


class BStrategy(str, enum.Enum):
    """Formula used for the ``B`` block.

    EXISTING:  Apinv D (I + Dt D)^-1, a q x q solve over an l-length product.
    SMALL_Q:   Dbar (I + Ax Dbar)^-1, a q x q solve; cheapest when q < k.
    LARGE_Q:   (I + Dbar Ax)^-1 Dbar, a k x k solve; cheapest when q >= k.
    CPINV:     (C^+)^T, used when the new rows leave the row space of A.
    AUTO:      pick one of the above from q, k and the C residual.
    """

    EXISTING = "existing"
    SMALL_Q = "small_q"
    LARGE_Q = "large_q"
    CPINV = "cpinv"
    AUTO = "auto"


@dataclass(frozen=True)
class PinvState:
    """A matrix paired with its (possibly ridge-regularized) pseudoinverse.

    ``A`` may be ``None`` in memory-lean mode; C can then never be
    evaluated and updates must assume full column rank.
    """

    A: np.ndarray | None
    Apinv: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        if self.A is not None and self.A.shape[::-1] != self.Apinv.shape:
            raise DimensionError(
                f"Apinv shape {self.Apinv.shape} does not match A shape {self.A.shape}"
            )

    @property
    def k(self) -> int:
        return self.Apinv.shape[0]

    @property
    def l(self) -> int:
        return self.Apinv.shape[1]

    def drop_matrix(self) -> PinvState:
        return PinvState(None, self.Apinv, self.lam)


@dataclass(frozen=True)
class IncrementBatch:
    Ax: np.ndarray
    Ya: np.ndarray

    def __post_init__(self):
        if self.Ax.ndim != 2 or self.Ya.ndim != 2:
            raise DimensionError("Ax and Ya must be 2-D")
        if self.Ax.shape[0] != self.Ya.shape[0]:
            raise DimensionError(
                f"Ax has {self.Ax.shape[0]} rows but Ya has {self.Ya.shape[0]}"
            )
        if self.Ax.shape[0] < 1:
            raise DimensionError("an increment needs at least one row")

    @property
    def q(self) -> int:
        return self.Ax.shape[0]


@dataclass
class UpdateOutcome:
    new_state: PinvState
    new_W: np.ndarray
    strategy_used: BStrategy
    c_norm: float | None
    timings: dict[str, float] = field(default_factory=dict)
    solver: str = ""

    @property
    def total_seconds(self) -> float:
        return sum(self.timings.values())


def _check_inner(left: np.ndarray, right: np.ndarray, what: str) -> None:
    if left.shape[1] != right.shape[0]:
        raise DimensionError(f"{what}: cannot multiply {left.shape} by {right.shape}")


def compute_Dt(Apinv, Ax) -> np.ndarray:
    """``Dt = Ax Apinv`` (q x l)."""
    Apinv = as_matrix(Apinv, "Apinv")
    Ax = as_matrix(Ax, "Ax")
    _check_inner(Ax, Apinv, "compute_Dt")
    return Ax @ Apinv


def compute_C(A, Ax, Dt) -> np.ndarray:
    """Residual ``C = Ax^T - A^T D`` (k x q), zero when Ax lies in A's row space."""
    A = as_matrix(A, "A")
    Ax = as_matrix(Ax, "Ax")
    Dt = as_matrix(Dt, "Dt")
    if A.shape[1] != Ax.shape[1] or Dt.shape != (Ax.shape[0], A.shape[0]):
        raise DimensionError(
            f"compute_C: incompatible shapes A{A.shape}, Ax{Ax.shape}, Dt{Dt.shape}"
        )
    return Ax.T - A.T @ Dt.T


def default_c_tol(Ax) -> float:
    return C_ZERO_RTOL * float(np.abs(Ax).max(initial=0.0))


def c_norm_check(C, tol: float) -> bool:
    """True iff ``max|C| <= tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return float(np.abs(C).max(initial=0.0)) <= tol


def _b_existing(Apinv, Dt, fallback=True):
    Dbar = Apinv @ Dt.T
    M = Dt @ Dt.T
    M[np.diag_indices_from(M)] += 1.0
    # B = Dbar M^-1 with M symmetric, so B^T = M^-1 Dbar^T.
    Bt, how = solve_with_fallback(M, Dbar.T, symmetric=True, fallback=fallback)
    return Bt.T, how


def _b_small_q(Dbar, Ax, fallback=True):
    M = Ax @ Dbar
    M[np.diag_indices_from(M)] += 1.0
    # Ax Dbar = Dt Dt^T, so M is symmetric like the existing q x q system.
    Bt, how = solve_with_fallback(M, Dbar.T, symmetric=True, fallback=fallback)
    return Bt.T, how


def _b_large_q(Dbar, Ax, fallback=True):
    M = Dbar @ Ax
    M[np.diag_indices_from(M)] += 1.0
    return solve_with_fallback(M, Dbar, symmetric=False, fallback=fallback)


def compute_B_existing(Apinv, Dt, fallback: bool = True) -> np.ndarray:
    """``B = Apinv D (I + Dt D)^-1`` with ``D = Dt^T``."""
    Apinv = as_matrix(Apinv, "Apinv")
    Dt = as_matrix(Dt, "Dt")
    if Dt.shape[1] != Apinv.shape[1]:
        raise DimensionError(f"Dt {Dt.shape} incompatible with Apinv {Apinv.shape}")
    return _b_existing(Apinv, Dt, fallback)[0]


def compute_Dbar(Apinv, Dt) -> np.ndarray:
    """``Dbar = Apinv D`` (k x q)."""
    Apinv = as_matrix(Apinv, "Apinv")
    Dt = as_matrix(Dt, "Dt")
    if Dt.shape[1] != Apinv.shape[1]:
        raise DimensionError(f"Dt {Dt.shape} incompatible with Apinv {Apinv.shape}")
    return Apinv @ Dt.T


def _check_dbar_ax(Dbar, Ax):
    Dbar = as_matrix(Dbar, "Dbar")
    Ax = as_matrix(Ax, "Ax")
    if Dbar.shape != Ax.shape[::-1]:
        raise DimensionError(f"Dbar {Dbar.shape} must be the transpose shape of Ax {Ax.shape}")
    return Dbar, Ax


def compute_B_small_q(Dbar, Ax, fallback: bool = True) -> np.ndarray:
    """``B = Dbar (I + Ax Dbar)^-1``; solves a q x q system."""
    Dbar, Ax = _check_dbar_ax(Dbar, Ax)
    return _b_small_q(Dbar, Ax, fallback)[0]


def compute_B_large_q(Dbar, Ax, fallback: bool = True) -> np.ndarray:
    """``B = (I + Dbar Ax)^-1 Dbar``; solves a k x k system."""
    Dbar, Ax = _check_dbar_ax(Dbar, Ax)
    return _b_large_q(Dbar, Ax, fallback)[0]


def compute_B_cpinv(C, rank_tol: float | None = None) -> np.ndarray:
    """``B = (C^+)^T``, shaped k x q like ``C``.

    Exact when ``C`` has full column rank, i.e. every new row brings a
    direction outside the row space of ``A``.
    """
    C = as_matrix(C, "C")
    return svd_pinv(C, rank_tol).T


def select_B_strategy(q: int, k: int, c_is_zero: bool, requested: BStrategy) -> BStrategy:
    """Resolve ``AUTO``; any other request is returned unchanged.

    At ``q == k`` both proposed formulas cost one k x k solve; LARGE_Q wins.
    """
    if q < 1 or k < 1:
        raise ValueError("q and k must be positive")
    requested = BStrategy(requested)
    if requested is not BStrategy.AUTO:
        return requested
    if not c_is_zero:
        return BStrategy.CPINV
    return BStrategy.SMALL_Q if q < k else BStrategy.LARGE_Q


def update_pinv(state: PinvState, B, Dt, Ax) -> PinvState:
    """Pseudoinverse of ``[A; Ax]`` as ``[Apinv - B Dt, B]``."""
    B = as_matrix(B, "B")
    Dt = as_matrix(Dt, "Dt")
    Ax = as_matrix(Ax, "Ax")
    k, l = state.Apinv.shape
    q = Ax.shape[0]
    if q < 1:
        raise DimensionError("an increment needs at least one row")
    if B.shape != (k, q) or Dt.shape != (q, l) or Ax.shape[1] != k:
        raise DimensionError(
            f"update_pinv: B{B.shape}, Dt{Dt.shape}, Ax{Ax.shape} vs state k={k}, l={l}"
        )
    new_pinv = np.empty((k, l + q))
    np.matmul(B, Dt, out=new_pinv[:, :l])
    np.subtract(state.Apinv, new_pinv[:, :l], out=new_pinv[:, :l])
    new_pinv[:, l:] = B
    new_A = None if state.A is None else np.vstack([state.A, Ax])
    return PinvState(new_A, new_pinv, state.lam)


def update_weights(W, B, Ax, Ya) -> np.ndarray:
    """``W + B (Ya - Ax W)``."""
    W = as_matrix(W, "W")
    B = as_matrix(B, "B")
    Ax = as_matrix(Ax, "Ax")
    Ya = as_matrix(Ya, "Ya")
    k, c = W.shape
    q = Ax.shape[0]
    if B.shape != (k, q) or Ax.shape != (q, k) or Ya.shape != (q, c):
        raise DimensionError(
            f"update_weights: W{W.shape}, B{B.shape}, Ax{Ax.shape}, Ya{Ya.shape}"
        )
    return W + B @ (Ya - Ax @ W)


@contextmanager
def _phase(timings: dict[str, float], name: str):
    t0 = time.perf_counter()
    yield
    timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def add_inputs(
    state: PinvState,
    W,
    batch: IncrementBatch,
    strategy: BStrategy = BStrategy.AUTO,
    assume_full_rank: bool = False,
    c_tol: float | None = None,
) -> UpdateOutcome:
    """Fold one batch of new rows into ``state`` and ``W``.

    With ``assume_full_rank`` the C residual is never formed and treated as
    zero. Otherwise a forced strategy that contradicts the residual raises
    :class:`StrategyMismatch`.
    """
    strategy = BStrategy(strategy)
    Ax, Ya = batch.Ax, batch.Ya
    if Ax.shape[1] != state.k:
        raise DimensionError(f"batch has {Ax.shape[1]} columns, state has k={state.k}")
    W = as_matrix(W, "W")
    if W.shape[0] != state.k or Ya.shape[1] != W.shape[1]:
        raise DimensionError(f"W{W.shape} incompatible with k={state.k}, Ya{Ya.shape}")
    needs_c = not assume_full_rank or strategy is BStrategy.CPINV
    if needs_c and state.A is None:
        raise ConfigError("C requires the stored matrix A; it was dropped")

    timings: dict[str, float] = {}
    with _phase(timings, "Dt"):
        Dt = compute_Dt(state.Apinv, Ax)

    C = None
    c_norm = None
    c_is_zero = True
    if needs_c:
        with _phase(timings, "C"):
            C = compute_C(state.A, Ax, Dt)
            c_norm = float(np.abs(C).max(initial=0.0))
            tol = default_c_tol(Ax) if c_tol is None else c_tol
            c_is_zero = c_norm <= tol if tol > 0 else c_norm == 0.0

    chosen = select_B_strategy(batch.q, state.k, c_is_zero, strategy)
    if needs_c and strategy is not BStrategy.AUTO and (chosen is BStrategy.CPINV) == c_is_zero:
        raise StrategyMismatch(
            f"strategy {chosen.value} forced but max|C| = {c_norm:.3e} "
            f"({'zero' if c_is_zero else 'nonzero'} at tolerance)"
        )

    if chosen is BStrategy.EXISTING:
        with _phase(timings, "B"):
            B, solver = _b_existing(state.Apinv, Dt)
    elif chosen is BStrategy.CPINV:
        with _phase(timings, "B"):
            B = compute_B_cpinv(C)
        solver = "svd"
    else:
        with _phase(timings, "Dbar"):
            Dbar = state.Apinv @ Dt.T
        with _phase(timings, "B"):
            if chosen is BStrategy.SMALL_Q:
                B, solver = _b_small_q(Dbar, Ax)
            else:
                B, solver = _b_large_q(Dbar, Ax)

    with _phase(timings, "update_pinv"):
        new_state = update_pinv(state, B, Dt, Ax)
    with _phase(timings, "update_weights"):
        new_W = update_weights(W, B, Ax, Ya)
    return UpdateOutcome(new_state, new_W, chosen, c_norm, timings, solver)
