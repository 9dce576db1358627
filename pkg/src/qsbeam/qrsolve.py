"""Streaming Q-less QR updates and triangular solves.

Maintains only the upper-triangular factor R of a row stream's Gram matrix:
absorbing a row via Givens rotations maps R to R' with

    R'^H R' = forgetting * R^H R + row^H row,

so R'^H R' tracks an exponentially weighted normal-equation matrix without
ever storing Q. Solving (R^H R) z = rhs is a forward substitution with R^H
followed by a backward substitution with R; both substitutions are written
out explicitly because they model the systolic solve path of the hardware
design this package simulates.

States are value-like: update functions return new states and never mutate
their inputs, so completed states are safe to share across threads. Updates
themselves must be applied sequentially.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import NumericalError

_PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class QlessQrState:
    """Upper-triangular factor plus the matching weighted right-hand side.

    Attributes
    ----------
    r : np.ndarray
        (n, n) complex upper-triangular factor, real non-negative diagonal.
    forgetting : float
        Exponential forgetting factor in (0, 1].
    rows_absorbed : int
        Number of data rows folded in so far.
    rhs : np.ndarray
        Accumulated right-hand side sum_l w_l row_l^H target_l with the same
        forgetting weights.
    """

    r: np.ndarray
    forgetting: float = 0.99
    rows_absorbed: int = 0
    rhs: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.forgetting <= 1.0):
            raise ValueError("forgetting factor must be in (0, 1]")
        if self.r.ndim != 2 or self.r.shape[0] != self.r.shape[1]:
            raise ValueError("factor must be square")

    @property
    def n(self) -> int:
        return self.r.shape[0]

    def gram(self) -> np.ndarray:
        """The tracked normal-equation matrix R^H R."""
        return self.r.conj().T @ self.r


def new_state(n: int, forgetting: float = 0.99) -> QlessQrState:
    """Empty accumulator of dimension n."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return QlessQrState(
        r=np.zeros((n, n), dtype=complex),
        forgetting=forgetting,
        rows_absorbed=0,
        rhs=np.zeros(n, dtype=complex),
    )


def state_from_triangular(factor: np.ndarray, forgetting: float = 1.0) -> QlessQrState:
    """Wrap an existing upper-triangular factor (e.g. a Cholesky transpose).

    The diagonal phase is normalized so every diagonal entry is real and
    non-negative, which leaves R^H R unchanged.
    """
    f = np.array(factor, dtype=complex)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError("factor must be square")
    if np.any(np.abs(np.tril(f, -1)) > 0):
        raise ValueError("factor must be upper triangular")
    diag = np.diag(f)
    phase = np.where(np.abs(diag) > 0, diag / np.abs(np.where(diag == 0, 1, diag)), 1.0)
    f = (f.T / phase).T  # scale row i by conj-phase so diagonal becomes |diag|
    f[np.arange(f.shape[0]), np.arange(f.shape[0])] = np.abs(diag)
    return QlessQrState(
        r=f, forgetting=forgetting, rows_absorbed=0, rhs=np.zeros(f.shape[0], dtype=complex)
    )


def _absorb_row_inplace(r: np.ndarray, row: np.ndarray) -> None:
    """Givens-rotate `row` into upper-triangular `r` (both modified)."""
    n = r.shape[0]
    for k in range(n):
        b = row[k]
        if b == 0:
            continue
        a = r[k, k].real  # diagonal kept real non-negative by construction
        hyp = np.hypot(a, abs(b))
        c = a / hyp
        s = np.conj(b) / hyp
        rk = r[k, k:]
        wk = row[k:]
        new_rk = c * rk + s * wk
        row[k:] = -np.conj(s) * rk + c * wk
        r[k, k:] = new_rk
        r[k, k] = hyp  # exact real assignment kills rounding phase residue
        row[k] = 0.0


def qless_update(
    state: QlessQrState, row: np.ndarray, target: complex | None = None
) -> QlessQrState:
    """Fold one data row (and optionally its regression target) into the state.

    Parameters
    ----------
    state : QlessQrState
        Current accumulator.
    row : np.ndarray
        Length-n data row.
    target : complex | None
        When given, the right-hand side is advanced as
        forgetting * rhs + row^H * target, keeping (R^H R) z = rhs the
        normal equation of the exponentially weighted least-squares fit.

    Returns
    -------
    QlessQrState
        New state; the input state is untouched.
    """
    row = np.asarray(row, dtype=complex).reshape(-1)
    if row.shape[0] != state.n:
        raise ValueError(f"row has length {row.shape[0]}, state dimension is {state.n}")
    r = state.r * np.sqrt(state.forgetting)
    work = row.copy()
    _absorb_row_inplace(r, work)
    rhs = state.rhs
    if rhs is not None:
        rhs = state.forgetting * rhs
        if target is not None:
            rhs = rhs + np.conj(row) * target
    return replace(state, r=r, rows_absorbed=state.rows_absorbed + 1, rhs=rhs)


def absorb_rows(
    state: QlessQrState,
    rows: np.ndarray,
    targets: Sequence[complex] | None = None,
) -> QlessQrState:
    """Fold many rows in sequence (single state allocation).

    Equivalent to repeated qless_update but without per-row factor copies;
    used on long snapshot streams.
    """
    rows = np.asarray(rows, dtype=complex)
    if rows.ndim != 2 or rows.shape[1] != state.n:
        raise ValueError("rows must be (k, n) with n matching the state")
    if targets is not None and len(targets) != rows.shape[0]:
        raise ValueError("targets must match the number of rows")
    r = state.r.copy()
    rhs = None if state.rhs is None else state.rhs.copy()
    sqrt_f = np.sqrt(state.forgetting)
    for i in range(rows.shape[0]):
        r *= sqrt_f
        work = rows[i].copy()
        _absorb_row_inplace(r, work)
        if rhs is not None:
            rhs *= state.forgetting
            if targets is not None:
                rhs += np.conj(rows[i]) * targets[i]
    return replace(state, r=r, rows_absorbed=state.rows_absorbed + rows.shape[0], rhs=rhs)


def solve_normal(state: QlessQrState, rhs: np.ndarray) -> np.ndarray:
    """Solve (R^H R) z = rhs by forward then backward substitution.

    Raises
    ------
    NumericalError
        When a diagonal pivot is numerically zero; the message names the
        pivot index.
    """
    rhs = np.asarray(rhs, dtype=complex).reshape(-1)
    if rhs.shape[0] != state.n:
        raise ValueError(f"rhs has length {rhs.shape[0]}, state dimension is {state.n}")
    r = state.r
    n = state.n
    diag = np.abs(np.diag(r))
    tol = _PIVOT_RTOL * (diag.max() if diag.size else 0.0)
    for i in range(n):
        if diag[i] <= tol:
            raise NumericalError(
                f"triangular factor is singular at pivot {i} "
                f"(|R[{i},{i}]| = {diag[i]:.3e}); absorb more rows or add loading"
            )
    # Forward: R^H y = rhs, R^H lower triangular.
    y = np.zeros(n, dtype=complex)
    for i in range(n):
        y[i] = (rhs[i] - np.conj(r[:i, i]) @ y[:i]) / np.conj(r[i, i])
    # Backward: R z = y.
    z = np.zeros(n, dtype=complex)
    for i in range(n - 1, -1, -1):
        z[i] = (y[i] - r[i, i + 1 :] @ z[i + 1 :]) / r[i, i]
    return z


@dataclass(frozen=True)
class RiskEstimate:
    """Weighted empirical risk: value = sum_i weights[i] * losses[i]."""

    value: float
    losses: np.ndarray
    weights: np.ndarray


def empirical_risk(
    losses: Sequence[float], weights: Sequence[float] | None = None
) -> RiskEstimate:
    """Weighted sum of per-sample losses.

    Parameters
    ----------
    losses : sequence of float
        Per-sample loss values.
    weights : sequence of float | None
        Quadrature weights; defaults to uniform 1/N. Must be the same
        length as losses.
    """
    l = np.asarray(losses, dtype=float).reshape(-1)
    if l.size == 0:
        raise ValueError("need at least one loss value")
    if weights is None:
        w = np.full(l.size, 1.0 / l.size)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.size != l.size:
            raise ValueError("weights and losses must have equal length")
    return RiskEstimate(value=float(w @ l), losses=l, weights=w)
