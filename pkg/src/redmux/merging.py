"""Dynamic redundancy allocation across competing elementary subtasks.

The merging matrix A (r rows, one per redundancy; l columns, one per
elementary subtask) blends l subtask velocities into r secondary task rows.
Entries live in [0, gamma], every row sums to gamma, and the initial matrix
allocates each redundancy to the subtask of the same index:

    A0 = [gamma * I | 0]

The allocation evolves by a winner-take-all rule: a soft-priority matrix P
scores each (redundancy, subtask) pair from the current allocation, the
scores are weighted by the per-subtask activity status, and per row the
winner drains weight from the entries that currently hold any.  Row sums are
conserved exactly: the winner's rate is set to the negated sum of the other
effective rates, and integration transfers mass instead of adding clamped
increments.

All operations are pure: they return new arrays/states and never mutate
their inputs, so concurrent batch runs can share nothing but constants.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

GAMMA_MIN = 0.5
GAMMA_MAX = 1.0

# Tolerance for "this entry has reached gamma": transfers land on gamma up
# to accumulated rounding, never beyond it.
SATURATION_EPS = 1e-9


@dataclass(frozen=True)
class MergingState:
    """Allocation matrix plus its update parameters.

    ``rate`` uniformly scales the raw priority-times-status rates; 1.0 keeps
    them as-is, larger values speed up every weight transfer by that factor.
    """

    A: np.ndarray
    gamma: float
    dt: float = 0.01
    rate: float = 1.0

    @property
    def r(self) -> int:
        return self.A.shape[0]

    @property
    def l(self) -> int:
        return self.A.shape[1]


def init_merging(r: int, l: int, gamma: float, dt: float = 0.01, rate: float = 1.0) -> MergingState:
    """Fresh state with A0 = [gamma I | 0].

    Requires r < l: with enough redundancies for every subtask there is
    nothing to multiplex.
    """
    if r < 1:
        raise ValueError("need at least one redundancy")
    if r >= l:
        raise ValueError(f"need more subtasks than redundancies, got r={r}, l={l}")
    if not GAMMA_MIN <= gamma <= GAMMA_MAX:
        raise ValueError(f"gamma must be in [{GAMMA_MIN}, {GAMMA_MAX}], got {gamma}")
    if dt <= 0 or rate <= 0:
        raise ValueError("dt and rate must be positive")
    A = np.zeros((r, l))
    A[:, :r] = gamma * np.eye(r)
    return MergingState(A=A, gamma=gamma, dt=dt, rate=rate)


def soft_priority(state: MergingState) -> np.ndarray:
    """Priority score of assigning subtask j to redundancy i.

    Three damping products over the current allocation:

    * earlier redundancies already holding subtask j (1 - a_uj, u < i),
    * earlier subtasks already held by redundancy i (1 - a_iv, v < j),
    * the redundancy keeper (gamma - a_uj over u != i), which zeroes the
      score of a subtask fully held elsewhere.

    Empty products are 1, so a lone entry scores 1 regardless of its weight.
    """
    A = state.A
    g = state.gamma
    one = 1.0 - A
    keep = g - A
    # exclusive running products down columns / across rows
    col_prefix = np.cumprod(one, axis=0)
    prev_rows = np.vstack([np.ones((1, state.l)), col_prefix[:-1]])
    row_prefix = np.cumprod(one, axis=1)
    prev_cols = np.hstack([np.ones((state.r, 1)), row_prefix[:, :-1]])
    # leave-one-out product of the keeper column
    kp = np.cumprod(keep, axis=0)
    prefix = np.vstack([np.ones((1, state.l)), kp[:-1]])
    ks = np.cumprod(keep[::-1], axis=0)[::-1]
    suffix = np.vstack([ks[1:], np.ones((1, state.l))])
    return prev_rows * prev_cols * prefix * suffix


def wta_rate(P: np.ndarray, status: np.ndarray, state: MergingState) -> np.ndarray:
    """Winner-take-all allocation rates from priorities and statuses.

    Per row: the highest priority-times-status column wins (ties to the
    lowest index).  A row whose winner already holds gamma is frozen (all
    zeros).  Otherwise the midpoint of the two best scores is subtracted so
    only the winner stays positive, and the winner's rate is replaced by the
    negated sum over the effective set (non-winner columns with positive
    rate or nonzero weight), making each row's rate sum exactly zero.
    """
    A = state.A
    raw = state.rate * P * np.asarray(status, dtype=float)[None, :]
    rates = np.zeros_like(A)
    for i in range(state.r):
        row = raw[i]
        w = int(np.argmax(row))
        if A[i, w] >= state.gamma - SATURATION_EPS:
            continue
        others = np.delete(row, w)
        second = float(np.max(others)) if others.size else 0.0
        z = 0.5 * (row[w] + second)
        shifted = row - z
        effective = (shifted > 0.0) | (A[i] > 0.0)
        effective[w] = False
        t = float(np.sum(shifted[effective]))
        out = np.where(effective, shifted, 0.0)
        out[w] = -t
        rates[i] = out
    return rates


def step_merging(state: MergingState, rates: np.ndarray) -> MergingState:
    """Integrate allocation rates over one interval, conserving row sums.

    Negative rates are limited so no entry can cross zero within the step,
    and the drained mass is credited to the row's winner, so entries stay in
    [0, gamma] and row sums are preserved exactly (up to rounding).  Expects
    winner-take-all shaped rates: at most one positive entry per row.
    """
    A = state.A.copy()
    rates = np.asarray(rates, dtype=float)
    if rates.shape != A.shape:
        raise ValueError(f"rate shape {rates.shape} does not match A {A.shape}")
    for i in range(state.r):
        row = rates[i]
        if not np.any(row):
            continue
        w = int(np.argmax(row))
        drain = np.minimum(A[i], np.maximum(-row, 0.0) * state.dt)
        drain[w] = 0.0
        A[i] -= drain
        A[i, w] += float(np.sum(drain))
    np.clip(A, 0.0, state.gamma, out=A)
    return replace(state, A=A)


def secondary_task(state: MergingState, xs: np.ndarray) -> np.ndarray:
    """Merged secondary task velocity (1/gamma) A xs."""
    xs = np.asarray(xs, dtype=float)
    if xs.shape != (state.l,):
        raise ValueError(f"expected {state.l} subtask velocities, got {xs.shape}")
    return (state.A @ xs) / state.gamma


def merged_jacobian(state: MergingState, J_sub: np.ndarray) -> np.ndarray:
    """Merged secondary Jacobian (1/gamma) A J_sub."""
    J_sub = np.asarray(J_sub, dtype=float)
    if J_sub.shape[0] != state.l:
        raise ValueError(f"expected {state.l} Jacobian rows, got {J_sub.shape[0]}")
    return (state.A @ J_sub) / state.gamma
