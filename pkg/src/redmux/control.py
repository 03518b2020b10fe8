"""Differential inverse kinematics with strict primary-task priority.

All resolvers share the same structure: a minimum-norm particular solution
for the primary task plus a correction confined to the primary null space,
so the secondary never perturbs the primary at the velocity level.  The
merged resolver folds l subtask rows through the allocation matrix A into
an r-row secondary task:

    qd = J1+ x1d + N1 Js^T A^T (A Js N1 Js^T A^T)^-1 (A xs - A Js J1+ x1d)

with N1 = I - J1+ J1.  Scaling A leaves qd unchanged, and with A = A0 the
law reduces to the classic two-priority solution over the first r rows.
The inner inverse is Tikhonov-damped when a damping factor is set.  With
damping off it stays exact while the inner matrix is well conditioned and
switches to a scale-relative Tikhonov diagonal once it degenerates, which
happens whenever the allocation puts weight on directions that are
infeasible inside the primary null space.  Either way the correction lives
in null(J1), so the primary equality is untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import effective_rank, null_projector, pseudoinverse
from .merging import MergingState, merged_jacobian, secondary_task

DAMPING_DEFAULT = 1e-4

# Below this fraction of the secondary Jacobian's scale, the null-restricted
# secondary direction is considered annihilated and contributes nothing.
NULL_FLOOR = 1e-12

# Inner-solve conditioning guard: beyond this eigenvalue ratio the inner
# matrix counts as degenerate and gets a Tikhonov diagonal scaled to its
# largest eigenvalue.  Allocation transients routinely drive two merged rows
# nearly parallel; the residual they disagree on is then numerical junk, and
# the diagonal caps its gain at 1/(2*sqrt(INNER_REL_DAMPING*mu_max)) while
# costing well-separated directions at most about one percent.  The
# correction stays in null(J1) either way.
INNER_COND_MAX = 1e3
INNER_REL_DAMPING = 1e-2


def resolve_single(J1, x1d, damping: float = 0.0) -> np.ndarray:
    """Minimum-norm joint velocity for one task."""
    return pseudoinverse(np.asarray(J1, float), damping) @ np.asarray(x1d, float)


def resolve_two(J1, x1d, J2, x2d, damping: float = 0.0) -> np.ndarray:
    """Two-priority resolution; the secondary acts in the primary null space."""
    J1 = np.atleast_2d(np.asarray(J1, float))
    J2 = np.atleast_2d(np.asarray(J2, float))
    x1d = np.asarray(x1d, float)
    x2d = np.asarray(x2d, float)
    qd1 = pseudoinverse(J1, damping) @ x1d
    N1 = null_projector(J1)
    JN = J2 @ N1
    scale = np.linalg.norm(J2)
    if np.linalg.norm(JN) <= NULL_FLOOR * max(1.0, scale):
        return qd1  # secondary fully annihilated by the primary
    return qd1 + pseudoinverse(JN, damping) @ (x2d - J2 @ qd1)


@dataclass
class ControlFrame:
    """One control step's inputs and diagnostics."""

    q: np.ndarray
    J1: np.ndarray
    x1d: np.ndarray
    J_sub: np.ndarray
    xs: np.ndarray
    state: MergingState
    damping: float = 0.0
    # filled by resolve_merged
    qd: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def resolve_merged(frame: ControlFrame) -> np.ndarray:
    """Primary task plus the A-merged secondary, confined to null(J1)."""
    J1 = np.atleast_2d(np.asarray(frame.J1, float))
    x1d = np.asarray(frame.x1d, float)
    state = frame.state
    lam = frame.damping

    qd1 = pseudoinverse(J1, lam) @ x1d
    N1 = null_projector(J1)
    B = merged_jacobian(state, frame.J_sub)     # (1/gamma) A J_sub
    x2d = secondary_task(state, frame.xs)       # (1/gamma) A xs

    BN = B @ N1
    M = BN @ BN.T                               # = B N1 B^T, N1 idempotent
    scale = np.linalg.norm(B)
    resid = x2d - B @ qd1
    mvals = np.linalg.eigvalsh(M) if M.size else np.zeros(1)
    inner_damped = False
    if np.linalg.norm(BN) <= NULL_FLOOR * max(1.0, scale):
        correction = np.zeros(J1.shape[1])
    else:
        ridge = lam ** 2
        if mvals[0] <= mvals[-1] / INNER_COND_MAX:
            # Degenerate allocation: some merged direction is unreachable
            # in null(J1), so M has (near-)zero eigenvalues.  A diagonal
            # scaled to the top eigenvalue keeps the feasible directions
            # almost exact and caps the gain on the collapsing ones.
            inner_damped = True
            ridge = max(ridge, INNER_REL_DAMPING * mvals[-1] + NULL_FLOOR)
        if ridge > 0.0:
            correction = BN.T @ np.linalg.solve(M + ridge * np.eye(state.r), resid)
        else:
            correction = BN.T @ np.linalg.solve(M, resid)

    qd = qd1 + correction
    frame.diagnostics = {
        "primary_rank": effective_rank(J1),
        "inner_cond": float(mvals[-1] / mvals[0]) if mvals[0] > 0 else float("inf"),
        "inner_damped": inner_damped,
        "primary_residual": float(np.max(np.abs(J1 @ qd - x1d))),
    }
    frame.qd = qd
    return qd
