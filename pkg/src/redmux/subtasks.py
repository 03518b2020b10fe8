"""Elementary one-dimensional subtasks and their activity status.

A multi-dimensional subtask (obstacle avoidance, self-collision avoidance,
singularity avoidance, joint setpoints) is unitized into elementary scalar
subtasks, each contributing one desired velocity and one Jacobian row.  Ids
are assigned in listing order; a smaller id means a higher implicit priority
when redundancies are handed out.

Built-in kinds:

* ``joint-setpoint``          drive joint j to a target angle.
* ``joint-limit``             repel joint j from its travel limits once the
                              distance to a limit falls below a margin.
* ``obstacle-clearance``      push a named chain point away from a moving
                              point obstacle along one task axis once the
                              distance falls below a threshold.
* ``singularity-avoidance``   climb the manipulability of a named point's
                              task Jacobian along one joint coordinate.

Every law returns exactly 0 at its goal condition and is bounded on bounded
state, so an ignored subtask cannot destabilize the rest of the system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import kinematics

# Status normalization defaults: slope k and dead span d of the logistic
# window.  At zero velocity the status is 2 / (1 + e^(k d)), i.e. near zero.
STATUS_SLOPE = 100.0
STATUS_RANGE = 0.05

# Law defaults.
GAIN = 1.0
LIMIT_MARGIN = 0.2          # rad, joint-limit activation band
CLEARANCE_THRESHOLD = 0.5   # m, obstacle activation distance
FD_STEP = 1e-6              # central difference step for manipulability

KINDS = ("joint-setpoint", "joint-limit", "obstacle-clearance", "singularity-avoidance")


@dataclass(frozen=True)
class ElementarySubtask:
    """One scalar subtask: a desired velocity law plus a Jacobian row."""

    id: int
    kind: str
    params: dict
    parent: str = ""
    slope: float = STATUS_SLOPE
    span: float = STATUS_RANGE

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown subtask kind {self.kind!r}")
        if self.slope <= 0 or self.span <= 0:
            raise ValueError("status slope and span must be positive")


@dataclass(frozen=True)
class SubtaskSpec:
    """A multi-dimensional subtask before unitization."""

    name: str
    kind: str
    components: tuple[dict, ...]
    params: dict = field(default_factory=dict)
    slope: float = STATUS_SLOPE
    span: float = STATUS_RANGE


def unitize(specs) -> list[ElementarySubtask]:
    """Flatten multi-dimensional specs into an ordered elementary list.

    Components of one spec stay consecutive; ids run 0..l-1 in listing order.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("no subtask specs given")
    tasks = []
    for spec in specs:
        if not spec.components:
            raise ValueError(f"subtask {spec.name!r} has no components")
        for comp in spec.components:
            params = dict(spec.params)
            params.update(comp)
            tasks.append(ElementarySubtask(
                id=len(tasks), kind=spec.kind, params=params,
                parent=spec.name, slope=spec.slope, span=spec.span))
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate subtask ids")
    return tasks


def evaluate(task: ElementarySubtask, chain, q, obstacles=None):
    """Desired velocity and Jacobian row of one elementary subtask.

    ``obstacles`` maps obstacle names to current (x, y) positions and is
    only consulted by obstacle-clearance subtasks.
    """
    q = np.asarray(q, dtype=float)
    n = chain.n
    p = task.params
    if task.kind == "joint-setpoint":
        j = _joint_index(p, n)
        row = _unit_row(n, j)
        return p["gain"] * (p["target"] - q[j]), row
    if task.kind == "joint-limit":
        j = _joint_index(p, n)
        row = _unit_row(n, j)
        lo, hi = p["min"], p["max"]
        margin = p.get("margin", LIMIT_MARGIN)
        dist = min(q[j] - lo, hi - q[j])
        if dist >= margin:
            return 0.0, row
        away = 1.0 if (q[j] - lo) <= (hi - q[j]) else -1.0
        depth = min(margin - dist, margin)  # saturate once the limit is crossed
        return p["gain"] * depth * away, row
    if task.kind == "obstacle-clearance":
        name = p["obstacle"]
        if obstacles is None or name not in obstacles:
            raise KeyError(f"unresolved obstacle reference {name!r}")
        axis = p["axis"]
        if axis not in ("x", "y"):
            raise ValueError(f"obstacle-clearance axis must be x or y, got {axis!r}")
        pos = kinematics.point_pose(chain, q, p["point"])[:2]
        delta = pos - np.asarray(obstacles[name], dtype=float)
        d = float(np.hypot(*delta))
        threshold = p.get("threshold", CLEARANCE_THRESHOLD)
        row = kinematics.jacobian(chain, q, p["point"], dims=(axis,))[0]
        if d >= threshold:
            return 0.0, row
        unit = delta / d if d > 0.0 else np.zeros(2)
        component = unit[0] if axis == "x" else unit[1]
        return p["gain"] * (threshold - d) * component, row
    if task.kind == "singularity-avoidance":
        j = _joint_index(p, n)
        row = _unit_row(n, j)
        point = p["point"]
        dims = tuple(p.get("axes", ("x", "y", "yaw")))
        h = FD_STEP
        qp, qm = q.copy(), q.copy()
        qp[j] += h
        qm[j] -= h
        grad = (kinematics.manipulability(chain, qp, point, dims)
                - kinematics.manipulability(chain, qm, point, dims)) / (2.0 * h)
        return p["gain"] * grad, row
    raise ValueError(f"unknown subtask kind {task.kind!r}")


def aux_metric(task: ElementarySubtask, chain, q, obstacles=None):
    """Named diagnostic metric for one elementary subtask.

    Returns (column_name, value): clearance distance in m, signed distance to
    the nearest joint limit in rad, manipulability, or setpoint error in rad.
    """
    q = np.asarray(q, dtype=float)
    p = task.params
    if task.kind == "obstacle-clearance":
        pos = kinematics.point_pose(chain, q, p["point"])[:2]
        d = float(np.hypot(*(pos - np.asarray(obstacles[p["obstacle"]], dtype=float))))
        return f"aux_clearance_i{task.id}", d
    if task.kind == "joint-limit":
        j = _joint_index(p, chain.n)
        dist = min(q[j] - p["min"], p["max"] - q[j])
        return f"aux_margin_i{task.id}", float(dist)
    if task.kind == "singularity-avoidance":
        dims = tuple(p.get("axes", ("x", "y", "yaw")))
        w = kinematics.manipulability(chain, q, p["point"], dims)
        return f"aux_manip_i{task.id}", w
    j = _joint_index(p, chain.n)
    return f"aux_seterr_i{task.id}", float(abs(p["target"] - q[j]))


@dataclass(frozen=True)
class SubtaskStack:
    """Stacked desired velocities (length l) and Jacobian rows (l x n)."""

    velocities: np.ndarray
    jacobian: np.ndarray

    @property
    def l(self) -> int:
        return self.velocities.shape[0]


def stack(tasks, chain, q, obstacles=None) -> SubtaskStack:
    """Evaluate all elementary subtasks and stack them in id order."""
    tasks = sorted(tasks, key=lambda t: t.id)
    if not tasks:
        raise ValueError("no subtasks to stack")
    xs = np.zeros(len(tasks))
    J = np.zeros((len(tasks), chain.n))
    for i, task in enumerate(tasks):
        xs[i], J[i] = evaluate(task, chain, q, obstacles)
    return SubtaskStack(velocities=xs, jacobian=J)


def task_status(xdot: float, slope: float = STATUS_SLOPE, span: float = STATUS_RANGE) -> float:
    """Activity status in (0, 1): a symmetric logistic window on |velocity|.

    Saturates toward 1 once |xdot| clears the dead span; at xdot = 0 it
    equals 2 / (1 + e^(slope * span)), treated as idle.
    """
    return float(expit(-slope * (span + xdot)) + expit(-slope * (span - xdot)))


def statuses(tasks, velocities) -> np.ndarray:
    """Vector of per-subtask statuses for stacked velocities."""
    return np.array([task_status(v, t.slope, t.span)
                     for t, v in zip(tasks, velocities)])


def _joint_index(params, n) -> int:
    j = params["joint"]
    if not 0 <= j < n:
        raise ValueError(f"joint index {j} out of range for {n} joints")
    return int(j)


def _unit_row(n, j) -> np.ndarray:
    row = np.zeros(n)
    row[j] = 1.0
    return row
