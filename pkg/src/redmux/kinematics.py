"""Planar chain kinematics: forward kinematics, Jacobians, pseudoinverses.

Chains are serial and planar.  Each degree of freedom is one of:

* ``revolute``  -- rotate the frame by q, then advance ``length`` along the
  rotated x axis (a rigid link).
* ``prismatic`` -- translate q along the frame's local ``axis`` (x or y).
* ``yaw``       -- rotate the frame by q with no link (used for the yaw of a
  mobile base).

A 3-DOF omnidirectional base is expressed as prismatic-x, prismatic-y, yaw
placed at the start of the chain.  Named points of interest sit at the frame
reached after a given number of degrees of freedom, plus an optional rigid
offset in that frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Relative cutoff under which a singular value counts as zero.
RANK_EPS = 1e-10

TASK_AXES = ("x", "y", "yaw")


@dataclass(frozen=True)
class Joint:
    kind: str                 # "revolute" | "prismatic" | "yaw"
    length: float = 0.0       # link length, revolute only
    axis: str = "x"           # translation axis, prismatic only


@dataclass(frozen=True)
class PointOfInterest:
    after: int                        # number of DOFs applied before the point
    offset: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class KinematicChain:
    """A planar serial chain with named points of interest."""

    joints: tuple[Joint, ...]
    points: dict[str, PointOfInterest] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.joints) < 1:
            raise ValueError("chain needs at least one joint")
        for j in self.joints:
            if j.kind not in ("revolute", "prismatic", "yaw"):
                raise ValueError(f"unknown joint kind {j.kind!r}")
            if j.kind == "revolute":
                if not np.isfinite(j.length) or j.length <= 0.0:
                    raise ValueError("revolute link length must be positive")
            if j.kind == "prismatic" and j.axis not in ("x", "y"):
                raise ValueError(f"prismatic axis must be x or y, got {j.axis!r}")
        for name, poi in self.points.items():
            if not 0 <= poi.after <= self.n:
                raise ValueError(f"point {name!r} sits after DOF {poi.after}, chain has {self.n}")

    @property
    def n(self) -> int:
        return len(self.joints)

    def point(self, name: str) -> PointOfInterest:
        if name not in self.points:
            raise KeyError(f"unknown point of interest {name!r}")
        return self.points[name]


def frames(chain: KinematicChain, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions and headings of every intermediate frame.

    Returns (origins, headings) with n+1 entries each; entry k is the frame
    after applying the first k degrees of freedom.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.n,):
        raise ValueError(f"expected {chain.n} joint values, got shape {q.shape}")
    origins = np.zeros((chain.n + 1, 2))
    headings = np.zeros(chain.n + 1)
    x, y, th = 0.0, 0.0, 0.0
    for k, joint in enumerate(chain.joints):
        if joint.kind == "revolute":
            th += q[k]
            x += joint.length * np.cos(th)
            y += joint.length * np.sin(th)
        elif joint.kind == "yaw":
            th += q[k]
        else:  # prismatic
            if joint.axis == "x":
                x += q[k] * np.cos(th)
                y += q[k] * np.sin(th)
            else:
                x += -q[k] * np.sin(th)
                y += q[k] * np.cos(th)
        origins[k + 1] = (x, y)
        headings[k + 1] = th
    return origins, headings


def point_pose(chain: KinematicChain, q: np.ndarray, point: str) -> np.ndarray:
    """Pose (x, y, yaw) of a named point of interest."""
    poi = chain.point(point)
    origins, headings = frames(chain, q)
    th = headings[poi.after]
    ox, oy = poi.offset
    c, s = np.cos(th), np.sin(th)
    px = origins[poi.after, 0] + c * ox - s * oy
    py = origins[poi.after, 1] + s * ox + c * oy
    return np.array([px, py, th])


def forward_kinematics(chain, q, point: str, dims=("x", "y")) -> np.ndarray:
    """Selected task coordinates of a named point."""
    pose = point_pose(chain, q, point)
    return pose[[TASK_AXES.index(d) for d in dims]]


def jacobian(chain, q, point: str, dims=("x", "y")) -> np.ndarray:
    """Analytic task Jacobian of a named point, rows selected by ``dims``."""
    poi = chain.point(point)
    origins, headings = frames(chain, q)
    pose = point_pose(chain, q, point)
    px, py = pose[0], pose[1]
    full = np.zeros((3, chain.n))
    for k, joint in enumerate(chain.joints):
        if k >= poi.after:
            break
        if joint.kind in ("revolute", "yaw"):
            # rotation center is the frame before this DOF
            cx, cy = origins[k]
            full[0, k] = -(py - cy)
            full[1, k] = px - cx
            full[2, k] = 1.0
        else:
            th = headings[k]
            if joint.axis == "x":
                full[0, k], full[1, k] = np.cos(th), np.sin(th)
            else:
                full[0, k], full[1, k] = -np.sin(th), np.cos(th)
    return full[[TASK_AXES.index(d) for d in dims]]


def pseudoinverse(J: np.ndarray, damping: float = 0.0) -> np.ndarray:
    """Moore-Penrose pseudoinverse, or the damped inverse when damping > 0.

    With damping = 0 singular values below RANK_EPS times the largest are
    treated as zero.  With damping > 0 returns J^T (J J^T + damping^2 I)^-1,
    whose gain is bounded by 1 / (2 damping).
    """
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if damping < 0.0:
        raise ValueError("damping must be >= 0")
    if damping == 0.0:
        return np.linalg.pinv(J, rcond=RANK_EPS)
    m = J.shape[0]
    gram = J @ J.T + damping ** 2 * np.eye(m)
    return np.linalg.solve(gram, J).T


def effective_rank(J: np.ndarray) -> int:
    """Number of singular values above RANK_EPS times the largest."""
    s = np.linalg.svd(np.atleast_2d(J), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_EPS * s[0]))


def null_projector(J: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the null space of J (symmetric, idempotent)."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    n = J.shape[1]
    return np.eye(n) - pseudoinverse(J) @ J


def manipulability(chain, q, point: str, dims=("x", "y", "yaw")) -> float:
    """Yoshikawa measure sqrt(det(J J^T)) for a named point's task Jacobian."""
    J = jacobian(chain, q, point, dims)
    det = np.linalg.det(J @ J.T)
    return float(np.sqrt(max(det, 0.0)))
