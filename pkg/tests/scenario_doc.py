"""Scenario document factory shared by the simulator and CLI tests."""

import numpy as np

from redmux import kinematics as K

LINK_LENGTHS = (1.0, 0.8, 0.6, 0.4)
Q0 = (0.3, 0.4, -0.2, 0.1)


def _ee_position():
    ch = K.KinematicChain(
        joints=tuple(K.Joint("revolute", L) for L in LINK_LENGTHS),
        points={"ee": K.PointOfInterest(after=len(LINK_LENGTHS))})
    pose = K.point_pose(ch, np.array(Q0), "ee")
    return [float(pose[0]), float(pose[1])]


def make_quiet_doc(mode="merged", duration=0.5, step=0.01):
    """Stationary 4R scenario: reference pinned at the start pose, every
    subtask already at its goal.  Nothing moves, no allocation shifts."""
    p = _ee_position()
    return {
        "chain": {
            "joints": [{"type": "revolute", "length": L} for L in LINK_LENGTHS],
            "q0": list(Q0),
        },
        "primary": {
            "targets": [{"point": "ee", "axes": ["x", "y"],
                         "path": {"kind": "line", "from": p, "to": p}}],
        },
        "subtasks": [
            {"name": "hold", "kind": "joint-setpoint", "gain": 1.0,
             "components": [{"joint": 0, "target": Q0[0]},
                            {"joint": 1, "target": Q0[1]},
                            {"joint": 2, "target": Q0[2]}]},
        ],
        "mode": mode,
        "sim": {"duration": duration, "step": step},
    }
