"""Scenario-driven batch simulation with a stable CSV log contract.

A scenario is a JSON document with exactly these top-level keys:

    chain      joints, initial configuration, named points of interest
    primary    tracked frames (point, axes, reference trajectories), gain
    subtasks   multi-dimensional subtask specs, unitized in listing order
    merging    gamma, update interval dt, damping lambda, rate, status defaults
    mode       "merged" or "traditional"
    obstacles  named point obstacles on piecewise-linear time scripts
    sim        duration and integration step (explicit Euler)
    output     CSV path for the run log

Unknown keys anywhere are errors.  ``merging``, ``obstacles`` and ``output``
may be omitted.

The run log is a CSV with one record per control step on a uniform time
grid (duration / step + 1 records) and a fixed column order:

    t,
    q_0 .. q_{n-1},
    err_0 .. err_{m-1}          primary reference minus actual, row order
                                follows the primary targets,
    xs_0 .. xs_{l-1}            desired subtask velocities,
    fbar_0 .. fbar_{l-1}        subtask activity statuses,
    A_00 .. A_{r-1}{l-1}        allocation matrix, row-major,
    aux_*                       named per-subtask metrics (clearance in m,
                                limit margin in rad, manipulability,
                                setpoint error in rad; one per elementary
                                subtask, in id order) followed by primary
                                reference/actual pairs per target and axis
                                (aux_ref<k>_<axis>, aux_act<k>_<axis>),
    qd_0 .. qd_{n-1}.

Floats are written with 17 significant digits, so identical configs produce
bit-identical files.  The log is flushed record by record; a run that aborts
on a non-finite velocity leaves the partial log behind.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import control, merging, subtasks
from .kinematics import Joint, KinematicChain, PointOfInterest, jacobian, point_pose

FEEDBACK_GAIN = 5.0
DAMPING = 1e-4
RATE = 1.0
GAMMA = 0.9

_MODES = ("merged", "traditional")
_AXES = ("x", "y", "yaw")


class ScenarioError(Exception):
    """Structural or semantic scenario problem; carries all diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class SimulationAbort(RuntimeError):
    """Raised when a step produces a non-finite joint velocity."""

    def __init__(self, message, series):
        self.series = series
        super().__init__(message)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str

    def __str__(self):
        return f"{self.severity}: {self.message}"


@dataclass(frozen=True)
class PrimaryTarget:
    point: str
    axes: tuple[str, ...]
    refs: dict  # axis -> (pos(t), vel(t))


@dataclass(frozen=True)
class Obstacle:
    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray

    def position(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.xs),
                         np.interp(t, self.times, self.ys)])


@dataclass
class ScenarioConfig:
    name: str
    chain: KinematicChain
    q0: np.ndarray
    targets: list[PrimaryTarget]
    feedback_gain: float
    specs: list[subtasks.SubtaskSpec]
    tasks: list[subtasks.ElementarySubtask]
    gamma: float
    merge_dt: float
    damping: float
    rate: float
    mode: str
    obstacles: dict[str, Obstacle]
    duration: float
    step: float
    output: str

    @property
    def n(self) -> int:
        return self.chain.n

    @property
    def m(self) -> int:
        return sum(len(t.axes) for t in self.targets)

    @property
    def l(self) -> int:
        return len(self.tasks)

    @property
    def r(self) -> int:
        return self.n - self.m


@dataclass
class LogSeries:
    columns: list[str]
    rows: np.ndarray
    meta: dict = field(default_factory=dict)

    def col(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def cols(self, prefix: str) -> np.ndarray:
        idx = [i for i, c in enumerate(self.columns) if c.startswith(prefix)]
        return self.rows[:, idx]


# ---------------------------------------------------------------------------
# parsing

def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _keys(obj, where, required, optional, errors):
    if not isinstance(obj, dict):
        errors.append(f"{where}: expected an object")
        return False
    for k in obj:
        if k not in required and k not in optional:
            errors.append(f"{where}: unknown key {k!r}")
    ok = True
    for k in required:
        if k not in obj:
            errors.append(f"{where}: missing key {k!r}")
            ok = False
    return ok


def _pair(v) -> bool:
    return isinstance(v, list) and len(v) == 2 and all(_num(u) for u in v)


def _scan(doc) -> list[str]:
    """Full structural scan: key spelling, types, enumerations."""
    errors: list[str] = []
    if not _keys(doc, "scenario", ("chain", "primary", "subtasks", "mode", "sim"),
                 ("merging", "obstacles", "output"), errors):
        return errors

    chain = doc["chain"]
    if _keys(chain, "chain", ("joints", "q0"), ("points",), errors):
        joints = chain["joints"]
        if not isinstance(joints, list) or not joints:
            errors.append("chain.joints: expected a non-empty list")
        else:
            for i, j in enumerate(joints):
                where = f"chain.joints[{i}]"
                if not isinstance(j, dict) or "type" not in j:
                    errors.append(f"{where}: expected an object with a 'type'")
                    continue
                t = j.get("type")
                if t == "base":
                    _keys(j, where, ("type",), (), errors)
                elif t == "revolute":
                    if _keys(j, where, ("type", "length"), (), errors):
                        if not _num(j["length"]) or j["length"] <= 0:
                            errors.append(f"{where}: length must be a positive number")
                elif t == "prismatic":
                    if _keys(j, where, ("type", "axis"), (), errors):
                        if j["axis"] not in ("x", "y"):
                            errors.append(f"{where}: axis must be 'x' or 'y'")
                else:
                    errors.append(f"{where}: unknown joint type {t!r}")
        if not (isinstance(chain.get("q0"), list) and all(_num(v) for v in chain["q0"])):
            errors.append("chain.q0: expected a list of numbers")
        pts = chain.get("points", {})
        if not isinstance(pts, dict):
            errors.append("chain.points: expected an object")
            pts = {}
        for name, p in pts.items():
            where = f"chain.points.{name}"
            if _keys(p, where, ("after",), ("offset",), errors):
                if not isinstance(p["after"], int) or isinstance(p["after"], bool) or p["after"] < 0:
                    errors.append(f"{where}: 'after' must be a non-negative integer")
                if "offset" in p and not _pair(p["offset"]):
                    errors.append(f"{where}: offset must be [x, y]")

    primary = doc["primary"]
    if _keys(primary, "primary", ("targets",), ("feedback_gain",), errors):
        if "feedback_gain" in primary and not _num(primary["feedback_gain"]):
            errors.append("primary.feedback_gain: expected a number")
        targets = primary["targets"]
        if not isinstance(targets, list) or not targets:
            errors.append("primary.targets: expected a non-empty list")
        else:
            for k, t in enumerate(targets):
                _scan_target(t, f"primary.targets[{k}]", errors)

    sub = doc["subtasks"]
    if not isinstance(sub, list) or not sub:
        errors.append("subtasks: expected a non-empty list")
    else:
        for k, s in enumerate(sub):
            _scan_subtask(s, f"subtasks[{k}]", errors)

    if doc["mode"] not in _MODES:
        errors.append(f"mode: must be one of {_MODES}, got {doc['mode']!r}")

    if _keys(doc["sim"], "sim", ("duration", "step"), (), errors):
        for k in ("duration", "step"):
            if not _num(doc["sim"][k]) or doc["sim"][k] <= 0:
                errors.append(f"sim.{k}: must be a positive number")

    if "merging" in doc and _keys(doc["merging"], "merging", (),
                                  ("gamma", "dt", "lambda", "rate", "status"), errors):
        mg = doc["merging"]
        for k in ("gamma", "dt", "lambda", "rate"):
            if k in mg and not _num(mg[k]):
                errors.append(f"merging.{k}: expected a number")
        if "status" in mg:
            _scan_status(mg["status"], "merging.status", errors)

    obstacles = doc.get("obstacles", {})
    if not isinstance(obstacles, dict):
        errors.append("obstacles: expected an object")
        obstacles = {}
    for name, ob in obstacles.items():
        where = f"obstacles.{name}"
        if _keys(ob, where, ("waypoints",), (), errors):
            wps = ob["waypoints"]
            good = (isinstance(wps, list) and wps
                    and all(isinstance(w, list) and len(w) == 3 and all(_num(v) for v in w)
                            for w in wps))
            if not good:
                errors.append(f"{where}.waypoints: expected rows of [t, x, y]")
            elif any(b[0] <= a[0] for a, b in zip(wps, wps[1:])):
                errors.append(f"{where}.waypoints: times must be strictly increasing")

    if "output" in doc and not isinstance(doc["output"], str):
        errors.append("output: expected a string path")
    return errors


def _scan_target(t, where, errors):
    if not _keys(t, where, ("point", "axes"), ("path", "yaw"), errors):
        return
    axes = t["axes"]
    if (not isinstance(axes, list) or not axes or len(set(axes)) != len(axes)
            or any(a not in _AXES for a in axes)):
        errors.append(f"{where}.axes: expected a subset of {_AXES}")
        return
    positional = any(a in ("x", "y") for a in axes)
    if positional != ("path" in t):
        errors.append(f"{where}: 'path' is required exactly when x or y axes are tracked")
    if ("yaw" in axes) != ("yaw" in t):
        errors.append(f"{where}: 'yaw' reference is required exactly when the yaw axis is tracked")
    if "path" in t and isinstance(t["path"], dict):
        p = t["path"]
        kind = p.get("kind")
        if kind == "line":
            if _keys(p, f"{where}.path", ("kind", "from", "to"), (), errors):
                if not (_pair(p["from"]) and _pair(p["to"])):
                    errors.append(f"{where}.path: 'from'/'to' must be [x, y]")
        elif kind == "circle":
            if _keys(p, f"{where}.path", ("kind", "center", "radius", "period"), ("phase",), errors):
                if not _pair(p["center"]) or not _num(p["radius"]) or not _num(p["period"]):
                    errors.append(f"{where}.path: bad circle parameters")
                elif p["radius"] <= 0 or p["period"] <= 0:
                    errors.append(f"{where}.path: radius and period must be positive")
        elif kind == "waypoints":
            if _keys(p, f"{where}.path", ("kind", "points"), (), errors):
                pts = p["points"]
                good = (isinstance(pts, list) and len(pts) >= 2
                        and all(isinstance(w, list) and len(w) == 3 and all(_num(v) for v in w)
                                for w in pts))
                if not good:
                    errors.append(f"{where}.path.points: expected at least two [t, x, y] rows")
                elif any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
                    errors.append(f"{where}.path.points: times must be strictly increasing")
        else:
            errors.append(f"{where}.path: unknown kind {kind!r}")
    if "yaw" in t and isinstance(t["yaw"], dict):
        y = t["yaw"]
        kind = y.get("kind")
        if kind == "const":
            if _keys(y, f"{where}.yaw", ("kind", "value"), (), errors) and not _num(y["value"]):
                errors.append(f"{where}.yaw: value must be a number")
        elif kind == "line":
            if _keys(y, f"{where}.yaw", ("kind", "from", "to"), (), errors):
                if not (_num(y["from"]) and _num(y["to"])):
                    errors.append(f"{where}.yaw: 'from'/'to' must be numbers")
        else:
            errors.append(f"{where}.yaw: unknown kind {kind!r}")


def _scan_subtask(s, where, errors):
    if not isinstance(s, dict) or "kind" not in s:
        errors.append(f"{where}: expected an object with a 'kind'")
        return
    kind = s["kind"]
    common_opt = ("gain", "status")
    if kind == "joint-setpoint":
        ok = _keys(s, where, ("name", "kind", "components"), common_opt, errors)
        comp_req, comp_opt = ("joint", "target"), ()
    elif kind == "joint-limit":
        ok = _keys(s, where, ("name", "kind", "components"), common_opt + ("margin",), errors)
        comp_req, comp_opt = ("joint", "min", "max"), ()
    elif kind == "obstacle-clearance":
        ok = _keys(s, where, ("name", "kind", "components", "obstacle"),
                   common_opt + ("threshold",), errors)
        comp_req, comp_opt = ("point", "axis"), ()
    elif kind == "singularity-avoidance":
        ok = _keys(s, where, ("name", "kind", "components", "point"),
                   common_opt + ("axes",), errors)
        comp_req, comp_opt = ("joint",), ()
    else:
        errors.append(f"{where}: unknown subtask kind {kind!r}")
        return
    if not ok:
        return
    if "gain" in s and not _num(s["gain"]):
        errors.append(f"{where}.gain: expected a number")
    if "status" in s:
        _scan_status(s["status"], f"{where}.status", errors)
    comps = s["components"]
    if not isinstance(comps, list) or not comps:
        errors.append(f"{where}.components: expected a non-empty list")
        return
    for i, c in enumerate(comps):
        _keys(c, f"{where}.components[{i}]", comp_req, comp_opt, errors)


def _scan_status(st, where, errors):
    if _keys(st, where, (), ("slope", "range"), errors):
        for k in ("slope", "range"):
            if k in st and (not _num(st[k]) or st[k] <= 0):
                errors.append(f"{where}.{k}: must be a positive number")


def _build_chain(chain_doc) -> KinematicChain:
    joints: list[Joint] = []
    for j in chain_doc["joints"]:
        if j["type"] == "base":
            joints += [Joint("prismatic", axis="x"), Joint("prismatic", axis="y"), Joint("yaw")]
        elif j["type"] == "revolute":
            joints.append(Joint("revolute", length=float(j["length"])))
        else:
            joints.append(Joint("prismatic", axis=j["axis"]))
    points = {}
    for name, p in (chain_doc.get("points") or {}).items():
        off = tuple(p.get("offset", (0.0, 0.0)))
        points[name] = PointOfInterest(after=int(p["after"]), offset=off)
    points.setdefault("ee", PointOfInterest(after=len(joints)))
    return KinematicChain(joints=tuple(joints), points=points)


def _make_path(p, duration):
    """(pos(t), vel(t)) callables for the 2-D position reference."""
    if p["kind"] == "line":
        a = np.asarray(p["from"], float)
        b = np.asarray(p["to"], float)
        v = (b - a) / duration

        def pos(t, a=a, v=v, T=duration):
            return a + v * min(max(t, 0.0), T)

        return pos, lambda t, v=v, T=duration: v if 0.0 <= t <= T else np.zeros(2)
    if p["kind"] == "circle":
        c = np.asarray(p["center"], float)
        rad, om = float(p["radius"]), 2.0 * math.pi / float(p["period"])
        ph = float(p.get("phase", 0.0))

        def pos(t, c=c, rad=rad, om=om, ph=ph):
            a = om * t + ph
            return c + rad * np.array([math.cos(a), math.sin(a)])

        def vel(t, rad=rad, om=om, ph=ph):
            a = om * t + ph
            return rad * om * np.array([-math.sin(a), math.cos(a)])

        return pos, vel
    pts = np.asarray(p["points"], float)
    spline = CubicSpline(pts[:, 0], pts[:, 1:], axis=0)
    t0, t1 = pts[0, 0], pts[-1, 0]
    dspline = spline.derivative()

    def pos(t, spline=spline, t0=t0, t1=t1):
        return np.asarray(spline(min(max(t, t0), t1)))

    def vel(t, d=dspline, t0=t0, t1=t1):
        return np.asarray(d(t)) if t0 <= t <= t1 else np.zeros(2)

    return pos, vel


def _make_yaw(y, duration):
    if y["kind"] == "const":
        v = float(y["value"])
        return (lambda t, v=v: v), (lambda t: 0.0)
    a, b = float(y["from"]), float(y["to"])
    rate = (b - a) / duration

    def pos(t, a=a, rate=rate, T=duration):
        return a + rate * min(max(t, 0.0), T)

    return pos, lambda t, rate=rate, T=duration: rate if 0.0 <= t <= T else 0.0


def _build(doc, name) -> ScenarioConfig:
    chain = _build_chain(doc["chain"])
    q0 = np.asarray(doc["chain"]["q0"], float)
    if q0.shape != (chain.n,):
        raise ScenarioError([f"chain.q0: expected {chain.n} values (base joints count as 3), got {q0.size}"])

    duration = float(doc["sim"]["duration"])
    step = float(doc["sim"]["step"])

    targets = []
    for t in doc["primary"]["targets"]:
        axes = tuple(a for a in _AXES if a in t["axes"])
        refs = {}
        if "path" in t:
            pos, vel = _make_path(t["path"], duration)
            refs["x"] = (lambda t_, p=pos: float(p(t_)[0]), lambda t_, v=vel: float(v(t_)[0]))
            refs["y"] = (lambda t_, p=pos: float(p(t_)[1]), lambda t_, v=vel: float(v(t_)[1]))
        if "yaw" in t:
            refs["yaw"] = _make_yaw(t["yaw"], duration)
        targets.append(PrimaryTarget(point=t["point"], axes=axes, refs=refs))

    mg = doc.get("merging") or {}
    status = mg.get("status") or {}
    default_slope = float(status.get("slope", subtasks.STATUS_SLOPE))
    default_span = float(status.get("range", subtasks.STATUS_RANGE))

    specs = []
    for s in doc["subtasks"]:
        st = s.get("status") or {}
        params = {"gain": float(s.get("gain", subtasks.GAIN))}
        if s["kind"] == "joint-limit":
            params["margin"] = float(s.get("margin", subtasks.LIMIT_MARGIN))
        if s["kind"] == "obstacle-clearance":
            params["obstacle"] = s["obstacle"]
            params["threshold"] = float(s.get("threshold", subtasks.CLEARANCE_THRESHOLD))
        if s["kind"] == "singularity-avoidance":
            params["point"] = s["point"]
            params["axes"] = tuple(s.get("axes", _AXES))
        specs.append(subtasks.SubtaskSpec(
            name=s["name"], kind=s["kind"],
            components=tuple(dict(c) for c in s["components"]), params=params,
            slope=float(st.get("slope", default_slope)),
            span=float(st.get("range", default_span))))
    tasks = subtasks.unitize(specs)

    obstacles = {}
    for oname, ob in (doc.get("obstacles") or {}).items():
        wps = np.asarray(ob["waypoints"], float)
        obstacles[oname] = Obstacle(times=wps[:, 0], xs=wps[:, 1], ys=wps[:, 2])

    gamma = float(mg.get("gamma", GAMMA))
    if not merging.GAMMA_MIN <= gamma <= merging.GAMMA_MAX:
        raise ScenarioError([f"merging.gamma: must be in [{merging.GAMMA_MIN}, {merging.GAMMA_MAX}]"])

    return ScenarioConfig(
        name=name, chain=chain, q0=q0, targets=targets,
        feedback_gain=float(doc["primary"].get("feedback_gain", FEEDBACK_GAIN)),
        specs=specs, tasks=tasks, gamma=gamma,
        merge_dt=float(mg.get("dt", step)), damping=float(mg.get("lambda", DAMPING)),
        rate=float(mg.get("rate", RATE)), mode=doc["mode"], obstacles=obstacles,
        duration=duration, step=step,
        output=doc.get("output", f"{name}_{doc['mode']}.csv"))


def parse_scenario(doc, name="scenario") -> ScenarioConfig:
    """Build a config from a JSON document; raises ScenarioError when broken."""
    errors = _scan(doc)
    if errors:
        raise ScenarioError(errors)
    return _build(doc, name)


def load_scenario(path) -> ScenarioConfig:
    """Load a scenario file.  IO and JSON errors propagate as-is."""
    import pathlib

    p = pathlib.Path(path)
    with open(p) as fh:
        doc = json.load(fh)
    return parse_scenario(doc, name=p.stem)


# ---------------------------------------------------------------------------
# validation

def _reach(chain: KinematicChain, poi: PointOfInterest) -> float | None:
    """Largest base distance the point can reach, None when unbounded."""
    total = 0.0
    for j in chain.joints[:poi.after]:
        if j.kind == "prismatic":
            return None
        total += j.length
    return total + float(np.hypot(*poi.offset))


def validate(config: ScenarioConfig) -> list[Diagnostic]:
    """Semantic checks; the config is runnable iff no error diagnostics."""
    out: list[Diagnostic] = []

    for t in config.targets:
        if t.point not in config.chain.points:
            out.append(Diagnostic("error", f"primary target references unknown point {t.point!r}"))
    for task in config.tasks:
        p = task.params
        if task.kind == "obstacle-clearance":
            if p["obstacle"] not in config.obstacles:
                out.append(Diagnostic("error", f"subtask {task.parent!r} references unknown obstacle {p['obstacle']!r}"))
            if p["point"] not in config.chain.points:
                out.append(Diagnostic("error", f"subtask {task.parent!r} references unknown point {p['point']!r}"))
        if task.kind == "singularity-avoidance" and p["point"] not in config.chain.points:
            out.append(Diagnostic("error", f"subtask {task.parent!r} references unknown point {p['point']!r}"))
        if task.kind in ("joint-setpoint", "joint-limit", "singularity-avoidance"):
            if not 0 <= p["joint"] < config.n:
                out.append(Diagnostic("error", f"subtask {task.parent!r} joint index {p['joint']} out of range"))
        if task.kind == "joint-limit" and p["min"] >= p["max"]:
            out.append(Diagnostic("error", f"subtask {task.parent!r} has min >= max"))

    m, n, l = config.m, config.n, config.l
    r = n - m
    if r < 1:
        out.append(Diagnostic("error", f"no redundancy: {n} joints for {m} primary rows"))
    elif l < r:
        out.append(Diagnostic("error", f"cannot allocate {r} redundancies over {l} subtasks"))
    elif l == r:
        out.append(Diagnostic("warning", "insufficiency regime not exercised (subtasks == redundancies)"))

    if config.duration < config.step:
        out.append(Diagnostic("error", "sim.duration is shorter than sim.step"))

    # FK sweep: fixed-base targets must keep their references within reach
    samples = np.linspace(0.0, config.duration, 101)
    for t in config.targets:
        if "x" not in t.axes and "y" not in t.axes:
            continue
        if t.point not in config.chain.points:
            continue
        reach = _reach(config.chain, config.chain.points[t.point])
        if reach is None:
            continue
        for tt in samples:
            px, py = t.refs["x"][0](tt), t.refs["y"][0](tt)
            dist = math.hypot(px, py)
            if dist > reach + 1e-9:
                out.append(Diagnostic(
                    "error",
                    f"primary target {t.point!r}: reference at t={tt:.2f} is "
                    f"{dist:.3f} m from the base, beyond reach {reach:.3f} m"))
                break
    return out


# ---------------------------------------------------------------------------
# rollout

def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def _columns(config: ScenarioConfig) -> list[str]:
    n, m, l, r = config.n, config.m, config.l, config.r
    cols = ["t"]
    cols += [f"q_{i}" for i in range(n)]
    cols += [f"err_{i}" for i in range(m)]
    cols += [f"xs_{i}" for i in range(l)]
    cols += [f"fbar_{i}" for i in range(l)]
    if r <= 10 and l <= 10:
        cols += [f"A_{i}{j}" for i in range(r) for j in range(l)]
    else:
        cols += [f"A_{i}_{j}" for i in range(r) for j in range(l)]
    dummy_obs = {name: ob.position(0.0) for name, ob in config.obstacles.items()}
    for task in config.tasks:
        name, _ = subtasks.aux_metric(task, config.chain, config.q0, dummy_obs)
        cols.append(name)
    for k, t in enumerate(config.targets):
        for axis in t.axes:
            cols += [f"aux_ref{k}_{axis}", f"aux_act{k}_{axis}"]
    cols += [f"qd_{i}" for i in range(n)]
    return cols


def _primary(config: ScenarioConfig, q: np.ndarray, t: float):
    """Stacked primary Jacobian, commanded velocity, and tracking error."""
    rows_J, x1d, err, refs, acts = [], [], [], [], []
    for tgt in config.targets:
        pose = point_pose(config.chain, q, tgt.point)
        J = jacobian(config.chain, q, tgt.point, dims=tgt.axes)
        rows_J.append(J)
        for idx, axis in enumerate(tgt.axes):
            ref_pos, ref_vel = tgt.refs[axis]
            rp, rv = ref_pos(t), ref_vel(t)
            actual = pose[_AXES.index(axis)]
            e = _wrap(rp - actual) if axis == "yaw" else rp - actual
            err.append(e)
            x1d.append(rv + config.feedback_gain * e)
            refs.append(rp)
            acts.append(actual)
    return np.vstack(rows_J), np.array(x1d), np.array(err), refs, acts


def _init_state(config: ScenarioConfig) -> merging.MergingState:
    r, l = config.r, config.l
    if r < l:
        return merging.init_merging(r, l, config.gamma, dt=config.merge_dt, rate=config.rate)
    # square allocation: runnable, but nothing competes (validated as a warning)
    A = np.zeros((r, l))
    A[:, :l] = config.gamma * np.eye(l)[:r]
    return merging.MergingState(A=A, gamma=config.gamma, dt=config.merge_dt, rate=config.rate)


def run(config: ScenarioConfig, csv_path=None, write_csv: bool = True) -> LogSeries:
    """Roll the scenario out and return (and optionally write) its log."""
    problems = [d for d in validate(config) if d.severity == "error"]
    if problems:
        raise ScenarioError([d.message for d in problems])

    columns = _columns(config)
    meta = {"name": config.name, "mode": config.mode, "n": config.n, "m": config.m,
            "l": config.l, "r": config.r, "gamma": config.gamma,
            "target_axes": [list(t.axes) for t in config.targets]}
    steps = int(round(config.duration / config.step))
    every = max(1, int(round(config.merge_dt / config.step)))
    q = config.q0.copy()
    state = _init_state(config)
    kp = config.feedback_gain

    fh = None
    if write_csv:
        path = csv_path if csv_path is not None else config.output
        fh = open(path, "w")
        fh.write(",".join(columns) + "\n")

    records = []

    def emit(row):
        records.append(row)
        if fh is not None:
            fh.write(",".join("%.17g" % v for v in row) + "\n")
            fh.flush()

    try:
        for k in range(steps + 1):
            t = k * config.step
            obs = {name: ob.position(t) for name, ob in config.obstacles.items()}
            stack = subtasks.stack(config.tasks, config.chain, q, obs)
            fbar = subtasks.statuses(config.tasks, stack.velocities)
            J1, x1d, err, refs, acts = _primary(config, q, t)

            if config.mode == "merged" and k % every == 0:
                P = merging.soft_priority(state)
                rates = merging.wta_rate(P, fbar, state)
                state = merging.step_merging(state, rates)

            frame = control.ControlFrame(
                q=q, J1=J1, x1d=x1d, J_sub=stack.jacobian, xs=stack.velocities,
                state=state, damping=config.damping)
            qd = control.resolve_merged(frame)

            row = [t, *q, *err, *stack.velocities, *fbar, *state.A.ravel()]
            for task in config.tasks:
                row.append(subtasks.aux_metric(task, config.chain, q, obs)[1])
            for rp, ap in zip(refs, acts):
                row += [rp, ap]
            row += list(qd)
            emit(row)

            if not np.all(np.isfinite(qd)):
                series = LogSeries(columns=columns, rows=np.array(records), meta=meta)
                raise SimulationAbort(f"non-finite joint velocity at t={t:.3f}", series)
            if k < steps:
                q = q + qd * config.step
    finally:
        if fh is not None:
            fh.close()

    return LogSeries(columns=columns, rows=np.array(records), meta=meta)
