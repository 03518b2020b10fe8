"""End-to-end acceptance gate.

One test per shipped guarantee, each printing a single PASS line with the
measured value next to its bound.  The scenario-based checks run the shipped
configs through the public entry points and re-derive every metric from the
logged series, never from simulator internals.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

import redmux
from redmux import control, kinematics, merging, sim
from redmux.control import ControlFrame, resolve_merged, resolve_two
from redmux.kinematics import (
    Joint,
    KinematicChain,
    PointOfInterest,
    jacobian,
    point_pose,
    pseudoinverse,
)
from redmux.merging import (
    MergingState,
    init_merging,
    secondary_task,
    soft_priority,
    step_merging,
    wta_rate,
)

SCENARIOS = Path(redmux.__file__).parent / "scenarios"

OBSTACLE_THRESHOLD = 0.5   # activation distance used by the drink scenario
WRIST_BAND = 0.5           # activation band used by the circle scenario


def _load(name, mode):
    doc = json.loads((SCENARIOS / name).read_text())
    doc["mode"] = mode
    return sim.parse_scenario(doc, name=name.removesuffix(".json"))


def _run(name, mode):
    config = _load(name, mode)
    t0 = time.perf_counter()
    log = sim.run(config, write_csv=False)
    wall = time.perf_counter() - t0
    return config, log, wall


@pytest.fixture(scope="module")
def drink_merged():
    return _run("drink_serving.json", "merged")


@pytest.fixture(scope="module")
def drink_traditional():
    return _run("drink_serving.json", "traditional")


@pytest.fixture(scope="module")
def circle_merged():
    return _run("circle.json", "merged")


@pytest.fixture(scope="module")
def circle_traditional():
    return _run("circle.json", "traditional")


def _joint_cols(log, prefix, n):
    return np.column_stack([log.col(f"{prefix}_{i}") for i in range(n)])


# ---------------------------------------------------------------------------
# null-space guarantee


def test_null_space_guarantee(drink_merged):
    """Merged corrections never leak into the primary task velocity."""
    config, log, wall = drink_merged
    assert config.damping == 0.0
    n = len(config.chain.joints)
    t = log.col("t")
    steps = len(t) - 1
    qs = _joint_cols(log, "q", n)
    qds = _joint_cols(log, "qd", n)
    worst = 0.0
    m = None
    for k in range(len(t)):
        J1, x1d = sim._primary(config, qs[k], t[k])[:2]
        m = J1.shape[0]
        assert kinematics.effective_rank(J1) == m  # away from singularities
        worst = max(worst, float(np.max(np.abs(J1 @ qds[k] - x1d))))
    assert steps >= 2000
    assert worst < 1e-8
    assert wall < 5.0
    print(
        f"PASS null-space guarantee: {steps} steps, max |J1 qd - x1d| "
        f"{worst:.3e} < 1e-8 at zero damping, wall {wall:.2f}s < 5s"
    )


# ---------------------------------------------------------------------------
# merging conservation


def test_merging_conservation(
    drink_merged, drink_traditional, circle_merged, circle_traditional
):
    """Every logged allocation row sums to gamma and stays inside [0, gamma]."""
    worst_sum = 0.0
    for config, log, _ in (
        drink_merged,
        drink_traditional,
        circle_merged,
        circle_traditional,
    ):
        gamma = config.gamma
        A = log.cols("A_")
        At = A.reshape(len(A), config.r, config.l)
        sums = At.sum(axis=2)
        worst_sum = max(worst_sum, float(np.max(np.abs(sums - gamma))))
        assert np.all(np.abs(sums - gamma) <= 1e-9)
        assert At.min() >= 0.0
        assert At.max() <= gamma + 1e-12
    print(
        f"PASS merging conservation: row sums within {worst_sum:.2e} of gamma "
        "(tol 1e-9), entries inside [0, gamma], all shipped runs"
    )


# ---------------------------------------------------------------------------
# randomized allocation properties


def _random_state(rng):
    r = int(rng.integers(1, 5))
    l = int(rng.integers(r + 1, 9))
    gamma = float(rng.uniform(0.5, 1.0))
    A = gamma * rng.dirichlet(np.ones(l) * rng.uniform(0.2, 2.0), size=r)
    if rng.random() < 0.3:
        i = int(rng.integers(r))
        A[i] = 0.0
        A[i, int(rng.integers(l))] = gamma
    return MergingState(A=A, gamma=gamma, dt=0.05, rate=10.0)


def _random_status(rng, l):
    # bimodal: some subtasks shouting, the rest at the idle floor
    active = rng.random(l) < 0.5
    return np.where(active, rng.uniform(0.5, 1.0, l), 0.01)


def test_wta_shape():
    """Rates: one winner per row, frozen when saturated, zero row sums."""
    rng = np.random.default_rng(20260816)
    worst_sum = 0.0
    for _ in range(1000):
        state = _random_state(rng)
        status = _random_status(rng, state.l)
        P = soft_priority(state)
        rates = wta_rate(P, status, state)
        assert np.all((rates > 0).sum(axis=1) <= 1)
        score = P * status[None, :]
        for i in range(state.r):
            w = int(np.argmax(score[i]))
            if state.A[i, w] >= state.gamma - 1e-9:
                assert np.all(rates[i] == 0.0)
        sums = np.abs(rates.sum(axis=1))
        worst_sum = max(worst_sum, float(sums.max()))
        assert np.all(sums <= 1e-12)
    print(
        "PASS winner-take-all shape: 1000 random states, <=1 positive rate "
        f"per row, saturated rows frozen, |row sum| <= {worst_sum:.2e} (tol 1e-12)"
    )


def test_redundancy_keeper():
    """A subtask already holding gamma somewhere is only ever drained elsewhere."""
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(1000):
        state = _random_state(rng)
        u = int(rng.integers(state.r))
        p = int(rng.integers(state.l))
        A = state.A.copy()
        A[u] = 0.0
        A[u, p] = state.gamma
        state = MergingState(A=A, gamma=state.gamma, dt=state.dt, rate=state.rate)
        status = _random_status(rng, state.l)
        rates = wta_rate(soft_priority(state), status, state)
        others = [i for i in range(state.r) if i != u]
        if others:
            assert np.all(rates[others, p] <= 1e-15)
            checked += 1
    print(
        f"PASS redundancy keeper: {checked} saturated instances, rates toward "
        "the saturated column are never positive at other rows"
    )


def test_convergence():
    """Frozen statuses drive the allocation to a stationary point."""
    rng = np.random.default_rng(20260816)
    worst_steps = 0
    for _ in range(1000):
        state = _random_state(rng)
        status = _random_status(rng, state.l)
        for k in range(10_000):
            rates = wta_rate(soft_priority(state), status, state)
            if float(np.max(np.abs(rates))) < 1e-12:
                break
            state = step_merging(state, rates)
        else:
            pytest.fail("allocation never became stationary within 10^4 steps")
        worst_steps = max(worst_steps, k)
    print(
        f"PASS convergence: 1000 random states reach max |dA/dt| < 1e-12, "
        f"worst case {worst_steps} steps (bound 10^4)"
    )


# ---------------------------------------------------------------------------
# reduction to classic two-priority control


def _well_conditioned(rng, rows, cols):
    M = rng.standard_normal((rows, cols))
    U, _, Vt = np.linalg.svd(M, full_matrices=False)
    return U @ np.diag(rng.uniform(0.5, 2.0, min(rows, cols))) @ Vt


def test_reduction_equivalence():
    """With the initial allocation, merging equals prefix two-priority control."""
    rng = np.random.default_rng(11)
    worst = 0.0
    count = 0
    while count < 100:
        n = int(rng.integers(4, 9))
        m = int(rng.integers(1, n - 2))
        r = n - m
        l = int(rng.integers(r + 1, r + 4))
        gamma = float(rng.uniform(0.5, 1.0))
        J1 = _well_conditioned(rng, m, n)
        J_sub = _well_conditioned(rng, l, n)
        state = init_merging(r, l, gamma, dt=0.01, rate=1.0)
        BN = (state.A @ J_sub / gamma) @ kinematics.null_projector(J1)
        ev = np.linalg.eigvalsh(BN @ BN.T)
        if ev[0] <= 0 or ev[-1] / ev[0] > 1e2:
            continue  # keep the inner solve exact for the comparison
        count += 1
        x1d = rng.standard_normal(m)
        xs = rng.standard_normal(l)
        frame = ControlFrame(
            q=np.zeros(n), J1=J1, x1d=x1d, J_sub=J_sub, xs=xs, state=state
        )
        qd_merged = resolve_merged(frame)
        qd_two = resolve_two(J1, x1d, J_sub[:r], xs[:r])
        err = float(np.max(np.abs(qd_merged - qd_two)))
        worst = max(worst, err)
        assert err <= 1e-9
    print(
        f"PASS reduction equivalence: 100 instances, max |qd difference| "
        f"{worst:.2e} <= 1e-9"
    )


# ---------------------------------------------------------------------------
# oracle checks


def test_oracle_checks():
    """Pseudoinverse identities, analytic Jacobian, merged task velocity."""
    rng = np.random.default_rng(3)

    worst_mp = 0.0
    for _ in range(50):
        rows = int(rng.integers(1, 7))
        cols = int(rng.integers(1, 7))
        J = rng.standard_normal((rows, cols))
        if rng.random() < 0.3 and min(rows, cols) > 1:
            J[-1] = J[0]  # force a rank deficiency
        P = pseudoinverse(J)
        worst_mp = max(
            worst_mp,
            float(np.max(np.abs(J @ P @ J - J))),
            float(np.max(np.abs(P @ J @ P - P))),
            float(np.max(np.abs((J @ P).T - J @ P))),
            float(np.max(np.abs((P @ J).T - P @ J))),
        )
    assert worst_mp <= 1e-9

    chain = KinematicChain(
        joints=(
            Joint("prismatic", axis="x"),
            Joint("prismatic", axis="y"),
            Joint("yaw"),
            Joint("revolute", 0.5),
            Joint("revolute", 0.4),
            Joint("revolute", 0.3),
            Joint("revolute", 0.2),
        ),
        points={"ee": PointOfInterest(after=7)},
    )
    n = 7
    worst_fd = 0.0
    h = 1e-6
    for _ in range(20):
        q = rng.uniform(-1.5, 1.5, n)
        J = jacobian(chain, q, "ee", dims=("x", "y", "yaw"))
        fd = np.zeros_like(J)
        for j in range(n):
            dq = np.zeros(n)
            dq[j] = h
            fd[:, j] = (
                point_pose(chain, q + dq, "ee") - point_pose(chain, q - dq, "ee")
            ) / (2 * h)
        rel = np.max(np.abs(J - fd)) / max(1.0, np.max(np.abs(J)))
        worst_fd = max(worst_fd, float(rel))
    assert worst_fd <= 1e-5

    worst_sec = 0.0
    for _ in range(50):
        state = _random_state(rng)
        xs = rng.standard_normal(state.l)
        naive = np.array(
            [
                sum(state.A[i, j] * xs[j] for j in range(state.l)) / state.gamma
                for i in range(state.r)
            ]
        )
        worst_sec = max(
            worst_sec, float(np.max(np.abs(secondary_task(state, xs) - naive)))
        )
    assert worst_sec <= 1e-12

    print(
        f"PASS oracle checks: pseudoinverse identities {worst_mp:.2e} <= 1e-9, "
        f"Jacobian vs finite differences {worst_fd:.2e} <= 1e-5, "
        f"merged task velocity vs double loop {worst_sec:.2e} <= 1e-12"
    )


# ---------------------------------------------------------------------------
# case-study stories


def test_drink_serving_story(drink_merged, drink_traditional):
    """Dodging the obstacle costs the untreated run a joint limit; the merged
    run keeps every margin and clearance positive and re-allocates in time."""
    _, log_t, _ = drink_traditional
    config, log_m, _ = drink_merged

    t = log_t.col("t")
    inside = log_t.cols("aux_clear").min(axis=1) < OBSTACLE_THRESHOLD
    assert inside.any()
    trad_window_min = float(log_t.cols("aux_margin")[inside].min())
    assert trad_window_min <= 0.0

    merged_margin = float(log_m.cols("aux_margin").min())
    merged_clear = float(log_m.cols("aux_clear").min())
    assert merged_margin > 0.0
    assert merged_clear > 0.0

    tm = log_m.col("t")
    At = log_m.cols("A_").reshape(len(tm), config.r, config.l)
    obstacle_cols = 3  # the clearance subtask owns the first three columns
    inside_m = log_m.cols("aux_clear").min(axis=1) < OBSTACLE_THRESHOLD
    t_entry = float(tm[inside_m][0])
    per_row = At[:, :, :obstacle_cols].max(axis=2)
    shifted = (per_row >= config.gamma - 1e-9).all(axis=1)
    done = tm[shifted & (tm >= t_entry)]
    assert done.size > 0
    shift_time = float(done[0] - t_entry)
    assert shift_time <= 1.0

    obs_weight = At[:, :, :obstacle_cols].sum(axis=(1, 2))
    t_exit = float(tm[inside_m][-1])
    peak = float(obs_weight.max())
    final = float(obs_weight[-1])
    assert t_exit < tm[-1]
    assert final < 0.5 * peak  # weight hands the redundancies back after exit

    print(
        "PASS drink-serving story: traditional min margin in obstacle window "
        f"{trad_window_min:.4f} <= 0; merged min margin {merged_margin:.4f} > 0 "
        f"and min clearance {merged_clear:.4f} > 0 for the whole run; weight "
        f"shift completed {shift_time:.2f}s <= 1s after entry; obstacle weight "
        f"{peak:.2f} -> {final:.2f} after exit"
    )


def test_circle_story(circle_merged, circle_traditional):
    """Both modes draw the circle; only the merged run services the wrist."""
    max_err = {}
    for label, (config, log, _) in (
        ("merged", circle_merged),
        ("traditional", circle_traditional),
    ):
        pos_err = np.column_stack([log.col("err_0"), log.col("err_1")])
        max_err[label] = float(np.max(np.abs(pos_err)))
        assert max_err[label] < 1e-3

    _, log_m, _ = circle_merged
    _, log_t, _ = circle_traditional
    wrist_m = WRIST_BAND - log_m.col("aux_margin_i3")
    wrist_t = WRIST_BAND - log_t.col("aux_margin_i3")
    assert wrist_m[0] > 0.1  # starts well inside the activation band
    assert wrist_m[-1] < 0.01
    assert wrist_t[-1] > 0.1  # left uncorrected

    print(
        "PASS circle story: max path error merged "
        f"{max_err['merged']:.2e} / traditional {max_err['traditional']:.2e} "
        f"(bound 1e-3); wrist error {wrist_m[0]:.3f} -> {wrist_m[-1]:.4f} "
        f"(< 0.01) merged, {wrist_t[-1]:.3f} (> 0.1) traditional"
    )
