"""Division engines: truthful baselines, tie rules, traces, replay.

Every expected allocation below was derived by hand from the published
valuation tables before the engine ran; the four subject baselines
(60, 90, 40, 30) are the externally anchored ones.
"""

import numpy as np
import pytest

from fairslice.cake import audit
from fairslice.procedures import (
    Machine,
    ProtocolError,
    agents_for,
    replay,
    run,
    run_3sc,
    scripted_policy,
    split_procedure,
    truthful_policy,
)
from fairslice.profiles import (
    PROCEDURES,
    blocks_profile,
    lab_profile,
    partition_profile,
    random_profile,
)


def truthful_points(procedure, profile=None):
    profile = profile or lab_profile(procedure)
    allocation, _ = run(procedure, profile)
    return audit(profile, allocation).points[0]


# ---------------------------------------------------------------------------
# Procedure metadata
# ---------------------------------------------------------------------------

def test_split_procedure():
    assert split_procedure("2acc") == (2, "acc")
    assert split_procedure("4ep") == (4, "ep")
    assert agents_for("3sc") == 3
    with pytest.raises(ValueError):
        split_procedure("3acc")      # cut-and-choose is two agents only
    with pytest.raises(ValueError):
        split_procedure("xyz")


# ---------------------------------------------------------------------------
# Truthful baselines on the lab tables (the four published anchors first)
# ---------------------------------------------------------------------------

def test_baseline_2acc_is_60():
    assert truthful_points("2acc") == 60


def test_baseline_2scc_is_90():
    assert truthful_points("2scc") == 90


def test_baseline_3ds_is_40():
    assert truthful_points("3ds") == 40


def test_baseline_4ds_is_30():
    assert truthful_points("4ds") == 30


def test_baselines_other_procedures():
    assert truthful_points("3ld") == 40
    assert truthful_points("4ld") == 30
    assert truthful_points("4ep") == 30
    assert truthful_points("3sc") == 40


# ---------------------------------------------------------------------------
# Full hand-derived traces
# ---------------------------------------------------------------------------

def test_2acc_trace():
    allocation, trace = run("2acc", lab_profile("2acc"))
    # Subject halves its value at 120; the robot wants none of [0,120).
    assert trace.actions == [(0, "cut", 120), (1, "choose", 1)]
    assert allocation == [(0, 120, 0), (120, 600, 1)]


def test_2scc_trace():
    allocation, trace = run("2scc", lab_profile("2scc"))
    # Cuts 300 and 220 meet at boundary 260; the robot cut lower.
    assert trace.actions == [(0, "cut", 300), (1, "cut", 220)]
    assert allocation == [(0, 260, 1), (260, 600, 0)]


def test_2scc_equal_cuts_send_subject_right():
    uniform = blocks_profile([[(0, 600, 1)], [(0, 600, 1)]])
    allocation, _ = run("2scc", uniform)
    assert allocation == [(0, 300, 1), (300, 600, 0)]


def test_3ds_trace():
    allocation, trace = run("3ds", lab_profile("3ds"))
    assert trace.actions == [
        (0, "cut", 110), (1, "cut", 460), (2, "cut", 180),   # stage 1
        (1, "cut", 460), (2, "cut", 180),                    # stage 2
    ]
    assert allocation == [(0, 110, 0), (110, 180, 2), (180, 600, 1)]


def test_4ds_trace():
    allocation, trace = run("4ds", lab_profile("4ds"))
    assert trace.actions[:4] == [
        (0, "cut", 150), (1, "cut", 90), (2, "cut", 120), (3, "cut", 180),
    ]
    assert allocation == [(0, 90, 1), (90, 120, 2), (120, 170, 0), (170, 600, 3)]


def test_3ld_trace():
    allocation, trace = run("3ld", lab_profile("3ld"))
    assert trace.actions == [
        (0, "cut", 240), (1, "diminish", 110), (2, "diminish", None),
        (0, "cut", 260), (2, "diminish", None),
    ]
    assert allocation == [(0, 110, 1), (110, 260, 0), (260, 600, 2)]


def test_4ld_trace():
    allocation, _ = run("4ld", lab_profile("4ld"))
    assert allocation == [(0, 90, 0), (90, 140, 1), (140, 260, 2), (260, 600, 3)]


def test_4ep_trace():
    allocation, trace = run("4ep", lab_profile("4ep"))
    # Root cuts (200, 200, 310, 270) put agents 0,1 left of 200; in the left
    # node the subject's 30-point cut lands at 120.
    assert trace.actions[:4] == [
        (0, "cut", 200), (1, "cut", 200), (2, "cut", 310), (3, "cut", 270),
    ]
    assert allocation == [(0, 120, 0), (120, 200, 1), (200, 270, 3), (270, 600, 2)]


def test_3sc_trace():
    allocation, trace = run("3sc", lab_profile("3sc"))
    # Subject's third-cuts at 190/400; the trimmer ties its top two pieces,
    # so nothing is trimmed and there is no second phase.
    assert trace.actions == [
        (0, "cut2", (190, 400)), (1, "trim", (0, 0)), (2, "pick", 1),
    ]
    assert allocation == [(0, 190, 1), (190, 400, 2), (400, 600, 0)]


# ---------------------------------------------------------------------------
# 3SC with forced cuts and the trimming phase
# ---------------------------------------------------------------------------

def test_run_3sc_forced_truthful_cuts_match():
    allocation, _ = run_3sc((190, 400), lab_profile("3sc"))
    assert allocation == [(0, 190, 1), (190, 400, 2), (400, 600, 0)]


def test_run_3sc_wide_middle_piece():
    # Cutting (200, 400) on the block-partition profile hands the subject
    # its whole desired block: the trim removes the middle piece entirely.
    allocation, _ = run_3sc((200, 400), partition_profile(3))
    points = audit(partition_profile(3), allocation).points
    assert points[0] == 200


def test_3sc_trimming_phase_is_envy_free():
    # Regression: overshooting third-cuts in the trimmings phase used to
    # let the trimmer envy the first chooser by one point.
    profile = blocks_profile([
        [(0, 120, 1)],
        [(41, 42, 1), (81, 200, 1)],
        [(159, 279, 1)],
    ])
    allocation, trace = run("3sc", profile)
    report = audit(profile, allocation)
    assert not report.any_envy
    assert all(report.proportional)
    # The splitter leaves one worthless-to-nobody pixel unallocated.
    covered = sum(e - s for s, e, _ in allocation)
    assert covered == 599


def test_3sc_unallocated_trimmings_dust_is_small():
    rng = np.random.default_rng(42)
    for _ in range(50):
        profile = random_profile(3, rng)
        allocation, _ = run("3sc", profile)
        report = audit(profile, allocation)
        assert not report.any_envy
        assert all(report.proportional)
        dropped = 600 - sum(e - s for s, e, _ in allocation)
        assert 0 <= dropped <= 2


# ---------------------------------------------------------------------------
# Proportionality across all procedures (small sample; the full 500-profile
# sweep lives in the acceptance suite)
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("procedure", PROCEDURES)
def test_truthful_play_is_proportional(procedure):
    rng = np.random.default_rng(PROCEDURES.index(procedure))
    for _ in range(25):
        profile = random_profile(agents_for(procedure), rng)
        allocation, _ = run(procedure, profile)
        report = audit(profile, allocation)
        assert all(report.proportional), (procedure, allocation)


@pytest.mark.parametrize("procedure", ["2acc", "2scc", "3sc"])
def test_truthful_play_is_envy_free_where_promised(procedure):
    rng = np.random.default_rng(99)
    for _ in range(25):
        profile = random_profile(agents_for(procedure), rng)
        allocation, _ = run(procedure, profile)
        assert not audit(profile, allocation).any_envy, (procedure, allocation)


# ---------------------------------------------------------------------------
# Scripted play and replay
# ---------------------------------------------------------------------------

def test_scripted_policy_overrides_cuts_only():
    profile = lab_profile("2acc")
    strategic = scripted_policy(truthful_policy(profile[0]), [430])
    allocation, trace = run("2acc", profile, {0: strategic})
    assert trace.actions[0] == (0, "cut", 430)
    assert audit(profile, allocation).points[0] == 120


@pytest.mark.parametrize("procedure", PROCEDURES)
def test_replay_reproduces_allocation(procedure):
    profile = lab_profile(procedure)
    allocation, trace = run(procedure, profile)
    assert replay(trace) == allocation


def test_replay_rejects_mismatched_trace():
    _, trace = run("2acc", lab_profile("2acc"))
    trace.procedure = "2scc"
    with pytest.raises(ProtocolError):
        replay(trace)


# ---------------------------------------------------------------------------
# Action validation
# ---------------------------------------------------------------------------

def test_rejects_cut_outside_range():
    machine = Machine("2acc")
    machine.start()
    with pytest.raises(ProtocolError):
        machine.step(601)
    with pytest.raises(ProtocolError):
        machine.step(-1)
    with pytest.raises(ProtocolError):
        machine.step("120")


def test_rejects_unordered_second_cut():
    machine = Machine("3sc")
    machine.start()
    with pytest.raises(ProtocolError):
        machine.step((400, 200))


def test_rejects_diminish_at_or_above_standing():
    profile = lab_profile("3ld")
    machine = Machine("3ld")
    q = machine.start()
    assert q.kind == "cut" and q.agent == 0
    q = machine.step(240)
    assert q.kind == "diminish" and q.standing == 240
    with pytest.raises(ProtocolError):
        machine.step(240)       # must strictly undercut the standing piece
    with pytest.raises(ProtocolError):
        machine.step(241)


def test_rejects_choose_out_of_range():
    machine = Machine("2acc")
    machine.start()
    q = machine.step(120)
    assert q.kind == "choose"
    with pytest.raises(ProtocolError):
        machine.step(2)


def test_machine_refuses_step_after_done():
    machine = Machine("2acc")
    machine.start()
    machine.step(120)
    assert machine.step(1) is None
    assert machine.done
    with pytest.raises(ProtocolError):
        machine.step(0)


def test_run_rejects_wrong_agent_count():
    with pytest.raises(ValueError):
        run("3ds", lab_profile("2acc"))
