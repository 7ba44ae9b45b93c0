"""Tests for the PD steering law and the per-agent step loop."""

import math

import numpy as np

from pherotrack.agent import AgentBrain, ControlInput, PdGains, pd_control
from pherotrack.estimation import GaussianEstimate
from pherotrack.pheromone import GridGeometry, PheromoneConfig
from pherotrack.sensing import AnalyticCovMap, SectorFov
from pherotrack.tracking import TargetRecord, TrackerConfig

U_MAX = (0.4, math.radians(15.0))


# -- pd_control --------------------------------------------------------------


def test_zero_reference_gives_zero_control():
    u = pd_control([0.0, 0.0], None, PdGains(), U_MAX)
    assert u.u1 == 0.0 and u.u2 == 0.0


def test_straight_ahead_full_speed_no_turn():
    u = pd_control([1.0, 0.0], None, PdGains(), U_MAX)
    assert u.u2 == 0.0
    assert math.isclose(u.u1, 0.4)          # 0.5 * 1.0 clamped to u_max


def test_sideways_waypoint_turns_at_rate_limit():
    u = pd_control([0.0, 1.0], None, PdGains(), U_MAX)
    assert math.isclose(u.u2, U_MAX[1])     # kp * pi/2 clamped
    assert math.isclose(u.u1, 0.0, abs_tol=1e-12)


def test_waypoint_behind_stops_forward_motion():
    u = pd_control([-1.0, 0.0], None, PdGains(), U_MAX)
    assert u.u1 == 0.0
    assert abs(u.u2) == U_MAX[1]


def test_facing_reference_decoupled_from_waypoint():
    # Parked (zero waypoint) but facing a target off to the side: no forward
    # motion, but the agent turns toward the face reference.
    u = pd_control([0.0, 0.0], None, PdGains(), U_MAX,
                   face_body=[1.0, 1.0])
    assert u.u1 == 0.0
    assert math.isclose(u.u2, U_MAX[1])


def test_derivative_term_damps_turn():
    gains = PdGains(kp_theta=1.0, kd_theta=0.5)
    wide = (1.0, math.pi)
    bare = pd_control([1.0, 0.2], None, gains, wide)
    # Reference swung from +0.4 rad to +0.2 rad: the derivative term opposes.
    damped = pd_control([1.0, 0.2], [1.0, 0.4], gains, wide)
    assert damped.u2 < bare.u2


# -- the step loop -----------------------------------------------------------


def make_brain(**kw):
    base = dict(
        agent_id=1,
        fov=SectorFov(4.0, math.radians(60.0)),
        cov_map=AnalyticCovMap(),
        tracker_cfg=TrackerConfig(0.01 * np.eye(2)),
        pher_cfg=PheromoneConfig(),
        grid_geom=GridGeometry(12.0, 0.25),
        r_c=12.0,
        u_max=U_MAX,
        rng=np.random.default_rng(0),
        domain=(30.0, 30.0),
    )
    base.update(kw)
    return AgentBrain(**base)


def det(tid, mean, var):
    return (tid, GaussianEstimate(mean, var * np.eye(2)))


def step(brain, dets=(), **kw):
    return brain.step(list(dets), [], np.zeros(2), np.zeros((2, 2)), 0.0,
                      own_pos=np.array([15.0, 15.0]), **kw)


def test_explore_when_nothing_known():
    brain = make_brain()
    packet, u, telem = step(brain)
    assert telem.target_id == 0
    assert telem.mode == "explore"
    assert telem.entropy is None
    assert packet.targets == []
    assert 0.0 <= u.u1 <= U_MAX[0] and abs(u.u2) <= U_MAX[1]
    # The step stamped a pheromone at the previously-occupied point.
    assert len(brain.own_pheromones) == 1


def test_detection_triggers_exploitation():
    brain = make_brain()
    packet, u, telem = step(brain, [det(1, [2.0, 0.0], 1e-3)])
    assert telem.target_id == 1
    assert telem.mode == "exploit"
    assert math.isclose(telem.entropy, 1e-6)
    # Broadcast snapshots the pre-update list: this detection is not in it.
    assert packet.targets == []
    # Target already at the best-viewpoint range and dead ahead: hold.
    assert np.allclose(telem.waypoint, [0.0, 0.0])
    assert u.u1 == 0.0 and math.isclose(u.u2, 0.0, abs_tol=1e-12)
    # Next step's packet carries the record.
    packet2, _, _ = step(brain, [det(1, [2.0, 0.0], 1e-3)])
    assert [r.target_id for r in packet2.targets] == [1]


def test_distant_target_drives_toward_viewpoint():
    brain = make_brain()
    _, u, telem = step(brain, [det(1, [10.0, 0.0], 0.5)])
    assert telem.mode == "exploit"
    # Waypoint parks the target at the best viewpoint: 8 bl ahead.
    assert np.allclose(telem.waypoint, [8.0, 0.0], atol=1e-9)
    assert u.u1 == U_MAX[0]


def test_negative_information_inflates_contradicted_record():
    brain = make_brain(miss_growth=1.0)
    brain.local_targets.records[1] = TargetRecord(
        1, GaussianEstimate([2.0, 0.0], 0.04 * np.eye(2)))
    step(brain)   # record mean sits in the sensed sector, nothing detected
    cov = brain.local_targets.records[1].estimate.cov
    # predict growth (q_bar) plus the miss bump.
    assert np.allclose(cov, (0.04 + 0.01 + 1.0) * np.eye(2))

    outside = make_brain(miss_growth=1.0)
    outside.local_targets.records[1] = TargetRecord(
        1, GaussianEstimate([-2.0, 0.0], 0.04 * np.eye(2)))   # behind
    step(outside)
    cov = outside.local_targets.records[1].estimate.cov
    assert np.allclose(cov, 0.05 * np.eye(2))                 # q_bar only


def test_forced_unknown_target_falls_back_to_explore():
    brain = make_brain(assign="greedy-distributed")
    _, _, telem = step(brain, forced_target=3)
    assert telem.target_id == 0
    assert telem.mode == "explore"


def test_forced_known_target_overrides_negotiation():
    brain = make_brain()
    step(brain, [det(2, [3.0, 0.5], 0.1)])
    _, _, telem = step(brain, [det(2, [3.0, 0.5], 0.1)], forced_target=2)
    assert telem.target_id == 2


def test_local_greedy_ignores_out_of_sector_records():
    brain = make_brain(assign="local-greedy")
    step(brain, [det(1, [2.0, 0.0], 0.1)])
    # Record now exists; with the sensed sector facing forward it is chosen.
    _, _, telem = step(brain, [det(1, [2.0, 0.0], 0.1)])
    assert telem.target_id == 1
    # A record behind the agent is invisible to the local-greedy rule.
    lone = make_brain(assign="local-greedy")
    lone.local_targets.records[1] = TargetRecord(
        1, GaussianEstimate([-2.0, 0.0], 0.01 * np.eye(2)))
    _, _, telem = step(lone)
    assert telem.target_id == 0


def test_explore_fn_overrides_pheromone_waypoint():
    calls = []

    def fake_explore(shift):
        calls.append(np.array(shift))
        return np.array([3.0, 4.0])

    brain = make_brain()
    _, u, telem = step(brain, explore_fn=fake_explore)
    assert len(calls) == 1
    assert np.allclose(telem.waypoint, [3.0, 4.0])
    # No pheromone machinery ran for the waypoint: carried stays unset.
    assert brain.carried is None


def test_exploration_waypoint_stays_in_domain():
    brain = make_brain()
    own = np.array([0.5, 0.5])    # corner: most of B(0, r_c) is off-world
    for _ in range(30):
        _, _, telem = brain.step([], [], np.zeros(2), np.zeros((2, 2)), 0.0,
                                 own_pos=own)
        goal = own + telem.waypoint
        assert -0.26 <= goal[0] <= 30.26
        assert -0.26 <= goal[1] <= 30.26
