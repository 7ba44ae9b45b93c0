"""The full per-agent loop: broadcast, ingest, select, steer.

Each step an agent emits its pre-update lists, folds this step's detections
and received packets into its target and pheromone storage, negotiates a
target, and produces a bounded unicycle control toward either the
exploitation waypoint (target chosen) or the exploration waypoint (searching).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import pheromone as ph
from .estimation import GaussianEstimate
from .sensing import (AnalyticCovMap, SectorFov, best_viewpoint, contains,
                      rot2, wrap_angle)
from .tracking import (LocalTargetList, TrackerConfig, UnknownTargetError,
                       combined_estimate, entropy, select_target,
                       update_storage)


@dataclass
class ControlInput:
    """Forward speed (bl/step) and turn rate (rad/step)."""

    u1: float
    u2: float


@dataclass
class BroadcastPacket:
    """What an agent puts on the air each step.

    Contents snapshot the pre-update lists (the broadcast precedes the
    storage updates in the per-step order).  ``rel_pos`` is empty on
    emission; the channel attaches the receiver-side measurement of the
    sender at delivery.
    """

    sender: int
    pheromones: ph.PheromoneList
    targets: list
    rel_pos: GaussianEstimate | None = None


@dataclass
class PdGains:
    kp_r: float = 0.5
    kp_theta: float = 1.0
    kd_theta: float = 0.2


def pd_control(waypoint_body, prev_face_body, gains: PdGains, u_max,
               face_body=None) -> ControlInput:
    """PD law toward a body-frame waypoint (agent at origin, heading +x).

    Turn rate is proportional to the bearing of the facing reference
    (``face_body`` when given, else the waypoint) plus a damping term on its
    change; forward speed is proportional to the waypoint distance, gated to
    zero when the reference is behind the agent.  A parked exploiting agent
    keeps its sensor on the target by facing the estimate rather than the
    near-zero waypoint.  Outputs are clamped to ``u_max``.
    """
    wx, wy = float(waypoint_body[0]), float(waypoint_body[1])
    dist = math.hypot(wx, wy)
    if face_body is None:
        face_body = waypoint_body
    fx, fy = float(face_body[0]), float(face_body[1])
    if math.hypot(fx, fy) < 1e-12:
        return ControlInput(0.0, 0.0)
    bearing = math.atan2(fy, fx)
    if prev_face_body is None or math.hypot(*prev_face_body) < 1e-12:
        d_bearing = 0.0
    else:
        prev_bearing = math.atan2(prev_face_body[1], prev_face_body[0])
        d_bearing = wrap_angle(bearing - prev_bearing)
    u2 = gains.kp_theta * bearing + gains.kd_theta * d_bearing
    u2 = float(np.clip(u2, -u_max[1], u_max[1]))
    u1 = gains.kp_r * dist * max(0.0, math.cos(bearing))
    u1 = float(np.clip(u1, 0.0, u_max[0]))
    return ControlInput(u1, u2)


@dataclass
class Telemetry:
    """Per-step record: mode, chosen target, waypoint, exploit entropy."""

    target_id: int
    mode: str
    waypoint: np.ndarray
    entropy: float | None


@dataclass
class AgentBrain:
    """All per-agent state and configuration for the distributed loop."""

    agent_id: int
    fov: SectorFov
    cov_map: AnalyticCovMap
    tracker_cfg: TrackerConfig
    pher_cfg: ph.PheromoneConfig
    grid_geom: ph.GridGeometry
    r_c: float
    u_max: np.ndarray
    rng: np.random.Generator
    q_star: float = 0.5
    gains: PdGains = field(default_factory=PdGains)
    search: str = "pheromone"       # pheromone | levy | antiflocking
    assign: str = "greedy-distributed"  # greedy-distributed | local-greedy
    domain: tuple | None = None     # wall geometry, when known to the agent
    miss_growth: float = 1.0        # extra cov growth for expected-but-missed

    local_targets: LocalTargetList = field(default_factory=LocalTargetList)
    neighbor_targets: dict = field(default_factory=dict)
    own_pheromones: ph.PheromoneList = None
    neighbor_pheromones: dict = field(default_factory=dict)
    carried: tuple | None = None    # (waypoint, stored weight) while exploring
    selected_target: int = 0
    prev_waypoint_body: np.ndarray | None = None
    step_count: int = 0

    def __post_init__(self):
        self.u_max = np.asarray(self.u_max, dtype=float).reshape(2)
        if self.own_pheromones is None:
            self.own_pheromones = ph.PheromoneList(self.agent_id)
        self._viewpoint_sensor = best_viewpoint(self.cov_map, self.fov)

    @property
    def mode(self) -> str:
        return "exploit" if self.selected_target > 0 else "explore"

    def snapshot_packet(self) -> BroadcastPacket:
        return BroadcastPacket(
            sender=self.agent_id,
            pheromones=self.own_pheromones.copy(),
            targets=[r.copy() for r in self.local_targets.records.values()],
        )

    # -- pheromone search helpers ------------------------------------------

    def _all_pheromones(self):
        lists = [self.own_pheromones] + list(self.neighbor_pheromones.values())
        lists = [pl for pl in lists if len(pl)]
        if not lists:
            return np.empty((0, 2)), np.empty(0), np.empty((0, 2, 2))
        return (np.concatenate([pl.positions for pl in lists]),
                np.concatenate([pl.weights for pl in lists]),
                np.concatenate([pl.covs for pl in lists]))

    def _clamp_rel(self, rel, own_pos):
        """Clamp a relative point into the physical domain, when known.

        Target motion reflects at the walls but estimates drift freely, so an
        unclamped stale mean can sit outside the domain where no agent can
        ever reach or disprove it.
        """
        if self.domain is None or own_pos is None:
            return np.asarray(rel, dtype=float)
        g = np.asarray(own_pos, dtype=float) + np.asarray(rel, dtype=float)
        g[0] = min(max(g[0], 0.0), self.domain[0])
        g[1] = min(max(g[1], 0.0), self.domain[1])
        return g - np.asarray(own_pos, dtype=float)

    def _in_domain(self, waypoint, own_pos):
        if self.domain is None or own_pos is None:
            return True
        gx, gy = own_pos[0] + waypoint[0], own_pos[1] + waypoint[1]
        return 0.0 <= gx <= self.domain[0] and 0.0 <= gy <= self.domain[1]

    def _domain_mask(self, own_pos):
        if self.domain is None or own_pos is None:
            return None
        xs, ys = self.grid_geom.centers()
        gx, gy = xs + own_pos[0], ys + own_pos[1]
        return ((gx >= 0.0) & (gx <= self.domain[0])
                & (gy >= 0.0) & (gy <= self.domain[1]))

    def _pheromone_waypoint(self, shift, own_pos=None):
        positions, weights, covs = self._all_pheromones()
        delta_only = len(covs) == 0 or np.abs(covs).max() <= 1e-12
        radius = self.pher_cfg.footprint_radius

        if delta_only and self.carried is not None:
            # Cheap recompute test without materializing the raster.
            wp = self.carried[0] + shift
            norm = math.hypot(wp[0], wp[1])
            value = ph.pheromone_value_at(wp, positions, weights, radius,
                                          self.grid_geom)
            if (norm >= self.q_star and norm <= self.r_c
                    and self._in_domain(wp, own_pos)
                    and value <= self.carried[1] + ph.ARGMIN_TOL):
                self.carried = (wp, value)
                return wp

        if delta_only:
            grid = ph.delta_map(positions, weights, radius, self.grid_geom)
        else:
            regions = [ph.diffuse_region(p, radius, self.grid_geom)
                       for pl in ([self.own_pheromones]
                                  + list(self.neighbor_pheromones.values()))
                       for p in pl.items()]
            grid = ph.build_map(regions, self.grid_geom)
        wp, w = ph.exploration_waypoint(grid, self.carried, shift, self.r_c,
                                        self.q_star, self.rng,
                                        valid=self._domain_mask(own_pos))
        self.carried = (wp, w)
        return wp

    def _apply_negative_info(self, detections, heading, own_pos):
        """Inflate records contradicted by looking and not seeing.

        Two kinds of negative evidence, both applied to this agent's own
        records and to its held copies of neighbor records:

        * The record's (clamped, local-frame) mean sits inside the currently
          sensed sector, yet the target was not detected.
        * The record has gone unrefreshed for longer than a pheromone
          lifetime while its location carries fresh pheromone, i.e. someone
          searched there since and would have reported the target.

        Without this, a stale record is effectively immortal (nominal growth
        reaches the prune threshold only after thousands of steps) and an
        agent can chase a phantom indefinitely.
        """
        if self.miss_growth <= 0:
            return
        det_ids = {tid for tid, _ in detections}
        sector = SectorFov(max(self.fov.range_bl - 0.25, 1e-6),
                           max(self.fov.half_angle - 0.05, 1e-6), heading)
        bump = self.miss_growth * np.eye(2)
        lifetime = self.pher_cfg.max_list_length()

        check_cover = False
        if self.search == "pheromone":
            positions, weights, covs = self._all_pheromones()
            check_cover = (len(weights) > 0
                           and (len(covs) == 0 or np.abs(covs).max() <= 1e-12))

        def searched_since(mean, last_update):
            if not check_cover or self.step_count - last_update <= lifetime:
                return False
            if math.hypot(mean[0], mean[1]) > self.r_c:
                return False
            value = ph.pheromone_value_at(
                mean, positions, weights,
                self.pher_cfg.footprint_radius, self.grid_geom)
            return value > self.pher_cfg.w_floor

        holdings = [(self.local_targets.records, None)]
        for nlist in self.neighbor_targets.values():
            if nlist.rel_pos is not None:
                holdings.append((nlist.records, nlist.rel_pos.mean))
        for records, offset in holdings:
            for tid, rec in records.items():
                if tid in det_ids:
                    continue
                mean = rec.estimate.mean if offset is None \
                    else rec.estimate.mean + offset
                mean = self._clamp_rel(mean, own_pos)
                if contains(sector, mean) or \
                        searched_since(mean, rec.last_update_step):
                    rec.estimate.cov = rec.estimate.cov + bump

    # -- the per-step loop --------------------------------------------------

    def step(self, detections, rx_packets, displacement, sigma_dp, heading,
             forced_target=None, explore_fn=None, own_pos=None):
        """Run one full agent iteration.

        Args:
            detections: list of (target_id, GaussianEstimate) from the sensor.
            rx_packets: BroadcastPackets delivered this step, each with the
                channel-attached ``rel_pos`` measurement of its sender.
            displacement: sensed own displacement p(t) - p(t-1), local frame.
            sigma_dp: covariance of the displacement measurement.
            heading: sensed own heading in the local frame (dead-reckoned on
                hardware, exact in the ideal simulation).
            forced_target: externally imposed selection (used by the
                centralized auction baseline); None means negotiate locally.
            explore_fn: override for the exploration waypoint (used by the
                levy and anti-flocking baselines); called with the frame
                shift, returns a local-frame waypoint.
            own_pos: global position granted by the harness, used only to
                keep exploration waypoints inside the physical domain
                (standing in for a wall sensor).

        Returns:
            (BroadcastPacket, ControlInput, Telemetry)
        """
        packet = self.snapshot_packet()

        shift = -np.asarray(displacement, dtype=float).reshape(2)
        target_rx = [(p.sender, p.targets, p.rel_pos) for p in rx_packets]
        update_storage(self.local_targets, self.neighbor_targets, detections,
                       target_rx, shift, sigma_dp, self.tracker_cfg,
                       step=self.step_count)

        self._apply_negative_info(detections, heading, own_pos)

        if self.search == "pheromone":
            pher_rx = [
                (p.sender, p.pheromones,
                 self.neighbor_targets[p.sender].rel_pos.mean)
                for p in rx_packets
            ]
            ph.update_pheromones(self.own_pheromones, self.neighbor_pheromones,
                                 pher_rx, shift, sigma_dp, self.pher_cfg)

        if forced_target is not None:
            k_star = int(forced_target)
        elif self.assign == "local-greedy":
            from .baselines import local_greedy_select

            sector = SectorFov(self.fov.range_bl, self.fov.half_angle, heading)
            k_star = local_greedy_select(
                self.local_targets, lambda mean: contains(sector, mean))
        else:
            k_star = select_target(self.agent_id, self.local_targets,
                                   self.neighbor_targets)
        self.selected_target = k_star

        exploit_entropy = None
        if k_star > 0:
            try:
                est = combined_estimate(k_star, self.local_targets,
                                        self.neighbor_targets)
            except UnknownTargetError:
                # A forced selection can lag the lists by a step; fall back
                # to exploring until the external assignment catches up.
                k_star = 0
                self.selected_target = 0
        if k_star > 0:
            exploit_entropy = entropy(est.cov)
            # Anchor the best-viewpoint offset to the line of sight, not the
            # current heading: the park point must not rotate as the agent
            # turns, or chasing it becomes a limit cycle.
            goal = self._clamp_rel(est.mean, own_pos)
            d = math.hypot(goal[0], goal[1])
            r_star = math.hypot(*self._viewpoint_sensor)
            if d <= r_star:
                # Already closer than the best viewpoint: the target is well
                # inside the sector's range, so hold position and keep facing
                # it.  Driving toward a park point that lies behind the agent
                # degenerates into an orbit that sweeps the target out of
                # view.
                waypoint = np.zeros(2)
            else:
                los = math.atan2(goal[1], goal[0]) if d > 1e-9 else heading
                viewpoint = rot2(los) @ self._viewpoint_sensor
                waypoint = goal - viewpoint
            face = goal
            self.carried = None
        elif explore_fn is not None:
            waypoint = explore_fn(shift)
            face = waypoint
        else:
            waypoint = self._pheromone_waypoint(shift, own_pos)
            face = waypoint

        waypoint_body = rot2(-heading) @ waypoint
        face_body = rot2(-heading) @ face
        control = pd_control(waypoint_body, self.prev_waypoint_body,
                             self.gains, self.u_max, face_body=face_body)
        self.prev_waypoint_body = face_body

        telemetry = Telemetry(k_star, self.mode, np.asarray(waypoint, float),
                              exploit_entropy)
        self.step_count += 1
        return packet, control, telemetry
