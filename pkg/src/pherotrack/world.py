"""Ground truth and physics.

Owns the domain, agent unicycle integration, Brownian targets, sector-FOV
measurement generation, the r-disk broadcast channel with its periodic
reception schedule, and displacement sensing.  Everything here is
harness-side: agents never see global positions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .estimation import GaussianEstimate
from .sensing import AnalyticCovMap, wrap_angle


class AssumptionError(ValueError):
    """A world configuration violates one of the standing assumptions."""


@dataclass
class WorldConfig:
    """Full simulation configuration.

    Distances in bl, angles in radians unless the field name says degrees.
    """

    domain: tuple = (30.0, 30.0)     # width, height of the rectangle
    n_agents: int = 6
    n_targets: int = 4
    q_k: tuple = ((0.005, 0.0), (0.0, 0.005))    # true target process noise
    q_bar: tuple = ((0.01, 0.0), (0.0, 0.01))    # known bound on q_k
    r_c: float = 12.0                # communication radius
    rx_period: int = 3               # steps between receptions
    r_s: float = 4.0                 # sensing radius
    phi_c_deg: float = 120.0         # full sector angle
    k1: float = 1.0
    k2: float = 1.0
    r_bar: float = 2.0               # best-estimate range of the camera model
    eta_floor: float = 1e-3
    k_p: float = 1.0                 # neighbor position sensing noise gain
    u_max: tuple = (0.4, math.radians(15.0))
    r_dp: tuple = ((0.0, 0.0), (0.0, 0.0))       # displacement sensing noise
    sigma_bar: float = 3600.0        # target deletion threshold on det
    w_init: float = 35.0
    w_decay: float = 0.16
    w_floor: float = 0.1
    cell_size: float = 0.25
    q_star: float = 0.5              # waypoint-reached radius
    noise_scale: float = 1.0         # test hook: scales all sampled noise
    calibration_csv: str | None = None   # use a table-based covariance map
    seed: int = 0

    def __post_init__(self):
        self.domain = tuple(float(v) for v in self.domain)
        self.q_k = np.asarray(self.q_k, dtype=float).reshape(2, 2)
        self.q_bar = np.asarray(self.q_bar, dtype=float).reshape(2, 2)
        self.r_dp = np.asarray(self.r_dp, dtype=float).reshape(2, 2)
        self.u_max = np.asarray(self.u_max, dtype=float).reshape(2)
        self.validate()

    @property
    def half_angle(self):
        return math.radians(self.phi_c_deg) / 2.0

    def cov_map(self) -> AnalyticCovMap:
        return AnalyticCovMap(self.k1, self.k2, self.r_bar, self.eta_floor)

    def domain_diagonal(self):
        return math.hypot(*self.domain)

    def validate(self):
        """Assumption gate: runs at load, aborts before any stepping."""
        if self.r_s > self.r_c:
            raise AssumptionError(
                "sensing-communication relation violated: r_s > r_c"
            )
        gap = np.linalg.eigvalsh(self.q_bar - self.q_k)[0]
        if gap < -1e-12:
            raise AssumptionError(
                "target noise bound violated: q_k not dominated by q_bar"
            )
        # Worst-case per-step target motion at 3 sigma must stay below the
        # agent's top speed.
        step_3sigma = 3.0 * math.sqrt(float(np.trace(self.q_k)))
        if self.u_max[0] <= step_3sigma:
            raise AssumptionError(
                "agent max speed does not dominate target motion at 3 sigma"
            )
        if not (0 < self.w_decay < 1 and 0 < self.w_floor < self.w_init):
            raise AssumptionError("pheromone parameters out of range")
        if self.rx_period < 1 or self.n_agents < 1:
            raise AssumptionError("counts and periods must be positive")

    def to_json(self, path):
        d = asdict(self)
        for k in ("q_k", "q_bar", "r_dp", "u_max"):
            d[k] = np.asarray(d[k]).tolist()
        with open(path, "w") as f:
            json.dump(d, f, indent=2)

    @classmethod
    def from_json(cls, path):
        with open(path) as f:
            return cls(**json.load(f))


def sim_2d_preset(**overrides) -> WorldConfig:
    """The ideal 2D simulation configuration (30x30 bl, camera model)."""
    return WorldConfig(**overrides)


def hardware_table_preset(**overrides) -> WorldConfig:
    """Hardware-flavored configuration (blimp testbed values, 2D projection).

    Uses a calibration-table covariance map when ``calibration_csv`` points
    at a table; otherwise a synthetic table is generated at world build time.
    """
    params = dict(
        domain=(10.0, 6.0),
        n_agents=2,
        n_targets=2,
        q_k=((0.01, 0.0), (0.0, 0.01)),
        q_bar=((0.19, 0.0), (0.0, 0.15)),
        r_c=6.5,
        r_s=5.5,
        phi_c_deg=120.0,
        u_max=(0.6, math.radians(15.0)),
        w_init=15.0,
        w_decay=0.3,
        w_floor=0.1,
        sigma_bar=3600.0,
        calibration_csv="",
    )
    params.update(overrides)
    return WorldConfig(**params)


PRESETS = {"sim-2d": sim_2d_preset, "hardware-table": hardware_table_preset}


@dataclass
class WorldState:
    """Ground truth at one time index, plus every named RNG stream."""

    agent_pos: np.ndarray        # (N, 2)
    agent_heading: np.ndarray    # (N,)
    target_pos: np.ndarray       # (M, 2)
    t: int = 0
    target_rngs: list = field(default_factory=list)
    sense_rngs: list = field(default_factory=list)
    channel_rngs: list = field(default_factory=list)


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + key))


def make_state(cfg: WorldConfig) -> WorldState:
    """Randomly initialize agents and targets inside the domain.

    The master seed expands into independent named streams (placement, one
    per target, per agent sensor, per agent channel), so changing the agent
    count never perturbs target noise.
    """
    placement = _stream(cfg.seed, 0)
    w, h = cfg.domain
    agent_pos = placement.uniform((0, 0), (w, h), size=(cfg.n_agents, 2))
    agent_heading = placement.uniform(-np.pi, np.pi, size=cfg.n_agents)
    target_pos = placement.uniform((0, 0), (w, h), size=(cfg.n_targets, 2))
    return WorldState(
        agent_pos=agent_pos,
        agent_heading=agent_heading,
        target_pos=target_pos,
        target_rngs=[_stream(cfg.seed, 1, k) for k in range(cfg.n_targets)],
        sense_rngs=[_stream(cfg.seed, 2, i) for i in range(cfg.n_agents)],
        channel_rngs=[_stream(cfg.seed, 3, i) for i in range(cfg.n_agents)],
    )


def agent_rng(cfg: WorldConfig, agent_id: int):
    """Dedicated stream for an agent's own decisions (waypoint draws)."""
    return _stream(cfg.seed, 4, agent_id)


def _reflect(x, lo, hi):
    # Reflect a scalar into [lo, hi]; steps are small so one pass suffices,
    # but loop for safety.
    while x < lo or x > hi:
        if x < lo:
            x = 2 * lo - x
        else:
            x = 2 * hi - x
    return x


def step_dynamics(state: WorldState, inputs, cfg: WorldConfig) -> WorldState:
    """Advance agents (unicycle, clamped to the domain) and targets
    (Brownian, reflected at the walls) by one step.  Mutates ``state``.
    """
    w, h = cfg.domain
    for i, u in enumerate(inputs):
        th = state.agent_heading[i]
        state.agent_pos[i, 0] += u.u1 * math.cos(th)
        state.agent_pos[i, 1] += u.u1 * math.sin(th)
        state.agent_heading[i] = wrap_angle(th + u.u2)
    np.clip(state.agent_pos[:, 0], 0.0, w, out=state.agent_pos[:, 0])
    np.clip(state.agent_pos[:, 1], 0.0, h, out=state.agent_pos[:, 1])

    chol = np.linalg.cholesky(cfg.q_k + np.eye(2) * 1e-15)
    for k in range(len(state.target_pos)):
        noise = cfg.noise_scale * (chol @ state.target_rngs[k].standard_normal(2))
        x = state.target_pos[k, 0] + noise[0]
        y = state.target_pos[k, 1] + noise[1]
        state.target_pos[k] = (_reflect(x, 0.0, w), _reflect(y, 0.0, h))

    state.t += 1
    return state


def target_in_fov(state: WorldState, agent: int, target: int,
                  cfg: WorldConfig) -> bool:
    rel = state.target_pos[target] - state.agent_pos[agent]
    r = math.hypot(rel[0], rel[1])
    if r > cfg.r_s:
        return False
    bearing = wrap_angle(math.atan2(rel[1], rel[0]) - state.agent_heading[agent])
    return abs(bearing) <= cfg.half_angle


def sense_targets(state: WorldState, agent: int, cfg: WorldConfig,
                  cov_at=None):
    """Noisy relative-position measurements of every target in the FOV.

    Noise is drawn directly in the cartesian local frame with the covariance
    the map assigns to the target's true polar position, and that covariance
    is handed to the tracker alongside the measurement.  Target ids are
    1-based (0 is the explore sentinel).
    """
    if cov_at is None:
        cmap = cfg.cov_map()
        cov_at = lambda r, phi: max(cmap.eta(r, phi), cmap.eta_floor) * np.eye(2)
    out = []
    rng = state.sense_rngs[agent]
    for k in range(len(state.target_pos)):
        rel = state.target_pos[k] - state.agent_pos[agent]
        r = math.hypot(rel[0], rel[1])
        if r > cfg.r_s:
            continue
        bearing = wrap_angle(math.atan2(rel[1], rel[0])
                             - state.agent_heading[agent])
        if abs(bearing) > cfg.half_angle:
            continue
        cov = cov_at(r, bearing)
        noise = cfg.noise_scale * (np.linalg.cholesky(cov)
                                   @ rng.standard_normal(2))
        out.append((k + 1, GaussianEstimate(rel + noise, cov)))
    return out


def sense_displacement(state: WorldState, agent: int, prev_pos,
                       cfg: WorldConfig):
    """Noisy measurement of the agent's own last displacement."""
    true_dp = state.agent_pos[agent] - np.asarray(prev_pos, dtype=float)
    if np.abs(cfg.r_dp).max() <= 0:
        return true_dp.copy(), cfg.r_dp.copy()
    noise = cfg.noise_scale * (np.linalg.cholesky(cfg.r_dp + np.eye(2) * 1e-15)
                               @ state.sense_rngs[agent].standard_normal(2))
    return true_dp + noise, cfg.r_dp.copy()


def deliver_broadcasts(packets, state: WorldState, t: int, cfg: WorldConfig):
    """r-disk delivery with the periodic reception schedule.

    Agent i receives j's packet iff they are within r_c and t is one of i's
    reception steps (all agents share phase 0).  Each delivered packet gets a
    fresh receiver-side relative-position measurement of the sender with
    covariance diag(k_p * distance), floored to stay invertible.

    ``packets`` maps sender id to BroadcastPacket; returns receiver id ->
    list of delivered copies.
    """
    rx = {i: [] for i in range(cfg.n_agents)}
    if t % cfg.rx_period != 0:
        return rx
    for i in range(cfg.n_agents):
        rng = state.channel_rngs[i]
        for j, packet in packets.items():
            if j == i:
                continue
            rel = state.agent_pos[j] - state.agent_pos[i]
            dist = math.hypot(rel[0], rel[1])
            if dist > cfg.r_c:
                continue
            var = max(cfg.k_p * dist, cfg.eta_floor)
            noise = cfg.noise_scale * math.sqrt(var) * rng.standard_normal(2)
            delivered = type(packet)(
                sender=packet.sender,
                pheromones=packet.pheromones,
                targets=packet.targets,
                rel_pos=GaussianEstimate(rel + noise, var * np.eye(2)),
            )
            rx[i].append(delivered)
    return rx
