"""Virtual pheromone storage, diffusion, mapping, and exploration waypoints.

Pheromone deposits are (position, covariance, weight) triples kept in the
depositing agent's local frame.  Received neighbor deposits are converted
into the local frame at receipt (using the fused neighbor relative position)
so that every stored position can be shifted uniformly with agent motion.

The rasterized map covers the ball of radius ``r_c`` around the agent; a
cell's value is the maximum weight of any diffused deposit region covering
it, and exploration steers toward the least-weighted (least recently
visited) cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

# Covariances whose largest entry is below this are treated as delta kernels.
_DELTA_COV_TOL = 1e-12
# Cells within this of the minimum count as argmin ties.
ARGMIN_TOL = 1e-9


@dataclass
class Pheromone:
    """A single decaying deposit."""

    position: np.ndarray
    cov: np.ndarray
    weight: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)
        self.cov = np.asarray(self.cov, dtype=float).reshape(2, 2)


@dataclass
class PheromoneList:
    """Deposits of one owner, stored as parallel arrays for fast updates."""

    owner: int
    positions: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    covs: np.ndarray = field(default_factory=lambda: np.empty((0, 2, 2)))
    weights: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return len(self.weights)

    def items(self):
        return [Pheromone(p, c, float(w))
                for p, c, w in zip(self.positions, self.covs, self.weights)]

    def append(self, position, cov, weight):
        self.positions = np.vstack([self.positions, np.reshape(position, (1, 2))])
        self.covs = np.concatenate([self.covs, np.reshape(cov, (1, 2, 2))])
        self.weights = np.append(self.weights, weight)

    def copy(self):
        return PheromoneList(self.owner, self.positions.copy(),
                             self.covs.copy(), self.weights.copy())


@dataclass
class PheromoneConfig:
    w_init: float = 35.0
    w_decay: float = 0.16          # fractional decay per step
    w_floor: float = 0.1           # deposits at or below this are deleted
    footprint_radius: float = 4.0  # disk radius of a deposit's region (bl)
    cell_size: float = 0.25

    def __post_init__(self):
        if not (0 < self.w_decay < 1):
            raise ValueError("decay rate must be in (0, 1)")
        if not (0 < self.w_floor < self.w_init):
            raise ValueError("need 0 < floor < initial weight")

    def max_list_length(self):
        # A deposit survives until w_init (1 - decay)^n <= floor.
        return int(math.ceil(math.log(self.w_floor / self.w_init)
                             / math.log(1.0 - self.w_decay))) + 1


@dataclass
class GridGeometry:
    """Square raster centered on the agent, covering B(0, radius)."""

    radius: float
    cell_size: float = 0.25

    def __post_init__(self):
        self.n = int(math.ceil(2.0 * self.radius / self.cell_size))
        # Cell-center coordinates along one axis.
        self.coords = (np.arange(self.n) + 0.5) * self.cell_size - self.radius

    def centers(self):
        xs, ys = np.meshgrid(self.coords, self.coords, indexing="ij")
        return xs, ys

    def in_ball_mask(self):
        xs, ys = self.centers()
        return xs ** 2 + ys ** 2 <= self.radius ** 2

    def index_of(self, point):
        i = int(np.clip((point[0] + self.radius) / self.cell_size, 0, self.n - 1))
        j = int(np.clip((point[1] + self.radius) / self.cell_size, 0, self.n - 1))
        return i, j


@dataclass
class PheromoneGrid:
    """Rasterized pheromone map on a :class:`GridGeometry`."""

    geometry: GridGeometry
    weights: np.ndarray

    def value_at(self, point) -> float:
        """Map value at the cell containing ``point``."""
        i, j = self.geometry.index_of(point)
        return float(self.weights[i, j])

    def to_pgm(self, path):
        """Dump as a plain-text portable graymap, weights scaled x1000."""
        vals = (self.weights * 1000.0).astype(int)
        maxval = max(1, int(vals.max()))
        with open(path, "w") as f:
            f.write(f"P2\n{self.weights.shape[1]} {self.weights.shape[0]}\n{maxval}\n")
            for row in vals:
                f.write(" ".join(str(v) for v in row) + "\n")


def update_pheromones(own: PheromoneList, neighbor_lists: dict, rx_packets,
                      shift, sigma_shift, cfg: PheromoneConfig):
    """One pheromone storage round.

    Own deposits shift with the agent, grow in uncertainty, decay, and die at
    the floor; a fresh deposit marks the previously-visited point (which is
    exactly ``shift`` in the current frame).  Received lists replace the
    stored neighbor list, converted into the local frame via the supplied
    sender offset; silent neighbors' lists decay and are shifted so every
    stored position stays expressed in the current local frame.

    ``rx_packets`` is a list of (sender_id, PheromoneList, offset) where
    ``offset`` is the sender's relative position in the local frame.
    Mutates ``own`` and ``neighbor_lists`` in place.
    """
    shift = np.asarray(shift, dtype=float).reshape(2)
    sigma_shift = np.asarray(sigma_shift, dtype=float).reshape(2, 2)

    _decay_in_place(own, cfg, shift, sigma_shift)
    own.append(shift, sigma_shift, cfg.w_init)

    heard_from = set()
    for sender, plist, offset in rx_packets:
        heard_from.add(sender)
        converted = plist.copy()
        if len(converted):
            converted.positions = converted.positions + np.reshape(offset, (1, 2))
        neighbor_lists[sender] = converted

    for nid, plist in neighbor_lists.items():
        if nid in heard_from:
            continue
        _decay_in_place(plist, cfg, shift, sigma_shift)


def _decay_in_place(plist: PheromoneList, cfg, shift, sigma_shift):
    if not len(plist):
        return
    plist.positions = plist.positions + shift
    plist.covs = plist.covs + sigma_shift
    plist.weights = plist.weights * (1.0 - cfg.w_decay)
    keep = plist.weights > cfg.w_floor
    if not keep.all():
        plist.positions = plist.positions[keep]
        plist.covs = plist.covs[keep]
        plist.weights = plist.weights[keep]


def diffuse_region(p: Pheromone, footprint_radius: float,
                   geometry: GridGeometry) -> np.ndarray:
    """Rasterize one deposit's diffused region.

    The region is the disk of ``footprint_radius`` around the deposit,
    convolved with a Gaussian kernel of the deposit's covariance (truncated
    at 3 sigma) and rescaled so the peak equals the deposit weight.  With a
    negligible covariance this is exactly a weight-high plateau on the disk.
    """
    if footprint_radius <= 0:
        raise ValueError("footprint radius must be positive")
    xs, ys = geometry.centers()
    dx = xs - p.position[0]
    dy = ys - p.position[1]
    disk = (dx ** 2 + dy ** 2 <= footprint_radius ** 2).astype(float)

    if np.abs(p.cov).max() <= _DELTA_COV_TOL:
        return p.weight * disk
    if not disk.any():
        return np.zeros_like(disk)

    sig_max = math.sqrt(max(np.linalg.eigvalsh(p.cov).max(), 0.0))
    half = max(1, int(math.ceil(3.0 * sig_max / geometry.cell_size)))
    ax = np.arange(-half, half + 1) * geometry.cell_size
    kx, ky = np.meshgrid(ax, ax, indexing="ij")
    cov = p.cov + np.eye(2) * 1e-12
    inv = np.linalg.inv(cov)
    quad = inv[0, 0] * kx ** 2 + 2 * inv[0, 1] * kx * ky + inv[1, 1] * ky ** 2
    kernel = np.exp(-0.5 * quad)
    kernel[quad > 9.0] = 0.0  # truncate at 3 sigma (Mahalanobis)

    out = fftconvolve(disk, kernel, mode="same")
    peak = out.max()
    if peak > 0:
        out *= p.weight / peak
    np.clip(out, 0.0, None, out=out)
    return out


def build_map(regions, geometry: GridGeometry) -> PheromoneGrid:
    """Cell-wise maximum of diffused regions; empty input gives a zero map."""
    weights = np.zeros((geometry.n, geometry.n))
    for region in regions:
        if region.shape != weights.shape:
            raise ValueError(
                f"region shape {region.shape} does not match grid {weights.shape}"
            )
        np.maximum(weights, region, out=weights)
    return PheromoneGrid(geometry, weights)


def delta_map(positions, weights, footprint_radius: float,
              geometry: GridGeometry) -> PheromoneGrid:
    """Fast map build for delta-kernel (zero-covariance) deposits.

    Equivalent to :func:`build_map` over :func:`diffuse_region` outputs when
    every covariance is negligible, but stamps only the sub-window each disk
    touches.  Used by the agent loop in the ideal-simulation presets.
    """
    grid = np.zeros((geometry.n, geometry.n))
    if len(weights) == 0:
        return PheromoneGrid(geometry, grid)
    cell = geometry.cell_size
    half = int(math.ceil(footprint_radius / cell)) + 1
    order = np.argsort(weights)  # stamp strongest last; max makes order moot
    coords = geometry.coords
    r2 = footprint_radius ** 2
    for idx in order:
        px, py = positions[idx]
        i0, j0 = geometry.index_of((px, py))
        lo_i, hi_i = max(0, i0 - half), min(geometry.n, i0 + half + 1)
        lo_j, hi_j = max(0, j0 - half), min(geometry.n, j0 + half + 1)
        if lo_i >= hi_i or lo_j >= hi_j:
            continue
        dx = coords[lo_i:hi_i] - px
        dy = coords[lo_j:hi_j] - py
        mask = dx[:, None] ** 2 + dy[None, :] ** 2 <= r2
        sub = grid[lo_i:hi_i, lo_j:hi_j]
        np.maximum(sub, np.where(mask, weights[idx], 0.0), out=sub)
    return PheromoneGrid(geometry, grid)


def pheromone_value_at(point, positions, weights, footprint_radius: float,
                       geometry: GridGeometry) -> float:
    """Map value at one point for delta-kernel deposits, without a raster.

    Evaluates at the containing cell's center so the result matches
    ``delta_map(...).value_at(point)`` exactly.
    """
    if len(weights) == 0:
        return 0.0
    i, j = geometry.index_of(point)
    center = np.array([geometry.coords[i], geometry.coords[j]])
    d2 = ((positions - center) ** 2).sum(axis=1)
    hit = d2 <= footprint_radius ** 2
    return float(weights[hit].max()) if hit.any() else 0.0


def exploration_waypoint(grid: PheromoneGrid, carried, shift, r_c: float,
                         q_star: float, rng, valid=None):
    """Exploration waypoint: head for the least-visited cell nearby.

    ``carried`` is the previous (waypoint, stored weight) pair or None.  The
    carried waypoint shifts with the agent and is kept unless the agent has
    (nearly) reached it, the map value at it has risen above the stored
    weight, or it drifted outside the search ball; then a fresh waypoint is
    drawn uniformly among the minimum-weight cells within B(0, r_c).

    ``valid`` is an optional boolean cell mask restricting candidate cells
    (used to keep waypoints inside the physical domain).

    Returns (waypoint, stored weight).
    """
    shift = np.asarray(shift, dtype=float).reshape(2)
    recompute = carried is None
    if not recompute:
        wp = carried[0] + shift
        norm = math.hypot(wp[0], wp[1])
        if norm < q_star or norm > r_c:
            recompute = True
        elif valid is not None and not valid[grid.geometry.index_of(wp)]:
            recompute = True
        elif grid.value_at(wp) > carried[1] + ARGMIN_TOL:
            recompute = True

    if not recompute:
        return wp, grid.value_at(wp)

    geom = grid.geometry
    mask = _ball_mask(geom, r_c)
    if valid is not None:
        mask = mask & valid
        if not mask.any():
            mask = _ball_mask(geom, r_c)
    vals = np.where(mask, grid.weights, np.inf)
    vmin = vals.min()
    ties = np.argwhere(vals <= vmin + ARGMIN_TOL)
    pick = ties[rng.integers(len(ties))]
    wp = np.array([geom.coords[pick[0]], geom.coords[pick[1]]])
    return wp, float(grid.weights[pick[0], pick[1]])


def _ball_mask(geom: GridGeometry, r_c: float):
    if r_c >= geom.radius:
        return geom.in_ball_mask()
    xs, ys = geom.centers()
    return xs ** 2 + ys ** 2 <= r_c ** 2
