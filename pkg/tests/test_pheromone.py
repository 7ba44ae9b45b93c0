"""Tests for pheromone storage, diffusion, map building, and exploration."""

import math

import numpy as np
import pytest

from pherotrack.pheromone import (ARGMIN_TOL, GridGeometry, Pheromone,
                                  PheromoneConfig, PheromoneGrid,
                                  PheromoneList, build_map, delta_map,
                                  diffuse_region, exploration_waypoint,
                                  pheromone_value_at, update_pheromones)

ZERO2 = np.zeros(2)
ZERO22 = np.zeros((2, 2))


def default_cfg(**kw):
    base = dict(w_init=35.0, w_decay=0.16, w_floor=0.1,
                footprint_radius=4.0, cell_size=0.25)
    base.update(kw)
    return PheromoneConfig(**base)


def step_own(own, cfg, n=1, shift=ZERO2, sigma=ZERO22):
    for _ in range(n):
        update_pheromones(own, {}, [], shift, sigma, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        default_cfg(w_decay=0.0)
    with pytest.raises(ValueError):
        default_cfg(w_decay=1.0)
    with pytest.raises(ValueError):
        default_cfg(w_floor=40.0)


def test_single_decay_step():
    cfg = default_cfg()
    own = PheromoneList(1)
    own.append([0.0, 0.0], ZERO22, 35.0)
    update_pheromones(own, {}, [], ZERO2, ZERO22, cfg)
    # Old deposit decays 35 -> 29.4; a fresh one is stamped at full weight.
    assert len(own) == 2
    assert math.isclose(sorted(own.weights)[0], 29.4)
    assert math.isclose(sorted(own.weights)[1], 35.0)


def test_deposit_deleted_at_floor():
    cfg = default_cfg()
    own = PheromoneList(1)
    own.append([1.0, 1.0], ZERO22, 0.11)
    update_pheromones(own, {}, [], ZERO2, ZERO22, cfg)
    # 0.11 * 0.84 = 0.0924 <= 0.1: gone; only the fresh deposit remains.
    assert len(own) == 1
    assert math.isclose(own.weights[0], 35.0)


def test_deposit_lifetime_is_exactly_34_steps():
    cfg = default_cfg()
    # Closed form: the weight after n decays is 35 * 0.84^n.
    assert 35.0 * 0.84 ** 33 > 0.1
    assert 35.0 * 0.84 ** 34 <= 0.1
    # Empirically: a marked deposit survives 34 storage rounds.
    own = PheromoneList(1)
    own.append([123.0, 0.0], ZERO22, cfg.w_init)   # distinguishable position
    alive = 0
    for _ in range(50):
        if any(p[0] == 123.0 for p in own.positions):
            alive += 1
        update_pheromones(own, {}, [], ZERO2, ZERO22, cfg)
    assert alive == 34


def test_steady_state_list_length_and_bound():
    cfg = default_cfg()
    own = PheromoneList(1)
    step_own(own, cfg, n=60)
    assert len(own) == 34
    assert len(own) <= cfg.max_list_length()


def test_shift_and_covariance_growth():
    cfg = default_cfg()
    own = PheromoneList(1)
    own.append([1.0, 2.0], ZERO22, 35.0)
    update_pheromones(own, {}, [], [0.5, -0.5], 0.01 * np.eye(2), cfg)
    old = own.items()[0]
    assert np.allclose(old.position, [1.5, 1.5])
    assert np.allclose(old.cov, 0.01 * np.eye(2))
    # The fresh deposit marks the previously-occupied point = the shift.
    new = own.items()[1]
    assert np.allclose(new.position, [0.5, -0.5])


def test_received_list_replaces_and_converts_frame():
    cfg = default_cfg()
    own = PheromoneList(1)
    neighbors = {}
    incoming = PheromoneList(2)
    incoming.append([1.0, 0.0], ZERO22, 10.0)
    update_pheromones(own, neighbors, [(2, incoming, [5.0, 5.0])],
                      ZERO2, ZERO22, cfg)
    assert np.allclose(neighbors[2].positions[0], [6.0, 5.0])
    # The sender's copy is untouched.
    assert np.allclose(incoming.positions[0], [1.0, 0.0])
    # Silent next round: the stored copy decays and shifts like our own.
    update_pheromones(own, neighbors, [], [1.0, 0.0], ZERO22, cfg)
    assert np.allclose(neighbors[2].positions[0], [7.0, 5.0])
    assert math.isclose(neighbors[2].weights[0], 8.4)


# -- diffusion and map building ---------------------------------------------


def test_diffuse_delta_cov_is_weighted_disk():
    geom = GridGeometry(3.0, 0.5)
    p = Pheromone([0.0, 0.0], ZERO22, 7.0)
    region = diffuse_region(p, 1.0, geom)
    xs, ys = geom.centers()
    want = 7.0 * ((xs ** 2 + ys ** 2) <= 1.0)
    assert np.array_equal(region, want)


def naive_diffuse(p, footprint_radius, geom):
    """Direct-convolution oracle for diffuse_region (delta-free path)."""
    xs, ys = geom.centers()
    disk = ((xs - p.position[0]) ** 2
            + (ys - p.position[1]) ** 2 <= footprint_radius ** 2).astype(float)
    sig_max = math.sqrt(max(np.linalg.eigvalsh(p.cov).max(), 0.0))
    half = max(1, int(math.ceil(3.0 * sig_max / geom.cell_size)))
    inv = np.linalg.inv(p.cov + np.eye(2) * 1e-12)
    out = np.zeros_like(disk)
    n = geom.n
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for di in range(-half, half + 1):
                for dj in range(-half, half + 1):
                    si, sj = i - di, j - dj
                    if not (0 <= si < n and 0 <= sj < n):
                        continue
                    if disk[si, sj] == 0.0:
                        continue
                    kx = di * geom.cell_size
                    ky = dj * geom.cell_size
                    quad = (inv[0, 0] * kx * kx + 2 * inv[0, 1] * kx * ky
                            + inv[1, 1] * ky * ky)
                    if quad > 9.0:
                        continue
                    acc += math.exp(-0.5 * quad)
            out[i, j] = acc
    peak = out.max()
    if peak > 0:
        out *= p.weight / peak
    return out


def test_diffuse_matches_naive_convolution_oracle():
    rng = np.random.default_rng(31)
    geom = GridGeometry(2.0, 0.5)
    for _ in range(5):
        m = rng.standard_normal((2, 2)) * 0.3
        cov = m @ m.T + 0.05 * np.eye(2)
        p = Pheromone(rng.uniform(-1.0, 1.0, 2), cov, rng.uniform(1.0, 30.0))
        got = diffuse_region(p, 1.0, geom)
        want = naive_diffuse(p, 1.0, geom)
        assert np.allclose(got, want, atol=1e-9)


def test_diffuse_symmetry():
    geom = GridGeometry(3.0, 0.25)
    p = Pheromone([0.0, 0.0], 0.2 * np.eye(2), 10.0)
    region = diffuse_region(p, 1.5, geom)
    assert np.allclose(region, region[::-1, :], atol=1e-9)
    assert np.allclose(region, region[:, ::-1], atol=1e-9)
    assert np.allclose(region, region.T, atol=1e-9)


def test_diffuse_validation_and_empty_disk():
    geom = GridGeometry(2.0, 0.5)
    with pytest.raises(ValueError):
        diffuse_region(Pheromone([0.0, 0.0], ZERO22, 1.0), 0.0, geom)
    far = Pheromone([50.0, 50.0], 0.1 * np.eye(2), 1.0)
    assert np.array_equal(diffuse_region(far, 1.0, geom),
                          np.zeros((geom.n, geom.n)))


def test_build_map_is_cellwise_max():
    geom = GridGeometry(2.0, 0.5)
    a = np.full((geom.n, geom.n), 1.0)
    b = np.zeros((geom.n, geom.n))
    b[0, 0] = 5.0
    grid = build_map([a, b], geom)
    assert grid.weights[0, 0] == 5.0
    assert grid.weights[1, 1] == 1.0
    empty = build_map([], geom)
    assert not empty.weights.any()
    with pytest.raises(ValueError):
        build_map([np.zeros((3, 3))], geom)


def test_delta_map_equals_build_map_over_diffused_regions():
    rng = np.random.default_rng(37)
    geom = GridGeometry(6.0, 0.25)
    for _ in range(20):
        k = int(rng.integers(1, 8))
        positions = rng.uniform(-5.0, 5.0, size=(k, 2))
        weights = rng.uniform(0.5, 35.0, size=k)
        regions = [diffuse_region(Pheromone(p, ZERO22, w), 2.0, geom)
                   for p, w in zip(positions, weights)]
        want = build_map(regions, geom).weights
        got = delta_map(positions, weights, 2.0, geom).weights
        assert np.array_equal(got, want)


def test_pheromone_value_at_matches_delta_map():
    rng = np.random.default_rng(41)
    geom = GridGeometry(6.0, 0.25)
    positions = rng.uniform(-5.0, 5.0, size=(10, 2))
    weights = rng.uniform(0.5, 35.0, size=10)
    grid = delta_map(positions, weights, 2.0, geom)
    for _ in range(200):
        pt = rng.uniform(-6.0, 6.0, 2)
        assert pheromone_value_at(pt, positions, weights, 2.0, geom) \
            == grid.value_at(pt)
    assert pheromone_value_at([0.0, 0.0], np.empty((0, 2)), np.empty(0),
                              2.0, geom) == 0.0


def test_pgm_dump(tmp_path):
    geom = GridGeometry(1.0, 0.5)
    grid = PheromoneGrid(geom, np.array([[0.0, 0.1], [1.0, 35.0]]))
    path = tmp_path / "map.pgm"
    grid.to_pgm(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "P2"
    assert lines[1] == "2 2"
    assert lines[2] == "35000"
    vals = [int(v) for row in lines[3:] for v in row.split()]
    assert vals == [0, 100, 1000, 35000]


# -- exploration waypoint ----------------------------------------------------


def test_waypoint_minimality_over_randomized_maps():
    rng = np.random.default_rng(43)
    geom = GridGeometry(12.0, 0.25)
    mask = geom.in_ball_mask()
    for _ in range(1000):
        weights = rng.uniform(0.0, 35.0, size=(geom.n, geom.n))
        grid = PheromoneGrid(geom, weights)
        wp, w = exploration_waypoint(grid, None, ZERO2, 12.0, 0.5, rng)
        vmin = weights[mask].min()
        assert w <= vmin + ARGMIN_TOL
        assert grid.value_at(wp) == w
        assert math.hypot(wp[0], wp[1]) <= 12.0 + geom.cell_size


def test_waypoint_carried_shifts_until_reached():
    geom = GridGeometry(4.0, 0.25)
    grid = PheromoneGrid(geom, np.zeros((geom.n, geom.n)))
    rng = np.random.default_rng(0)
    carried = (np.array([2.0, 0.0]), 0.0)
    wp, w = exploration_waypoint(grid, carried, [-0.5, 0.0], 4.0, 0.5, rng)
    assert np.allclose(wp, [1.5, 0.0])
    # Within q_star of the goal: a fresh waypoint is drawn.
    near = (np.array([0.6, 0.0]), 0.0)
    wp2, _ = exploration_waypoint(grid, near, [-0.4, 0.0], 4.0, 0.5, rng)
    assert not np.allclose(wp2, [0.2, 0.0])


def test_waypoint_recomputed_when_value_rises_or_ball_left():
    geom = GridGeometry(4.0, 0.25)
    weights = np.zeros((geom.n, geom.n))
    grid = PheromoneGrid(geom, weights)
    rng = np.random.default_rng(1)
    # Map value at the carried cell rose above the stored weight.
    i, j = geom.index_of([2.0, 0.0])
    weights[i, j] = 5.0
    wp, w = exploration_waypoint(grid, (np.array([2.0, 0.0]), 0.0),
                                 ZERO2, 4.0, 0.5, rng)
    assert w == 0.0
    assert not np.allclose(wp, [2.0, 0.0])
    # Carried waypoint drifted outside the search ball.
    wp2, _ = exploration_waypoint(grid, (np.array([3.9, 0.0]), 0.0),
                                  [0.5, 0.0], 4.0, 0.5, rng)
    assert math.hypot(wp2[0], wp2[1]) <= 4.0 + geom.cell_size


def test_waypoint_uniform_tie_break_hits_all_minima():
    geom = GridGeometry(1.0, 0.5)      # 4x4 grid, tiny
    weights = np.ones((geom.n, geom.n))
    mask = geom.in_ball_mask()
    lows = [(1, 1), (2, 2)]
    for i, j in lows:
        weights[i, j] = 0.0
    grid = PheromoneGrid(geom, weights)
    rng = np.random.default_rng(2)
    seen = set()
    for _ in range(100):
        wp, w = exploration_waypoint(grid, None, ZERO2, 1.0, 0.1, rng)
        assert w == 0.0
        seen.add(geom.index_of(wp))
    assert seen == set(lows)


def test_waypoint_valid_mask_restricts_candidates():
    geom = GridGeometry(2.0, 0.5)
    weights = np.ones((geom.n, geom.n))
    i, j = geom.index_of([-1.0, 0.0])
    weights[i, j] = 0.0                 # global minimum, but masked out
    valid = np.ones_like(weights, dtype=bool)
    valid[i, j] = False
    grid = PheromoneGrid(geom, weights)
    rng = np.random.default_rng(3)
    wp, w = exploration_waypoint(grid, None, ZERO2, 2.0, 0.1, rng,
                                 valid=valid)
    assert geom.index_of(wp) != (i, j)
    assert w == 1.0
