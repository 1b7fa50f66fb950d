import os
import sys
from itertools import combinations

import numpy as np
import pytest

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.conftest import lattice_points, wall_network
from src.domain import corridor, sample_points, square
from src.errors import DisconnectedNetwork, NoBoundaryPath
from src.network import (augment_boundary_sensors, build_network, extract_boundary_paths,
                         local_hole_check, max_boundary_distance, shadow_covers)


def test_complete_triple():
    side = 0.9
    pts = [(0.0, 0.0), (side, 0.0), (side / 2.0, side * np.sqrt(3) / 2.0)]
    net = build_network(pts, 1.0, 1.0)
    assert net.n_edges == 3
    assert len(net.triangles) == 1


def test_far_pair_has_no_edge():
    net = build_network([(0.0, 0.0), (1.1, 0.0)], 1.0, 1.0)
    assert net.n_edges == 0
    assert net.neighbors(0) == []


def test_edges_and_triangles_match_brute_force():
    pts = sample_points(square(1.0), 150, 3)
    r = 0.15
    net = build_network(pts, r, r)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)
    close = d2 <= r * r
    edges = [(i, j) for i, j in combinations(range(len(pts)), 2) if close[i, j]]
    tris = [(i, j, k) for i, j, k in combinations(range(len(pts)), 3) if close[i, j] and close[i, k] and close[j, k]]
    assert [tuple(e) for e in net.edges.tolist()] == edges
    assert [tuple(t) for t in net.triangles.tolist()] == tris
    for i in range(len(pts)):
        for j in net.neighbors(i):
            assert i in net.neighbors(j)
            assert i != j


def test_mean_degree_near_poisson():
    pts = sample_points(square(200.0), 16250, 0)
    net = build_network(pts, 1.5, 1.5)
    lam = 16250 / 200.0 ** 2
    expected = lam * np.pi * 1.5 ** 2
    # Boundary losses only lower the mean slightly
    assert 0.95 * expected < net.degrees().mean() < 1.02 * expected


def test_shadow_of_large_triangle_covers_square():
    pts = [(-0.1, -0.1), (2.5, -0.1), (-0.1, 2.5)]
    net = build_network(pts, 4.0, 1.0)
    report = shadow_covers(net, square(1.0), 0.1)
    assert report.covered_fraction == 1.0
    assert report.uncovered_cells == []


def test_disk_mode_with_no_nodes_covers_nothing():
    net = build_network([(0.5, 0.5)], 1.0, 1.0)
    report = shadow_covers(net, square(1.0), 0.1, mode='disk', nodes=[])
    assert report.covered_fraction == 0.0
    assert len(report.uncovered_cells) == report.n_cells


def test_dense_corridor_disk_coverage():
    domain = corridor(5.0, 1.0)
    pts = sample_points(domain, 400, 11)
    net = build_network(pts, 0.5, 0.5)
    report = shadow_covers(net, domain, 0.5 / 4, mode='disk')
    assert report.covered_fraction == 1.0


def test_local_hole_in_empty_square():
    pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    net = build_network(pts, 1.1, 1.0)
    report = local_hole_check(net, square(3.0))
    assert report.rips_h1_rank == 1
    assert report.domain_h1_rank == 0
    assert report.has_local_hole


def test_single_node_has_no_hole():
    net = build_network([(0.5, 0.5)], 1.0, 1.0)
    report = local_hole_check(net, square(1.0))
    assert (report.rips_h1_rank, report.domain_h1_rank, report.has_local_hole) == (0, 0, False)


def test_dense_annulus_has_no_local_hole(annulus_lattice):
    domain, net = annulus_lattice
    report = local_hole_check(net, domain)
    assert report.rips_h1_rank == 1
    assert report.domain_h1_rank == 1
    assert not report.has_local_hole


def test_local_hole_check_needs_connected_network():
    net = build_network([(0.0, 0.0), (5.0, 0.0)], 1.0, 1.0)
    with pytest.raises(DisconnectedNetwork):
        local_hole_check(net, corridor(6.0, 1.0))


def test_boundary_path_on_wall_network():
    domain = corridor(4.0, 1.0)
    net = wall_network()
    paths = extract_boundary_paths(net, domain)
    assert len(paths) == 1
    path = paths[0]
    assert path is not None
    assert len(set(path.node_ids)) == len(path.node_ids)
    for a, b in zip(path.node_ids[:-1], path.node_ids[1:]):
        assert net.are_neighbors(a, b)
    assert max_boundary_distance(path, net, domain) <= net.eps


def test_no_boundary_path_far_from_boundary():
    domain = square(10.0)
    net = build_network([(5.0, 5.0), (5.2, 5.0)], 0.5, 0.5)
    assert extract_boundary_paths(net, domain) == [None]
    with pytest.raises(NoBoundaryPath):
        augment_boundary_sensors(net, domain)


def test_augmentation_keeps_disk_coverage():
    domain = corridor(4.0, 1.0)
    net = wall_network()
    aug = augment_boundary_sensors(net, domain)
    assert aug.network.n_nodes > net.n_nodes
    assert np.array_equal(aug.clone_of[:net.n_nodes], np.arange(net.n_nodes))
    before = shadow_covers(net, domain, 0.05, mode='disk')
    after = shadow_covers(aug.network, domain, 0.05, mode='disk', centers=aug.coverage_centers())
    assert before.uncovered_cells == after.uncovered_cells
    # Clones sit on the boundary
    clones = aug.network.positions[net.n_nodes:]
    d, _ = domain.distance_to_boundary(clones, 0)
    assert np.allclose(d, 0.0)


def test_augmentation_fills_wall_strips():
    domain = corridor(4.0, 1.0)
    net = wall_network()
    aug = augment_boundary_sensors(net, domain)
    before = shadow_covers(net, domain, net.r / 8)
    after = shadow_covers(aug.network, domain, net.r / 8)
    assert after.covered_fraction > before.covered_fraction
    # Only slivers at the four corners stay outside the shadow
    assert after.covered_fraction >= 0.98


def test_lift_state_copies_originals():
    from src.ghm import State

    domain = corridor(4.0, 1.0)
    net = wall_network()
    state = State(np.arange(net.n_nodes) % 3, 3)
    aug = augment_boundary_sensors(net, domain, state)
    assert np.array_equal(aug.state.values, state.values[aug.clone_of])


def test_clones_follow_their_originals_every_tick():
    from src.evasion import EvasionInstance, coverage_mask
    from src.ghm import State
    from src.simulator import make_rng, run

    domain = corridor(4.0, 1.0)
    net = wall_network()
    state = State(make_rng(5, 1).integers(0, 5, net.n_nodes), 5)
    aug = augment_boundary_sensors(net, domain, state)
    trace = run(net, state, 20)
    lifted = aug.lift_trace(trace)
    assert lifted.snapshot_ticks() == trace.snapshot_ticks()
    clones = aug.clone_of[net.n_nodes:]
    for (_, base), (_, values) in zip(trace.snapshots, lifted.snapshots):
        assert np.array_equal(values[:net.n_nodes], base)
        assert np.array_equal(values[net.n_nodes:], base[clones])
    # Clones never add coverage
    plain = EvasionInstance.from_trace(domain, net, trace, 0.1)
    enlarged = EvasionInstance.from_trace(domain, aug.network, lifted, 0.1, centers=aug.coverage_centers())
    for t in range(21):
        assert np.array_equal(coverage_mask(plain, t), coverage_mask(enlarged, t))


def test_lattice_points_inside(annulus_lattice):
    domain, net = annulus_lattice
    assert domain.contains_points(net.positions).all()
    assert len(lattice_points(domain)) == net.n_nodes
