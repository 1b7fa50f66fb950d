import os
import sys

import numpy as np
import pytest

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.conftest import LATTICE_R, circle_network, lattice_points
from src.domain import corridor
from src.errors import BasisMismatch, InsufficientCorridorLength, SparseBand
from src.ghm import State, is_continuous
from src.initial_conditions import ProgrammedClass, WavePattern
from src.network import build_network
from src.simulator import run
from src.topology import cohomology_class, homology_basis
from src.waves import WaveSpec, band_length, realize_class, sever_defect_links, single_wave, wave_slots


@pytest.fixture(scope='module')
def annulus_basis(annulus_lattice):
    return homology_basis(annulus_lattice[1])


@pytest.fixture(scope='module')
def figure_eight_basis(figure_eight_lattice):
    return homology_basis(figure_eight_lattice[1])


def top_corridor_wave(domain, net, n, direction=1, slot=0, count=1):
    eid = domain.skeleton.non_tree_edges[0]
    front = wave_slots(domain, eid, n, net.r, count, direction)[slot]
    return single_wave(net, domain, WaveSpec(eid, front, direction, n))


def test_band_length():
    assert band_length(4, 0.5) == pytest.approx(2.5)


def test_wave_spec_validation():
    with pytest.raises(ValueError):
        WaveSpec(0, 1.0, 0, 4)
    with pytest.raises(ValueError):
        WaveSpec(0, 1.0, 1, 2)


def test_wave_slots_respect_free_span(annulus_lattice):
    domain, net = annulus_lattice
    eid = domain.skeleton.non_tree_edges[0]
    lo, hi = domain.skeleton.edges[eid].free_span
    fronts = wave_slots(domain, eid, 3, net.r, 2, 1)
    assert len(fronts) == 2
    assert fronts[1] - fronts[0] == pytest.approx(band_length(3, net.r))
    assert lo < fronts[0] < fronts[1] < hi
    with pytest.raises(InsufficientCorridorLength):
        wave_slots(domain, eid, 4, net.r, 2, 1)


def test_single_wave_is_continuous_and_points_forward(annulus_lattice):
    domain, net = annulus_lattice
    n = 4
    state = top_corridor_wave(domain, net, n)
    assert is_continuous(net, state)[0]
    assert set(np.unique(state.values).tolist()) == set(range(n))
    edge = domain.skeleton.edges[domain.skeleton.non_tree_edges[0]]
    arc = edge.arc_of(net.positions)
    # The front carries the ones, the tail the n-1 values
    assert arc[state.values == 1].mean() > arc[state.values == n - 1].mean()
    backward = top_corridor_wave(domain, net, n, direction=-1)
    assert arc[backward.values == 1].mean() < arc[backward.values == n - 1].mean()


def test_unit_waves_carry_opposite_classes(annulus_lattice, annulus_basis):
    domain, net = annulus_lattice
    forward = cohomology_class(top_corridor_wave(domain, net, 4), annulus_basis)
    backward = cohomology_class(top_corridor_wave(domain, net, 4, direction=-1), annulus_basis)
    assert abs(forward.coeffs[0]) == 1
    assert forward.coeffs[0] == -backward.coeffs[0]


def test_wave_pattern_adds_classes(annulus_lattice, annulus_basis):
    domain, net = annulus_lattice
    eid = domain.skeleton.non_tree_edges[0]
    fronts = wave_slots(domain, eid, 3, net.r, 2, 1)
    pattern = WavePattern([WaveSpec(eid, f, 1, 3) for f in fronts]).generate(net, domain, annulus_basis)
    unit = cohomology_class(top_corridor_wave(domain, net, 3, count=2), annulus_basis)
    assert cohomology_class(pattern, annulus_basis).to_list() == [2 * unit.coeffs[0]]


@pytest.mark.parametrize("target", [[1], [-1], [2], [-2], [0]])
def test_realize_class_on_annulus(annulus_lattice, annulus_basis, target):
    domain, net = annulus_lattice
    state = realize_class(net, domain, annulus_basis, target, 3)
    assert is_continuous(net, state)[0]
    assert cohomology_class(state, annulus_basis).to_list() == target


def test_realize_class_needs_room(annulus_lattice, annulus_basis):
    domain, net = annulus_lattice
    with pytest.raises(InsufficientCorridorLength):
        realize_class(net, domain, annulus_basis, [2], 4)


def test_realize_class_checks_target_length(annulus_lattice, annulus_basis):
    domain, net = annulus_lattice
    with pytest.raises(BasisMismatch):
        realize_class(net, domain, annulus_basis, [1, 0], 3)


@pytest.mark.parametrize("target", [[1, 0], [0, 1], [1, 1], [-1, 1], [2, -1]])
def test_programmed_class_survives_on_figure_eight(figure_eight_lattice, figure_eight_basis, target):
    domain, net = figure_eight_lattice
    n = 4
    state = ProgrammedClass(target, n).generate(net, domain, figure_eight_basis)
    assert cohomology_class(state, figure_eight_basis).to_list() == target
    trace = run(net, state, 5 * n, keep_snapshots=1)
    assert cohomology_class(trace.final, figure_eight_basis).to_list() == target
    assert not trace.final.is_zero()


def test_sparse_band_is_rejected():
    domain = corridor(10.0, 1.0)
    net = build_network([(float(x), 0.5) for x in range(11)], 1.1, 1.1)
    with pytest.raises(SparseBand):
        single_wave(net, domain, WaveSpec(0, 6.0, 1, 3))


def test_wave_front_must_span_the_corridor():
    domain = corridor(10.0, 1.0)
    pts = lattice_points(domain)
    spec = WaveSpec(0, 6.0, 1, 3)
    full = build_network(pts, LATTICE_R, LATTICE_R)
    assert is_continuous(full, single_wave(full, domain, spec))[0]
    # Front slab keeps only the nodes near the lower wall
    gap = (pts[:, 0] >= 6.0) & (pts[:, 0] <= 6.0 + LATTICE_R) & (pts[:, 1] > 0.25)
    thinned = build_network(pts[~gap], LATTICE_R, LATTICE_R)
    with pytest.raises(SparseBand, match="does not span"):
        single_wave(thinned, domain, spec)


def test_severing_a_seed_kills_the_ring():
    net = circle_network(4)
    state = State([0, 1, 2, 3], 4)
    cut = sever_defect_links(net, state)
    assert cut.n_edges == net.n_edges - 1
    assert not cut.are_neighbors(0, 1)
    assert run(cut, state, 4).final.is_zero()
    assert not run(net, state, 4).final.is_zero()


def test_severing_scopes():
    net = build_network([(float(i), 0.0) for i in range(6)], 1.1, 1.0)
    state = State([1, 0, 0, 0, 0, 0], 4)
    # No seed: nothing to cut and the same network comes back
    assert sever_defect_links(net, state) is net
    cut = sever_defect_links(net, state, scope='all')
    assert cut.n_edges == net.n_edges - 1
    with pytest.raises(ValueError):
        sever_defect_links(net, state, scope='some')
