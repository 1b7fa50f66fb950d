import os
import sys

import numpy as np
import pytest

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.barrier import barrier_report, corridor_walls, is_barrier, wavefront_band
from src.domain import annulus_frame, corridor
from src.errors import BadCorridor
from src.ghm import State
from src.network import build_network


def column_network(top=1.0, x=5.0, eps=0.2):
    ys = np.arange(0.0, top + 1e-9, 0.25)
    pts = np.column_stack([np.full(len(ys), x), ys])
    return build_network(pts, 0.3, eps)


def test_corridor_walls():
    assert corridor_walls((0, 0, 10, 1)) == (0, (0, 1))
    assert corridor_walls((0, 0, 1, 10)) == (1, (0, 1))


def test_full_column_is_a_barrier():
    domain = corridor(10.0, 1.0)
    net = column_network()
    assert is_barrier(net, range(net.n_nodes), domain, domain.rects[0])


def test_half_column_is_not_a_barrier():
    domain = corridor(10.0, 1.0)
    net = column_network(top=0.5)
    assert not is_barrier(net, range(net.n_nodes), domain, domain.rects[0])


def test_gap_breaks_the_chain():
    domain = corridor(10.0, 1.0)
    net = column_network()
    # Dropping the middle node leaves a 0.5 gap, wider than two radii
    assert not is_barrier(net, [0, 1, 3, 4], domain, domain.rects[0])


def test_empty_set_is_not_a_barrier():
    domain = corridor(10.0, 1.0)
    net = column_network()
    assert not is_barrier(net, [], domain, domain.rects[0])


def test_foreign_rectangle_is_rejected():
    domain = corridor(10.0, 1.0)
    net = column_network()
    with pytest.raises(BadCorridor):
        is_barrier(net, [0], domain, (0, 0, 5, 1))


def test_wavefront_band_adds_neighbors():
    pts = [(float(i), 0.0) for i in range(6)]
    net = build_network(pts, 1.1, 1.0)
    state = State([0, 0, 1, 2, 2, 0], 4)
    # Awake nodes 0, 1 and 5 pull in their neighbors 2 and 4
    assert wavefront_band(net, state).tolist() == [0, 1, 2, 4, 5]


def test_barrier_report_keys_each_rectangle():
    domain = annulus_frame(10.0, 1.0)
    net = column_network()
    report = barrier_report(net, range(net.n_nodes), domain)
    assert sorted(report) == [0, 1, 2, 3]
    # The column crosses the bottom corridor only
    assert report[0]
    assert not report[1]
