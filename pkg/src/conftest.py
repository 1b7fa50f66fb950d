import os
import sys

import numpy as np
import pytest

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.domain import annulus_frame, figure_eight
from src.network import build_network

SPACING = 0.125
LATTICE_R = 2.05 * SPACING


def lattice_points(domain, spacing=SPACING):
    """Square lattice points inside the domain, walls included."""
    xmin, ymin, xmax, ymax = domain.bounds
    nx = int(round((xmax - xmin) / spacing))
    ny = int(round((ymax - ymin) / spacing))
    gx, gy = np.meshgrid(xmin + np.arange(nx + 1) * spacing, ymin + np.arange(ny + 1) * spacing)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return pts[domain.contains_points(pts)]


def lattice_network(domain, spacing=SPACING):
    r = 2.05 * spacing
    return build_network(lattice_points(domain, spacing), r, r)


def circle_network(m, radius=1.0):
    """m nodes on a circle, each linked to its two ring neighbors only."""
    angles = 2.0 * np.pi * np.arange(m) / m
    pts = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    chord = 2.0 * radius * np.sin(np.pi / m)
    return build_network(pts, 1.05 * chord, chord)


@pytest.fixture(scope='session')
def annulus_lattice():
    domain = annulus_frame(5.0, 1.0)
    return domain, lattice_network(domain)


@pytest.fixture(scope='session')
def figure_eight_lattice():
    domain = figure_eight(10.0, 1.0)
    return domain, lattice_network(domain)


def wall_network(length=4.0, width=1.0, eps=0.3):
    """Nodes every eps/2 along both walls of a corridor plus a middle row."""
    xs = np.arange(0.0, length + 1e-9, eps / 2.0)
    rows = [np.column_stack([xs, np.full(len(xs), y)]) for y in (0.1, width / 2.0, width - 0.1)]
    return build_network(np.vstack(rows), 1.5 * eps, eps)
