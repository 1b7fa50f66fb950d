import os
import sys

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.conftest import circle_network
from src.domain import square
from src.ghm import State
from src.simulator import Simulator
from src.stochastic import defect_survival_curve
from src.visualizer import plot_awake_fraction, plot_state, plot_survival_curves


def test_plots_are_written(tmp_path):
    net = circle_network(4)
    sim = Simulator(net, State([0, 1, 2, 3], 4), 12)
    trace = sim.run()
    plot_state(net, trace.final, square(1.0), str(tmp_path / 'plots' / 'state.png'))
    plot_awake_fraction(sim.get_awake_series(), 4, str(tmp_path / 'awake.png'))
    curve = defect_survival_curve(net, trace.initial, 0.5, 10, 4).curve
    plot_survival_curves({'p_s=0.5': curve}, str(tmp_path / 'survival.png'))
    for name in (os.path.join('plots', 'state.png'), 'awake.png', 'survival.png'):
        assert os.path.getsize(tmp_path / name) > 0


def test_empty_curve_set_still_plots(tmp_path):
    plot_survival_curves({}, str(tmp_path / 'empty.png'))
    assert os.path.exists(tmp_path / 'empty.png')
