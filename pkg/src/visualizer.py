import os

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd

from .config import log
from .domain import HallwayDomain
from .ghm import State
from .network import Network


def _save(filename: str):
    folder = os.path.dirname(filename)
    if folder:
        os.makedirs(folder, exist_ok=True)
    plt.savefig(filename)
    log(f"Plot saved to {filename}", 'info')
    plt.close()


def plot_state(network: Network, state: State, domain: HallwayDomain, filename: str = 'state.png'):
    """
    Scatter the nodes colored by state, awake nodes in dark blue.

    Args:
        network (Network): Node positions.
        state (State): Values to color by.
        domain (HallwayDomain): Rectangles drawn as outlines.
        filename (str): Output filename for the plot.
    """
    fig, ax = plt.subplots(figsize=(10, 10))
    for xmin, ymin, xmax, ymax in domain.rects:
        ax.add_patch(plt.Rectangle((xmin, ymin), xmax - xmin, ymax - ymin, fill=False, color='lightgray', lw=0.5))
    pos = network.positions
    sc = ax.scatter(pos[:, 0], pos[:, 1], c=state.values, cmap='viridis', vmin=0, vmax=state.n - 1, s=2)
    fig.colorbar(sc, ax=ax, label='state')
    ax.set_aspect('equal')
    ax.set_title(f'GHM state at t={state.tick} (n={state.n})')
    _save(filename)


def plot_awake_fraction(series: pd.Series, n: int, filename: str = 'awake_fraction.png'):
    plt.figure(figsize=(12, 6))
    plt.plot(series.index, series.values, label='Awake fraction', color='blue')
    plt.axhline(1.0 / n, color='red', linestyle='--', label='1/n')
    plt.title('Fraction of nodes in state 0')
    plt.xlabel('Tick')
    plt.ylabel('Awake fraction')
    plt.legend()
    plt.grid(True)
    _save(filename)


def plot_survival_curves(curves: dict, filename: str = 'survival_curves.png'):
    """
    Plot dead-by-tick fractions for several link success probabilities.

    Args:
        curves (dict): {label: DataFrame with dead_fraction, ci_low, ci_high indexed by tick}.
        filename (str): Output filename.
    """
    plt.figure(figsize=(12, 6))
    for name, df in curves.items():
        plt.plot(df.index, df['dead_fraction'], label=name)
        plt.fill_between(df.index, df['ci_low'], df['ci_high'], alpha=0.2)
    plt.title('Seed death under link failures')
    plt.xlabel('Tick')
    plt.ylabel('Fraction of runs without a seed')
    plt.legend()
    plt.grid(True)
    _save(filename)
