from typing import Optional

import numpy as np
import pandas as pd

from .errors import InsufficientTrace
from .simulator import RunTrace


def _last_change_rows(eq: np.ndarray) -> np.ndarray:
    """Per column: first row index from which `eq` stays True to the end."""
    rows = eq.shape[0]
    if rows == 0:
        return np.zeros(eq.shape[1], dtype=int)
    bad = ~eq
    any_bad = bad.any(axis=0)
    last_bad = rows - 1 - np.argmax(bad[::-1], axis=0)
    return np.where(any_bad, last_bad + 1, 0)


class PeriodicityDetector:
    def __init__(self, trace: RunTrace, window: Optional[int] = None):
        """
        Initialize the PeriodicityDetector.

        Args:
            trace (RunTrace): Run with retained snapshots.
            window (int): Largest period searched (default 3n).
        """
        self.trace = trace
        self.n = trace.initial.n
        self.window = window or 3 * self.n
        self.df = None

    def detect(self) -> pd.DataFrame:
        """
        Smallest period per node over the tail of the trace.

        Returns:
            pd.DataFrame: Columns 'eventually_periodic', 'period', 'onset', indexed by node id.
        """
        ticks, history = self.trace.history()
        w = self.window
        if len(ticks) < 2 * w:
            raise InsufficientTrace(f"Need {2 * w} retained snapshots, trace has {len(ticks)}")
        tail = history[-2 * w:]
        n_nodes = history.shape[1]

        period = np.full(n_nodes, -1, dtype=int)
        for k in range(1, w + 1):
            open_ = period < 0
            if not open_.any():
                break
            ok = (tail[-w:] == tail[-w - k:-k]).all(axis=0)
            period[open_ & ok] = k

        onset = np.full(n_nodes, -1, dtype=int)
        for k in np.unique(period[period > 0]):
            cols = period == k
            eq = history[k:, cols] == history[:-k, cols]
            onset[cols] = ticks[0] + _last_change_rows(eq)

        periodic = period > 0
        self.df = pd.DataFrame({
            'eventually_periodic': periodic,
            'period': pd.array(np.where(periodic, period, 0), dtype='Int64'),
            'onset': pd.array(np.where(periodic, onset, 0), dtype='Int64'),
        }, index=pd.RangeIndex(n_nodes, name='node_id'))
        self.df.loc[~periodic, ['period', 'onset']] = pd.NA
        return self.df

    def get_summary(self) -> dict:
        """
        Aggregate view of the detection.

        Returns:
            dict: Periodic fraction, n-periodicity and latest onset.
        """
        if self.df is None:
            self.detect()
        df = self.df
        periodic = df['eventually_periodic']
        periods = df.loc[periodic, 'period'].astype(int)
        return {
            'periodic_fraction': float(periodic.mean()) if len(df) else 1.0,
            'all_n_periodic': bool(periodic.all() and (self.n % periods == 0).all()),
            'max_onset': int(df.loc[periodic, 'onset'].max()) if periodic.any() else None,
            'window': self.window,
        }


def detect_periodicity(trace: RunTrace, window: Optional[int] = None) -> pd.DataFrame:
    return PeriodicityDetector(trace, window).detect()
