import hashlib
import json
import os
from typing import Optional

import numpy as np
import pandas as pd

from .config import log
from .errors import ParseError
from .ghm import State
from .network import Network, build_network

FORMAT_VERSION = 1


def _ensure_dir(filename: str):
    folder = os.path.dirname(filename)
    if folder:
        os.makedirs(folder, exist_ok=True)


def _to_builtin(obj):
    if isinstance(obj, dict):
        return {str(k): _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_builtin(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


class DataLoader:
    def __init__(self, base_dir: str = ''):
        """
        Initialize the DataLoader.

        Args:
            base_dir (str): Directory relative paths are resolved against.
        """
        self.base_dir = base_dir

    def path(self, filename: str) -> str:
        return filename if os.path.isabs(filename) or not self.base_dir else os.path.join(self.base_dir, filename)

    # --- States ---

    def save_state(self, state: State, filename: str) -> str:
        """
        Save one snapshot as `tick,node_id,state` rows.
        """
        df = pd.DataFrame({'tick': state.tick, 'node_id': np.arange(len(state.values)), 'state': state.values})
        return self.save_frame(df, filename)

    def save_snapshots(self, snapshots: list, filename: str) -> str:
        """
        Save several snapshots in one CSV.

        Args:
            snapshots (list): (tick, values) pairs.
            filename (str): Output path.
        """
        frames = [pd.DataFrame({'tick': t, 'node_id': np.arange(len(v)), 'state': v}) for t, v in snapshots]
        df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=['tick', 'node_id', 'state'])
        return self.save_frame(df, filename)

    def load_snapshots(self, filename: str) -> Optional[pd.DataFrame]:
        df = self.load_frame(filename)
        if df is None:
            return None
        missing = {'tick', 'node_id', 'state'} - set(df.columns)
        if missing:
            raise ParseError(filename, f"missing columns {sorted(missing)}")
        return df

    def load_state(self, filename: str, n: int, n_nodes: Optional[int] = None, tick: Optional[int] = None) -> Optional[State]:
        """
        Load one snapshot; the earliest tick in the file unless `tick` is given.

        Returns:
            State: The snapshot, or None if the file does not exist.
        """
        df = self.load_snapshots(filename)
        if df is None:
            return None
        t = int(df['tick'].min()) if tick is None else tick
        rows = df[df['tick'] == t].sort_values('node_id')
        size = n_nodes if n_nodes is not None else int(rows['node_id'].max()) + 1
        if len(rows) != size or not np.array_equal(rows['node_id'].to_numpy(), np.arange(size)):
            raise ParseError(filename, f"tick {t} does not list every node 0..{size - 1} once")
        return State(rows['state'].to_numpy(dtype=np.int64), n, t)

    # --- Networks ---

    def save_network(self, network: Network, folder: str) -> list:
        """
        Save positions, edges and radii.

        Returns:
            list: Written file paths.
        """
        nodes = pd.DataFrame({'node_id': np.arange(network.n_nodes),
                              'x': network.positions[:, 0], 'y': network.positions[:, 1]})
        edges = pd.DataFrame(network.edges, columns=['i', 'j'])
        return [
            self.save_frame(nodes, os.path.join(folder, 'nodes.csv')),
            self.save_frame(edges, os.path.join(folder, 'edges.csv')),
            self.save_json({'r': network.r, 'eps': network.eps,
                            'n_nodes': network.n_nodes, 'n_edges': network.n_edges},
                           os.path.join(folder, 'network.json')),
        ]

    def load_positions(self, filename: str) -> Optional[np.ndarray]:
        df = self.load_frame(filename)
        if df is None:
            return None
        if not {'node_id', 'x', 'y'} <= set(df.columns):
            raise ParseError(filename, "positions need node_id, x and y columns")
        df = df.sort_values('node_id')
        return df[['x', 'y']].to_numpy(dtype=float)

    def load_network(self, folder: str) -> Optional[Network]:
        """
        Rebuild a saved network and check its edges against the saved list.
        """
        meta = self.load_json(os.path.join(folder, 'network.json'))
        positions = self.load_positions(os.path.join(folder, 'nodes.csv'))
        if meta is None or positions is None:
            return None
        network = build_network(positions, meta['r'], meta['eps'])
        saved = self.load_frame(os.path.join(folder, 'edges.csv'))
        if saved is not None and not np.array_equal(saved[['i', 'j']].to_numpy().reshape(-1, 2), network.edges):
            raise ParseError(folder, "saved edges differ from the edges rebuilt from positions")
        return network

    # --- Events, witnesses, JSON ---

    def save_events(self, events: list, filename: str) -> str:
        """One JSON line per tick: tick, fired ids and the stalled count."""
        filename = self.path(filename)
        _ensure_dir(filename)
        with open(filename, 'w') as f:
            for e in events:
                f.write(json.dumps({'tick': int(e.tick), 'fired': [int(v) for v in e.fired],
                                    'stalled_count': int(len(e.stalled))}) + '\n')
        log(f"Events saved to {filename}", 'debug')
        return filename

    def load_events(self, filename: str) -> Optional[list]:
        filename = self.path(filename)
        if not os.path.exists(filename):
            print(f"File {filename} does not exist.")
            return None
        out = []
        with open(filename) as f:
            for k, line in enumerate(f, start=1):
                if line.strip():
                    try:
                        out.append(json.loads(line))
                    except json.JSONDecodeError as e:
                        raise ParseError(filename, e.msg, k)
        return out

    def save_witness(self, witness: list, filename: str) -> str:
        df = pd.DataFrame([list(w) for w in witness], columns=['tick', 'cell_x', 'cell_y'])
        return self.save_frame(df, filename)

    def save_json(self, obj: dict, filename: str) -> str:
        """Write sorted, indented JSON stamped with format_version."""
        filename = self.path(filename)
        _ensure_dir(filename)
        payload = _to_builtin(obj)
        if isinstance(payload, dict):
            payload.setdefault('format_version', FORMAT_VERSION)
        with open(filename, 'w') as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write('\n')
        log(f"Saved {filename}", 'debug')
        return filename

    def load_json(self, filename: str):
        filename = self.path(filename)
        if not os.path.exists(filename):
            print(f"File {filename} does not exist.")
            return None
        with open(filename) as f:
            text = f.read()
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(filename, e.msg, e.lineno)

    # --- Frames ---

    def save_frame(self, df: pd.DataFrame, filename: str, index: bool = False) -> str:
        filename = self.path(filename)
        _ensure_dir(filename)
        df.to_csv(filename, index=index)
        log(f"Data saved to {filename}", 'debug')
        return filename

    def load_frame(self, filename: str) -> Optional[pd.DataFrame]:
        """
        Load a CSV file.

        Returns:
            pd.DataFrame: The loaded frame, or None if the file does not exist.
        """
        filename = self.path(filename)
        if not os.path.exists(filename):
            print(f"File {filename} does not exist.")
            return None
        return pd.read_csv(filename)

    # --- Manifest ---

    def write_manifest(self, folder: str, files: list) -> str:
        """
        List every output with its SHA-256, paths relative to `folder`, sorted.
        """
        entries = []
        for name in sorted({os.path.relpath(self.path(p), folder) for p in files}):
            with open(os.path.join(folder, name), 'rb') as f:
                digest = hashlib.sha256(f.read()).hexdigest()
            entries.append({'path': name, 'sha256': digest})
        return self.save_json({'format_version': FORMAT_VERSION, 'files': entries},
                              os.path.join(folder, 'manifest.json'))
