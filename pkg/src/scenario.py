import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

from . import domain as domains
from .config import log
from .errors import ParseError, ValidationError

FORMAT_VERSION = 1

PRESETS = {
    'square': domains.square,
    'corridor': domains.corridor,
    'annulus_frame': domains.annulus_frame,
    'figure_eight': domains.figure_eight,
    'hallway_grid': domains.hallway_grid,
}

INITIAL_KINDS = ('uniform', 'zero', 'csv', 'class', 'waves', 'smooth')
ANALYSES = ('continuity', 'periodicity', 'defects', 'forest', 'barriers', 'evasion', 'class', 'local_holes')

_TOP_KEYS = {
    'format_version', 'name', 'domain', 'node_count', 'positions', 'r', 'eps', 'n', 'seed',
    'initial', 'ticks', 'p_s', 'link_mode', 'augment', 'dumps', 'grid', 'analyses',
    'sever_defects', 'evasion', 'montecarlo', 'energy_labels',
}
_DOMAIN_KEYS = {'preset', 'params', 'rects'}
_INITIAL_KEYS = {'kind', 'path', 'target', 'waves', 'slope', 'winding', 'center'}
_WAVE_KEYS = {'corridor_edge', 'anchor', 'direction'}
_EVASION_KEYS = {'t0', 'region', 'space', 'refine', 'augment_centers'}
_MONTECARLO_KEYS = {'trials', 'node_counts', 'T', 'cell_side', 'n_tilde', 'estimators', 'p_s_values'}


@dataclass
class Scenario:
    name: str = 'scenario'
    format_version: int = FORMAT_VERSION
    domain: dict = field(default_factory=lambda: {'preset': 'square', 'params': {}})
    node_count: Optional[int] = None
    positions: Optional[str] = None
    r: float = 1.0
    eps: float = 1.0
    n: int = 3
    seed: int = 0
    initial: dict = field(default_factory=lambda: {'kind': 'uniform'})
    ticks: int = 100
    p_s: Optional[float] = None
    link_mode: str = 'per_tick'
    augment: bool = False
    dumps: list = field(default_factory=list)
    grid: Optional[float] = None
    analyses: dict = field(default_factory=dict)
    sever_defects: Optional[str] = None   # None, 'seeds' or 'all'
    evasion: dict = field(default_factory=dict)
    montecarlo: dict = field(default_factory=dict)
    energy_labels: bool = False
    base_dir: str = '.'

    def wants(self, analysis: str) -> bool:
        return bool(self.analyses.get(analysis, False))

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def build_domain(self) -> domains.HallwayDomain:
        if 'rects' in self.domain:
            return domains.build_domain(self.domain['rects'])
        return PRESETS[self.domain['preset']](**self.domain.get('params', {}))

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in sorted(_TOP_KEYS) if getattr(self, k) is not None}
        out['format_version'] = self.format_version
        return out


def _line_of(text: str, key: str) -> Optional[int]:
    needle = f'"{key}"'
    for k, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return k
    return None


def _check_keys(path: str, text: str, obj, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise ParseError(path, f"'{where}' must be a JSON object", _line_of(text, where), where)
    for key in obj:
        if key not in allowed:
            raise ParseError(path, f"unknown key '{key}'", _line_of(text, key), f"{where}.{key}" if where else key)


def _expect(path: str, text: str, data: dict, key: str, types, optional: bool = True):
    if key not in data:
        return
    value = data[key]
    if value is None and optional:
        return
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ParseError(path, f"'{key}' has the wrong type", _line_of(text, key), key)
    if not isinstance(value, types):
        raise ParseError(path, f"'{key}' has the wrong type", _line_of(text, key), key)


def parse_scenario(path: str) -> Scenario:
    """
    Read and validate a scenario file.

    Args:
        path (str): JSON scenario path.

    Returns:
        Scenario: Validated scenario; relative file references resolve against its directory.
    """
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ParseError(path, f"cannot read file: {e.strerror}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(path, e.msg, e.lineno)
    return scenario_from_dict(data, path, text)


def scenario_from_dict(data: dict, path: str = '<scenario>', text: str = '') -> Scenario:
    _check_keys(path, text, data, _TOP_KEYS, '')
    for key, types in (('name', str), ('format_version', int), ('node_count', int), ('positions', str),
                       ('r', (int, float)), ('eps', (int, float)), ('n', int), ('seed', int),
                       ('ticks', int), ('p_s', (int, float)), ('link_mode', str), ('augment', bool),
                       ('dumps', list), ('grid', (int, float)), ('analyses', dict),
                       ('sever_defects', str), ('energy_labels', bool)):
        _expect(path, text, data, key, types)
    for key, allowed in (('domain', _DOMAIN_KEYS), ('initial', _INITIAL_KEYS),
                         ('evasion', _EVASION_KEYS), ('montecarlo', _MONTECARLO_KEYS)):
        if key in data:
            _check_keys(path, text, data[key], allowed, key)
    for wave in data.get('initial', {}).get('waves', []) or []:
        _check_keys(path, text, wave, _WAVE_KEYS, 'initial.waves')
    for key in data.get('analyses', {}):
        if key not in ANALYSES:
            raise ParseError(path, f"unknown analysis '{key}'", _line_of(text, key), f"analyses.{key}")

    kwargs = {k: v for k, v in data.items()}
    base = os.path.dirname(os.path.abspath(path)) if path != '<scenario>' else '.'
    scenario = Scenario(base_dir=base, **kwargs)
    validate(scenario)
    return scenario


def validate(scenario: Scenario):
    """Collect every violation and raise them together."""
    problems = []
    s = scenario
    if s.format_version != FORMAT_VERSION:
        problems.append(f"format_version must be {FORMAT_VERSION}, got {s.format_version}")
    if s.n < 3:
        problems.append(f"n must be >= 3, got {s.n}")
    if s.r <= 0:
        problems.append(f"r must be positive, got {s.r}")
    if s.eps <= 0:
        problems.append(f"eps must be positive, got {s.eps}")
    if s.ticks < 0:
        problems.append(f"ticks must be >= 0, got {s.ticks}")
    if s.seed < 0:
        problems.append(f"seed must be >= 0, got {s.seed}")
    if s.p_s is not None and not 0.0 < s.p_s <= 1.0:
        problems.append(f"p_s must lie in (0, 1], got {s.p_s}")
    if s.link_mode not in ('per_tick', 'per_lifetime'):
        problems.append(f"link_mode must be 'per_tick' or 'per_lifetime', got '{s.link_mode}'")
    if s.grid is not None and s.grid <= 0:
        problems.append(f"grid must be positive, got {s.grid}")
    if s.sever_defects not in (None, 'seeds', 'all'):
        problems.append(f"sever_defects must be 'seeds' or 'all', got '{s.sever_defects}'")
    if any(not isinstance(t, int) or t < 0 or t > s.ticks for t in s.dumps):
        problems.append(f"dumps must be ticks in [0, {s.ticks}]")

    if 'rects' in s.domain:
        if not s.domain['rects'] or any(len(r) != 4 for r in s.domain['rects']):
            problems.append("domain.rects must be a nonempty list of [xmin, ymin, xmax, ymax]")
    elif s.domain.get('preset') not in PRESETS:
        problems.append(f"domain.preset must be one of {sorted(PRESETS)}")

    if s.positions is None and (s.node_count is None or s.node_count < 1):
        problems.append("either positions or a node_count >= 1 is required")
    if s.positions is not None and not os.path.isfile(s.resolve(s.positions)):
        problems.append(f"positions file {s.positions} does not exist")

    kind = s.initial.get('kind')
    if kind not in INITIAL_KINDS:
        problems.append(f"initial.kind must be one of {list(INITIAL_KINDS)}")
    elif kind == 'csv' and not os.path.isfile(s.resolve(s.initial.get('path', ''))):
        problems.append(f"initial state file {s.initial.get('path')} does not exist")
    elif kind == 'class' and not all(isinstance(v, int) for v in s.initial.get('target', []) or [None]):
        problems.append("initial.target must be a list of integers")
    elif kind == 'waves':
        for w in s.initial.get('waves', []):
            if w.get('direction') not in (1, -1):
                problems.append("every wave direction must be +1 or -1")
        if not s.initial.get('waves'):
            problems.append("initial.waves must list at least one wave")

    if s.wants('evasion') and s.grid is not None and s.grid > s.eps / 2.0:
        problems.append(f"grid must be <= eps/2 = {s.eps / 2.0:g} for evasion")
    if s.evasion.get('space', 'grid') not in ('grid', 'skeleton'):
        problems.append("evasion.space must be 'grid' or 'skeleton'")
    if problems:
        raise ValidationError(problems)

    if s.eps < s.r / math.sqrt(3.0):
        log(f"Warning: eps={s.eps:g} is below r/sqrt(3)={s.r / math.sqrt(3.0):.4g}; "
            "coverage of the Rips shadow is not guaranteed", 'info')


def reference_scenario(seed: int = 0) -> Scenario:
    """Hallway replication: 16250 nodes, n = 20, r = 1.5 inside a 200 x 200 square."""
    scenario = Scenario(
        name='hallway-replication',
        domain={'preset': 'hallway_grid', 'params': {'side': 200.0, 'width': 12.0}},
        node_count=16250, r=1.5, eps=1.5, n=20, seed=seed,
        initial={'kind': 'uniform'}, ticks=400,
        dumps=[0, 20, 45, 90, 150, 200, 250, 350],
        analyses={'continuity': True, 'periodicity': True, 'defects': True, 'barriers': True},
    )
    validate(scenario)
    return scenario
