"""
Sample paths on a regular grid and their CSV encoding.

A path file starts with `#`-prefixed metadata lines (`# key: json value`), followed by the header
`t,value` and one row per grid point. Ensemble files use the header `path_index,t,value`.
Floats are written with repr() so a path read back is bitwise identical to the path written.
"""

import json
import math
from typing import Iterable, List, Sequence, TextIO

import numpy as np

from .validation import ValidationError, check

# guards floor(m t) against representation error in t
GRID_EPS = 1e-9


def grid_steps(horizon: float, dt: float) -> int:
    """Number of whole grid steps of size dt in [0, horizon], i.e. floor(horizon / dt)."""
    return int(math.floor(horizon / dt + GRID_EPS))


class PathGrid:
    """
    Values of a process at times t0 + k dt, k = 0, ..., len(values) - 1, plus a free-form
    provenance record. Between grid points the path is linear.
    """
    def __init__(self, t0: float, dt: float, values: Sequence[float], meta: dict=None):
        values = np.array(values, dtype=float)
        if dt <= 0:
            raise ValueError("dt must be positive, got {!r}".format(dt))
        if values.ndim != 1 or len(values) == 0:
            raise ValueError("a path needs at least one value")

        values.flags.writeable = False
        self.t0 = float(t0)
        self.dt = float(dt)
        self.values = values
        self.meta = dict(meta or {})

    def __len__(self):
        return len(self.values)

    @property
    def horizon(self) -> float:
        return self.t0 + (len(self.values) - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.values)) * self.dt

    def index_of(self, t: float) -> int:
        """Index of the last grid point at or before t."""
        k = int(math.floor((t - self.t0) / self.dt + GRID_EPS))
        if not 0 <= k < len(self.values):
            raise ValueError("t={!r} is outside [{!r}, {!r}]".format(t, self.t0, self.horizon))
        return k

    def at_grid(self, t: float) -> float:
        return float(self.values[self.index_of(t)])

    def value_at(self, t: float) -> float:
        if not self.t0 - GRID_EPS * self.dt <= t <= self.horizon + GRID_EPS * self.dt:
            raise ValueError("t={!r} is outside [{!r}, {!r}]".format(t, self.t0, self.horizon))
        return float(np.interp(t, self.times(), self.values))

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def __eq__(self, other):
        if not isinstance(other, PathGrid):
            return NotImplemented
        return (self.t0 == other.t0 and self.dt == other.dt and self.meta == other.meta and
                np.array_equal(self.values, other.values))

    def __repr__(self):
        return 'PathGrid(t0={!r}, dt={!r}, n={}, meta={!r})'.format(self.t0, self.dt, len(self.values), self.meta)


def marginal(paths: Iterable[PathGrid], t: float) -> np.ndarray:
    """Grid values at time t of every path, in input order."""
    return np.array([path.at_grid(t) for path in paths])


def meta_lines(meta: dict) -> List[str]:
    return ['# {}: {}\n'.format(key, json.dumps(meta[key], sort_keys=True)) for key in sorted(meta)]


def read_meta(fp: TextIO, source: str):
    meta = {}
    for line in fp:
        if not line.startswith('#'):
            return meta, line.strip()
        key, sep, value = line[1:].strip().partition(':')
        check(sep == ':', source, 'malformed metadata line', line.strip())
        meta[key.strip()] = json.loads(value)
    raise ValidationError(source, 'missing column header')


def write_path_csv(path: PathGrid, fp: TextIO):
    meta = dict(path.meta, t0=path.t0, dt=path.dt)
    fp.writelines(meta_lines(meta))
    fp.write('t,value\n')
    for t, value in zip(path.times().tolist(), path.values.tolist()):
        fp.write('{!r},{!r}\n'.format(t, value))


def read_path_csv(fp: TextIO, source: str='<input>') -> PathGrid:
    meta, header = read_meta(fp, source)
    check(header == 't,value', source, 'unexpected column header', header)

    values = []
    for line in fp:
        t, value = line.strip().split(',')
        values.append(float(value))

    t0 = meta.pop('t0')
    dt = meta.pop('dt')
    return PathGrid(t0, dt, values, meta)


def write_ensemble_csv(paths: Sequence[PathGrid], fp: TextIO, meta: dict=None):
    check(len(paths) > 0, 'ensemble', 'no paths to write')
    meta = dict(meta or {}, t0=paths[0].t0, dt=paths[0].dt)
    fp.writelines(meta_lines(meta))
    fp.write('path_index,t,value\n')
    for path_index, path in enumerate(paths):
        for t, value in zip(path.times().tolist(), path.values.tolist()):
            fp.write('{},{!r},{!r}\n'.format(path_index, t, value))


def read_ensemble_csv(fp: TextIO, source: str='<input>') -> List[PathGrid]:
    meta, header = read_meta(fp, source)
    check(header == 'path_index,t,value', source, 'unexpected column header', header)

    t0 = meta.pop('t0')
    dt = meta.pop('dt')

    columns = {}
    for line in fp:
        path_index, t, value = line.strip().split(',')
        columns.setdefault(int(path_index), []).append(float(value))

    return [PathGrid(t0, dt, columns[index], meta) for index in sorted(columns)]


def write_sample_csv(sample: Sequence[float], fp: TextIO, meta: dict=None, column: str='value'):
    """One value per path: header `path_index,<column>`."""
    fp.writelines(meta_lines(dict(meta or {})))
    fp.write('path_index,{}\n'.format(column))
    for index, value in enumerate(np.asarray(sample, dtype=float).tolist()):
        fp.write('{},{!r}\n'.format(index, value))


def read_sample_csv(fp: TextIO, source: str='<input>'):
    meta, header = read_meta(fp, source)
    check(header.startswith('path_index,'), source, 'unexpected column header', header)
    return meta, np.array([float(line.strip().split(',')[1]) for line in fp])
