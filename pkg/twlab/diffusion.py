"""
Grid approximation of the diffusion in a potential V.

The potential lives on the space grid k h. From grid point k the chain steps right with
probability (1 + exp(V((k+1)h) - V(kh)))^-1 and left otherwise, and each step takes time h^2.
This is the random-environment walk again, with the environment read off the potential.

Brownian potentials V(x) = sigma W(x) - (kappa/2) x are drawn cell by cell, blockwise from keyed
streams, and grow on demand like environment slices.
"""

import logging
import math
from typing import Callable, List, NamedTuple, TextIO, Tuple

import numpy as np
from scipy.special import expit

from . import streams
from .ensemble import run_indexed
from .paths import GRID_EPS, PathGrid, meta_lines, read_meta
from .validation import check

logger = logging.getLogger('twlab.diffusion')

UNIFORM_CHUNK = 65536


class DiffusionError(Exception):
    pass


class StepBudgetExceeded(DiffusionError):
    def __init__(self, steps: int, budget: int):
        super().__init__(steps, budget)
        self.steps = steps
        self.budget = budget

    def __str__(self):
        return "{} steps per path exceed the budget of {}".format(self.steps, self.budget)


class PotentialFrozen(DiffusionError):
    pass


class BrownianIncrements:
    """Cell increments of sigma W(x) - (kappa/2) x: i.i.d. Normal(-kappa h/2, sigma^2 h)."""
    def __init__(self, sigma: float, kappa: float, mesh_h: float, seed: int, env_index: int):
        self.sigma = sigma
        self.kappa = kappa
        self.mesh_h = mesh_h
        self.seed = seed
        self.env_index = env_index

    def draw(self, block: int, size: int) -> np.ndarray:
        rng = streams.generator(self.seed, streams.POTENTIAL, self.env_index, streams.zigzag(block))
        return rng.normal(-self.kappa * self.mesh_h / 2.0, self.sigma * math.sqrt(self.mesh_h), size=size)

    def meta(self) -> dict:
        return {'potential': 'brownian', 'sigma': self.sigma, 'kappa': self.kappa, 'seed': self.seed,
                'env_index': self.env_index}


class FunctionIncrements:
    """Cell increments f((k+1)h) - f(kh) of a given function f."""
    def __init__(self, func: Callable[[float], float], mesh_h: float):
        self.func = func
        self.mesh_h = mesh_h

    def draw(self, block: int, size: int) -> np.ndarray:
        points = [self.func(k * self.mesh_h) for k in range(block * size, (block + 1) * size + 1)]
        return np.diff(np.array(points, dtype=float))

    def meta(self) -> dict:
        return {'potential': 'deterministic', 'function': getattr(self.func, '__name__', repr(self.func))}


class NegatedIncrements:
    def __init__(self, source):
        self.source = source

    def draw(self, block: int, size: int) -> np.ndarray:
        return -self.source.draw(block, size)

    def meta(self) -> dict:
        return dict(self.source.meta(), negated=True)


def flat(x: float) -> float:
    return 0.0


class Linear:
    """x -> a x, picklable."""
    def __init__(self, a: float):
        self.a = a

    def __call__(self, x: float) -> float:
        return self.a * x

    def __repr__(self):
        return 'Linear({!r})'.format(self.a)


class PotentialPath:
    """
    V(k h) for grid points k_lo..k_hi, anchored at V(0) = 0. Increments are held for whole
    blocks of cells; values are partial sums outward from 0, so growing the path keeps every
    existing value bitwise.
    """
    def __init__(self, mesh_h: float, source, k_range: Tuple[int, int], block: int=256):
        k_lo, k_hi = k_range
        if mesh_h <= 0:
            raise ValueError("mesh_h must be positive, got {!r}".format(mesh_h))
        if not k_lo <= 0 <= k_hi:
            raise ValueError("grid range {}..{} must contain 0".format(k_lo, k_hi))

        self.mesh_h = float(mesh_h)
        self.source = source
        self.block = block
        self.frozen = False

        self._block_lo = k_lo // block
        self._block_hi = k_hi // block
        self._increments = np.concatenate([source.draw(b, block) for b in range(self._block_lo, self._block_hi + 1)])
        self._update()

        self.k_lo = k_lo
        self.k_hi = k_hi
        self._window = None

    def _update(self):
        n_neg = -self._block_lo * self.block
        negative = -np.cumsum(self._increments[:n_neg][::-1])[::-1]
        positive = np.concatenate(([0.0], np.cumsum(self._increments[n_neg:])))
        self._values = np.concatenate((negative, positive))
        # p(d) + p(-d) == 1 in floating point
        small = expit(-np.abs(self._increments))
        self._right = np.where(self._increments > 0, small, 1.0 - small)

    @property
    def lo(self) -> float:
        return self.k_lo * self.mesh_h

    @property
    def hi(self) -> float:
        return self.k_hi * self.mesh_h

    def _first(self) -> int:
        return self._block_lo * self.block

    def covers(self, k_lo: int, k_hi: int) -> bool:
        return self.k_lo <= k_lo and k_hi <= self.k_hi

    def extend(self, k_lo: int, k_hi: int):
        if self.covers(k_lo, k_hi):
            return
        if self.frozen:
            raise PotentialFrozen("cannot extend a frozen potential to {}..{}".format(k_lo, k_hi))

        # right probabilities at k need the increment of cell k
        block_lo = min(k_lo, self.k_lo) // self.block
        block_hi = max(k_hi, self.k_hi) // self.block

        left = [self.source.draw(b, self.block) for b in range(block_lo, self._block_lo)]
        right = [self.source.draw(b, self.block) for b in range(self._block_hi + 1, block_hi + 1)]
        if left or right:
            self._increments = np.concatenate(left + [self._increments] + right)
            self._block_lo = min(block_lo, self._block_lo)
            self._block_hi = max(block_hi, self._block_hi)
            self._update()

        self.k_lo = min(k_lo, self.k_lo)
        self.k_hi = max(k_hi, self.k_hi)
        self._window = None

    def freeze(self):
        self.frozen = True

    def _check(self, k_lo: int, k_hi: int):
        if not self.covers(k_lo, k_hi):
            raise ValueError("grid points {}..{} are outside {}..{}".format(k_lo, k_hi, self.k_lo, self.k_hi))

    def values(self, k_lo: int=None, k_hi: int=None) -> np.ndarray:
        k_lo = self.k_lo if k_lo is None else k_lo
        k_hi = self.k_hi if k_hi is None else k_hi
        self._check(k_lo, k_hi)
        return self._values[k_lo - self._first():k_hi - self._first() + 1].copy()

    def value(self, k: int) -> float:
        self._check(k, k)
        return float(self._values[k - self._first()])

    def increments(self, k_lo: int, k_hi: int) -> np.ndarray:
        """V((k+1)h) - V(kh) for k = k_lo..k_hi."""
        self._check(k_lo, k_hi)
        return self._increments[k_lo - self._first():k_hi - self._first() + 1].copy()

    def right_probabilities(self, k_lo: int, k_hi: int) -> np.ndarray:
        self._check(k_lo, k_hi)
        return self._right[k_lo - self._first():k_hi - self._first() + 1].copy()

    def window(self) -> Tuple[int, List[float]]:
        if self._window is None:
            self._window = (self.k_lo, self.right_probabilities(self.k_lo, self.k_hi).tolist())
        return self._window

    def block_start(self, k: int) -> int:
        return (k // self.block) * self.block

    def negated(self):
        return PotentialPath(self.mesh_h, NegatedIncrements(self.source), (self.k_lo, self.k_hi), self.block)

    def to_grid(self) -> PathGrid:
        return PathGrid(self.lo, self.mesh_h, self.values(), dict(self.source.meta(), mesh_h=self.mesh_h))

    def __repr__(self):
        return 'PotentialPath(h={!r}, k={}..{}{})'.format(self.mesh_h, self.k_lo, self.k_hi,
                                                          ', frozen' if self.frozen else '')


def _grid_range(extent: Tuple[float, float], mesh_h: float) -> Tuple[int, int]:
    x_lo, x_hi = extent
    if not x_lo <= 0.0 <= x_hi:
        raise ValueError("extent {!r} must contain 0".format(extent))
    return int(math.floor(x_lo / mesh_h + GRID_EPS)), int(math.ceil(x_hi / mesh_h - GRID_EPS))


def sample_brownian_potential(sigma: float, kappa: float, mesh_h: float, extent: Tuple[float, float], seed: int,
                              env_index: int=0, block: int=256) -> PotentialPath:
    if sigma <= 0:
        raise ValueError("sigma must be positive, got {!r}".format(sigma))
    if kappa < 0:
        raise ValueError("kappa must not be negative, got {!r}".format(kappa))

    source = BrownianIncrements(sigma, kappa, mesh_h, seed, env_index)
    return PotentialPath(mesh_h, source, _grid_range(extent, mesh_h), block)


def deterministic_potential(mesh_h: float, func: Callable[[float], float], extent: Tuple[float, float]=(0.0, 0.0),
                            block: int=256) -> PotentialPath:
    """Potential path of a function with func(0) = 0."""
    if func(0.0) != 0.0:
        raise ValueError("a potential must vanish at 0")
    return PotentialPath(mesh_h, FunctionIncrements(func, mesh_h), _grid_range(extent, mesh_h), block)


class DiffusionConfig(NamedTuple):
    mesh_h: float
    horizon: float
    num_paths: int
    seed: int
    step_budget: int = 100000000
    max_mesh: float = 0.1

    @property
    def steps(self) -> int:
        return int(math.floor(self.horizon / self.mesh_h ** 2 + GRID_EPS))


def check_config(config: DiffusionConfig):
    if not 0 < config.mesh_h <= config.max_mesh:
        raise DiffusionError("mesh_h={!r} is not in (0, {!r}]".format(config.mesh_h, config.max_mesh))
    if not config.horizon > 0:
        raise DiffusionError("horizon must be positive, got {!r}".format(config.horizon))
    if config.steps < 1:
        raise DiffusionError("horizon {!r} is shorter than one step at mesh {!r}".format(config.horizon,
                                                                                          config.mesh_h))
    if config.num_paths < 1:
        raise DiffusionError("num_paths must be at least 1, got {!r}".format(config.num_paths))
    if config.steps > config.step_budget:
        raise StepBudgetExceeded(config.steps, config.step_budget)


def _uniforms(rng: np.random.Generator, count: int):
    while count > 0:
        chunk = min(count, UNIFORM_CHUNK)
        yield from rng.random(chunk).tolist()
        count -= chunk


def simulate_diffusion_in_potential(potential: PotentialPath, config: DiffusionConfig, path_index: int) -> PathGrid:
    """
    Runs the chain from 0 for [T / h^2] steps and returns X on the time grid h^2.

    :raises StepBudgetExceeded: before any step if [T / h^2] exceeds the budget.
    :raises PotentialFrozen: if the chain leaves a frozen potential.
    """
    if not math.isclose(potential.mesh_h, config.mesh_h, rel_tol=1e-12):
        raise ValueError("potential mesh {!r} differs from configured mesh {!r}".format(
            potential.mesh_h, config.mesh_h))
    check_config(config)

    rng = streams.generator(config.seed, streams.DIFFUSION, path_index)

    first, right = potential.window()
    end = first + len(right)

    position = 0
    path = [0]
    for u in _uniforms(rng, config.steps):
        if not first <= position < end:
            start = potential.block_start(position)
            potential.extend(start, start + potential.block - 1)
            first, right = potential.window()
            end = first + len(right)

        position += 1 if u < right[position - first] else -1
        path.append(position)

    meta = dict(potential.source.meta(), process='diffusion', mesh_h=config.mesh_h, path_index=path_index,
                seed=config.seed)
    return PathGrid(0.0, config.mesh_h ** 2, np.array(path, dtype=float) * config.mesh_h, meta)


class BrownianDiffusion:
    """
    Diffusion paths in Brownian potentials. Annealed instances draw a fresh potential per path;
    quenched ones share one frozen potential wide enough for every path.
    """
    def __init__(self, sigma: float, kappa: float, config: DiffusionConfig, mode: str='annealed', block: int=256):
        if mode not in ('annealed', 'quenched'):
            raise ValueError("unknown mode {!r}".format(mode))
        check_config(config)

        self.sigma = sigma
        self.kappa = kappa
        self.config = config
        self.block = block
        self.potential = None

        if mode == 'quenched':
            reach = config.steps * config.mesh_h
            self.potential = sample_brownian_potential(sigma, kappa, config.mesh_h, (-reach, reach), config.seed,
                                                       0, block)
            self.potential.freeze()

    def __call__(self, path_index: int) -> PathGrid:
        potential = self.potential
        if potential is None:
            potential = sample_brownian_potential(self.sigma, self.kappa, self.config.mesh_h, (0.0, 0.0),
                                                  self.config.seed, path_index, self.block)
        return simulate_diffusion_in_potential(potential, self.config, path_index)


class FixedPotentialDiffusion:
    def __init__(self, potential: PotentialPath, config: DiffusionConfig):
        self.potential = potential
        self.config = config

    def __call__(self, path_index: int) -> PathGrid:
        return simulate_diffusion_in_potential(self.potential, self.config, path_index)


def diffusion_ensemble(sigma: float, kappa: float, config: DiffusionConfig, mode: str='annealed',
                       workers: int=1) -> List[PathGrid]:
    logger.debug("simulating {} {} diffusion paths with h={!r}".format(config.num_paths, mode, config.mesh_h))
    return run_indexed(BrownianDiffusion(sigma, kappa, config, mode), config.num_paths, workers)


def write_potential_csv(potential: PotentialPath, fp: TextIO):
    meta = dict(potential.source.meta(), mesh_h=potential.mesh_h, k_lo=potential.k_lo, k_hi=potential.k_hi)
    fp.writelines(meta_lines(meta))
    fp.write('x,V\n')

    values = potential.values().tolist()
    for k, value in zip(range(potential.k_lo, potential.k_hi + 1), values):
        fp.write('{!r},{!r}\n'.format(k * potential.mesh_h, value))


def read_potential_csv(fp: TextIO, source: str='<input>') -> PathGrid:
    meta, header = read_meta(fp, source)
    check(header == 'x,V', source, 'unexpected column header', header)

    values = [float(line.strip().split(',')[1]) for line in fp if line.strip()]
    mesh_h = meta['mesh_h']
    return PathGrid(meta['k_lo'] * mesh_h, mesh_h, values, meta)
