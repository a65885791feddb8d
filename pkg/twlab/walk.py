"""
Scaled random walks of tilted laws and the Brownian motion with drift they converge to.

For a scale m, the walk sums i.i.d. increments of the tilted law and is observed on the grid
k/m as S_k / sqrt(m), linear in between. Its limit is H(t) = sigma B(t) - (beta/2) t.
"""

import logging
import math
from functools import partial
from typing import List, NamedTuple, Sequence

import numpy as np

from . import streams
from .ensemble import run_indexed
from .measure import FiniteLaw, TiltParams, lattice_span, tilt, variance_sup
from .paths import GRID_EPS, PathGrid, grid_steps
from .sampler import build_sampler
from .stats import TestReport, binomial_halfwidth, distance_report

logger = logging.getLogger('twlab.walk')


class WalkError(Exception):
    pass


class ConfigError(WalkError):
    pass


class BoundViolated(WalkError):
    def __init__(self, lam: float, tail: float, bound: float):
        super().__init__(lam, tail, bound)
        self.lam = lam
        self.tail = tail
        self.bound = bound

    def __str__(self):
        return "empirical tail {!r} at lambda={!r} exceeds the allowed {!r}".format(self.tail, self.lam, self.bound)


class SimConfig(NamedTuple):
    m: int
    horizon: float
    num_paths: int
    seed: int

    @property
    def steps(self) -> int:
        return int(math.floor(self.m * self.horizon + GRID_EPS))


def check_config(config: SimConfig):
    m, horizon, num_paths, seed = config

    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise ConfigError("m must be a positive integer, got {!r}".format(m))
    if not horizon > 0:
        raise ConfigError("horizon must be positive, got {!r}".format(horizon))
    if config.steps < 1:
        raise ConfigError("horizon {!r} is shorter than one step of size 1/{}".format(horizon, m))
    if not isinstance(num_paths, int) or num_paths < 1:
        raise ConfigError("num_paths must be at least 1, got {!r}".format(num_paths))
    if not isinstance(seed, int) or not 0 <= seed <= streams.MAX_SEED:
        raise ConfigError("seed {!r} is not a 64-bit unsigned integer".format(seed))


class ScaledWalk:
    """
    Simulates paths of the scaled walk for one (law, m). The tilted law and its alias table are
    built once; calling the instance with a path index returns that path. Instances pickle, so
    they can be handed to worker processes.
    """
    def __init__(self, law: FiniteLaw, params: TiltParams, config: SimConfig):
        check_config(config)

        self.config = config
        self.report = tilt(law, params.beta, params.c, config.m)
        self.sampler = build_sampler(self.report.tilted)
        self.scale = 1.0 / math.sqrt(config.m)

    @property
    def lattice_width(self):
        """Spacing of the lattice the path values live on, or None if the atoms are incommensurable."""
        span = lattice_span(self.report.tilted)
        return None if span is None else span * self.scale

    def __call__(self, path_index: int) -> PathGrid:
        m, _, _, seed = self.config
        rng = streams.generator(seed, streams.WALK, path_index)

        draws = self.sampler.sample(rng, self.config.steps)
        values = np.concatenate(([0.0], np.cumsum(draws))) * self.scale

        meta = {'process': 'scaled_walk', 'm': m, 'path_index': path_index, 'seed': seed}
        return PathGrid(0.0, 1.0 / m, values, meta)


def simulate_scaled_walk(law: FiniteLaw, params: TiltParams, config: SimConfig, path_index: int) -> PathGrid:
    return ScaledWalk(law, params, config)(path_index)


def simulate_walk_ensemble(law: FiniteLaw, params: TiltParams, config: SimConfig, workers: int=1) -> List[PathGrid]:
    walk = ScaledWalk(law, params, config)
    logger.debug("simulating {} scaled walk paths with m={}".format(config.num_paths, config.m))
    return run_indexed(walk, config.num_paths, workers)


def simulate_bm_with_drift(sigma: float, beta: float, horizon: float, dt: float, seed: int,
                           path_index: int) -> PathGrid:
    """
    sigma B(t) - (beta/2) t on the grid k dt, from exact Gaussian increments.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive, got {!r}".format(sigma))
    if dt <= 0:
        raise ValueError("dt must be positive, got {!r}".format(dt))

    steps = grid_steps(horizon, dt)
    rng = streams.generator(seed, streams.BROWNIAN, path_index)
    increments = rng.normal(-beta / 2.0 * dt, sigma * math.sqrt(dt), size=steps)

    meta = {'process': 'brownian_drift', 'sigma': sigma, 'beta': beta, 'path_index': path_index, 'seed': seed}
    return PathGrid(0.0, dt, np.concatenate(([0.0], np.cumsum(increments))), meta)


def simulate_bm_ensemble(sigma: float, beta: float, horizon: float, dt: float, num_paths: int, seed: int,
                         workers: int=1) -> List[PathGrid]:
    func = partial(_bm_path, sigma, beta, horizon, dt, seed)
    return run_indexed(func, num_paths, workers)


def _bm_path(sigma, beta, horizon, dt, seed, path_index):
    return simulate_bm_with_drift(sigma, beta, horizon, dt, seed, path_index)


def kolmogorov_bound(bound_c: float, horizon: float, lam: float) -> float:
    """2 T C / lambda^2 for a variance bound C valid along the whole m-sequence."""
    return 2.0 * horizon * bound_c / lam ** 2


def sharp_kolmogorov_bound(variance: float, m: int, horizon: float, lam: float) -> float:
    """[mT] D / (m lambda^2) for the increment variance D at this m."""
    return int(math.floor(m * horizon + GRID_EPS)) * variance / (m * lam ** 2)


def _sup_abs(walk: ScaledWalk, path_index: int) -> float:
    return float(np.max(np.abs(walk(path_index).values)))


def max_excursion_bound_check(law: FiniteLaw, params: TiltParams, config: SimConfig, lams: Sequence[float],
                              m_from: int=None, sigmas: float=3.0, workers: int=1) -> TestReport:
    """
    Estimates P(sup |H(t)| >= lambda) over [0, T] for every lambda and compares it with the
    maximal inequality bound 2TC/lambda^2, where C bounds the tilted increment variance for all
    scales from m_from (default: config.m) on. A binomial confidence allowance is added to the bound.

    :raises BoundViolated: for the first lambda whose tail exceeds the allowance.
    """
    if len(lams) == 0:
        raise ValueError("no lambda values given")

    walk = ScaledWalk(law, params, config)
    bound_c = variance_sup(law, params, config.m if m_from is None else m_from)

    sups = np.array(run_indexed(partial(_sup_abs, walk), config.num_paths, workers))
    n = len(sups)

    worst = -math.inf
    rows = []
    for lam in lams:
        tail = float(np.count_nonzero(sups >= lam)) / n
        bound = kolmogorov_bound(bound_c, config.horizon, lam)
        allowed = bound + binomial_halfwidth(tail, n, sigmas)
        sharp = sharp_kolmogorov_bound(walk.report.variance, config.m, config.horizon, lam)

        rows.append({'lambda': lam, 'tail': tail, 'bound': bound, 'sharp_bound': sharp})
        if tail > allowed:
            logger.warning("tail {!r} at lambda={!r} above {!r}".format(tail, lam, allowed))
            raise BoundViolated(lam, tail, allowed)

        worst = max(worst, tail - allowed)

    provenance = {'m': config.m, 'horizon': config.horizon, 'seed': config.seed, 'C': bound_c, 'rows': rows}
    return distance_report('max_excursion_tail_excess', worst, 0.0, [n], provenance)
