"""
Random environments and the random walk they drive.

An environment law gives the distribution of the right-step probability omega of one site. Its
log odds ratio log((1 - omega) / omega) has a law pi with a positive exponent kappa. For a scale
m, pi is tilted exactly like a walk law, and site i gets

    omega_i = (1 + exp(delta_i / sqrt(m)))^-1

from an i.i.d. tilted draw delta_i. The walk that moves right from i with probability omega_i,
run for m^2 T steps and divided by m, approaches a diffusion in the potential
sigma W(x) - (kappa/2) x.

Environments are materialized lazily in blocks of sites. Each block is drawn from its own keyed
stream, so growing an environment never changes the sites it already holds.
"""

import logging
import math
from typing import Iterable, List, NamedTuple, Sequence, TextIO, Tuple

import numpy as np
from scipy.special import expit, logit

from . import streams
from .ensemble import run_indexed
from .measure import (FiniteLaw, IdentityViolation, TiltReport, agree, compute_c, compute_sigma2, parse_law,
                      solve_beta, tilt)
from .paths import GRID_EPS, PathGrid, meta_lines, read_meta
from .sampler import build_sampler
from .validation import check

logger = logging.getLogger('twlab.environment')

# distinct omega atoms whose log odds ratios are this close are merged
MERGE_TOL = 1e-12

KAPPA_M_TOL = 1e-10

ANNEALED = 'annealed'
QUENCHED = 'quenched'


class EnvironmentModelError(Exception):
    pass


class EllipticityViolation(EnvironmentModelError):
    pass


class RangeNotMaterialized(EnvironmentModelError):
    def __init__(self, lo: int, hi: int, site_range: Tuple[int, int]):
        super().__init__(lo, hi, site_range)
        self.lo = lo
        self.hi = hi
        self.site_range = site_range

    def __str__(self):
        return "sites {}..{} are outside the materialized range {}..{}".format(self.lo, self.hi, *self.site_range)


class EnvironmentFrozen(EnvironmentModelError):
    pass


class HorizonTooShort(EnvironmentModelError):
    pass


def default_epsilon(omega_atoms: FiniteLaw) -> float:
    """Half the distance of the outermost atoms from 0 and 1."""
    values = omega_atoms.values
    return 0.5 * min(float(values[0]), 1.0 - float(values[-1]))


class EnvironmentLaw:
    """
    Law of omega_0, uniformly elliptic with margin epsilon. Unless check_transience is off, the
    law must also be transient to the left with a positive exponent kappa, which is solved for here.
    """
    def __init__(self, omega_atoms: FiniteLaw, epsilon: float=None, check_transience: bool=True):
        values = omega_atoms.values
        if values[0] <= 0.0 or values[-1] >= 1.0:
            raise EllipticityViolation("omega atoms must lie strictly inside (0, 1)")

        if epsilon is None:
            epsilon = default_epsilon(omega_atoms)

        if not 0.0 < epsilon < 0.5:
            raise EllipticityViolation("epsilon={!r} is not in (0, 1/2)".format(epsilon))

        if values[0] < epsilon or values[-1] > 1.0 - epsilon:
            raise EllipticityViolation("omega atoms leave [{!r}, {!r}]".format(epsilon, 1.0 - epsilon))

        self.omega_atoms = omega_atoms
        self.epsilon = float(epsilon)
        self.kappa = solve_kappa(log_rho_law(self)) if check_transience else None

    def __repr__(self):
        return 'EnvironmentLaw({!r}, epsilon={!r})'.format(self.omega_atoms, self.epsilon)


def parse_environment_law(lines: Iterable[str], source: str='<input>', epsilon: float=None,
                          check_transience: bool=True) -> EnvironmentLaw:
    return EnvironmentLaw(parse_law(lines, source), epsilon, check_transience)


def load_environment_law(path: str, epsilon: float=None, check_transience: bool=True) -> EnvironmentLaw:
    with open(path, 'rt') as fp:
        return parse_environment_law(fp, path, epsilon, check_transience)


def log_rho_law(env: EnvironmentLaw) -> FiniteLaw:
    omega = env.omega_atoms.values
    log_rho = np.log(1.0 - omega) - np.log(omega)
    return FiniteLaw.from_pairs(zip(log_rho.tolist(), env.omega_atoms.probs.tolist()), merge_tol=MERGE_TOL)


def solve_kappa(pi: FiniteLaw) -> float:
    """The positive root kappa of E rho^kappa = E exp(kappa log rho) = 1."""
    return solve_beta(pi)


def omega_from_delta(delta, m: int):
    result = expit(-np.asarray(delta, dtype=float) / math.sqrt(m))
    return float(result) if np.ndim(result) == 0 else result


def delta_from_omega(omega, m: int):
    result = math.sqrt(m) * logit(1.0 - np.asarray(omega, dtype=float))
    return float(result) if np.ndim(result) == 0 else result


class TiltedEnvironment(NamedTuple):
    pi_m: FiniteLaw
    m: int
    kappa: float
    sigma2: float
    c: float
    report: TiltReport

    construction = 'tilted'

    @property
    def delta_law(self) -> FiniteLaw:
        return self.pi_m


class SeignourelEnvironment(NamedTuple):
    """Untilted sites: delta_i = log rho_i drawn from pi itself."""
    pi: FiniteLaw
    m: int

    construction = 'seignourel'

    @property
    def delta_law(self) -> FiniteLaw:
        return self.pi


def _check_omega_range(delta_law: FiniteLaw, m: int):
    omegas = expit(-delta_law.values / math.sqrt(m))
    if not np.all((omegas > 0.0) & (omegas < 1.0)):
        raise EllipticityViolation("site probabilities reach 0 or 1 at m={}".format(m))


def tilt_env(pi: FiniteLaw, kappa: float, m: int) -> TiltedEnvironment:
    c = compute_c(pi, kappa)
    report = tilt(pi, kappa, c, m)
    _check_omega_range(report.tilted, m)
    return TiltedEnvironment(pi_m=report.tilted, m=m, kappa=kappa, sigma2=compute_sigma2(pi, kappa, c), c=c,
                             report=report)


def seignourel(pi: FiniteLaw, m: int) -> SeignourelEnvironment:
    if not isinstance(m, int) or m < 1:
        raise ValueError("m must be a positive integer, got {!r}".format(m))
    _check_omega_range(pi, m)
    return SeignourelEnvironment(pi=pi, m=m)


def mean_log_rho(env) -> float:
    """E log rho_0 at scale m, as a finite sum over the delta atoms."""
    law = env.delta_law
    return math.fsum(law.values * law.probs) / math.sqrt(env.m)


def solve_kappa_m(tilted: TiltedEnvironment) -> float:
    """
    The positive root kappa_m of E (rho_0^(m))^kappa_m = 1 for the tilted sites.

    :raises IdentityViolation: if E log rho_0^(m) differs from -kappa / (2m).
    """
    mean = mean_log_rho(tilted)
    expected = -tilted.kappa / (2.0 * tilted.m)
    if not agree(mean, expected):
        raise IdentityViolation("E log rho^(m) = {!r} differs from {!r}".format(mean, expected))

    log_rho = tilted.pi_m.scaled(1.0 / math.sqrt(tilted.m))
    kappa_m = solve_beta(log_rho, tol=KAPPA_M_TOL)
    logger.debug("kappa_m={!r} at m={}".format(kappa_m, tilted.m))
    return kappa_m


class EnvironmentSlice:
    """
    Sites lo..hi of one environment realization. Deltas are drawn blockwise from the stream
    (seed, ENVIRONMENT, env_index, block); omegas follow from the deltas. The slice grows with
    extend() until it is frozen.
    """
    def __init__(self, source, site_range: Tuple[int, int], seed: int, env_index: int=0, site_block: int=256):
        lo, hi = site_range
        if not lo <= 0 <= hi:
            raise ValueError("site range {}..{} must contain 0".format(lo, hi))
        if site_block < 1:
            raise ValueError("site_block must be positive")

        self.source = source
        self.m = source.m
        self.seed = seed
        self.env_index = env_index
        self.site_block = site_block
        self.frozen = False

        self._sampler = build_sampler(source.delta_law)
        self._block_lo = lo // site_block
        self._block_hi = hi // site_block
        blocks = [self._draw(block) for block in range(self._block_lo, self._block_hi + 1)]
        self._deltas = np.concatenate([deltas for deltas, _ in blocks])
        self._omegas = np.concatenate([omegas for _, omegas in blocks])

        self.lo = lo
        self.hi = hi
        self._window = None

    @property
    def site_range(self) -> Tuple[int, int]:
        return self.lo, self.hi

    @property
    def seed_key(self) -> dict:
        return streams.seed_record(self.seed, streams.ENVIRONMENT, self.env_index)

    def _draw(self, block: int):
        rng = streams.generator(self.seed, streams.ENVIRONMENT, self.env_index, streams.zigzag(block))
        deltas = self._sampler.sample(rng, self.site_block)
        return deltas, expit(-deltas / math.sqrt(self.m))

    def covers(self, lo: int, hi: int) -> bool:
        return self.lo <= lo and hi <= self.hi

    def extend(self, lo: int, hi: int):
        if self.covers(lo, hi):
            return
        if self.frozen:
            raise EnvironmentFrozen("cannot extend a frozen environment to {}..{}".format(lo, hi))

        block_lo = min(lo, self.lo) // self.site_block
        block_hi = max(hi, self.hi) // self.site_block

        left = [self._draw(block) for block in range(block_lo, self._block_lo)]
        right = [self._draw(block) for block in range(self._block_hi + 1, block_hi + 1)]
        if left or right:
            logger.debug("environment {} grows by {} blocks".format(self.env_index, len(left) + len(right)))
            self._deltas = np.concatenate([d for d, _ in left] + [self._deltas] + [d for d, _ in right])
            self._omegas = np.concatenate([o for _, o in left] + [self._omegas] + [o for _, o in right])
            self._block_lo = min(block_lo, self._block_lo)
            self._block_hi = max(block_hi, self._block_hi)

        self.lo = min(lo, self.lo)
        self.hi = max(hi, self.hi)
        self._window = None

    def freeze(self):
        self.frozen = True

    def _offset(self, site: int) -> int:
        return site - self._block_lo * self.site_block

    def _check(self, lo: int, hi: int):
        if not self.covers(lo, hi):
            raise RangeNotMaterialized(lo, hi, self.site_range)

    def delta(self, site: int) -> float:
        self._check(site, site)
        return float(self._deltas[self._offset(site)])

    def omega(self, site: int) -> float:
        self._check(site, site)
        return float(self._omegas[self._offset(site)])

    def deltas(self, lo: int, hi: int) -> np.ndarray:
        self._check(lo, hi)
        return self._deltas[self._offset(lo):self._offset(hi) + 1].copy()

    def omegas(self, lo: int, hi: int) -> np.ndarray:
        self._check(lo, hi)
        return self._omegas[self._offset(lo):self._offset(hi) + 1].copy()

    def window(self) -> Tuple[int, List[float]]:
        """First site and the omegas of lo..hi as a plain list, for stepping loops."""
        if self._window is None:
            self._window = (self.lo, self.omegas(self.lo, self.hi).tolist())
        return self._window

    def block_start(self, site: int) -> int:
        return (site // self.site_block) * self.site_block

    def __repr__(self):
        return 'EnvironmentSlice({}, m={}, sites={}..{}, seed={}, env_index={}{})'.format(
            self.source.construction, self.m, self.lo, self.hi, self.seed, self.env_index,
            ', frozen' if self.frozen else '')


def materialize_environment(tilted, site_range: Tuple[int, int], seed: int, env_index: int=0,
                            site_block: int=256) -> EnvironmentSlice:
    return EnvironmentSlice(tilted, site_range, seed, env_index, site_block)


def seignourel_environment(env: EnvironmentLaw, m: int, site_range: Tuple[int, int], seed: int, env_index: int=0,
                           site_block: int=256) -> EnvironmentSlice:
    return EnvironmentSlice(seignourel(log_rho_law(env), m), site_range, seed, env_index, site_block)


def simulate_rwre(env_slice: EnvironmentSlice, n_steps: int, seed: int, walk_index: int) -> np.ndarray:
    """
    Positions Z_0 = 0, ..., Z_n of the nearest-neighbour walk in the environment. The environment
    is extended a block at a time when the walk leaves it.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1, got {!r}".format(n_steps))

    rng = streams.generator(seed, streams.RWRE, walk_index)
    uniforms = rng.random(n_steps).tolist()

    first, omegas = env_slice.window()
    end = first + len(omegas)

    position = 0
    path = [0]
    for u in uniforms:
        if not first <= position < end:
            block = env_slice.block_start(position)
            env_slice.extend(block, block + env_slice.site_block - 1)
            first, omegas = env_slice.window()
            end = first + len(omegas)

        position += 1 if u < omegas[position - first] else -1
        path.append(position)

    return np.array(path, dtype=np.int64)


def rwre_steps(m: int, horizon: float) -> int:
    return int(math.floor(m * m * horizon + GRID_EPS))


def check_horizon(m: int, horizon: float) -> int:
    steps = rwre_steps(m, horizon)
    if steps < 1:
        raise HorizonTooShort("horizon {!r} is shorter than one step at m={}".format(horizon, m))
    return steps


def quenched_environment(env, horizon: float, seed: int, site_block: int=256) -> EnvironmentSlice:
    """One frozen environment wide enough for every walk of m^2 T steps."""
    steps = check_horizon(env.m, horizon)
    env_slice = materialize_environment(env, (-steps, steps), seed, 0, site_block)
    env_slice.freeze()
    return env_slice


def scaled_rwre(env, horizon: float, seed: int, walk_index: int, env_slice: EnvironmentSlice=None,
                site_block: int=256) -> PathGrid:
    """
    (1/m) Z_[m^2 t] on the grid k/m^2. Without env_slice the walk runs in a fresh environment of
    its own (annealed); with one, in that shared environment (quenched).
    """
    m = env.m
    steps = check_horizon(m, horizon)

    mode = QUENCHED
    if env_slice is None:
        mode = ANNEALED
        env_slice = materialize_environment(env, (0, 0), seed, walk_index, site_block)

    positions = simulate_rwre(env_slice, steps, seed, walk_index)

    meta = {'process': 'scaled_rwre', 'construction': env.construction, 'mode': mode, 'm': m,
            'path_index': walk_index, 'seed': seed}
    return PathGrid(0.0, 1.0 / (m * m), positions / m, meta)


class ScaledRWRE:
    """Picklable per-walk simulation for ensembles; a quenched instance owns one frozen environment."""
    def __init__(self, env, horizon: float, seed: int, mode: str=ANNEALED, site_block: int=256):
        if mode not in (ANNEALED, QUENCHED):
            raise ValueError("unknown mode {!r}".format(mode))

        self.env = env
        self.horizon = horizon
        self.seed = seed
        self.site_block = site_block
        check_horizon(env.m, horizon)
        self.env_slice = quenched_environment(env, horizon, seed, site_block) if mode == QUENCHED else None

    def __call__(self, walk_index: int) -> PathGrid:
        return scaled_rwre(self.env, self.horizon, self.seed, walk_index, self.env_slice, self.site_block)


def rwre_ensemble(env, horizon: float, num_walks: int, seed: int, mode: str=ANNEALED, workers: int=1,
                  site_block: int=256) -> List[PathGrid]:
    logger.debug("simulating {} {} walks at m={}".format(num_walks, mode, env.m))
    return run_indexed(ScaledRWRE(env, horizon, seed, mode, site_block), num_walks, workers)


def _potential_values(env_slice: EnvironmentSlice, ks: np.ndarray) -> np.ndarray:
    k_min = min(int(ks.min()), 0)
    k_max = max(int(ks.max()), 0)

    if k_max >= 2:
        positive = np.concatenate(([0.0], np.cumsum(env_slice.deltas(1, k_max))))
    else:
        positive = np.zeros(k_max + 1)

    if k_min < 0:
        # negative[j] = sum of delta_i for i = k_min + 1 + j, ..., 0
        negative = np.cumsum(env_slice.deltas(k_min + 1, 0)[::-1])[::-1]
    else:
        negative = np.zeros(0)

    values = np.empty(len(ks))
    for n, k in enumerate(ks.tolist()):
        if k >= 2:
            values[n] = positive[k]
        elif k >= 0:
            values[n] = 0.0
        else:
            values[n] = -negative[k - k_min]

    return values / math.sqrt(env_slice.m)


def potential_at(env_slice: EnvironmentSlice, x: float) -> float:
    k = int(math.floor(env_slice.m * x + GRID_EPS))
    return float(_potential_values(env_slice, np.array([k]))[0])


def potential(env_slice: EnvironmentSlice, m: int, x_grid: Sequence[float]) -> PathGrid:
    """
    The potential at every point of a regular grid of x values:

        V(x) = (1/sqrt(m)) (delta_1 + ... + delta_[mx])     for [mx] >= 2
        V(x) = 0                                           for [mx] in {0, 1}
        V(x) = -(1/sqrt(m)) (delta_[mx]+1 + ... + delta_0)   for [mx] < 0

    :raises RangeNotMaterialized: if the sites needed are not all in the slice.
    """
    if m != env_slice.m:
        raise ValueError("slice was built for m={}, not m={}".format(env_slice.m, m))

    xs = np.asarray(x_grid, dtype=float)
    if len(xs) == 0:
        raise ValueError("empty x grid")

    dx = 1.0 / m
    if len(xs) > 1:
        steps = np.diff(xs)
        dx = float(xs[-1] - xs[0]) / (len(xs) - 1)
        if dx <= 0 or not np.allclose(steps, dx, rtol=1e-9, atol=0.0):
            raise ValueError("x grid must be increasing and regularly spaced")

    ks = np.floor(m * xs + GRID_EPS).astype(np.int64)
    values = _potential_values(env_slice, ks)

    meta = {'process': 'potential', 'construction': env_slice.source.construction, 'm': m,
            'env_index': env_slice.env_index, 'seed': env_slice.seed}
    return PathGrid(float(xs[0]), dx, values, meta)


class SliceRecord(NamedTuple):
    meta: dict
    sites: np.ndarray
    deltas: np.ndarray
    omegas: np.ndarray


def write_slice_csv(env_slice: EnvironmentSlice, fp: TextIO):
    meta = {'construction': env_slice.source.construction, 'm': env_slice.m, 'seed': env_slice.seed,
            'env_index': env_slice.env_index, 'lo': env_slice.lo, 'hi': env_slice.hi}
    fp.writelines(meta_lines(meta))
    fp.write('site,delta,omega\n')

    deltas = env_slice.deltas(env_slice.lo, env_slice.hi).tolist()
    omegas = env_slice.omegas(env_slice.lo, env_slice.hi).tolist()
    for site, delta, omega in zip(range(env_slice.lo, env_slice.hi + 1), deltas, omegas):
        fp.write('{},{!r},{!r}\n'.format(site, delta, omega))


def read_slice_csv(fp: TextIO, source: str='<input>') -> SliceRecord:
    meta, header = read_meta(fp, source)
    check(header == 'site,delta,omega', source, 'unexpected column header', header)

    rows = [line.strip().split(',') for line in fp if line.strip()]
    return SliceRecord(meta=meta,
                       sites=np.array([int(site) for site, _, _ in rows], dtype=np.int64),
                       deltas=np.array([float(delta) for _, delta, _ in rows]),
                       omegas=np.array([float(omega) for _, _, omega in rows]))
