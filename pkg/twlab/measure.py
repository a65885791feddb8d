"""
Finitely supported laws and the exponential measure change.

A base law with negative mean and a positive exponent beta (E exp(beta X) = 1) is turned, for
every scale m, into a tilted law whose mean is exactly -beta/(2 sqrt(m)). Its scaled random walk
converges to a Brownian motion with drift -beta/2 and variance sigma2. All constructions here are
finite double sums over the atoms, so every identity is checked numerically when it is built.
"""

import logging
import math
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence, TextIO, Tuple

import numpy as np
from scipy import optimize
from scipy.special import expit

from .validation import ValidationError, check, parse_pairs, format_pairs

# absolute tolerances for quantities of order one
MASS_TOL = 1e-12
IDENTITY_TOL = 1e-12

# tilted masses below this are treated as exact zeros
ZERO_MASS = 1e-15

# keeps exp(beta x) in a safe floating point range
MAX_ABS_VALUE = 1e3

ROOT_MAXITER = 200

logger = logging.getLogger('twlab.measure')


class MeasureError(Exception):
    pass


class TransienceError(MeasureError):
    pass


class NoPositivePart(TransienceError):
    pass


class NonNegativeDrift(TransienceError):
    pass


class ZeroAtom(TransienceError):
    pass


class RootNotFound(TransienceError):
    pass


class IdentityViolation(MeasureError):
    pass


class NegativeMass(MeasureError):
    def __init__(self, atom: float, mass: float, m: int, m_min_hint: int):
        super().__init__(atom, mass, m, m_min_hint)
        self.atom = atom
        self.mass = mass
        self.m = m
        self.m_min_hint = m_min_hint

    def __str__(self):
        return "tilted mass {!r} at atom {!r} is negative for m={}; smallest valid m is {}".format(
            self.mass, self.atom, self.m, self.m_min_hint)


def agree(a: float, b: float, tol: float=IDENTITY_TOL) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


class FiniteLaw:
    """
    A probability law with finitely many atoms, sorted by value.

    Atoms are given as (value, prob) pairs in any order. Values must be pairwise distinct and
    bounded by MAX_ABS_VALUE in magnitude, probabilities strictly positive and summing to one
    within MASS_TOL. Instances are immutable.
    """
    def __init__(self, atoms: Iterable[Tuple[float, float]]):
        atoms = sorted((float(value), float(prob)) for value, prob in atoms)
        check(len(atoms) > 0, 'law', 'a law needs at least one atom')

        values = np.array([value for value, _ in atoms])
        probs = np.array([prob for _, prob in atoms])

        check(np.all(np.isfinite(values)) and np.all(np.isfinite(probs)), 'law', 'atoms must be finite')
        check(np.all(np.abs(values) <= MAX_ABS_VALUE), 'law',
              'atom values must not exceed {} in magnitude'.format(MAX_ABS_VALUE))
        check(np.all(np.diff(values) > 0), 'law', 'atom values must be pairwise distinct')
        check(np.all(probs > 0), 'law', 'probabilities must be strictly positive')

        total = math.fsum(probs)
        check(abs(total - 1.0) <= MASS_TOL, 'law', 'probabilities must sum to 1', 'sum is {!r}'.format(total))

        values.flags.writeable = False
        probs.flags.writeable = False
        self._values = values
        self._probs = probs

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[float, float]], merge_tol: float=0.0):
        """
        Builds a law from pairs whose values may repeat: values within `merge_tol` of the first
        value of a run are merged and their probabilities added.
        """
        merged = []
        for value, prob in sorted((float(v), float(p)) for v, p in pairs):
            if merged and abs(value - merged[-1][0]) <= merge_tol:
                merged[-1][1] += prob
            else:
                merged.append([value, prob])

        return cls((value, prob) for value, prob in merged)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def atoms(self) -> Sequence[Tuple[float, float]]:
        return list(zip(self._values.tolist(), self._probs.tolist()))

    def __len__(self):
        return len(self._values)

    def __iter__(self):
        return iter(self.atoms)

    def __eq__(self, other):
        if not isinstance(other, FiniteLaw):
            return NotImplemented
        return np.array_equal(self._values, other._values) and np.array_equal(self._probs, other._probs)

    def __hash__(self):
        return hash((self._values.tobytes(), self._probs.tobytes()))

    def __repr__(self):
        return 'FiniteLaw({!r})'.format(self.atoms)

    def mean(self) -> float:
        return math.fsum(self._values * self._probs)

    def moment(self, k: int) -> float:
        return math.fsum(self._values ** k * self._probs)

    def variance(self) -> float:
        mean = self.mean()
        return math.fsum((self._values - mean) ** 2 * self._probs)

    def laplace(self, s: float) -> float:
        """E exp(s X)"""
        return math.fsum(np.exp(s * self._values) * self._probs)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self._values)))

    def scaled(self, factor: float):
        return FiniteLaw(zip((self._values * factor).tolist(), self._probs.tolist()))

    def has_zero_atom(self) -> bool:
        return bool(np.any(self._values == 0.0))


class TiltParams(NamedTuple):
    beta: float
    c: float
    sigma2: float
    m: int


class TiltReport(NamedTuple):
    params: TiltParams
    base: FiniteLaw
    tilted: FiniteLaw
    mean: float
    second_moment: float
    variance: float

    def to_record(self) -> dict:
        return {
            'beta': self.params.beta,
            'c': self.params.c,
            'sigma2': self.params.sigma2,
            'm': self.params.m,
            'mean': self.mean,
            'second_moment': self.second_moment,
            'variance': self.variance,
            'variance_formula': variance_formula(self),
            'tilted_values': self.tilted.values.tolist(),
            'tilted_probs': self.tilted.probs.tolist(),
        }


class GeneratorCoefficients(NamedTuple):
    a_m: float
    b_m: float
    delta_eps: float


def _positive_root(func, name: str, tol: float) -> float:
    """
    Finds the unique s > 0 with func(s) = 1 for a convex func with func(0) = 1, func'(0) < 0 and
    func(s) -> infinity. The root is bracketed by doubling and then bisected.
    """
    def excess(s):
        return func(s) - 1.0

    hi = 1.0
    for _ in range(ROOT_MAXITER):
        if excess(hi) > 0:
            break
        hi *= 2.0
    else:
        raise RootNotFound("could not bracket {} from above".format(name))

    lo = hi / 2.0
    for _ in range(ROOT_MAXITER):
        value = excess(lo)
        if value < 0:
            break
        if value == 0:
            return lo
        lo /= 2.0
    else:
        raise RootNotFound("could not bracket {} from below".format(name))

    logger.debug("{} bracketed in [{!r}, {!r}]".format(name, lo, hi))

    try:
        root = optimize.bisect(excess, lo, hi, xtol=1e-300, maxiter=ROOT_MAXITER)
    except RuntimeError as e:
        raise RootNotFound("bisection for {} did not converge".format(name)) from e

    if abs(excess(root)) > tol:
        raise RootNotFound("{}={!r} leaves a moment residual of {!r}".format(name, root, excess(root)))

    return root


def check_transient(law: FiniteLaw, what: str='E X'):
    mean = law.mean()
    # a mean within rounding of 0 has no usable exponent
    if mean >= -IDENTITY_TOL * max(1.0, law.max_abs()):
        raise NonNegativeDrift("{} = {!r} is not negative".format(what, mean))

    if law.values[-1] <= 0:
        raise NoPositivePart("the law puts no mass on (0, inf)")

    if law.has_zero_atom():
        raise ZeroAtom("the law puts mass on 0")


def solve_beta(law: FiniteLaw, tol: float=IDENTITY_TOL) -> float:
    """
    Returns the positive root beta of E exp(beta X) = 1.

    :raises NonNegativeDrift: if E X >= 0.
    :raises NoPositivePart: if the law has no atom above 0.
    :raises ZeroAtom: if the law has an atom at 0.
    """
    check_transient(law)
    return _positive_root(law.laplace, 'beta', tol)


def laplace(law: FiniteLaw, s: float) -> float:
    return law.laplace(s)


def _sides(law: FiniteLaw):
    negative = law.values < 0
    positive = law.values > 0
    return law.values[negative], law.probs[negative], law.values[positive], law.probs[positive]


def compute_c(law: FiniteLaw, beta: float) -> float:
    """
    c = sum over v > 0 of (exp(beta v) - 1) mu(v). The same value must come out of the negative
    atoms, sum over u < 0 of (1 - exp(beta u)) mu(u); a disagreement means beta is not the root.
    """
    u, pu, v, pv = _sides(law)
    positive = math.fsum(np.expm1(beta * v) * pv)
    negative = math.fsum(-np.expm1(beta * u) * pu)

    if not agree(positive, negative):
        raise IdentityViolation("positive side c={!r} differs from negative side {!r}".format(positive, negative))

    if positive <= 0:
        raise IdentityViolation("c={!r} is not positive".format(positive))

    return positive


def _pair_weights(law: FiniteLaw, beta: float, c: float):
    """
    Joint weights w(u, v) = (exp(beta v) - exp(beta u)) mu(u) mu(v) / c on the grid of negative
    atoms (rows) times positive atoms (columns).
    """
    u, pu, v, pv = _sides(law)
    uu = u[:, np.newaxis]
    vv = v[np.newaxis, :]
    weights = (np.expm1(beta * vv) - np.expm1(beta * uu)) * pu[:, np.newaxis] * pv[np.newaxis, :] / c
    return uu, vv, weights


def compute_sigma2(law: FiniteLaw, beta: float, c: float) -> float:
    uu, vv, weights = _pair_weights(law, beta, c)
    sigma2 = -math.fsum((weights * uu * vv).ravel())

    if not (0 < sigma2 < math.inf):
        raise IdentityViolation("sigma2={!r} is not in (0, inf)".format(sigma2))

    return sigma2


def tilt_params(law: FiniteLaw, m: int) -> TiltParams:
    beta = solve_beta(law)
    c = compute_c(law, beta)
    return TiltParams(beta=beta, c=c, sigma2=compute_sigma2(law, beta, c), m=m)


def _tilted_masses(law: FiniteLaw, beta: float, c: float, shift: float) -> np.ndarray:
    """
    Masses of the tilted law on the atoms of `law` (negative atoms first) for
    shift = beta / (2 sqrt(m)).
    """
    uu, vv, weights = _pair_weights(law, beta, c)
    diff = uu - vv

    to_u = weights * (-vv - shift) / diff
    to_v = weights * (uu + shift) / diff

    mass_u = [math.fsum(row) for row in to_u]
    mass_v = [math.fsum(col) for col in to_v.T]
    return np.array(mass_u + mass_v)


def m_min(law: FiniteLaw, beta: float, c: float) -> int:
    """
    Smallest m for which every tilted mass is nonnegative. Masses are affine in 1/sqrt(m), which
    gives a first estimate; the estimate is then corrected by a local search.
    """
    if law.has_zero_atom():
        raise ZeroAtom("the law puts mass on 0")

    limit = _tilted_masses(law, beta, c, 0.0)
    slope = _tilted_masses(law, beta, c, beta / 2.0) - limit

    estimate = 1
    for a, b in zip(limit, slope):
        if b < 0:
            estimate = max(estimate, math.ceil((b / a) ** 2))

    def valid(m):
        return bool(np.all(_tilted_masses(law, beta, c, beta / (2.0 * math.sqrt(m))) >= -ZERO_MASS))

    while not valid(estimate):
        estimate += 1
    while estimate > 1 and valid(estimate - 1):
        estimate -= 1

    logger.debug("smallest valid m is {}".format(estimate))
    return estimate


def tilt(law: FiniteLaw, beta: float, c: float, m: int) -> TiltReport:
    """
    Builds the tilted law for scale m by exact enumeration over pairs of a negative atom u and a
    positive atom v and checks its total mass, its mean -beta/(2 sqrt(m)) and its second moment.

    :raises ZeroAtom: if the base law has an atom at 0.
    :raises NegativeMass: if m is too small for the tilted masses to be nonnegative.
    :raises IdentityViolation: if beta and c are not consistent with the law.
    """
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise ValueError("m must be a positive integer, got {!r}".format(m))

    if law.has_zero_atom():
        raise ZeroAtom("the law puts mass on 0")

    root_m = math.sqrt(m)
    shift = beta / (2.0 * root_m)
    masses = _tilted_masses(law, beta, c, shift)

    for value, mass in zip(law.values.tolist(), masses.tolist()):
        if mass < -ZERO_MASS:
            raise NegativeMass(value, mass, m, m_min(law, beta, c))

    kept = [(value, mass) for value, mass in zip(law.values.tolist(), masses.tolist()) if mass > ZERO_MASS]
    try:
        tilted = FiniteLaw(kept)
    except ValidationError as e:
        raise IdentityViolation("tilted law is not a probability law: {}".format(e)) from e

    mean = tilted.mean()
    if not agree(mean, -shift):
        raise IdentityViolation("tilted mean {!r} differs from {!r}".format(mean, -shift))

    second_moment = tilted.moment(2)
    uu, vv, weights = _pair_weights(law, beta, c)
    expected = math.fsum((weights * (-uu * vv - beta * (uu + vv) / (2.0 * root_m))).ravel())
    if not agree(second_moment, expected):
        raise IdentityViolation("tilted second moment {!r} differs from {!r}".format(second_moment, expected))

    params = TiltParams(beta=beta, c=c, sigma2=compute_sigma2(law, beta, c), m=m)
    return TiltReport(params=params, base=law, tilted=tilted, mean=mean,
                      second_moment=second_moment, variance=second_moment - mean ** 2)


def inspect(law: FiniteLaw, m: int) -> TiltReport:
    params = tilt_params(law, m)
    return tilt(law, params.beta, params.c, m)


def variance_formula(report: TiltReport) -> float:
    """
    Variance of one tilted increment from the double sum over the base law, minus beta^2/(4m).
    Must agree with the variance of the tilted atoms.
    """
    beta, c, _, m = report.params
    uu, vv, weights = _pair_weights(report.base, beta, c)
    double_sum = math.fsum((weights * (-uu * vv - beta * (uu + vv) / (2.0 * math.sqrt(m)))).ravel())
    value = double_sum - beta ** 2 / (4.0 * m)

    if not agree(value, report.variance):
        raise IdentityViolation("variance formula {!r} differs from tilted variance {!r}".format(
            value, report.variance))

    return value


def variance_sup(law: FiniteLaw, params: TiltParams, m_from: int) -> float:
    """
    Supremum over m' >= m_from of the tilted increment variance. As a function of x = 1/sqrt(m')
    the variance is sigma2 + k x - beta^2 x^2 / 4, so the supremum is attained at the clamped vertex.
    """
    beta, c, sigma2, _ = params
    uu, vv, weights = _pair_weights(law, beta, c)
    k = math.fsum((weights * (-beta * (uu + vv) / 2.0)).ravel())

    x_max = 1.0 / math.sqrt(m_from)
    x = min(max(2.0 * k / beta ** 2, 0.0), x_max)
    return sigma2 + k * x - beta ** 2 * x ** 2 / 4.0


def generator_coefficients(report: TiltReport, eps: float) -> GeneratorCoefficients:
    """
    Truncated second moment, truncated drift and jump rate beyond eps of the scaled walk,
    each multiplied by m.
    """
    m = report.params.m
    scaled = report.tilted.values / math.sqrt(m)
    probs = report.tilted.probs
    inside = np.abs(scaled) <= 1.0

    a_m = m * math.fsum(scaled[inside] ** 2 * probs[inside])
    b_m = m * math.fsum(scaled[inside] * probs[inside])
    delta_eps = m * math.fsum(probs[np.abs(scaled) > eps])
    return GeneratorCoefficients(a_m=a_m, b_m=b_m, delta_eps=delta_eps)


def simple_walk_law(beta: float) -> FiniteLaw:
    """The nearest-neighbour law on {-1, +1} whose exponent is beta."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return FiniteLaw([(-1.0, float(expit(beta))), (1.0, float(expit(-beta)))])


def lattice_span(law: FiniteLaw, max_denominator: int=1000, tol: float=1e-9):
    """
    The largest d such that every difference of atoms is an integer multiple of d, or None when
    the atoms are not commensurable up to `max_denominator`. Sums of n increments then live on
    n x0 + d Z.
    """
    diffs = (law.values[1:] - law.values[0]).tolist()
    if len(diffs) == 0:
        return None

    span = diffs[0]
    for diff in diffs[1:]:
        ratio = Fraction(diff / span).limit_denominator(max_denominator)
        if abs(float(ratio) - diff / span) > tol * max(1.0, abs(diff / span)):
            return None
        span /= ratio.denominator

    return span


def parse_law(lines: Iterable[str], source: str='<input>') -> FiniteLaw:
    return FiniteLaw(parse_pairs(lines, source))


def load_law(path: str) -> FiniteLaw:
    with open(path, 'rt') as fp:
        return parse_law(fp, path)


def format_law(law: FiniteLaw, header: Iterable[str]=()) -> str:
    return format_pairs(law.atoms, header)


def write_law(law: FiniteLaw, fp: TextIO, header: Iterable[str]=()):
    fp.write(format_law(law, header))
