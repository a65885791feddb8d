from functools import partial
from numbers import Integral, Real


def rangecheck(value, datatype, min=None, max=None, above=None, allow_none=False):
    if value is None:
        return allow_none

    # bool is an int subclass but never a valid count or scale
    if isinstance(value, bool) or not isinstance(value, datatype):
        return False

    if min is not None and value < min:
        return False

    if max is not None and value > max:
        return False

    if above is not None and value <= above:
        return False

    return True


def increasing(values, datatype=Integral, min=None):
    if not isinstance(values, (list, tuple)) or len(values) == 0:
        return False

    if not all(rangecheck(value, datatype, min=min) for value in values):
        return False

    return all(a < b for a, b in zip(values, values[1:]))


checks = {
    "m": partial(increasing, datatype=Integral, min=1),
    "T": partial(rangecheck, datatype=Real, above=0.0),
    "paths": partial(rangecheck, datatype=Integral, min=1),
    "seed": partial(rangecheck, datatype=Integral, min=0, max=2**64 - 1),
    "sigma": partial(rangecheck, datatype=Real, above=0.0),
    "kappa": partial(rangecheck, datatype=Real, min=0.0),
    "h": partial(rangecheck, datatype=Real, above=0.0, max=0.1),
}


def failed_checks(doc: dict):
    """
    Returns the names of all fields present in `doc` whose value fails its check.
    """
    return sorted(name for name, func in checks.items() if name in doc and not func(doc[name]))
