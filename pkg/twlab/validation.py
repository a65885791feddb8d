from typing import Iterable, List, Tuple


class ValidationError(Exception):
    def __init__(self, where, reason: str, extra: str=''):
        super().__init__(where, reason, extra)
        self.where = where
        self.reason = reason
        self.extra = extra

    def __str__(self):
        where = '' if self.where is None else '{}: '.format(self.where)
        extra = '' if not self.extra else ' ({})'.format(self.extra)
        return '{}{}{}'.format(where, self.reason, extra)

    def __repr__(self):
        return "Validation Error {}: {} {}".format(self.where, self.reason, self.extra)


def check(cond, where, reason: str, extra: str=''):
    if not cond:
        raise ValidationError(where, reason, extra)


def parse_pairs(lines: Iterable[str], source: str='<input>') -> List[Tuple[float, float]]:
    """
    Reads the `value<TAB>prob` text format. Blank lines and everything after a `#` are ignored.
    Any whitespace separates the two columns, but there must be exactly two of them.
    """
    pairs = []
    for lineno, line in enumerate(lines, start=1):
        content = line.split('#', 1)[0].strip()
        if len(content) == 0:
            continue

        where = '{}:{}'.format(source, lineno)
        fields = content.split()
        check(len(fields) == 2, where, 'expected two columns', 'got {!r}'.format(content))

        try:
            value, prob = float(fields[0]), float(fields[1])
        except ValueError as e:
            raise ValidationError(where, 'not a decimal number', str(e)) from e

        pairs.append((value, prob))

    check(len(pairs) > 0, source, 'no atoms found')
    return pairs


def format_pairs(pairs: Iterable[Tuple[float, float]], header: Iterable[str]=()) -> str:
    lines = ['# ' + line for line in header]
    lines.extend('{!r}\t{!r}'.format(float(value), float(prob)) for value, prob in pairs)
    return '\n'.join(lines) + '\n'
