import numpy as np

from .measure import FiniteLaw


class IncrementSampler:
    """
    Draws i.i.d. values from a FiniteLaw with Vose's alias method: one uniform column index and
    one uniform coin per draw, whatever the number of atoms.

    See http://www.keithschwarz.com/darts-dice-coins/ for details.
    """
    def __init__(self, law: FiniteLaw):
        n = len(law)

        self.law = law
        self._values = law.values
        self._probabilities = np.ones(n)
        self._alias = np.arange(n)

        scaled = (law.probs * n).tolist()

        small = [i for i, p in enumerate(scaled) if p < 1.0]
        large = [i for i, p in enumerate(scaled) if p >= 1.0]

        while small and large:
            l = small.pop()
            g = large.pop()
            self._probabilities[l] = scaled[l]
            self._alias[l] = g
            scaled[g] = (scaled[l] + scaled[g]) - 1.0
            if scaled[g] < 1.0:
                small.append(g)
            else:
                large.append(g)

        # whatever is left over is 1 up to rounding and keeps its own column
        for i in small + large:
            self._probabilities[i] = 1.0
            self._alias[i] = i

        self._probabilities.flags.writeable = False
        self._alias.flags.writeable = False

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        columns = rng.integers(0, len(self._probabilities), size=size)
        coins = rng.random(size)
        return np.where(coins < self._probabilities[columns], columns, self._alias[columns])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self._values[self.sample_indices(rng, size)]

    def __repr__(self):
        return 'IncrementSampler(%r, %r)' % (
            list(zip(self._values.tolist(), self._probabilities.tolist(), self._alias.tolist())), self.law)


def build_sampler(law: FiniteLaw) -> IncrementSampler:
    return IncrementSampler(law)
