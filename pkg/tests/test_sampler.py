import math
import unittest

import numpy as np

from twlab import streams
from twlab.measure import FiniteLaw, inspect
from twlab.sampler import build_sampler

FIVE_POINT = FiniteLaw([(-2.0, 0.1), (-1.0, 0.4), (0.5, 0.2), (1.0, 0.25), (3.0, 0.05)])


class TestIncrementSampler(unittest.TestCase):
    def test_single_atom(self):
        sampler = build_sampler(FiniteLaw([(-1.5, 1.0)]))
        draws = sampler.sample(streams.generator(1, streams.WALK, 0), 100)
        self.assertTrue(np.all(draws == -1.5))

    def test_values_in_support(self):
        sampler = build_sampler(FIVE_POINT)
        draws = sampler.sample(streams.generator(2, streams.WALK, 0), 1000)
        self.assertTrue(set(draws.tolist()) <= set(FIVE_POINT.values.tolist()))

    def test_same_stream_same_draws(self):
        sampler = build_sampler(FIVE_POINT)
        a = sampler.sample(streams.generator(3, streams.WALK, 7), 500)
        b = sampler.sample(streams.generator(3, streams.WALK, 7), 500)
        self.assertTrue(np.array_equal(a, b))

    def test_frequencies(self):
        """
        situation: one million draws from a five point law.
        expected: every atom frequency within four binomial standard deviations.
        """
        n = 1000000
        sampler = build_sampler(FIVE_POINT)
        indices = sampler.sample_indices(streams.generator(4, streams.WALK, 0), n)
        counts = np.bincount(indices, minlength=len(FIVE_POINT))
        for count, p in zip(counts.tolist(), FIVE_POINT.probs.tolist()):
            self.assertLessEqual(abs(count / n - p), 4.0 * math.sqrt(p * (1.0 - p) / n))

    def test_tilted_frequencies(self):
        n = 1000000
        tilted = inspect(FiniteLaw([(1.0, 0.25), (-1.0, 0.75)]), 100).tilted
        p = dict(tilted.atoms)[1.0]
        draws = build_sampler(tilted).sample(streams.generator(5, streams.WALK, 0), n)
        frequency = np.count_nonzero(draws == 1.0) / n
        self.assertLessEqual(abs(frequency - p), 4.0 * math.sqrt(p * (1.0 - p) / n))


if __name__ == '__main__':
    unittest.main()
