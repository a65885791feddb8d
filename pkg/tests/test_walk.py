import math
import unittest

import numpy as np

from twlab import streams, walk
from twlab.ensemble import run_marginal
from twlab.measure import FiniteLaw, tilt_params
from twlab.paths import marginal
from twlab.stats import jitter, ks_critical_one, ks_normal_check, mean_check, sample_correlation

TWO_POINT = FiniteLaw([(1.0, 0.25), (-1.0, 0.75)])
PARAMS = tilt_params(TWO_POINT, 1)
LOG3 = math.log(3.0)


class TestSimConfig(unittest.TestCase):
    def test_steps(self):
        self.assertEqual(walk.SimConfig(400, 1.0, 1, 0).steps, 400)
        self.assertEqual(walk.SimConfig(3, 0.5, 1, 0).steps, 1)
        self.assertEqual(walk.SimConfig(10, 0.3, 1, 0).steps, 3)

    def test_invalid(self):
        for config in (walk.SimConfig(0, 1.0, 1, 0),
                       walk.SimConfig(2.5, 1.0, 1, 0),
                       walk.SimConfig(4, 0.0, 1, 0),
                       walk.SimConfig(4, 0.1, 1, 0),
                       walk.SimConfig(4, 1.0, 0, 0),
                       walk.SimConfig(4, 1.0, 1, -1)):
            with self.assertRaises(walk.ConfigError):
                walk.check_config(config)


class TestScaledWalk(unittest.TestCase):
    def setUp(self):
        self.walk = walk.ScaledWalk(TWO_POINT, PARAMS, walk.SimConfig(400, 1.0, 10, 17))

    def test_grid(self):
        path = self.walk(0)
        self.assertEqual(len(path), 401)
        self.assertEqual(path.values[0], 0.0)
        self.assertEqual(path.dt, 1.0 / 400)
        self.assertEqual(path.meta['path_index'], 0)

    def test_increments(self):
        increments = self.walk(1).increments()
        self.assertTrue(np.allclose(np.abs(increments), 0.05, rtol=0.0, atol=1e-12))

    def test_deterministic(self):
        other = walk.ScaledWalk(TWO_POINT, PARAMS, walk.SimConfig(400, 1.0, 10, 17))
        self.assertEqual(self.walk(3), other(3))
        self.assertFalse(np.array_equal(self.walk(3).values, self.walk(4).values))

    def test_lattice_width(self):
        self.assertAlmostEqual(self.walk.lattice_width, 0.1, places=14)

    def test_ensemble(self):
        paths = walk.simulate_walk_ensemble(TWO_POINT, PARAMS, walk.SimConfig(16, 2.0, 5, 17))
        self.assertEqual(len(paths), 5)
        self.assertEqual(paths[2], walk.simulate_scaled_walk(TWO_POINT, PARAMS, walk.SimConfig(16, 2.0, 5, 17), 2))

    def test_marginal(self):
        """
        situation: 5000 paths at m = 100.
        expected: H(1) has the exact finite-m mean and, smoothed over its lattice, is close to
        Normal(-beta/2, sigma2).
        """
        n = 5000
        config = walk.SimConfig(100, 1.0, n, 23)
        scaled = walk.ScaledWalk(TWO_POINT, PARAMS, config)
        sample = run_marginal(scaled, n, 1.0)

        report = scaled.report
        target = config.steps * report.mean / math.sqrt(100)
        sigma = math.sqrt(config.steps * report.variance / 100)
        self.assertAlmostEqual(target, -LOG3 / 2.0, places=12)
        self.assertTrue(mean_check('mean', sample, target, sigma=sigma, sigmas=4.0).passed)

        smoothed = jitter(sample, scaled.lattice_width, streams.generator(23, streams.LATTICE, 100))
        check = ks_normal_check('ks', smoothed, -PARAMS.beta / 2.0, PARAMS.sigma2, 1.7 * ks_critical_one(0.01, n))
        self.assertTrue(check.passed)


class TestWalkMoments(unittest.TestCase):
    """20000 paths at m = 400, observed at t = 0.25, 0.5 and 1."""
    N = 20000
    M = 400
    TIMES = [0.25, 0.5, 1.0]

    @classmethod
    def setUpClass(cls):
        config = walk.SimConfig(cls.M, 1.0, cls.N, 29)
        cls.scaled = walk.ScaledWalk(TWO_POINT, PARAMS, config)
        paths = walk.simulate_walk_ensemble(TWO_POINT, PARAMS, config)
        cls.samples = {t: marginal(paths, t) for t in cls.TIMES}

    def test_centered_mean(self):
        variance = self.scaled.report.variance
        for t in self.TIMES:
            steps = int(round(self.M * t))
            centered = self.samples[t] + (PARAMS.beta / 2.0) * steps / self.M
            report = mean_check('centered_t{}'.format(t), centered, 0.0, sigma=math.sqrt(steps * variance / self.M),
                                sigmas=4.0)
            self.assertTrue(report.passed, report.to_record())

    def test_variance_scaling(self):
        expected = self.scaled.report.variance
        estimate = float(np.var(self.samples[1.0], ddof=1))
        self.assertLess(abs(estimate - expected), 0.05 * expected)

    def test_increments_uncorrelated(self):
        h1, h2, h3 = (self.samples[t] for t in self.TIMES)
        bound = 4.0 / math.sqrt(self.N)
        for a, b in ((h1, h2 - h1), (h2 - h1, h3 - h2), (h1, h3 - h2)):
            self.assertLess(abs(sample_correlation(a, b)), bound)


class TestBrownianMotion(unittest.TestCase):
    def test_grid(self):
        path = walk.simulate_bm_with_drift(1.0, LOG3, 1.0, 0.01, 5, 0)
        self.assertEqual(len(path), 101)
        self.assertEqual(path.values[0], 0.0)
        self.assertEqual(path.meta['process'], 'brownian_drift')

    def test_invalid(self):
        with self.assertRaises(ValueError):
            walk.simulate_bm_with_drift(0.0, LOG3, 1.0, 0.01, 5, 0)
        with self.assertRaises(ValueError):
            walk.simulate_bm_with_drift(1.0, LOG3, 1.0, 0.0, 5, 0)

    def test_ensemble_marginal(self):
        n = 5000
        paths = walk.simulate_bm_ensemble(1.0, LOG3, 1.0, 0.1, n, 9)
        sample = np.array([path.at_grid(1.0) for path in paths])
        self.assertTrue(mean_check('mean', sample, -LOG3 / 2.0, sigma=1.0, sigmas=4.0).passed)


class TestMaximalInequality(unittest.TestCase):
    def test_bounds(self):
        self.assertEqual(walk.kolmogorov_bound(1.0, 1.0, 2.0), 0.5)
        self.assertEqual(walk.sharp_kolmogorov_bound(1.0, 100, 1.0, 2.0), 0.25)

    def test_check(self):
        config = walk.SimConfig(100, 1.0, 2000, 31)
        report = walk.max_excursion_bound_check(TWO_POINT, PARAMS, config, [2.0, 10.0])
        self.assertTrue(report.passed)
        self.assertEqual(len(report.provenance['rows']), 2)
        self.assertAlmostEqual(report.provenance['C'], 1.0, places=12)
        self.assertEqual(report.provenance['rows'][1]['tail'], 0.0)

    def test_no_lambdas(self):
        with self.assertRaises(ValueError):
            walk.max_excursion_bound_check(TWO_POINT, PARAMS, walk.SimConfig(100, 1.0, 10, 31), [])

    def test_bound_violated_message(self):
        error = walk.BoundViolated(2.0, 0.6, 0.5)
        self.assertIn('lambda=2.0', str(error))
        self.assertIsInstance(error, walk.WalkError)


if __name__ == '__main__':
    unittest.main()
