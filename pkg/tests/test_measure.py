import io
import math
import os
import unittest

from twlab import measure
from twlab.validation import ValidationError

CONF = os.path.join(os.path.dirname(__file__), '..', 'conf')

TWO_POINT = measure.FiniteLaw([(1.0, 0.25), (-1.0, 0.75)])
THREE_POINT = measure.FiniteLaw([(2.0, 0.1), (-1.0, 0.9)])

# tilted masses only become nonnegative for m in the millions
NARROW = measure.FiniteLaw([(-0.01, 0.6), (0.01, 0.4)])

LOG3 = math.log(3.0)


class TestFiniteLaw(unittest.TestCase):
    def test_sorted(self):
        self.assertSequenceEqual(TWO_POINT.values.tolist(), [-1.0, 1.0])
        self.assertSequenceEqual(TWO_POINT.probs.tolist(), [0.75, 0.25])

    def test_duplicate_values(self):
        with self.assertRaises(ValidationError):
            measure.FiniteLaw([(1.0, 0.5), (1.0, 0.5)])

    def test_mass(self):
        with self.assertRaises(ValidationError):
            measure.FiniteLaw([(1.0, 0.5), (-1.0, 0.4)])

    def test_zero_probability(self):
        with self.assertRaises(ValidationError):
            measure.FiniteLaw([(1.0, 0.0), (-1.0, 1.0)])

    def test_empty(self):
        with self.assertRaises(ValidationError):
            measure.FiniteLaw([])

    def test_from_pairs_merges(self):
        law = measure.FiniteLaw.from_pairs([(1.0, 0.25), (1.0, 0.25), (-1.0, 0.5)])
        self.assertSequenceEqual(law.atoms, [(-1.0, 0.5), (1.0, 0.5)])

    def test_moments(self):
        self.assertEqual(TWO_POINT.mean(), -0.5)
        self.assertEqual(TWO_POINT.moment(2), 1.0)
        self.assertAlmostEqual(TWO_POINT.variance(), 0.75, places=14)
        self.assertEqual(TWO_POINT.laplace(0.0), 1.0)
        self.assertAlmostEqual(TWO_POINT.laplace(LOG3), 1.0, places=14)

    def test_scaled(self):
        self.assertSequenceEqual(TWO_POINT.scaled(0.5).values.tolist(), [-0.5, 0.5])

    def test_immutable(self):
        with self.assertRaises(ValueError):
            TWO_POINT.values[0] = 2.0


class TestSolveBeta(unittest.TestCase):
    def test_two_point(self):
        self.assertAlmostEqual(measure.solve_beta(TWO_POINT), LOG3, places=12)

    def test_three_point(self):
        expected = math.log((-1.0 + math.sqrt(37.0)) / 2.0)
        self.assertAlmostEqual(measure.solve_beta(THREE_POINT), expected, places=10)

    def test_non_negative_drift(self):
        with self.assertRaises(measure.NonNegativeDrift):
            measure.solve_beta(measure.FiniteLaw([(1.0, 0.5), (-1.0, 0.5)]))

    def test_no_positive_part(self):
        with self.assertRaises(measure.NoPositivePart):
            measure.solve_beta(measure.FiniteLaw([(-1.0, 0.5), (-2.0, 0.5)]))

    def test_zero_atom(self):
        with self.assertRaises(measure.ZeroAtom):
            measure.solve_beta(measure.FiniteLaw([(0.0, 0.5), (-1.0, 0.3), (1.0, 0.2)]))

    def test_transience_errors(self):
        with self.assertRaises(measure.TransienceError):
            measure.solve_beta(measure.FiniteLaw([(1.0, 0.6), (-1.0, 0.4)]))


class TestClosedForms(unittest.TestCase):
    def test_two_point_c_sigma2(self):
        params = measure.tilt_params(TWO_POINT, 1)
        self.assertAlmostEqual(params.c, 0.5, places=12)
        self.assertAlmostEqual(params.sigma2, 1.0, places=12)

    def test_three_point_c_sigma2(self):
        params = measure.tilt_params(THREE_POINT, 1)
        y = (-1.0 + math.sqrt(37.0)) / 2.0
        self.assertAlmostEqual(params.c, 0.1 * (y * y - 1.0), places=10)
        self.assertAlmostEqual(params.sigma2, 2.0, places=10)

    def test_two_point_atoms(self):
        for m in (4, 100, 10000):
            tilted = dict(measure.inspect(TWO_POINT, m).tilted.atoms)
            shift = LOG3 / (4.0 * math.sqrt(m))
            self.assertAlmostEqual(tilted[1.0], 0.5 - shift, places=10)
            self.assertAlmostEqual(tilted[-1.0], 0.5 + shift, places=10)

    def test_simple_walk_law(self):
        law = measure.simple_walk_law(LOG3)
        self.assertSequenceEqual(law.values.tolist(), [-1.0, 1.0])
        self.assertAlmostEqual(law.probs[0], 0.75, places=14)
        self.assertAlmostEqual(measure.solve_beta(law), LOG3, places=10)


class TestTilt(unittest.TestCase):
    def test_mean(self):
        for law in (TWO_POINT, THREE_POINT):
            for m in (4, 100, 10000):
                report = measure.inspect(law, m)
                self.assertAlmostEqual(report.mean, -report.params.beta / (2.0 * math.sqrt(m)), places=12)

    def test_variance(self):
        report = measure.inspect(TWO_POINT, 100)
        self.assertAlmostEqual(report.second_moment, 1.0, places=12)
        self.assertAlmostEqual(report.variance, 1.0 - (LOG3 / 20.0) ** 2, places=12)
        self.assertAlmostEqual(measure.variance_formula(report), report.variance, places=12)

    def test_variance_approaches_sigma2(self):
        params = measure.tilt_params(THREE_POINT, 1)
        gaps = [abs(measure.tilt(THREE_POINT, params.beta, params.c, m).variance - params.sigma2)
                for m in (100, 10000)]
        self.assertLess(gaps[1], gaps[0])

    def test_bad_m(self):
        params = measure.tilt_params(TWO_POINT, 1)
        with self.assertRaises(ValueError):
            measure.tilt(TWO_POINT, params.beta, params.c, 0)
        with self.assertRaises(ValueError):
            measure.tilt(TWO_POINT, params.beta, params.c, 2.5)

    def test_wrong_beta(self):
        with self.assertRaises(measure.IdentityViolation):
            measure.tilt(TWO_POINT, 1.0, 0.5, 100)

    def test_to_record(self):
        record = measure.inspect(TWO_POINT, 100).to_record()
        self.assertEqual(record['m'], 100)
        self.assertSequenceEqual(record['tilted_values'], [-1.0, 1.0])
        self.assertAlmostEqual(record['variance_formula'], record['variance'], places=12)


class TestNegativeMass(unittest.TestCase):
    def test_m_min_two_point(self):
        params = measure.tilt_params(TWO_POINT, 1)
        self.assertEqual(measure.m_min(TWO_POINT, params.beta, params.c), 1)

    def test_hint(self):
        """
        situation: a law with tiny atoms tilted at m = 100.
        expected: NegativeMass whose hint is the first m that tilts cleanly.
        """
        params = measure.tilt_params(NARROW, 1)
        with self.assertRaises(measure.NegativeMass) as cm:
            measure.tilt(NARROW, params.beta, params.c, 100)

        hint = cm.exception.m_min_hint
        self.assertEqual(cm.exception.m, 100)
        self.assertEqual(cm.exception.atom, 0.01)
        self.assertGreater(hint, 4000000)
        self.assertEqual(hint, measure.m_min(NARROW, params.beta, params.c))

        measure.tilt(NARROW, params.beta, params.c, hint)
        with self.assertRaises(measure.NegativeMass):
            measure.tilt(NARROW, params.beta, params.c, hint - 1)


class TestVarianceSup(unittest.TestCase):
    def test_two_point(self):
        params = measure.tilt_params(TWO_POINT, 1)
        self.assertAlmostEqual(measure.variance_sup(TWO_POINT, params, 1), 1.0, places=12)

    def test_bounds_variance(self):
        params = measure.tilt_params(THREE_POINT, 1)
        sup = measure.variance_sup(THREE_POINT, params, 4)
        for m in (4, 16, 100, 10000):
            report = measure.tilt(THREE_POINT, params.beta, params.c, m)
            self.assertLessEqual(report.variance, sup + 1e-12)


class TestGeneratorCoefficients(unittest.TestCase):
    def test_two_point(self):
        report = measure.inspect(TWO_POINT, 100)
        coefficients = measure.generator_coefficients(report, 0.2)
        self.assertAlmostEqual(coefficients.a_m, 1.0, places=12)
        self.assertAlmostEqual(coefficients.b_m, -LOG3 / 2.0, places=12)
        self.assertEqual(coefficients.delta_eps, 0.0)

    def test_jumps_beyond_eps(self):
        report = measure.inspect(TWO_POINT, 100)
        self.assertAlmostEqual(measure.generator_coefficients(report, 0.05).delta_eps, 100.0, places=10)


class TestLatticeSpan(unittest.TestCase):
    def test_two_point(self):
        self.assertEqual(measure.lattice_span(TWO_POINT), 2.0)

    def test_three_point(self):
        self.assertEqual(measure.lattice_span(THREE_POINT), 3.0)

    def test_common_divisor(self):
        law = measure.FiniteLaw([(-1.0, 0.5), (1.0, 0.3), (2.0, 0.2)])
        self.assertAlmostEqual(measure.lattice_span(law), 1.0, places=14)

    def test_incommensurable(self):
        law = measure.FiniteLaw([(-1.0, 0.4), (1.0, 0.3), (math.sqrt(2.0), 0.3)])
        self.assertIsNone(measure.lattice_span(law))

    def test_single_atom(self):
        self.assertIsNone(measure.lattice_span(measure.FiniteLaw([(-1.0, 1.0)])))


class TestLawFormat(unittest.TestCase):
    def test_parse(self):
        lines = ['# a comment', '1\t0.25', '', '-1 0.75  # down']
        self.assertEqual(measure.parse_law(lines), TWO_POINT)

    def test_format(self):
        text = measure.format_law(TWO_POINT, ['two point'])
        self.assertEqual(text, '# two point\n-1.0\t0.75\n1.0\t0.25\n')

    def test_write_parse(self):
        buf = io.StringIO()
        measure.write_law(THREE_POINT, buf)
        self.assertEqual(measure.parse_law(buf.getvalue().splitlines()), THREE_POINT)

    def test_three_columns(self):
        with self.assertRaises(ValidationError):
            measure.parse_law(['1 0.25 7', '-1 0.75'])

    def test_not_a_number(self):
        with self.assertRaises(ValidationError) as cm:
            measure.parse_law(['1 0.25', 'up 0.75'], 'law.txt')
        self.assertEqual(cm.exception.where, 'law.txt:2')

    def test_no_atoms(self):
        with self.assertRaises(ValidationError):
            measure.parse_law(['# nothing here'])

    def test_load(self):
        self.assertEqual(measure.load_law(os.path.join(CONF, 'laws', 'twopoint.law')), TWO_POINT)


if __name__ == '__main__':
    unittest.main()
