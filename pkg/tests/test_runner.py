import io
import json
import os
import tempfile
import unittest
from unittest import mock

from twlab import runner
from twlab.experiment import SpecError
from twlab.labconfig import LabConfig

CONF = os.path.join(os.path.dirname(__file__), '..', 'conf')
TWO_POINT_LAW = os.path.join(CONF, 'laws', 'twopoint.law')
TWO_POINT_ENV = os.path.join(CONF, 'envs', 'twopoint.env')


def quiet_main(argv):
    with mock.patch('sys.stdout', new_callable=io.StringIO), mock.patch('sys.stderr', new_callable=io.StringIO):
        return runner.main(argv)


def load(out, *relpath):
    with open(os.path.join(out, *relpath)) as fp:
        return json.load(fp)


class TestRunner(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, 'out')

    def tearDown(self):
        self.tmp.cleanup()

    def test_tilt_inspect(self):
        status = quiet_main(['tilt-inspect', '--law', TWO_POINT_LAW, '--m', '4,100', '--out', self.out])
        self.assertEqual(status, 0)

        records = load(self.out, 'reports', 'tilt.json')
        self.assertEqual([record['m'] for record in records], [4, 100])
        self.assertEqual(records[0]['m_min'], 1)
        self.assertAlmostEqual(records[1]['generator']['b_m'], -records[1]['beta'] / 2.0, places=12)
        self.assertIn('seed', load(self.out, 'spec.json'))

    def test_negative_mass(self):
        """
        situation: tilting a law with tiny atoms at m = 100.
        expected: exit status 2 and an error record with the smallest valid m.
        """
        law = os.path.join(self.tmp.name, 'narrow.law')
        with open(law, 'wt') as fp:
            fp.write('-0.01\t0.6\n0.01\t0.4\n')

        status = quiet_main(['tilt-inspect', '--law', law, '--m', '100', '--out', self.out])
        self.assertEqual(status, 2)

        record = load(self.out, 'error.json')
        self.assertEqual(record['error'], 'NegativeMass')
        self.assertGreater(record['m_min_hint'], 4000000)

    def test_missing_law(self):
        status = quiet_main(['tilt-inspect', '--law', os.path.join(self.tmp.name, 'none.law'), '--m', '4'])
        self.assertEqual(status, 2)

    def test_invalid_spec(self):
        status = quiet_main(['walk-sim', '--law', TWO_POINT_LAW, '--m', '0', '--T', '1', '--paths', '10',
                             '--out', self.out])
        self.assertEqual(status, 2)
        self.assertFalse(os.path.exists(self.out))

    def test_walk_sim(self):
        status = quiet_main(['walk-sim', '--law', TWO_POINT_LAW, '--m', '16', '--T', '1', '--paths', '200',
                             '--seed', '3', '--save-paths', '5', '--lambdas', '2,10', '--out', self.out])
        self.assertIn(status, (0, 1))

        reports = load(self.out, 'reports', 'walk_m16.json')
        names = [report['statistic_name'] for report in reports]
        self.assertEqual(names, ['walk_ks', 'walk_mean', 'walk_variance', 'walk_increment_correlation',
                                 'max_excursion_tail_excess'])
        self.assertAlmostEqual(reports[0]['provenance.lattice_jitter'], 0.5, places=14)
        self.assertIn('provenance.unsmoothed_statistic', reports[0])

        with open(os.path.join(self.out, 'paths', 'walk_m16.csv')) as fp:
            rows = [line for line in fp if not line.startswith('#')]
        self.assertEqual(len(rows), 1 + 5 * 17)

    def test_rwre_sim(self):
        status = quiet_main(['rwre-sim', '--env', TWO_POINT_ENV, '--m', '4', '--T', '1', '--paths', '50',
                             '--mode', 'quenched', '--seed', '3', '--out', self.out])
        self.assertIn(status, (0, 1))

        record = load(self.out, 'reports', 'environment_m4.json')
        self.assertAlmostEqual(record['mean_log_rho'], -1.0 / 8.0, places=12)
        self.assertTrue(os.path.isfile(os.path.join(self.out, 'paths', 'environment_m4.csv')))
        self.assertTrue(os.path.isfile(os.path.join(self.out, 'paths', 'rwre_m4_marginal.csv')))

    def test_seignourel(self):
        env = os.path.join(CONF, 'envs', 'symmetric.env')
        status = quiet_main(['rwre-sim', '--env', env, '--construction', 'seignourel', '--m', '4', '--T', '1',
                             '--paths', '40', '--seed', '3', '--out', self.out])
        self.assertIn(status, (0, 1))
        self.assertEqual(load(self.out, 'reports', 'environment_m4.json')['mean_log_rho'], 0.0)

    def test_recurrent_environment(self):
        env = os.path.join(CONF, 'envs', 'symmetric.env')
        status = quiet_main(['rwre-sim', '--env', env, '--m', '4', '--T', '1', '--paths', '40', '--out', self.out])
        self.assertEqual(status, 2)
        self.assertEqual(load(self.out, 'error.json')['error'], 'NonNegativeDrift')

    def test_rwre_horizon_too_short(self):
        """
        situation: a horizon below one walk step at m = 20.
        expected: exit status 2 and an error record instead of a traceback.
        """
        status = quiet_main(['rwre-sim', '--env', TWO_POINT_ENV, '--m', '20', '--T', '0.001', '--paths', '10',
                             '--out', self.out])
        self.assertEqual(status, 2)
        self.assertEqual(load(self.out, 'error.json')['error'], 'HorizonTooShort')

    def test_diffusion_horizon_too_short(self):
        status = quiet_main(['diffusion-sim', '--sigma', '1', '--kappa', '1', '--h', '0.1', '--T', '0.001',
                             '--paths', '3', '--out', self.out])
        self.assertEqual(status, 2)
        self.assertEqual(load(self.out, 'error.json')['error'], 'DiffusionError')

    def test_diffusion_sim(self):
        status = quiet_main(['diffusion-sim', '--sigma', '1', '--kappa', '1', '--h', '0.1', '--T', '1',
                             '--paths', '40', '--seed', '3', '--out', self.out])
        self.assertEqual(status, 0)
        self.assertTrue(os.path.isfile(os.path.join(self.out, 'paths', 'potential.csv')))
        self.assertIn('moment_2', load(self.out, 'reports', 'diffusion_moments.json'))

    def test_step_budget(self):
        config = os.path.join(self.tmp.name, 'budget.json')
        with open(config, 'wt') as fp:
            fp.write('{"diffusion": {"step_budget": 1000}}')

        status = quiet_main(['diffusion-sim', '--sigma', '1', '--kappa', '1', '--h', '0.01', '--T', '1',
                             '--paths', '1', '--lab-config', config, '--out', self.out])
        self.assertEqual(status, 2)
        self.assertEqual(load(self.out, 'error.json')['error'], 'StepBudgetExceeded')

    def test_deterministic_output(self):
        """
        situation: the same diffusion run twice with the same seed and different worker counts.
        expected: byte identical path files.
        """
        texts = []
        for workers, name in ((1, 'a'), (2, 'b')):
            out = os.path.join(self.tmp.name, name)
            quiet_main(['diffusion-sim', '--sigma', '1', '--kappa', '1', '--h', '0.1', '--T', '1', '--paths', '300',
                        '--seed', '3', '--workers', str(workers), '--out', out])
            with open(os.path.join(out, 'paths', 'diffusion_marginal.csv'), 'rb') as fp:
                texts.append(fp.read())
        self.assertEqual(texts[0], texts[1])

    def test_run_spec_file(self):
        spec = os.path.join(self.tmp.name, 'spec.json')
        with open(spec, 'wt') as fp:
            json.dump({'kind': 'tilt-inspect', 'law': TWO_POINT_LAW, 'm': [4], 'out': self.out}, fp)

        self.assertEqual(quiet_main(['run', spec]), 0)
        self.assertEqual(len(load(self.out, 'reports', 'tilt.json')), 1)

    def test_convergence_report(self):
        spec = os.path.join(self.tmp.name, 'report.json')
        with open(spec, 'wt') as fp:
            json.dump({'kind': 'convergence-report', 'out': 'unused', 'acceptance': {'criteria': [2, 5]}}, fp)

        status = quiet_main(['convergence-report', '--config', spec, '--out', self.out])
        self.assertEqual(status, 0)

        summary = load(self.out, 'reports', 'summary.json')
        self.assertEqual([row['criterion'] for row in summary], ['criterion_2', 'criterion_5'])
        self.assertEqual([row['verdict'] for row in summary], ['pass', 'pass'])

    def test_convergence_report_wrong_kind(self):
        self.assertEqual(quiet_main(['convergence-report', '--config', os.path.join(CONF, 'specs', 'tilt.json')]), 2)


class TestSeed(unittest.TestCase):
    def test_explicit(self):
        with mock.patch.dict(os.environ, {runner.SEED_VARIABLE: '42'}):
            self.assertEqual(runner.resolve_seed(7, LabConfig()), 7)

    def test_environment(self):
        with mock.patch.dict(os.environ, {runner.SEED_VARIABLE: '42'}):
            self.assertEqual(runner.resolve_seed(None, LabConfig()), 42)

    def test_default(self):
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(runner.resolve_seed(None, LabConfig()), LabConfig().default_seed)

    def test_invalid(self):
        with mock.patch.dict(os.environ, {runner.SEED_VARIABLE: 'abc'}):
            with self.assertRaises(SpecError):
                runner.resolve_seed(None, LabConfig())


class TestFormatting(unittest.TestCase):
    def test_dumps(self):
        self.assertEqual(runner.dumps({'b': 1, 'a': [1.5]}), '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n')

    def test_lists(self):
        self.assertEqual(runner.int_list('4,100'), [4, 100])
        self.assertEqual(runner.float_list('2,10.5'), [2.0, 10.5])


if __name__ == '__main__':
    unittest.main()
