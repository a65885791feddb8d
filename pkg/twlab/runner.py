"""
Command line runner. Every subcommand builds an ExperimentSpec and hands it to run(), which
writes a self-contained output directory:

    <out>/spec.json        the spec as run, seed included
    <out>/reports/*.json   TiltReport records and TestReport records
    <out>/paths/*.csv      path ensembles, marginal samples, environments and potentials

The exit status is 0 when every test passed, 1 when a test failed and 2 on any error, in which
case a JSON error record goes to stderr (and to <out>/error.json when the directory exists).
"""

import argparse
import json
import logging
import math
import os
import sys
from typing import List

import numpy as np

from . import streams
from .acceptance import AcceptanceSuite
from .diffusion import (BrownianDiffusion, DiffusionConfig, DiffusionError, sample_brownian_potential,
                        write_potential_csv)
from .ensemble import run_indexed
from .environment import (EnvironmentModelError, QUENCHED, ScaledRWRE, load_environment_law, log_rho_law,
                          materialize_environment, mean_log_rho, potential, seignourel, solve_kappa_m, tilt_env,
                          write_slice_csv)
from .experiment import ExperimentSpec, SpecError
from .labconfig import LabConfig
from .measure import (MeasureError, generator_coefficients, load_law, m_min, tilt, tilt_params, variance_formula,
                      variance_sup)
from .paths import GRID_EPS, marginal, write_ensemble_csv, write_sample_csv
from .stats import (MIN_CI_SAMPLE, StatsError, TestReport, distance_report, ks_critical_one, ks_lattice_check,
                    mean_check, moment_ci, sample_correlation)
from .validation import ValidationError
from .walk import ScaledWalk, SimConfig, WalkError, max_excursion_bound_check

LAB_ERRORS = (MeasureError, WalkError, EnvironmentModelError, DiffusionError, StatsError, SpecError, ValidationError)

SEED_VARIABLE = 'TWL_SEED'


class ExperimentLoggerAdapter(logging.LoggerAdapter):
    def process(self, msg, kwargs):
        return '[%s] %s' % (self.extra['kind'], msg), kwargs


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError("{!r} is not JSON serializable".format(obj))


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + '\n'


def format_table(reports: List[TestReport]) -> str:
    lines = ['{:<40} {:>14} {:>14}  {}'.format('statistic', 'value', 'threshold', 'verdict')]
    for report in reports:
        lines.append('{:<40} {:>14.6g} {:>14.6g}  {}'.format(report.statistic_name, report.value, report.threshold,
                                                           report.verdict))
    return '\n'.join(lines)


class RunContext:
    """Output directory of one run, plus the reports that decide its exit status."""
    def __init__(self, spec: ExperimentSpec, config: LabConfig, workers: int):
        self.spec = spec
        self.config = config
        self.workers = workers
        self.logger = ExperimentLoggerAdapter(logging.getLogger('twlab.runner'), {'kind': spec.kind})
        self.tests = []

        self.out = spec.out
        if self.out is not None:
            os.makedirs(os.path.join(self.out, 'reports'), exist_ok=True)
            os.makedirs(os.path.join(self.out, 'paths'), exist_ok=True)
            self.write('spec.json', spec.to_json())

    def write(self, relpath: str, text: str):
        if self.out is None:
            return
        with open(os.path.join(self.out, relpath), 'wt', newline='\n') as fp:
            fp.write(text)

    def open_path(self, name: str):
        return open(os.path.join(self.out, 'paths', name), 'wt', newline='\n')

    def report(self, name: str, obj):
        self.write(os.path.join('reports', name), dumps(obj))

    def add_tests(self, name: str, reports: List[TestReport]):
        self.tests.extend(reports)
        self.report(name, [report.to_record() for report in reports])
        for report in reports:
            if not report.passed:
                self.logger.warning("{} failed: {!r} > {!r}".format(report.statistic_name, report.value,
                                                                     report.threshold))

    def write_ensemble(self, name: str, paths, t: float, meta: dict):
        if self.out is None:
            return
        with self.open_path(name + '.csv') as fp:
            write_ensemble_csv(paths[:self.spec['save_paths']], fp, meta)
        with self.open_path(name + '_marginal.csv') as fp:
            write_sample_csv(marginal(paths, t), fp, dict(meta, t=t))


def tilt_inspect(ctx: RunContext):
    spec = ctx.spec
    law = load_law(spec['law'])
    params = tilt_params(law, 1)
    hint = m_min(law, params.beta, params.c)

    records = []
    for m in spec.m_list:
        report = tilt(law, params.beta, params.c, m)
        record = report.to_record()
        record['generator'] = dict(generator_coefficients(report, spec['eps'])._asdict(), eps=spec['eps'])
        record['variance_sup'] = variance_sup(law, report.params, m)
        record['m_min'] = hint
        records.append(record)
        ctx.logger.info("m={}: mean {!r}, variance {!r}".format(m, report.mean, variance_formula(report)))

    ctx.report('tilt.json', records)
    print(dumps(records), end='')


def walk_sim(ctx: RunContext):
    spec = ctx.spec
    cfg = ctx.config
    law = load_law(spec['law'])
    params = tilt_params(law, 1)
    horizon = spec['T']
    n = spec['paths']

    for m in spec.m_list:
        config = SimConfig(m, horizon, n, spec['seed'])
        walk = ScaledWalk(law, params, config)
        ctx.logger.info("simulating {} paths at m={}".format(n, m))
        paths = run_indexed(walk, n, ctx.workers)

        t = config.steps / m
        ctx.write_ensemble('walk_m{}'.format(m), paths, t, {'m': m, 'seed': spec['seed'], 'process': 'scaled_walk'})

        # exact moments at this m: [mT] increments of the tilted law
        target_mean = config.steps * walk.report.mean / math.sqrt(m)
        target_variance = config.steps * walk.report.variance / m

        sample = marginal(paths, t)
        lattice_rng = streams.generator(spec['seed'], streams.LATTICE, m)
        provenance = {'m': m, 'seed': spec['seed'], 'critical_value': ks_critical_one(cfg.alpha, n)}
        tests = [
            ks_lattice_check('walk_ks', sample, walk.lattice_width, lattice_rng, -params.beta * horizon / 2.0,
                             params.sigma2 * horizon, cfg.ks_slack * ks_critical_one(cfg.alpha, n), provenance),
            mean_check('walk_mean', sample, target_mean, sigma=math.sqrt(target_variance), sigmas=cfg.ci_sigmas,
                       provenance={'m': m}),
        ]

        if n >= MIN_CI_SAMPLE:
            estimate, halfwidth = moment_ci(sample, 2, central=True, sigmas=cfg.ci_sigmas)
            tests.append(distance_report('walk_variance', abs(estimate - target_variance), halfwidth, [n],
                                         {'estimate': estimate, 'target': target_variance}))

            half = marginal(paths, config.steps // 2 / m)
            correlation = sample_correlation(half, sample - half)
            tests.append(distance_report('walk_increment_correlation', abs(correlation),
                                         cfg.ci_sigmas / math.sqrt(n), [n], {'correlation': correlation}))
        else:
            ctx.logger.warning("too few paths for moment and correlation checks")

        if 'lambdas' in spec:
            tests.append(max_excursion_bound_check(law, params, config, spec['lambdas'], sigmas=cfg.ci_sigmas,
                                                   workers=ctx.workers))

        ctx.add_tests('walk_m{}.json'.format(m), tests)


def _potential_tests(ctx: RunContext, env, m: int) -> List[TestReport]:
    """V(T) over fresh environments against its exact mean and variance at this m."""
    spec = ctx.spec
    cfg = ctx.config
    n = spec['paths']
    k = int(math.floor(m * spec['T'] + GRID_EPS))

    sample = np.empty(n)
    for env_index in range(n):
        env_slice = materialize_environment(env, (0, k), spec['seed'], env_index, cfg.site_block)
        sample[env_index] = potential(env_slice, m, [spec['T']]).values[0]

    if ctx.out is not None:
        with ctx.open_path('potential_m{}.csv'.format(m)) as fp:
            write_sample_csv(sample, fp, {'m': m, 'seed': spec['seed'], 'x': spec['T']})

    law = env.delta_law
    count = k if k >= 2 else 0
    target_mean = count * law.mean() / math.sqrt(m)
    target_variance = count * law.variance() / m

    tests = [mean_check('potential_mean', sample, target_mean, sigma=math.sqrt(target_variance),
                        sigmas=cfg.ci_sigmas, provenance={'m': m})]
    if n >= MIN_CI_SAMPLE and target_variance > 0:
        estimate, halfwidth = moment_ci(sample, 2, central=True, sigmas=cfg.ci_sigmas)
        tests.append(distance_report('potential_variance', abs(estimate - target_variance), halfwidth, [n],
                                     {'estimate': estimate, 'target': target_variance}))
    return tests


def rwre_sim(ctx: RunContext):
    spec = ctx.spec
    tilted = spec['construction'] == 'tilted'
    env_law = load_environment_law(spec['env'], spec.get('epsilon'), check_transience=tilted)
    pi = log_rho_law(env_law)

    for m in spec.m_list:
        record = {'m': m, 'construction': spec['construction'], 'pi': pi.atoms}
        if tilted:
            env = tilt_env(pi, env_law.kappa, m)
            record.update(kappa=env.kappa, kappa_m=solve_kappa_m(env), sigma2=env.sigma2, c=env.c,
                          pi_m=env.pi_m.atoms)
        else:
            env = seignourel(pi, m)
        record['mean_log_rho'] = mean_log_rho(env)
        ctx.report('environment_m{}.json'.format(m), record)

        sim = ScaledRWRE(env, spec['T'], spec['seed'], spec['mode'], ctx.config.site_block)
        ctx.logger.info("simulating {} {} walks at m={}".format(spec['paths'], spec['mode'], m))
        paths = run_indexed(sim, spec['paths'], ctx.workers)

        t = (len(paths[0]) - 1) / (m * m)
        meta = {'m': m, 'seed': spec['seed'], 'mode': spec['mode'], 'construction': spec['construction']}
        ctx.write_ensemble('rwre_m{}'.format(m), paths, t, meta)

        if spec['mode'] == QUENCHED and ctx.out is not None:
            with ctx.open_path('environment_m{}.csv'.format(m)) as fp:
                write_slice_csv(sim.env_slice, fp)

        ctx.add_tests('potential_m{}.json'.format(m), _potential_tests(ctx, env, m))


def diffusion_sim(ctx: RunContext):
    spec = ctx.spec
    cfg = ctx.config
    config = DiffusionConfig(spec['h'], spec['T'], spec['paths'], spec['seed'], cfg.step_budget, cfg.max_mesh)

    sim = BrownianDiffusion(spec['sigma'], spec['kappa'], config, spec['mode'], cfg.site_block)
    ctx.logger.info("simulating {} diffusion paths, {} steps each".format(config.num_paths, config.steps))
    paths = run_indexed(sim, config.num_paths, ctx.workers)

    t = config.steps * config.mesh_h ** 2
    meta = {'h': config.mesh_h, 'seed': config.seed, 'sigma': spec['sigma'], 'kappa': spec['kappa'],
            'mode': spec['mode']}
    ctx.write_ensemble('diffusion', paths, t, meta)

    if ctx.out is not None:
        env = sim.potential
        if env is None:
            first = paths[0].values
            env = sample_brownian_potential(spec['sigma'], spec['kappa'], config.mesh_h,
                                            (min(first.min(), 0.0), max(first.max(), 0.0)), config.seed, 0,
                                            cfg.site_block)
        with ctx.open_path('potential.csv') as fp:
            write_potential_csv(env, fp)

    # nearest-neighbour chain: |X(t)| <= t / h on the grid
    excess = max(float(np.max(np.abs(path.values) - path.times() / config.mesh_h)) for path in paths)
    tests = [distance_report('speed_limit_excess', excess, GRID_EPS, [len(paths)], {'h': config.mesh_h})]
    ctx.add_tests('diffusion.json', tests)

    sample = marginal(paths, t)
    if len(sample) >= MIN_CI_SAMPLE:
        summary = {}
        for k in (1, 2):
            estimate, halfwidth = moment_ci(sample, k, sigmas=cfg.ci_sigmas)
            summary['moment_{}'.format(k)] = {'estimate': estimate, 'halfwidth': halfwidth}
        ctx.report('diffusion_moments.json', summary)


def convergence_report(ctx: RunContext):
    overrides = dict(ctx.spec.get('acceptance') or {})
    criteria = overrides.pop('criteria', None)

    suite = AcceptanceSuite(ctx.config, overrides, ctx.workers)
    reports = suite.run(criteria)

    for report in reports:
        ctx.report(report.statistic_name + '.json', report.to_record())
    ctx.report('summary.json', [{'criterion': report.statistic_name, 'verdict': report.verdict,
                                 'failed_checks': int(report.value)} for report in reports])

    for name, text in sorted(suite.artifacts.items()):
        ctx.write(os.path.join('paths', name), text)

    ctx.tests.extend(reports)
    print(format_table(reports))


dispatch = {
    'tilt-inspect': tilt_inspect,
    'walk-sim': walk_sim,
    'rwre-sim': rwre_sim,
    'diffusion-sim': diffusion_sim,
    'convergence-report': convergence_report,
}


def error_record(e: Exception) -> dict:
    record = {'error': type(e).__name__, 'reason': str(e)}
    hint = getattr(e, 'm_min_hint', None)
    if hint is not None:
        record['m_min_hint'] = hint
    return record


def run(spec: ExperimentSpec, config: LabConfig, workers: int=None) -> int:
    """Runs one experiment; returns the exit status."""
    workers = config.workers if workers is None else workers
    logger = ExperimentLoggerAdapter(logging.getLogger('twlab.runner'), {'kind': spec.kind})

    try:
        spec.check_files()
        ctx = RunContext(spec, config, workers)
        dispatch[spec.kind](ctx)
    except LAB_ERRORS as e:
        logger.error("{}: {}".format(type(e).__name__, e))
        record = error_record(e)
        sys.stderr.write(json.dumps(record, sort_keys=True) + '\n')
        if spec.out is not None and os.path.isdir(spec.out):
            with open(os.path.join(spec.out, 'error.json'), 'wt') as fp:
                fp.write(dumps(record))
        return 2

    failed = [report for report in ctx.tests if not report.passed]
    if len(failed) > 0:
        logger.warning("{} of {} tests failed".format(len(failed), len(ctx.tests)))
        return 1

    logger.info("{} tests passed".format(len(ctx.tests)))
    return 0


def resolve_seed(seed, config: LabConfig) -> int:
    if seed is not None:
        return seed

    value = os.environ.get(SEED_VARIABLE)
    if value is not None:
        try:
            return int(value)
        except ValueError as e:
            raise SpecError("{}={!r} is not an integer".format(SEED_VARIABLE, value)) from e

    return config.default_seed


def int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError("{!r} is not a comma separated list of integers".format(text))


def float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError("{!r} is not a comma separated list of numbers".format(text))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--lab-config', type=argparse.FileType('rt'), action='append', default=[],
                        help='lab configuration file merged over the defaults (repeatable).')
    common.add_argument('--workers', type=int, default=None, help='number of worker processes.')
    common.add_argument('--verbose', '-v', action='store_true', help='log at DEBUG level.')

    parser = argparse.ArgumentParser(prog='twlab', description='Simulate tilted transient walks and check their '
                                                               'scaling limits.')
    sub = parser.add_subparsers(dest='kind')
    sub.required = True

    p = sub.add_parser('tilt-inspect', parents=[common], help='tilted laws and their identities for a list of m.')
    p.add_argument('--law', required=True)
    p.add_argument('--m', type=int_list, required=True)
    p.add_argument('--eps', type=float)
    p.add_argument('--out')

    p = sub.add_parser('walk-sim', parents=[common], help='scaled walk ensembles and marginal tests.')
    p.add_argument('--law', required=True)
    p.add_argument('--m', type=int_list, required=True)
    p.add_argument('--T', type=float, required=True)
    p.add_argument('--paths', type=int, required=True)
    p.add_argument('--seed', type=int)
    p.add_argument('--out', required=True)
    p.add_argument('--lambdas', type=float_list)
    p.add_argument('--save-paths', type=int)

    p = sub.add_parser('rwre-sim', parents=[common], help='scaled walks in random environments.')
    p.add_argument('--env', required=True)
    p.add_argument('--epsilon', type=float)
    p.add_argument('--m', type=int_list, required=True)
    p.add_argument('--T', type=float, required=True)
    p.add_argument('--paths', type=int, required=True)
    p.add_argument('--mode', choices=['annealed', 'quenched'])
    p.add_argument('--construction', choices=['tilted', 'seignourel'])
    p.add_argument('--seed', type=int)
    p.add_argument('--out', required=True)
    p.add_argument('--save-paths', type=int)

    p = sub.add_parser('diffusion-sim', parents=[common], help='grid diffusions in Brownian potentials.')
    p.add_argument('--sigma', type=float, required=True)
    p.add_argument('--kappa', type=float, required=True)
    p.add_argument('--h', type=float, required=True)
    p.add_argument('--T', type=float, required=True)
    p.add_argument('--paths', type=int, required=True)
    p.add_argument('--mode', choices=['annealed', 'quenched'])
    p.add_argument('--seed', type=int)
    p.add_argument('--out', required=True)
    p.add_argument('--save-paths', type=int)

    p = sub.add_parser('convergence-report', parents=[common], help='run the acceptance suite.')
    p.add_argument('--config', required=True, help='experiment spec of kind convergence-report.')
    p.add_argument('--out', help='overrides the output directory of the spec.')

    p = sub.add_parser('run', parents=[common], help='run an experiment spec file of any kind.')
    p.add_argument('SPEC')

    return parser


def spec_from_args(args) -> ExperimentSpec:
    if args.kind == 'run':
        return ExperimentSpec.load(args.SPEC)

    if args.kind == 'convergence-report':
        spec = ExperimentSpec.load(args.config)
        if spec.kind != 'convergence-report':
            raise SpecError("{} describes a {} run".format(args.config, spec.kind))
        if args.out is not None:
            spec = ExperimentSpec(dict(spec.doc, out=args.out))
        return spec

    doc = {'kind': args.kind}
    ignored = ('kind', 'lab_config', 'workers', 'verbose')
    for name, value in vars(args).items():
        if name not in ignored and value is not None:
            doc[name] = value
    return ExperimentSpec(doc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    config = LabConfig(args.lab_config)
    logging.basicConfig(level=logging.DEBUG if args.verbose else config.log_level)

    try:
        spec = spec_from_args(args)
        spec = spec.with_seed(resolve_seed(spec.get('seed'), config))
    except SpecError as e:
        sys.stderr.write(json.dumps(error_record(e), sort_keys=True) + '\n')
        return 2

    return run(spec, config, args.workers)


if __name__ == "__main__":
    sys.exit(main())
