import argparse
import json
import os

from .labconfig import DEFAULTS


def main():
    parser = argparse.ArgumentParser(description='create an experiment spec for the acceptance suite.')

    parser.add_argument('OUT', help='output directory the spec will point the run to.')
    parser.add_argument('--spec-file', default='-',
                        help='path to where the spec should be saved. '
                             'use \'-\' for printing to standard output (default).')
    parser.add_argument('--quick', action='store_true', default=False,
                        help='use a tenth of the default sample sizes. the statistical criteria may then fail, '
                             'but the run is fast enough for a smoke test.')
    parser.add_argument('--criteria', default=None,
                        help='comma separated list of criteria to run (default: all).')

    args = parser.parse_args()

    if args.spec_file != '-' and os.path.exists(args.spec_file):
        print("I will not overwrite the existing file '{}'.".format(args.spec_file))
        exit(-1)

    acceptance = dict(DEFAULTS['acceptance'])
    if args.quick:
        for name in ('random_laws', 'walk_paths', 'potential_draws', 'rwre_walks', 'seignourel_sites'):
            acceptance[name] = max(acceptance[name] // 10, 30)

    if args.criteria is not None:
        try:
            acceptance['criteria'] = [int(item) for item in args.criteria.split(',')]
        except ValueError:
            print("'{}' is not a comma separated list of criteria.".format(args.criteria))
            exit(-1)

    doc = {
        'kind': 'convergence-report',
        'out': args.OUT,
        'acceptance': acceptance,
    }

    if args.spec_file == '-':
        print(json.dumps(doc, sort_keys=True, indent=2))
    else:
        with open(args.spec_file, 'wt') as fp:
            json.dump(doc, fp, sort_keys=True, indent=2)


if __name__ == "__main__":
    main()
