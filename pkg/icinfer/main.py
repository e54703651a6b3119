import argparse
import contextlib
import logging
import sys

import numpy as np

from icinfer._config import add_config_arguments
from icinfer._config import episode_spec
from icinfer._config import loop_config
from icinfer._config import resolve_config
from icinfer._datamodel import episode_seed
from icinfer._datamodel import FORMATS
from icinfer._datamodel import load_features
from icinfer._datamodel import sample_episode
from icinfer._datamodel import synth_gaussian
from icinfer._datamodel import write_features
from icinfer._error import ConfigError
from icinfer._error import DimensionError
from icinfer._error import FitError
from icinfer._error import LoadError
from icinfer._error import ParameterError
from icinfer._error import ParseError
from icinfer._error import RangeError
from icinfer._error import SamplingError
from icinfer._error import SynthError
from icinfer._icipath import dump_path
from icinfer._icipath import dump_vanish
from icinfer._report import dump_table
from icinfer._report import dumps_report
from icinfer._report import file_sha256
from icinfer._report import nonconverged_fraction
from icinfer._report import SelectionRun
from icinfer._selftrain import evaluate
from icinfer._selftrain import first_round
from icinfer._selftrain import run_episodes
from icinfer._theory import condition_frequency_study
from icinfer._theory import dump_conditions
from icinfer._theory import dump_histogram
from icinfer._theory import dump_trials
from icinfer._theory import plant
from icinfer._theory import residual_histogram
from icinfer._theory import solve_utilde_l1
from icinfer._theory import support_recovery_trial
from icinfer._theory import theorem_lambda
from icinfer._theory import vectorize

logger = logging.getLogger('icinfer')

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NONCONVERGED = 4

USAGE_ERRORS = (ConfigError, ParameterError, RangeError, ParseError)
DATA_ERRORS = (LoadError, SamplingError, SynthError, FitError, DimensionError)


def _non_negative(s):
    value = float(s)
    if value < 0:
        raise argparse.ArgumentTypeError(f'must be >= 0, got {s}')
    return value


def _positive_int(s):
    value = int(s)
    if value < 1:
        raise argparse.ArgumentTypeError(f'must be >= 1, got {s}')
    return value


@contextlib.contextmanager
def _output(path):
    if path is None or path == '-':
        yield sys.stdout
    else:
        with open(path, 'w', encoding='UTF-8', newline='') as f:
            yield f


def cmd_synth(args):
    store = synth_gaussian(
        args.ways, args.per_class, args.dim, args.sep, args.sigma, args.seed,
    )
    write_features(store, args.out, args.format)
    n, dim = store.shape
    print(f'{n} {dim} {store.class_count}')
    return EXIT_OK


def _load_run_config(args):
    cfg = resolve_config(args.config, args)
    if cfg.input is None:
        raise ConfigError('input: a feature file is required')
    return cfg, load_features(cfg.input, cfg.format)


def cmd_run(args):
    cfg, store = _load_run_config(args)
    spec = episode_spec(cfg)
    selections = (cfg.selection,) + tuple(
        selection for selection in cfg.compare if selection != cfg.selection
    )
    runs = []
    for selection in selections:
        results = run_episodes(
            store, spec, loop_config(cfg, selection), cfg.episodes,
            master_seed=cfg.seed, jobs=cfg.jobs,
        )
        report = evaluate(results, cfg.per_class_per_iter, cfg.total_cap)
        runs.append(SelectionRun(selection, report, tuple(results)))

    with _output(cfg.report) as f:
        f.write(dumps_report(cfg, file_sha256(cfg.input), runs))
    if cfg.table is not None:
        with _output(cfg.table) as f:
            dump_table(runs, f)
    if cfg.report is not None:
        for run in runs:
            print(
                f'{run.selection}: {run.report.mean:.4f} +- '
                f'{run.report.ci95:.4f} ({run.report.episodes} episodes)',
            )

    fraction = nonconverged_fraction(runs)
    if fraction > cfg.max_nonconverged:
        print(
            f'{fraction:.2%} of grid points did not converge '
            f'(allowed: {cfg.max_nonconverged:.2%})',
            file=sys.stderr,
        )
        return EXIT_NONCONVERGED
    return EXIT_OK


def _rate(flags):
    flags = list(flags)
    return sum(flags) / len(flags) if flags else float('nan')


def cmd_theory_recover(args):
    outcomes = [
        support_recovery_trial(
            args.n, args.d, args.c, args.flips, args.sigma,
            episode_seed(args.seed, trial), tol=args.tol,
        )
        for trial in range(args.trials)
    ]
    if args.out is not None:
        with _output(args.out) as f:
            dump_trials(outcomes, f)

    c12 = [
        o for o in outcomes if o.report.verdict_c1 and o.report.verdict_c2
    ]
    c123 = [o for o in c12 if o.report.verdict_c3]
    print(f'trials: {len(outcomes)}')
    print(f'c1_c2: {len(c12)}')
    print(f'c1_c2_c3: {len(c123)}')
    print(f'exact_recovery_rate: {_rate(o.exact for o in outcomes)!r}')
    print(f'subset_rate_c1_c2: {_rate(o.subset for o in c12)!r}')
    print(
        f'sign_consistent_rate_c1_c2_c3: '
        f'{_rate(o.sign_consistent for o in c123)!r}',
    )
    print(f'o_subset_rate: {_rate(o.o_subset for o in outcomes)!r}')
    return EXIT_OK


def cmd_theory_freq(args):
    cfg, store = _load_run_config(args)
    rows = condition_frequency_study(
        store, episode_spec(cfg), loop_config(cfg), cfg.episodes, cfg.seed,
    )
    with _output(args.out) as f:
        dump_conditions(rows, f)
    return EXIT_OK


def cmd_theory_lambda(args):
    print(repr(theorem_lambda(args.sigma, args.mu, args.eta, args.c, args.n)))
    return EXIT_OK


def cmd_theory_hist(args):
    rng = np.random.default_rng(args.seed)
    X, Y, _ = plant(args.n, args.d, args.c, args.flips, args.sigma, rng)
    lam = args.lam
    if lam is None:
        # the threshold for mu = eta = 1
        lam = theorem_lambda(args.sigma, 1.0, 1.0, args.c, args.n)
    gamma = solve_utilde_l1(vectorize(X, Y), lam)
    hist = residual_histogram(X, Y, gamma, bins=args.bins)
    with _output(args.out) as f:
        dump_histogram(hist, f)
    logger.info(
        'residuals: %d, mean %r, variance %r', hist.total, hist.mean,
        hist.variance,
    )
    return EXIT_OK


def cmd_path(args):
    cfg, store = _load_run_config(args)
    ep = sample_episode(
        store, episode_spec(cfg), episode_seed(cfg.seed, args.index),
    )
    view = first_round(ep, loop_config(cfg))
    with _output(args.out) as f:
        dump_path(view.path, f)
    if args.vanish_out is not None:
        n_s = ep.support_y.size
        pool = range(n_s, view.labels.size)
        selected = {i: i in view.selected for i in pool}
        correct = {i: bool(view.correct[i]) for i in pool}
        with _output(args.vanish_out) as f:
            dump_vanish(view.path, f, selected, correct)
    return EXIT_OK


def _add_config_parser(subparsers, name, description):
    parser = subparsers.add_parser(name, help=description)
    parser.add_argument('--config', metavar='PATH', help='run config file')
    add_config_arguments(parser)
    return parser


def _add_planted_arguments(parser, n, d, c, flips, sigma):
    parser.add_argument('--n', type=_positive_int, default=n)
    parser.add_argument('--d', type=_positive_int, default=d)
    parser.add_argument('--c', type=_positive_int, default=c)
    parser.add_argument('--flips', type=int, default=flips)
    parser.add_argument('--sigma', type=_non_negative, default=sigma)
    parser.add_argument('--seed', type=int, default=0)


def make_parser():
    parser = argparse.ArgumentParser(
        prog='icinfer',
        description='Instance credibility inference for few-shot learning.',
    )
    parser.add_argument(
        '-v', '--verbose', action='count', default=0,
        help='log INFO once, DEBUG twice',
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    synth = subparsers.add_parser('synth', help='write gaussian features')
    synth.add_argument('--ways', type=_positive_int, required=True)
    synth.add_argument('--per-class', type=_positive_int, required=True)
    synth.add_argument('--dim', type=_positive_int, required=True)
    synth.add_argument('--sep', type=_non_negative, required=True)
    synth.add_argument('--sigma', type=_non_negative, required=True)
    synth.add_argument('--seed', type=int, default=0)
    synth.add_argument('--format', choices=FORMATS)
    synth.add_argument('--out', required=True)
    synth.set_defaults(func=cmd_synth)

    run = _add_config_parser(subparsers, 'run', 'evaluate episodes')
    run.set_defaults(func=cmd_run)

    path = _add_config_parser(subparsers, 'path', 'dump one gamma path')
    path.add_argument('--index', type=int, default=0, help='episode index')
    path.add_argument('--out', help='path csv (default: stdout)')
    path.add_argument('--vanish-out', help='per-instance vanish csv')
    path.set_defaults(func=cmd_path)

    theory = subparsers.add_parser('theory', help='recovery conditions')
    studies = theory.add_subparsers(dest='study', required=True)

    recover = studies.add_parser('recover', help='planted recovery trials')
    _add_planted_arguments(recover, n=30, d=4, c=3, flips=2, sigma=0.0)
    recover.add_argument('--trials', type=_positive_int, default=200)
    recover.add_argument('--tol', type=float, default=1e-6)
    recover.add_argument('--out', help='trial log csv')
    recover.set_defaults(func=cmd_theory_recover)

    freq = _add_config_parser(studies, 'freq', 'condition frequency table')
    freq.add_argument('--out', help='table csv (default: stdout)')
    freq.set_defaults(func=cmd_theory_freq)

    lam = studies.add_parser('lambda', help='theorem lambda')
    lam.add_argument('--sigma', type=_non_negative, required=True)
    lam.add_argument('--mu', type=float, required=True)
    lam.add_argument('--eta', type=float, required=True)
    lam.add_argument('--c', type=_positive_int, required=True)
    lam.add_argument('--n', type=_positive_int, required=True)
    lam.set_defaults(func=cmd_theory_lambda)

    hist = studies.add_parser('hist', help='residual histogram')
    _add_planted_arguments(hist, n=2000, d=5, c=5, flips=0, sigma=1.0)
    hist.add_argument('--lam', type=_non_negative)
    hist.add_argument('--bins', type=_positive_int, default=101)
    hist.add_argument('--out', help='histogram csv (default: stdout)')
    hist.set_defaults(func=cmd_theory_hist)

    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=max(logging.DEBUG, logging.WARNING - 10 * args.verbose),
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except DATA_ERRORS as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_DATA
    except USAGE_ERRORS as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f'error: {e.filename}: {e.strerror}', file=sys.stderr)
        return EXIT_DATA


if __name__ == '__main__':
    raise SystemExit(main())
