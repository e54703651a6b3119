"""Run reports: one JSON document per run plus an optional CSV summary.

Reports carry the rendered configuration, the master seed and the sha256 of
the input file, which is all that is needed to regenerate them.  Keys are
sorted and floats are written with `repr` precision, so equal runs give
byte-identical reports.
"""
import csv
import hashlib
import json
import math
from typing import NamedTuple
from typing import Tuple

from icinfer._config import dumps_config
from icinfer.types import AccuracyReport
from icinfer.types import EpisodeResult

REPORT_VERSION = 1


class SelectionRun(NamedTuple):
    selection: str
    report: AccuracyReport
    results: Tuple[EpisodeResult, ...]


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def _number(value):
    # NaN is not JSON
    if value is None or math.isnan(value):
        return None
    return value


def _numbers(values):
    return [_number(float(value)) for value in values]


def run_dict(run):
    report = run.report
    return {
        'selection': run.selection,
        'episodes': report.episodes,
        'mean': _number(report.mean),
        'ci95': _number(report.ci95),
        'excluded': report.excluded,
        'nonconverged': report.nonconverged,
        'grid_points': report.grid_points,
        'per_class_per_iter': report.per_class_per_iter,
        'total_cap': report.total_cap,
        'precision_per_iteration': _numbers(report.precision_per_iteration),
        'accuracies': _numbers(report.accuracies),
        'base_accuracies': _numbers(r.base_accuracy for r in run.results),
        'iterations': [r.iterations for r in run.results],
        'seeds': [r.seed for r in run.results],
    }


def report_dict(cfg, input_sha256, runs):
    return {
        'version': REPORT_VERSION,
        'config': dumps_config(cfg),
        'master_seed': cfg.seed,
        'input_sha256': input_sha256,
        'runs': [run_dict(run) for run in runs],
    }


def dumps_report(cfg, input_sha256, runs):
    return json.dumps(
        report_dict(cfg, input_sha256, runs),
        indent=2, sort_keys=True, allow_nan=False,
    ) + '\n'


def nonconverged_fraction(runs):
    grid_points = sum(run.report.grid_points for run in runs)
    if not grid_points:
        return 0.0
    return sum(run.report.nonconverged for run in runs) / grid_points


def dump_table(runs, stream):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(
        ('selection', 'episodes', 'mean', 'ci95', 'excluded', 'nonconverged'),
    )
    for run in runs:
        report = run.report
        writer.writerow((
            run.selection, report.episodes, repr(report.mean),
            repr(report.ci95), report.excluded, report.nonconverged,
        ))
