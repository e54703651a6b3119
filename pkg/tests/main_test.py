import json
import math

import pytest

from icinfer.main import main


@pytest.fixture
def features(tmpdir, capsys):
    path = str(tmpdir.join('features.icif'))
    ret = main((
        'synth', '--ways', '3', '--per-class', '10', '--dim', '6',
        '--sep', '4', '--sigma', '0.5', '--seed', '1', '--out', path,
    ))
    assert ret == 0
    capsys.readouterr()
    return path


def _run_args(features, *extra):
    return (
        'run', '--input', features, '--ways', '3', '--queries', '3',
        '--episodes', '2', '--grid-count', '5',
    ) + extra


def test_synth(tmpdir, capsys):
    paths = [str(tmpdir.join(f'{name}.csv')) for name in 'ab']
    for path in paths:
        ret = main((
            'synth', '--ways', '3', '--per-class', '4', '--dim', '2',
            '--sep', '2', '--sigma', '0.1', '--seed', '5', '--out', path,
        ))
        assert ret == 0
    out, _ = capsys.readouterr()
    assert out == '12 2 3\n12 2 3\n'
    with open(paths[0]) as a, open(paths[1]) as b:
        assert a.read() == b.read()


def test_synth_negative_sigma(tmpdir):
    with pytest.raises(SystemExit) as excinfo:
        main((
            'synth', '--ways', '3', '--per-class', '4', '--dim', '2',
            '--sep', '2', '--sigma', '-1', '--out', str(tmpdir.join('f')),
        ))
    assert excinfo.value.code == 2


def test_run_report(features, tmpdir, capsys):
    report = str(tmpdir.join('report.json'))
    table = str(tmpdir.join('table.csv'))
    ret = main(_run_args(
        features, '--compare', 'co', '--report', report, '--table', table,
    ))
    assert ret == 0
    out, _ = capsys.readouterr()
    lines = out.splitlines()
    assert [line.split(':')[0] for line in lines] == ['ici', 'co']
    assert lines[0].endswith('(2 episodes)')
    with open(report) as f:
        contents = json.load(f)
    assert [run['selection'] for run in contents['runs']] == ['ici', 'co']
    assert contents['runs'][0]['seeds'] == contents['runs'][1]['seeds']
    with open(table) as f:
        assert f.readline() == (
            'selection,episodes,mean,ci95,excluded,nonconverged\n'
        )


def test_run_compare_credible_against_random(tmpdir, capsys):
    path = str(tmpdir.join('five.icif'))
    assert main((
        'synth', '--ways', '5', '--per-class', '40', '--dim', '32',
        '--sep', '6', '--sigma', '1', '--seed', '3', '--out', path,
    )) == 0
    capsys.readouterr()
    assert main((
        'run', '--input', path, '--ways', '5', '--queries', '15',
        '--episodes', '40', '--grid-count', '30', '--seed', '5',
        '--compare', 'ra',
    )) == 0
    out, _ = capsys.readouterr()
    ici, ra = json.loads(out)['runs']
    assert ici['seeds'] == ra['seeds']
    assert ici['base_accuracies'] == ra['base_accuracies']
    assert ici['mean'] > ra['mean']


def test_run_report_to_stdout(features, capsys):
    assert main(_run_args(features, '--selection', 'co')) == 0
    out, _ = capsys.readouterr()
    assert json.loads(out)['runs'][0]['selection'] == 'co'


def test_run_is_reproducible(features, capsys):
    assert main(_run_args(features)) == 0
    first, _ = capsys.readouterr()
    assert main(_run_args(features)) == 0
    second, _ = capsys.readouterr()
    assert first == second


def test_run_config_file(features, tmpdir, capsys):
    cfg = tmpdir.join('run.yaml')
    cfg.write(
        f'input: {json.dumps(features)}\n'
        'ways: 3\n'
        'queries: 3\n'
        'episodes: 2\n'
        'selection: ra\n',
    )
    assert main(('run', '--config', str(cfg), '--grid-count', '5')) == 0
    out, _ = capsys.readouterr()
    report = json.loads(out)
    assert report['runs'][0]['selection'] == 'ra'
    assert 'episodes: 2\n' in report['config']


@pytest.mark.parametrize(
    ('extra', 'expected'),
    (
        (('--episodes', '0'), 'error: episodes: must be >= 1, got 0\n'),
        (
            ('--selection', 'best'),
            "error: selection: expected one of ici, ra, nn, co, cn, "
            "got 'best'\n",
        ),
        (('--ways', '7'), 'error: 7-way episode from 3 classes\n'),
    ),
)
def test_run_errors(features, capsys, extra, expected):
    ret = main(_run_args(features, *extra))
    _, err = capsys.readouterr()
    assert err == expected
    if extra[0] == '--ways':
        assert ret == 3
    else:
        assert ret == 2


def test_run_without_input(capsys):
    assert main(('run', '--episodes', '2')) == 2
    _, err = capsys.readouterr()
    assert err == 'error: input: a feature file is required\n'


def test_run_missing_input(tmpdir, capsys):
    path = str(tmpdir.join('missing.csv'))
    assert main(_run_args(path)) == 3
    _, err = capsys.readouterr()
    assert err.startswith('error: ')
    assert 'missing.csv' in err


def test_run_nonconverged(features, capsys):
    ret = main(_run_args(
        features, '--max-iter', '1', '--max-nonconverged', '0',
    ))
    assert ret == 4
    _, err = capsys.readouterr()
    assert 'did not converge (allowed: 0.00%)' in err


def test_path_dump(features, tmpdir, capsys):
    path_out = str(tmpdir.join('path.csv'))
    vanish_out = str(tmpdir.join('vanish.csv'))
    ret = main((
        'path', '--input', features, '--ways', '3', '--queries', '3',
        '--grid-count', '4', '--index', '1', '--out', path_out,
        '--vanish-out', vanish_out,
    ))
    assert ret == 0
    with open(path_out) as f:
        lines = f.read().splitlines()
    assert lines[0] == 'variant,lambda,instance,class,gamma'
    assert len(lines) == 1 + 12 * 3 * 4
    with open(vanish_out) as f:
        rows = f.read().splitlines()
    assert rows[0] == 'instance,vanish_lambda,selected,correct'
    assert len(rows) == 13
    assert rows[1].endswith(',,')
    assert rows[-1].split(',')[2] in ('0', '1')


def test_theory_lambda(capsys):
    ret = main((
        'theory', 'lambda', '--sigma', '0.5', '--mu', '4', '--eta', '0.5',
        '--c', '5', '--n', '20',
    ))
    assert ret == 0
    out, _ = capsys.readouterr()
    assert float(out) == pytest.approx(4 * math.sqrt(math.log(100)))


def test_theory_lambda_bad_eta(capsys):
    ret = main((
        'theory', 'lambda', '--sigma', '1', '--mu', '1', '--eta', '0',
        '--c', '2', '--n', '5',
    ))
    assert ret == 2
    _, err = capsys.readouterr()
    assert err == 'error: eta must be in (0, 1], got 0.0\n'


def test_theory_recover(tmpdir, capsys):
    out_path = str(tmpdir.join('trials.csv'))
    ret = main(('theory', 'recover', '--trials', '3', '--out', out_path))
    assert ret == 0
    out, _ = capsys.readouterr()
    lines = out.splitlines()
    assert lines[0] == 'trials: 3'
    assert [line.split(':')[0] for line in lines] == [
        'trials', 'c1_c2', 'c1_c2_c3', 'exact_recovery_rate',
        'subset_rate_c1_c2', 'sign_consistent_rate_c1_c2_c3',
        'o_subset_rate',
    ]
    with open(out_path) as f:
        assert len(f.read().splitlines()) == 4


def test_theory_recover_bad_flips(capsys):
    assert main(('theory', 'recover', '--flips', '30')) == 2
    _, err = capsys.readouterr()
    assert err == 'error: flips must be in [0, 30), got 30\n'


def test_theory_hist(tmpdir):
    out_path = str(tmpdir.join('hist.csv'))
    ret = main((
        'theory', 'hist', '--n', '200', '--d', '3', '--c', '2',
        '--bins', '11', '--out', out_path,
    ))
    assert ret == 0
    with open(out_path) as f:
        lines = f.read().splitlines()
    assert lines[0] == 'low,high,count'
    assert sum(int(line.split(',')[2]) for line in lines[1:]) == 400


def test_theory_freq(features, capsys):
    ret = main((
        'theory', 'freq', '--input', features, '--ways', '3',
        '--queries', '3', '--episodes', '2', '--grid-count', '5',
    ))
    assert ret == 0
    out, _ = capsys.readouterr()
    lines = out.splitlines()
    assert lines[0] == 'bucket,improved,total,ratio'
    assert [line.split(',')[0] for line in lines[1:]] == [
        'None', 'C1', 'C1 and C2', 'All',
    ]
    assert sum(int(line.split(',')[2]) for line in lines[1:]) == 2
