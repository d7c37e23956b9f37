# wmv-stability/tests/test_experiments.py

import json
import logging

import pandas as pd
import pytest

from scripts.wmv_cli import main
from wmv_stability import config
from wmv_stability.utils.experiments import (
    PRESETS,
    ExperimentConfig,
    build_distribution,
    parse_distribution,
    parse_grid,
    run,
    run_figure,
)
from wmv_stability.utils.distributions import Discrete, ExtremeSymmetric, PointMass
from wmv_stability.utils.validation import DomainError

RUNNING = '0.8,0.75,0.7,0.6'


@pytest.fixture
def restore_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


def read_bytes(paths):
    return {p.name: p.read_bytes() for p in paths}


class TestParsing:

    def test_distribution_spec(self):
        assert parse_distribution('extreme:delta=0.05') == [{'kind': 'extreme', 'delta': 0.05}]
        specs = parse_distribution('discrete:values=0.6/0.8,probs=0.5/0.5; point')
        assert specs == [{'kind': 'discrete', 'values': [0.6, 0.8], 'probs': [0.5, 0.5]},
                         {'kind': 'point'}]

    @pytest.mark.parametrize('text', ['', 'beta:variance', 'extreme:delta=wide'])
    def test_bad_distribution_spec(self, text):
        with pytest.raises(DomainError):
            parse_distribution(text)

    def test_build_distribution(self):
        dist = build_distribution('point;extreme:delta=0.1', [0.7, 0.8])
        assert dist.marginals == (PointMass(0.7), ExtremeSymmetric(0.8, 0.1))
        dist = build_distribution('discrete:values=0.6/0.8,probs=0.5/0.5', [0.7])
        assert isinstance(dist.marginals[0], Discrete)

    def test_build_distribution_count_mismatch(self):
        with pytest.raises(DomainError):
            build_distribution('point;point;point', [0.7, 0.8])

    def test_grid(self):
        assert parse_grid('0.5,1,11') == [0.5, 1.0, 11.0]
        with pytest.raises(DomainError):
            parse_grid('0.5,1')


class TestExperimentConfig:

    def test_json_round_trip(self):
        cfg = ExperimentConfig('sweep', trust=[0.8, 0.7], grid=[0.5, 1.0, 11], indices=[1, 0])
        assert ExperimentConfig.from_json(cfg.to_json()) == cfg

    def test_unknown_field(self):
        with pytest.raises(DomainError):
            ExperimentConfig.from_dict({'command': 'soo', 'trials': 5})

    @pytest.mark.parametrize('changes', [
        {'trust': None},
        {'trust': [0.4]},
        {'truth': [0.7, 0.7]},
        {'runs': 100},
        {'workers': 0},
        {'mode': 'sideways'},
        {'grid': [0.5, 1.0, 1]},
        {'format': 'xlsx'},
    ])
    def test_invalid(self, changes):
        data = dict({'command': 'correctness', 'trust': [0.7]}, **changes)
        with pytest.raises(DomainError):
            ExperimentConfig.from_dict(data).validate()

    def test_identical_sweep_needs_no_trust(self):
        ExperimentConfig('sweep', m=3).validate()

    def test_default_output(self):
        assert str(ExperimentConfig('soo', format='json').out_path()) == 'soo.json'
        assert str(ExperimentConfig('figure').out_path()) == 'figures'


class TestRun:

    def test_correctness(self, out_dir):
        cfg = ExperimentConfig('correctness', trust=[0.8, 0.75, 0.7, 0.6],
                               output=str(out_dir / 'omega.csv'))
        result = run(cfg, quiet=True)
        assert result.status == 0
        assert result.summary == 'omega=0.845'
        frame = pd.read_csv(result.paths[0])
        assert frame['omega'][0] == pytest.approx(0.845, abs=1e-15)

    def test_correctness_with_oracle(self, out_dir):
        cfg = ExperimentConfig('correctness', trust=[0.8], runs=1000, seed=2,
                               output=str(out_dir / 'omega.json'), format='json')
        result = run(cfg, quiet=True)
        assert 'estimate=' in result.summary
        records = json.loads(result.paths[0].read_text())
        assert records[0]['runs'] == 1000
        assert set(records[0]) == {'omega', 'estimate', 'stderr', 'runs'}

    def test_soc_point_mass(self, out_dir):
        cfg = ExperimentConfig('soc', trust=[0.8, 0.75, 0.7, 0.6], distribution='point',
                               output=str(out_dir / 'soc.csv'))
        result = run(cfg, quiet=True)
        assert result.summary == 'gap=0 stderr=0 mode=exact'

    def test_soc_row_is_consistent(self, out_dir):
        cfg = ExperimentConfig('soc', trust=[0.8, 0.75, 0.7, 0.6],
                               distribution='beta:variance=0.004', runs=10_000, seed=2,
                               output=str(out_dir / 'soc.csv'))
        row = pd.read_csv(run(cfg, quiet=True).paths[0]).iloc[0]
        assert row['e_omega_mixed'] == pytest.approx(row['omega_trust'] + row['gap'], abs=1e-15)
        assert row['mode'] == 'monte_carlo'

    def test_bounds(self, out_dir):
        cfg = ExperimentConfig('bounds', trust=[0.8, 0.75, 0.7, 0.6], delta=[0.05],
                               output=str(out_dir / 'bounds.csv'))
        result = run(cfg, quiet=True)
        frame = pd.read_csv(result.paths[0])
        assert list(frame.columns) == config.BOUND_COLUMNS
        row = frame.iloc[0]
        assert row['param'] == 0.05
        assert row['bound_strong'] == pytest.approx(0.050103, abs=1e-6)
        assert row['bound_weak'] == pytest.approx(0.057479, abs=1e-6)
        assert 0 <= row['soo'] <= row['bound_strong']

    def test_bounds_not_applicable(self, out_dir):
        cfg = ExperimentConfig('bounds', trust=[0.9], delta=[0.2],
                               output=str(out_dir / 'bounds.csv'))
        assert run(cfg, quiet=True).status == config.EXIT_CODES['validation']

    def test_identical_sweep(self, out_dir):
        cfg = ExperimentConfig('sweep', m=3, grid=[0.5, 1.0, 3],
                               output=str(out_dir / 'sweep.csv'))
        result = run(cfg, quiet=True)
        frame = pd.read_csv(result.paths[0])
        assert frame['omega'].tolist() == pytest.approx([0.5, 0.84375, 1.0], abs=1e-12)

    def test_capacity_exit_code(self, out_dir):
        cfg = ExperimentConfig('correctness', trust=[0.6] * 25, output=str(out_dir / 'x.csv'))
        assert run(cfg, quiet=True).status == config.EXIT_CODES['capacity']

    def test_io_exit_code(self, out_dir):
        cfg = ExperimentConfig('correctness', trust=[0.7],
                               output=str(out_dir / 'missing' / 'x.csv'))
        assert run(cfg, quiet=True).status == config.EXIT_CODES['io']

    def test_monte_carlo_preset_needs_seed(self, out_dir):
        cfg = ExperimentConfig('figure', preset='fig5a', output=str(out_dir))
        assert run(cfg, quiet=True).status == config.EXIT_CODES['validation']


class TestFigures:

    def test_presets_registered(self):
        assert set(PRESETS) == set(config.FIGURE_PRESETS)

    def test_exact_preset_is_byte_identical(self, tmp_path):
        first = run_figure('fig7b', output_dir=tmp_path / 'a', quiet=True)
        second = run_figure('fig7b', output_dir=tmp_path / 'b', quiet=True)
        assert read_bytes(first) == read_bytes(second)
        frame = pd.read_csv(first[0])
        assert frame['param'].tolist() == list(config.FIG7_N_VALUES)
        assert (frame['soo'] <= frame['bound_strong'] + 1e-9).all()
        assert (frame['bound_strong'] <= frame['bound_weak'] + 1e-9).all()

    def test_staircase_preset(self, tmp_path):
        paths = run_figure('fig4a', output_dir=tmp_path, quiet=True)
        assert [p.name for p in paths][-1] == 'fig4a_meta.json'
        frame = pd.read_csv(tmp_path / 'fig4a_source1.csv')
        peak = frame.loc[frame['omega'].idxmax()]
        assert peak['omega'] == pytest.approx(0.845, abs=1e-12)
        meta = json.loads((tmp_path / 'fig4a_meta.json').read_text())
        assert meta['mode'] == 'trust_varying'
        assert meta['files'] == [p.name for p in paths[:-1]]

    def test_monte_carlo_preset_is_worker_independent(self, tmp_path):
        serial = run_figure('fig5a', seed=7, output_dir=tmp_path / 'a', runs=20_000, quiet=True)
        threaded = run_figure('fig5a', seed=7, output_dir=tmp_path / 'b', runs=20_000,
                              workers=2, quiet=True)
        assert read_bytes(serial) == read_bytes(threaded)
        meta = json.loads((tmp_path / 'a' / 'fig5a_meta.json').read_text())
        assert meta['seed'] == 7 and meta['runs'] == 20_000

    def test_json_format(self, tmp_path):
        paths = run_figure('fig6b', output_dir=tmp_path, fmt='json', quiet=True)
        records = json.loads(paths[0].read_text())
        assert set(records[0]) == {'x', 'density'}

    def test_unknown_preset(self, tmp_path):
        with pytest.raises(DomainError):
            run_figure('fig9z', output_dir=tmp_path)


@pytest.mark.usefixtures('restore_logging')
class TestCli:

    def test_correctness(self, out_dir, capsys):
        status = main(['correctness', '--trust', RUNNING, '--out', str(out_dir / 'o.csv'), '-q'])
        assert status == 0
        assert capsys.readouterr().out.strip() == 'omega=0.845'

    def test_soo_summary(self, out_dir, capsys):
        status = main(['soo', '--trust', RUNNING, '--dist', 'extreme:delta=0.05',
                       '--out', str(out_dir / 'soo.csv'), '-q'])
        assert status == 0
        summary = capsys.readouterr().out
        assert 'bound_strong=0.0501025390' in summary
        assert 'mode=exact' in summary

    def test_breakpoints(self, out_dir, capsys):
        status = main(['breakpoints', '--trust', '0.8,0.6', '--index', '1',
                       '--out', str(out_dir / 'bp.csv')])
        assert status == 0
        assert capsys.readouterr().out.strip() == 'breakpoints=1'
        assert pd.read_csv(out_dir / 'bp.csv')['x'].tolist() == pytest.approx([0.8])

    def test_surface(self, out_dir, capsys):
        status = main(['surface', '--trust', RUNNING, '--index', '0', '--index-j', '2',
                       '--grid', '0.5,1,3', '--out', str(out_dir / 's.csv')])
        assert status == 0
        assert capsys.readouterr().out.startswith('cells=9 ')

    def test_validation_error(self, out_dir, capsys):
        assert main(['correctness', '--trust', '0.4', '--out', str(out_dir / 'o.csv')]) == 1
        assert capsys.readouterr().out == ''

    def test_runs_without_seed(self, out_dir):
        assert main(['correctness', '--trust', '0.7', '--runs', '100',
                     '--out', str(out_dir / 'o.csv')]) == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(['tally'])

    def test_config_file_with_override(self, out_dir, capsys):
        path = out_dir / 'cfg.json'
        path.write_text(ExperimentConfig('correctness', trust=[0.7, 0.7, 0.7]).to_json())
        status = main(['correctness', '--config', str(path), '--truth', '0.7,0.7,0.7',
                       '--out', str(out_dir / 'o.csv'), '--echo-config', str(out_dir / 'echo.json')])
        assert status == 0
        assert capsys.readouterr().out.strip() == 'omega=0.784'
        echoed = ExperimentConfig.from_json((out_dir / 'echo.json').read_text())
        assert echoed.truth == [0.7, 0.7, 0.7]
        assert echoed.trust == [0.7, 0.7, 0.7]

    def test_support_overflow_exit_code(self, out_dir):
        args = ['soo', '--trust', ','.join(['0.7'] * 13), '--dist', 'extreme:delta=0.05',
                '--out', str(out_dir / 'soo.csv'), '-q']
        assert main(args) == config.EXIT_CODES['capacity']
        assert main(args + ['--exact']) == config.EXIT_CODES['capacity']

    def test_echoed_config_reproduces_run(self, out_dir):
        out = out_dir / 'soo.csv'
        echo = out_dir / 'echo.json'
        assert main(['soo', '--trust', RUNNING, '--dist', 'beta:variance=0.004',
                     '--runs', '20000', '--seed', '9', '--workers', '2',
                     '--out', str(out), '--echo-config', str(echo), '-q']) == 0
        first = out.read_bytes()
        out.unlink()
        assert main(['soo', '--config', str(echo), '-q']) == 0
        assert out.read_bytes() == first

    def test_log_file(self, out_dir):
        log_path = out_dir / 'run.log'
        main(['correctness', '--trust', '0.7', '--out', str(out_dir / 'o.csv'),
              '--log-file', str(log_path)])
        assert 'Wrote 1 rows' in log_path.read_text()
