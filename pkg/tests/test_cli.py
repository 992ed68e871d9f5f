import json

import numpy as np
import pandas as pd
import pytest

from main import build_parser, main
from module.errors import SpectralError
from module.runner import SpectralRunner, parse_floats
from module.utils import read_csv


@pytest.fixture
def group_file(tmp_path):
    path = tmp_path / 'group.json'
    path.write_text(json.dumps({'type': 'three_funnel', 'lengths': [6, 6, 6]}), encoding='utf-8')
    return str(path)


def test_parse_floats():
    assert parse_floats('1.5, 2,-1') == [1.5, 2.0, -1.0]
    with pytest.raises(ValueError):
        parse_floats('1,2', 3)


def test_malformed_group_spec(tmp_path, capsys):
    path = tmp_path / 'bad.json'
    path.write_text(json.dumps({'type': 'three_funnel', 'lengths': [6, 6]}), encoding='utf-8')
    assert main(['spectrum', '--group', str(path), '--output', str(tmp_path / 'out')]) == 2
    assert 'lengths' in capsys.readouterr().err
    assert not (tmp_path / 'out').exists()


def test_group_is_required(tmp_path, capsys):
    assert main(['spectrum', '--output', str(tmp_path)]) == 2
    assert 'ValidationError' in capsys.readouterr().err


def test_invalid_argument_value(tmp_path, group_file, capsys):
    assert main(['spectrum', '--group', group_file, '--threads', '0', '--output', str(tmp_path)]) == 2
    assert 'threads' in capsys.readouterr().err


def test_spectrum_csv(tmp_path, group_file):
    out = tmp_path / 'out'
    assert main(['spectrum', '--group', group_file, '--l-max', '6.5', '--convention', 'unoriented',
                 '--output', str(out)]) == 0
    path = out / 'spectrum.csv'
    assert path.read_text(encoding='utf-8').startswith('# config: ')
    df = read_csv(path)
    assert list(df.columns) == ['word', 'length', 'multiplicity']
    assert len(df) == 3
    assert np.allclose(df['length'], 6.0, atol=1e-10)


def test_xi_csv(tmp_path, group_file):
    out = tmp_path / 'out'
    assert main(['xi', '--group', group_file, '--zmax', '2', '--z-points', '5', '--output', str(out)]) == 0
    df = read_csv(out / 'xi.csv')
    assert list(df['t']) == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert df['xi'].iloc[0] == 0.0
    assert np.all(np.diff(df['xi']) > 0)


def test_zeta_output_independent_of_threads(tmp_path, group_file):
    grid = '--grid=1.5,2.0,2,-1,1,2'
    outputs = []
    for threads in (1, 4, 8):
        out = tmp_path / f'threads_{threads}'
        assert main(['zeta', '--group', group_file, grid, '--threads', str(threads), '--output', str(out)]) == 0
        outputs.append((out / 'zeta.csv').read_bytes())
    assert outputs[1] == outputs[0]
    assert outputs[2] == outputs[0]
    df = read_csv(tmp_path / 'threads_1' / 'zeta.csv')
    assert set(df['route']) == {'fredholm', 'euler'}
    assert df['discrepancy'].dropna().max() < 1e-6


def test_renorm_csv(tmp_path, capsys):
    x = np.geomspace(1e-4, 1.0, 4001)
    source = tmp_path / 'samples.csv'
    pd.DataFrame({'x': x, 'u': x ** -2.0 + 3.0 + x}).to_csv(source, index=False, float_format='%.17g')
    out = tmp_path / 'out'
    assert main(['renorm', '--input', str(source), '--exponents=-2,0,1', '--output', str(out)]) == 0
    df = read_csv(out / 'renorm.csv')
    assert df['finite_part'].iloc[0] == pytest.approx(2.5, abs=1e-7)
    assert df['log_coefficient'].iloc[0] == pytest.approx(0.0, abs=1e-8)
    assert capsys.readouterr().out.strip()


def test_failed_command_removes_artifacts(tmp_path, group_file, monkeypatch, capsys):
    def broken(self):
        self._csv(pd.DataFrame({'a': [1.0]}), 'spectrum.csv')
        raise SpectralError('中途失败')

    monkeypatch.setattr(SpectralRunner, 'cmd_spectrum', broken)
    out = tmp_path / 'out'
    assert main(['spectrum', '--group', group_file, '--output', str(out)]) == 1
    assert not (out / 'spectrum.csv').exists()
    assert 'SpectralError:中途失败' in capsys.readouterr().err


def test_xi_output_independent_of_threads(tmp_path, group_file):
    outputs = []
    for threads in (1, 4, 8):
        out = tmp_path / f'threads_{threads}'
        assert main(['xi', '--group', group_file, '--zmax', '3', '--z-points', '7', '--threads', str(threads),
                     '--output', str(out)]) == 0
        outputs.append((out / 'xi.csv').read_bytes())
    assert outputs[1] == outputs[0]
    assert outputs[2] == outputs[0]


def test_literal_coefficients_flag_alias():
    parser = build_parser()
    assert parser.parse_args(['weyl', '--paper-literal']).paper_literal
    assert parser.parse_args(['weyl', '--literal-coefficients']).paper_literal
    assert not parser.parse_args(['weyl']).paper_literal


def test_weyl_json_with_literal_flag(tmp_path, group_file):
    literal, alias = tmp_path / 'literal', tmp_path / 'alias'
    assert main(['weyl', '--group', group_file, '--T', '6', '--samples', '4', '--paper-literal',
                 '--output', str(literal)]) == 0
    assert main(['weyl', '--group', group_file, '--T', '6', '--samples', '4', '--literal-coefficients',
                 '--output', str(alias)]) == 0
    assert (literal / 'weyl.json').read_bytes() == (alias / 'weyl.json').read_bytes()
    payload = json.loads((literal / 'weyl.json').read_text(encoding='utf-8'))
    assert payload['config']['run']['paper_literal'] is True
    assert payload['result']['predicted_leading'] == pytest.approx(0.5)
    assert len(payload['result']['t']) == 4
