import json
import os

import pandas as pd
import pytest

from src.core.errors import ConfigError
from src.utils import config
from src.utils.io_utils import file_sha256, write_csv, write_json, write_text

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


class TestMergeConfig:
    """Mezcla de secciones sobre los valores por defecto."""

    def test_empty_document_gives_defaults(self):
        assert config.merge_config({}) == config.default_config()

    def test_partial_section_keeps_other_defaults(self):
        merged = config.merge_config({'preference': {'rho': 2.0}})
        assert merged['preference']['rho'] == 2.0
        assert merged['preference']['alpha'] == config.DEFAULTS['preference']['alpha']

    def test_noise_section_replaces_defaults(self):
        noise = {'variant': 'independent_normal', 'sigma_p': 0.2}
        assert config.merge_config({'noise': noise})['noise'] == noise

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            config.merge_config({'strategies': {}})

    def test_section_must_be_object(self):
        with pytest.raises(ConfigError):
            config.merge_config({'euler': [1, 2]})

    def test_defaults_are_not_mutated(self):
        merged = config.merge_config({})
        merged['aggregate']['epsilons'].append(99.0)
        assert 99.0 not in config.DEFAULTS['aggregate']['epsilons']


class TestLoadConfig:

    def test_shipped_file_matches_defaults(self):
        path = os.path.join(ROOT, config.DEFAULT_CONFIG_PATH)
        assert config.load_config(path) == config.default_config()
        with open(path) as f:
            assert f.read() == config.dump_config(config.default_config())

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            config.load_config(str(tmp_path / 'missing.json'))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{"preference": ')
        with pytest.raises(ConfigError):
            config.load_config(str(path))

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / 'list.json'
        path.write_text('[1, 2]')
        with pytest.raises(ConfigError):
            config.load_config(str(path))

    def test_dump_is_stable(self):
        raw = config.merge_config({'seed': 3})
        text = config.dump_config(raw)
        assert text == config.dump_config(json.loads(text))
        assert text.endswith('\n')


class TestRunConfig:
    """Validación y sobreescrituras de la línea de comandos."""

    @pytest.fixture
    def raw(self):
        return config.merge_config({})

    def test_overrides(self, raw):
        run_cfg = config.build_run_config(raw, seed=5, output_dir='out', expenditures=[1, 3])
        assert run_cfg.seed == 5
        assert run_cfg.output_dir == 'out'
        assert run_cfg.expenditures == (1.0, 3.0)
        assert raw['seed'] == config.TOP_LEVEL_DEFAULTS['seed']

    def test_preference_is_validated(self, raw):
        raw['preference']['rho'] = 1.0
        with pytest.raises(ConfigError):
            config.build_run_config(raw)

    @pytest.mark.parametrize("expenditures", [[], [1.0, 0.0]])
    def test_expenditures_positive(self, raw, expenditures):
        with pytest.raises(ConfigError):
            config.build_run_config(raw, expenditures=expenditures)

    def test_grid_mode(self, raw):
        raw['grid']['mode'] = 'random'
        with pytest.raises(ConfigError):
            config.build_run_config(raw)

    def test_seed_must_be_integer(self, raw):
        raw['seed'] = 1.5
        with pytest.raises(ConfigError):
            config.build_run_config(raw)

    def test_derived_parameters(self, raw):
        run_cfg = config.build_run_config(raw)
        p = run_cfg.amoroso_params(2.0)
        assert p.n == pytest.approx((0.5 - 1.0) / 2.0)
        assert p.k == 2.0
        assert run_cfg.logit_preference().rho == 2.0
        assert run_cfg.logit_preference().alpha == run_cfg.preference.alpha
        assert run_cfg.euler_rates() == (0.05,) * 20

    def test_explicit_rates(self, raw):
        raw['euler']['rates'] = [0.01, 0.02]
        assert config.build_run_config(raw).euler_rates() == (0.01, 0.02)

    @pytest.mark.parametrize("section, key, value", [
        ('preference', 'rho', 'abc'),
        ('preference', 'alpha', True),
        ('euler', 'horizon', 'ten'),
        ('euler', 'horizon', 2.5),
        ('euler', 'rates', 0.05),
        ('logit', 'households', None),
        ('aggregate', 'epsilons', [1.0, 'x']),
    ])
    def test_malformed_values(self, raw, section, key, value):
        raw[section][key] = value
        with pytest.raises(ConfigError):
            config.build_run_config(raw)

    def test_missing_field(self, raw):
        del raw['grid']['tail']
        with pytest.raises(ConfigError):
            config.build_run_config(raw)

    def test_numeric_strings_are_converted(self, raw):
        raw['euler']['horizon'] = '7'
        raw['grid']['size'] = 300.0
        run_cfg = config.build_run_config(raw)
        assert run_cfg.section('euler')['horizon'] == 7
        assert isinstance(run_cfg.grid['size'], int)
        assert run_cfg.euler_rates() == (0.05,) * 7

    def test_section_is_a_copy(self, raw):
        run_cfg = config.build_run_config(raw)
        run_cfg.section('aggregate')['draws'] = 1
        assert run_cfg.section('aggregate')['draws'] == 1000000


class TestIOUtils:
    """Escrituras atómicas y huellas."""

    def test_csv_precision_and_line_endings(self, tmp_path):
        path = tmp_path / 'nested' / 'table.csv'
        write_csv(pd.DataFrame({'x': [0.1, 1.0 / 3.0]}), str(path))
        content = path.read_bytes()
        assert b'\r\n' not in content
        assert content.decode().splitlines() == ['x', '0.10000000000000001', '0.33333333333333331']

    def test_no_temporary_files_left(self, tmp_path):
        write_text('hola\n', str(tmp_path / 'a.txt'))
        write_json({'b': 1, 'a': 2}, str(tmp_path / 'a.json'))
        assert sorted(os.listdir(tmp_path)) == ['a.json', 'a.txt']
        assert json.loads((tmp_path / 'a.json').read_text()) == {'a': 2, 'b': 1}

    def test_failed_write_keeps_previous_file(self, tmp_path):
        path = tmp_path / 'table.csv'
        path.write_text('previo\n')

        class Broken:
            def to_csv(self, *args, **kwargs):
                raise RuntimeError('fallo')

        with pytest.raises(RuntimeError):
            write_csv(Broken(), str(path))
        assert path.read_text() == 'previo\n'
        assert os.listdir(tmp_path) == ['table.csv']

    def test_sha256(self, tmp_path):
        path = tmp_path / 'a.txt'
        write_text('abc', str(path))
        assert file_sha256(str(path)) == 'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad'
