"""
Tests for the command-line entry point: exit codes, outputs and configuration handling.
"""
import json

import pandas as pd
import pytest

from config import Config
from main import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, run_command

TINY_CONFIG = """
[grid]
n_r = 11
n_z = 21
margin_top = 0.0
margin_bottom = 0.0
rpe_intervals = 2

[excitation]
steps = 100

[mor]
d = 4
k = 3
n_snapshots = 5

[mpc]
horizons = [2, 5]
steps = 10
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / 'experiment.toml'
    path.write_text(TINY_CONFIG)
    return path


def run(config_path, out_dir, *args):
    return run_command([*args, '--config', str(config_path), '--out-dir', str(out_dir), '--log-level', 'WARNING'])


def test_model_info(config_file, tmp_path):
    out = tmp_path / 'info'
    assert run(config_file, out, 'model-info') == EXIT_OK
    info = json.loads((out / 'model_info.json').read_text())
    assert info['n'] == 190
    resolved = json.loads((out / 'resolved_config.json').read_text())
    assert resolved['grid']['n_r'] == 11
    assert resolved['mor']['k'] == 3


def test_simulate_writes_trajectory(config_file, tmp_path):
    out = tmp_path / 'sim'
    assert run(config_file, out, 'simulate') == EXIT_OK
    frame = pd.read_csv(out / 'trajectory.csv')
    assert list(frame.columns) == ['t', 'u', 'y_vol', 'y_peak']
    assert len(frame) == 100


def test_estimate_from_synthetic_file(config_file, tmp_path):
    data_dir = tmp_path / 'data'
    assert run(config_file, data_dir, 'synth-data', '--seed', '3') == EXIT_OK
    measurements = data_dir / 'measurements.csv'
    assert measurements.is_file()

    out = tmp_path / 'fit'
    assert run(config_file, out, 'estimate', '--data', str(measurements)) == EXIT_OK
    report = json.loads((out / 'estimate.json').read_text())
    assert set(report['alpha']) == {'rpe', 'ch'}
    assert report['mode'] == 'two-param'


def test_missing_measurement_file(config_file, tmp_path):
    assert run(config_file, tmp_path / 'fit', 'estimate', '--data', str(tmp_path / 'absent.csv')) == EXIT_CONFIG


def test_invalid_p_level(config_file, tmp_path):
    assert run(config_file, tmp_path / 'fit', 'estimate', '--p-level', '1.5') == EXIT_CONFIG


def test_missing_config(tmp_path):
    assert run(tmp_path / 'absent.toml', tmp_path / 'out', 'model-info') == EXIT_CONFIG


def test_toml_syntax_error(tmp_path):
    path = tmp_path / 'broken.toml'
    path.write_text('[grid\nn_r = 11\n')
    assert run(path, tmp_path / 'out', 'model-info') == EXIT_CONFIG


def test_unknown_key(tmp_path):
    path = tmp_path / 'typo.toml'
    path.write_text('[grid]\nnr = 11\n')
    assert run(path, tmp_path / 'out', 'model-info') == EXIT_CONFIG


def test_mpc_writes_timing(config_file, tmp_path):
    out = tmp_path / 'mpc'
    assert run(config_file, out, 'mpc') == EXIT_OK
    timing = pd.read_csv(out / 'timing.csv')
    assert list(timing['N']) == [2, 5]


def test_too_many_deim_points_is_numerical_failure(tmp_path):
    path = tmp_path / 'deim.toml'
    path.write_text(TINY_CONFIG.replace('k = 3', 'k = 9'))
    assert run(path, tmp_path / 'out', 'reduce') == EXIT_NUMERICAL


def test_invalid_thread_count(config_file, tmp_path):
    assert run(config_file, tmp_path / 'out', 'model-info', '--threads', '0') == EXIT_CONFIG


def test_runtime_environment_validated(monkeypatch, config_file, tmp_path):
    monkeypatch.setattr(Config, 'THREADS', '0')
    assert Config.validate_runtime_config() is False
    argv = ['model-info', '--config', str(config_file), '--out-dir', str(tmp_path / 'out')]
    assert run_command(argv) == EXIT_CONFIG
