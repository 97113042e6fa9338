"""
Experiments package.
Configuration parsing and the pipelines behind the command-line subcommands.
"""
from retina.experiments.settings import (
    RESOLVED_CONFIG_NAME,
    ConfigError,
    ExcitationSettings,
    EstimationSettings,
    ExperimentConfig,
    MorSettings,
    MpcSettings,
    SensitivitySettings,
    dump_config,
    parse_config,
)
from retina.experiments.pipelines import PIPELINES, RunContext, build_rom, excitation_signal

__all__ = [
    'RESOLVED_CONFIG_NAME', 'ConfigError', 'ExcitationSettings', 'EstimationSettings', 'ExperimentConfig',
    'MorSettings', 'MpcSettings', 'SensitivitySettings', 'dump_config', 'parse_config',
    'PIPELINES', 'RunContext', 'build_rom', 'excitation_signal',
]
