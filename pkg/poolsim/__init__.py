"""
Top-level API of poolsim library.
"""
from __future__ import annotations

import logging

from zut import SimpleError

__prog__ = 'poolsim'

try:
    # Version generated by setuptools_scm during build
    from ._version import __version__, __version_tuple__
except ImportError:
    __version__ = None
    __version_tuple__ = None

_logger = logging.getLogger(__name__)


class ConfigError(SimpleError):
    """
    Invalid scenario, parameter or command-line value. Reported to the user as a one-line message (exit code 2 for `run`).
    """


class SimulationError(Exception):
    """
    Internal invariant broken during a trial (event in the past, pool out of bounds, missing request record).
    This denotes a bug and is not meant to be recovered from.
    """


from .workload import ArrivalModel, ArrivalTrace, FixedArrivals, Prng, derive_seed, gen_trace, pareto_sample
from .engine import (BaselineSimulation, Origin, PoolState, RequestRecord, ServiceState, SimConfig, Simulation,
                     StartKind, run_trial, scale_up_split)
from .metrics import CdfSeries, PercentileReport, build_report, cdf, percentile_nearest_rank, pooled_report, reduction
from .config import PRESETS, ScenarioPreset, SweepAxis, load_config
from .sweep import SweepResults, run_sweep

__all__ = (
    # For docs
    'ConfigError', 'SimulationError',
    'ArrivalModel', 'FixedArrivals', 'ArrivalTrace', 'Prng', 'derive_seed', 'gen_trace', 'pareto_sample',
    'SimConfig', 'Simulation', 'BaselineSimulation', 'ServiceState', 'PoolState', 'RequestRecord', 'StartKind', 'Origin',
    'run_trial', 'scale_up_split',
    'percentile_nearest_rank', 'cdf', 'reduction', 'build_report', 'pooled_report', 'PercentileReport', 'CdfSeries',
    'PRESETS', 'ScenarioPreset', 'SweepAxis', 'load_config',
    'run_sweep', 'SweepResults',
)
