"""
Compare the response time of the first request to a scaled-to-zero service, with and without a pre-warmed pool.
"""
from __future__ import annotations

import logging
import os
from argparse import ArgumentParser
from dataclasses import replace
from typing import NamedTuple

from tabulate import tabulate

from . import ConfigError
from .config import MEASURED_LATENCIES
from .engine import SimConfig, run_trial
from .export import write_csv
from .metrics import reduction

_logger = logging.getLogger(__name__)


class FirstRequest(NamedTuple):
    calibration: str
    cold_s: float
    pool_s: float
    reduction: float


def compare_first_request(calibration: str, *, service_time: float = 0.0) -> FirstRequest:
    """
    Simulate a single request to a single service scaled to zero, once without pool and once with a pool of one
    instance. The measured cold and warm response times of the calibration are used as cold start and migration latencies.
    """
    try:
        cold_init, migration = MEASURED_LATENCIES[calibration]
    except KeyError:
        raise ConfigError(f"invalid calibration \"{calibration}\": expected one of {', '.join(MEASURED_LATENCIES)}") from None

    config = SimConfig(n_services=1, requests_per_service=1, cold_init_s=cold_init, migration_s=migration, service_time_s=service_time, trials=1)

    responses = {}
    for pool_size in [0, 1]:
        [record] = run_trial(replace(config, pool_size=pool_size))
        responses[pool_size] = record.response_s
        _logger.debug(f"{calibration}: first request with pool_size={pool_size}: {record.response_s} s ({record.start_kind.value})")

    return FirstRequest(calibration, responses[0], responses[1], reduction(responses[0], responses[1]))


def first(calibrations: list[str] = None, *, service_time: float = 0.0, out: str = None) -> int:
    """
    Compare first-request response times without pool and with a pool of one instance.
    """
    try:
        results = [compare_first_request(calibration, service_time=service_time) for calibration in (calibrations or MEASURED_LATENCIES)]
    except ConfigError as err:
        _logger.error(str(err))
        return 2

    if out:
        try:
            out_dir = os.path.dirname(out)
            if out_dir:
                os.makedirs(out_dir, exist_ok=True)
            _logger.info(f"Write first-request comparison to {out}")
            write_csv(out, list(FirstRequest._fields), results)
        except OSError as err:
            _logger.error(f"I/O failure: {err}")
            return 1

    print(tabulate([[result.calibration, f"{result.cold_s:.3f}", f"{result.pool_s:.3f}", f"{100*result.reduction:.1f}%"] for result in results], headers=['calibration', 'no pool (s)', 'pool of 1 (s)', 'reduction'], stralign='right'))
    return 0


def _add_arguments(parser: ArgumentParser):
    parser.add_argument('calibrations', nargs='*', metavar='calibration', help=f"Measured latencies to use (default: all). Available: {', '.join(MEASURED_LATENCIES)}.")
    parser.add_argument('--service-time', type=float, default=0.0, metavar='SEC', help="Processing time of the request (default: %(default)s).")
    parser.add_argument('-o', '--out', metavar='PATH', help="Also write the comparison to this CSV file.")

first.add_arguments = _add_arguments
handle = first
