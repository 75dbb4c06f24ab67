"""
Run a scenario: every sweep point and pool condition, `trials` independent trials each.
"""
from __future__ import annotations

import logging
import os
from argparse import ArgumentParser
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, replace
from typing import Any, NamedTuple

import numpy as np
from tabulate import tabulate

from . import ConfigError
from .config import PRESETS, ScenarioPreset, load_config, parse_counts_arg
from .engine import US_PER_S, RequestRecord, SimConfig, run_trial
from .export import emit_outputs
from .metrics import CdfSeries, PercentileReport, build_report, cdf, percentile_label, pooled_report, reduction
from .settings import CALIBRATION_TARGET, CALIBRATION_TOLERANCE, DECIMALS, OUT_DIR, OUTPUT_FORMAT, PERCENTILES

_logger = logging.getLogger(__name__)


class SweepPoint(NamedTuple):
    parameter: str
    """ Swept parameter: `pool_size` or `n_services`. """
    n_services: int


@dataclass
class ConditionResult:
    point: SweepPoint
    pool_size: int
    config: SimConfig
    report: PercentileReport
    cdf: CdfSeries
    records: list[list[RequestRecord]]|None = None
    """ Records of each trial, ordered by trial index (only kept when requested). """

    @property
    def sweep_value(self) -> int:
        return self.point.n_services if self.point.parameter == 'n_services' else self.pool_size

    @property
    def key(self) -> str:
        """ Short identifier of the condition, used in file names. """
        if self.point.parameter == 'n_services':
            return f"n{self.point.n_services}_pool{self.pool_size}"
        return f"pool{self.pool_size}"

    @property
    def label(self) -> str:
        if self.point.parameter == 'n_services':
            return f"n_services={self.point.n_services}/pool_size={self.pool_size}"
        return f"pool_size={self.pool_size}"


class SummaryRow(NamedTuple):
    scenario: str
    sweep_param: str
    sweep_value: int
    pool_size: int
    percentile: str
    mean_s: float
    std_s: float
    reduction_vs_nopool: float|None


class TrialRow(NamedTuple):
    scenario: str
    sweep_param: str
    sweep_value: int
    pool_size: int
    trial: int
    p50_s: float
    p95_s: float
    p99_s: float
    p995_s: float


@dataclass
class SweepResults:
    config: SimConfig
    preset: ScenarioPreset
    conditions: list[ConditionResult]

    @property
    def scenario(self) -> str:
        return self.preset.name

    def iter_points(self):
        """
        Yield each sweep point with its conditions (ascending pool size, the no-pool baseline first).
        """
        by_point: dict[SweepPoint,list[ConditionResult]] = {}
        for condition in self.conditions:
            by_point.setdefault(condition.point, []).append(condition)
        for point, conditions in by_point.items():
            yield point, sorted(conditions, key=lambda condition: condition.pool_size)

    def summary_rows(self) -> list[SummaryRow]:
        """
        Mean and standard deviation of each percentile per condition, with the reduction versus the no-pool condition
        of the same sweep point. Reductions are computed from the rendered means so that each row can be checked
        against the file.
        """
        rows = []
        for point, conditions in self.iter_points():
            baseline = conditions[0]
            for condition in conditions:
                for field in PERCENTILES:
                    mean, std = condition.report.aggregate[field]
                    mean = round(mean, DECIMALS)
                    baseline_mean = round(baseline.report.aggregate[field].mean, DECIMALS)
                    rows.append(SummaryRow(
                        scenario = self.scenario,
                        sweep_param = point.parameter,
                        sweep_value = condition.sweep_value,
                        pool_size = condition.pool_size,
                        percentile = percentile_label(field),
                        mean_s = mean,
                        std_s = round(std, DECIMALS),
                        reduction_vs_nopool = reduction(baseline_mean, mean) if baseline_mean > 0 else None,
                    ))
        return rows

    def trial_rows(self) -> list[TrialRow]:
        rows = []
        for condition in self.conditions:
            for entry in condition.report.per_trial:
                rows.append(TrialRow(self.scenario, condition.point.parameter, condition.sweep_value, condition.pool_size, *entry))
        return rows

    def calibration(self) -> list[dict[str,Any]]:
        """
        For each sweep point simulating both a one-instance pool and no pool: the P99 reduction and whether it lies
        within the tolerance of the target reduction.
        """
        notes = []
        for point, conditions in self.iter_points():
            by_pool = {condition.pool_size: condition for condition in conditions}
            if 0 not in by_pool or 1 not in by_pool:
                continue
            baseline = round(by_pool[0].report.aggregate['p99'].mean, DECIMALS)
            if baseline <= 0:
                continue
            value = reduction(baseline, round(by_pool[1].report.aggregate['p99'].mean, DECIMALS))
            notes.append({
                'sweep_param': point.parameter,
                'sweep_value': by_pool[1].sweep_value,
                'p99_reduction': round(value, DECIMALS),
                'target': CALIBRATION_TARGET,
                'tolerance': CALIBRATION_TOLERANCE,
                'within_tolerance': abs(value - CALIBRATION_TARGET) <= CALIBRATION_TOLERANCE,
            })
        return notes


#region Execution

def _simulate(task: tuple[SimConfig,int,bool]) -> np.ndarray|list[RequestRecord]:
    config, trial_index, keep_records = task
    records = run_trial(config, trial_index)
    if keep_records:
        return records
    return np.fromiter((record.response_us for record in records), dtype=np.int64, count=len(records))


def _sweep_points(config: SimConfig, preset: ScenarioPreset) -> list[SweepPoint]:
    if preset.sweep and preset.sweep.parameter == 'n_services':
        return [SweepPoint('n_services', n_services) for n_services in preset.sweep.values]
    return [SweepPoint('pool_size', config.n_services)]


def run_sweep(config: SimConfig, preset: ScenarioPreset, *, jobs: int|None = None, dump_records: bool = False) -> SweepResults:
    """
    Simulate every (sweep point, pool condition) pair. Trials may run in parallel worker processes (`jobs`, default:
    number of CPUs); results are always collected in trial order.
    """
    if jobs is None:
        jobs = os.cpu_count() or 1
    elif jobs < 1:
        raise ConfigError(f"invalid jobs {jobs}: must be greater than or equal to 1")

    plan = []
    for point in _sweep_points(config, preset):
        for pool_size in preset.pool_sizes:
            condition_config = replace(config, n_services=point.n_services, pool_size=pool_size)
            condition_config.validate()
            plan.append((point, pool_size, condition_config))

    conditions: list[ConditionResult] = []
    workers = min(jobs, config.trials)
    with (ProcessPoolExecutor(max_workers=workers) if workers > 1 else nullcontext()) as executor:
        for i, (point, pool_size, condition_config) in enumerate(plan):
            condition = ConditionResult(point, pool_size, condition_config, report=None, cdf=None)
            _logger.info(f"Simulate {condition.label} ({condition_config.trials:,} trials of {condition_config.n_services} services): {i+1:,}/{len(plan):,} ({100*(i+1)/len(plan):.0f}%)")

            tasks = [(condition_config, trial_index, dump_records) for trial_index in range(condition_config.trials)]
            if executor:
                outcomes = executor.map(_simulate, tasks, chunksize=max(1, len(tasks) // (workers * 4)))
            else:
                outcomes = map(_simulate, tasks)

            responses_by_trial = []
            records_by_trial = [] if dump_records else None
            for outcome in outcomes:
                if dump_records:
                    records_by_trial.append(outcome)
                    outcome = np.fromiter((record.response_us for record in outcome), dtype=np.int64, count=len(outcome))
                responses_by_trial.append(outcome / US_PER_S)

            condition.report = pooled_report(responses_by_trial) if preset.pooled else build_report(responses_by_trial)
            condition.cdf = cdf(np.concatenate(responses_by_trial))
            condition.records = records_by_trial
            conditions.append(condition)

    results = SweepResults(config, preset, conditions)
    for note in results.calibration():
        _logger.info(f"Calibration: P99 reduction of a one-instance pool at {note['sweep_param']}={note['sweep_value']} is {100*note['p99_reduction']:.1f}% ({'within' if note['within_tolerance'] else 'outside'} {100*CALIBRATION_TOLERANCE:.0f} points of {100*CALIBRATION_TARGET:.0f}%)")
    return results

#endregion


def print_summary(results: SweepResults):
    rows = []
    for row in results.summary_rows():
        if row.percentile == 'p50':
            continue
        rows.append([row.sweep_value, row.pool_size, row.percentile, f"{row.mean_s:.3f}", f"{row.std_s:.3f}", '' if row.reduction_vs_nopool is None else f"{100*row.reduction_vs_nopool:.1f}%"])
    sweep_param = results.preset.sweep.parameter if results.preset.sweep else 'pool_size'
    print(tabulate(rows, headers=[sweep_param, 'pool_size', 'percentile', 'mean (s)', 'std (s)', 'reduction'], stralign='right'))


def run(*, scenario: str = None, config: str = None, pool_size: list[int] = None, services: list[int] = None, requests: int = None, trials: int = None, seed: int = None,
        cold_init: float = None, migration: float = None, cooldown: float = None, service_time: float = None, arrival: str = None, pareto_shape: float = None, pareto_scale: float = None,
        replenish: str = None, replenish_latency: float = None, pooled: bool = None, out: str = OUT_DIR, format: str = OUTPUT_FORMAT, dump_records: bool = False, jobs: int = None) -> int:
    """
    Simulate a scenario and write summary, per-trial percentiles, CDF (and optionally request records) to the output directory.
    """
    overrides = {
        'scenario': scenario,
        'pool_size': pool_size,
        'n_services': services,
        'requests_per_service': requests,
        'trials': trials,
        'base_seed': seed,
        'cold_init_s': cold_init,
        'migration_s': migration,
        'cooldown_s': cooldown,
        'service_time_s': service_time,
        'arrival': arrival,
        'pareto_shape': pareto_shape,
        'pareto_scale': pareto_scale,
        'replenish': replenish,
        'replenish_latency_s': replenish_latency,
        'pooled': pooled,
    }

    try:
        sim_config, preset = load_config(config, overrides)
        results = run_sweep(sim_config, preset, jobs=jobs, dump_records=dump_records)
        emit_outputs(results, format, out, dump_records=dump_records)
    except ConfigError as err:
        _logger.error(str(err))
        return 2
    except OSError as err:
        _logger.error(f"I/O failure: {err}")
        return 1

    print_summary(results)
    return 0


def _add_arguments(parser: ArgumentParser):
    group = parser.add_argument_group(title='Scenario')
    group.add_argument('--scenario', choices=list(PRESETS), help="Scenario preset (default: custom).")
    group.add_argument('--config', metavar='PATH', help="JSON configuration file (or manifest of a previous run).")
    group.add_argument('--pool-size', type=parse_counts_arg, metavar='N[,N...]', help="Pool size(s) simulated in addition to the no-pool baseline.")
    group.add_argument('--services', type=parse_counts_arg, metavar='N[,N...]', help="Number(s) of concurrent services (several values sweep it, ranges such as 1-10 accepted).")
    group.add_argument('--requests', type=int, metavar='N', help="Requests per service and trial.")
    group.add_argument('--trials', type=int, metavar='N', help="Number of independent trials per condition.")
    group.add_argument('--seed', type=int, metavar='U64', help="Base seed of all random streams.")

    group = parser.add_argument_group(title='Latencies (seconds)')
    group.add_argument('--cold-init', type=float, metavar='SEC', help="Cold start: instance provisioning and application initialization.")
    group.add_argument('--migration', type=float, metavar='SEC', help="Migration of a pre-warmed pool instance to a service.")
    group.add_argument('--cooldown', type=float, metavar='SEC', help="Idle period before a service scales back to zero.")
    group.add_argument('--service-time', type=float, metavar='SEC', help="Processing time of a request on a ready instance.")
    group.add_argument('--replenish', choices=['on', 'off'], help="Bring a new pool instance up each time one is taken.")
    group.add_argument('--replenish-latency', type=float, metavar='SEC', help="Time to bring a pool instance up (default: cold start latency).")

    group = parser.add_argument_group(title='Workload')
    group.add_argument('--arrival', choices=['pareto', 'fixed'], help="Inter-arrival model (fixed: constant gap equal to the Pareto scale).")
    group.add_argument('--pareto-shape', type=float, metavar='A', help="Pareto shape of inter-arrival times.")
    group.add_argument('--pareto-scale', type=float, metavar='S', help="Pareto scale (minimum inter-arrival time) in seconds.")

    group = parser.add_argument_group(title='Outputs')
    group.add_argument('-o', '--out', default=OUT_DIR, metavar='DIR', help="Output directory (default: %(default)s).")
    group.add_argument('--format', choices=['csv', 'json'], default=OUTPUT_FORMAT, help="Format of output tables (default: %(default)s).")
    group.add_argument('--dump-records', action='store_true', help="Also write every simulated request.")
    group.add_argument('--pooled', action='store_true', default=None, help="Report percentiles of all trials pooled together instead of means over trials.")
    group.add_argument('-j', '--jobs', type=int, metavar='N', help="Worker processes (default: number of CPUs).")

run.add_arguments = _add_arguments
handle = run
