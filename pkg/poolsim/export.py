"""
Write simulation results: summary, per-trial percentiles, CDF, request records and run manifest.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Any, Iterable, Literal, Sequence

from zut import ExtendedJSONEncoder

from . import ConfigError, __prog__, __version__
from .config import to_flat_config
from .engine import US_PER_S
from .settings import DECIMALS

if TYPE_CHECKING:
    from .sweep import ConditionResult, SweepResults

_logger = logging.getLogger(__name__)

SUMMARY_HEADERS = ['scenario', 'sweep_param', 'sweep_value', 'pool_size', 'percentile', 'mean_s', 'std_s', 'reduction_vs_nopool']
TRIALS_HEADERS = ['scenario', 'sweep_param', 'sweep_value', 'pool_size', 'trial', 'p50_s', 'p95_s', 'p99_s', 'p995_s']
CDF_HEADERS = ['condition', 'value_s', 'fraction']
RECORDS_HEADERS = ['trial', 'service_id', 'req_index', 'arrival_s', 'response_s', 'start_kind']


@dataclass
class RunManifest:
    """
    Everything needed to reproduce a run. Contains no timestamp nor machine-specific value: identical inputs give an
    identical manifest, which can be passed back as `--config`.
    """
    tool: str
    version: str|None
    scenario: str
    base_seed: int
    config: dict[str,Any]
    sweep: dict[str,Any]
    points: list[dict[str,Any]]
    outputs: dict[str,str]
    calibration: list[dict[str,Any]]

    @classmethod
    def from_results(cls, results: SweepResults, outputs: dict[str,str]):
        return cls(
            tool = __prog__,
            version = __version__,
            scenario = results.scenario,
            base_seed = results.config.base_seed,
            config = to_flat_config(results.config, results.preset),
            sweep = {'parameter': results.preset.sweep.parameter, 'values': list(results.preset.sweep.values), 'pool_sizes': list(results.preset.pool_sizes)},
            points = [{'sweep_param': condition.point.parameter, 'sweep_value': condition.sweep_value, 'pool_size': condition.pool_size, 'config': condition.config.to_dict()} for condition in results.conditions],
            outputs = outputs,
            calibration = results.calibration(),
        )

    def write(self, path: str|os.PathLike):
        with open(path, 'w', encoding='utf-8', newline='\n') as fp:
            json.dump(asdict(self), fp, indent=4, ensure_ascii=False, cls=ExtendedJSONEncoder)
            fp.write('\n')


def emit_outputs(results: SweepResults, format: Literal['csv','json'], out_dir: str|os.PathLike, *, dump_records: bool = False) -> dict[str,str]:
    """
    Write all output tables of a run, then its manifest, in `out_dir`. Return the written file names by table.
    """
    if format not in {'csv', 'json'}:
        raise ConfigError(f"invalid format \"{format}\": expected csv or json")
    if not results.conditions:
        raise ConfigError("no results to write")

    os.makedirs(out_dir, exist_ok=True)

    outputs: dict[str,str] = {}

    def emit(name: str, headers: list[str], rows: Iterable[Sequence]):
        filename = f"{name}.{format}"
        path = os.path.join(out_dir, filename)
        _logger.info(f"Write {name} to {path}")
        if format == 'csv':
            write_csv(path, headers, rows)
        else:
            write_json(path, headers, rows)
        outputs[name] = filename

    emit('summary', SUMMARY_HEADERS, results.summary_rows())
    emit('trials', TRIALS_HEADERS, results.trial_rows())
    emit('cdf', CDF_HEADERS, _iter_cdf_rows(results))
    if dump_records:
        for condition in results.conditions:
            emit(f"records_{condition.key}", RECORDS_HEADERS, _iter_record_rows(condition))

    manifest = RunManifest.from_results(results, outputs)
    path = os.path.join(out_dir, 'manifest.json')
    _logger.info(f"Write manifest to {path}")
    manifest.write(path)
    outputs['manifest'] = 'manifest.json'
    return outputs


#region Rows

def _iter_cdf_rows(results: SweepResults):
    for condition in results.conditions:
        for value, fraction in zip(condition.cdf.values, condition.cdf.fractions):
            yield condition.label, float(value), float(fraction)


def _iter_record_rows(condition: ConditionResult):
    if condition.records is None:
        raise ConfigError(f"records of {condition.label} were not kept")
    for trial_index, records in enumerate(condition.records):
        for record in records:
            yield trial_index, record.service_id, record.req_index, Seconds(record.arrival_us), Seconds(record.response_us), record.start_kind.value

#endregion


#region Writers

class Seconds(int):
    """
    Integer number of microseconds, rendered as exact decimal seconds.
    """
    def __str__(self):
        sign = '-' if self < 0 else ''
        whole, fraction = divmod(abs(int(self)), US_PER_S)
        return f"{sign}{whole}.{fraction:06d}"


def _csv_value(value) -> str:
    if value is None:
        return ''
    if isinstance(value, Seconds):
        return str(value)
    if isinstance(value, float):
        return f"{value:.{DECIMALS}f}"
    return str(value)


def _json_value(value):
    if isinstance(value, Seconds):
        return round(int(value) / US_PER_S, DECIMALS)
    if isinstance(value, float):
        return round(value, DECIMALS)
    return value


def write_csv(path: str|os.PathLike, headers: list[str], rows: Iterable[Sequence]):
    """
    UTF-8 (no BOM), comma-separated, `\\n` line endings, including after the last row.
    """
    with open(path, 'w', encoding='utf-8', newline='') as fp:
        writer = csv.writer(fp, lineterminator='\n')
        writer.writerow(headers)
        writer.writerows([_csv_value(value) for value in row] for row in rows)


def write_json(path: str|os.PathLike, headers: list[str], rows: Iterable[Sequence]):
    """
    JSON array with one object per row, keyed by the column headers.
    """
    data = [{header: _json_value(value) for header, value in zip(headers, row)} for row in rows]
    with open(path, 'w', encoding='utf-8', newline='\n') as fp:
        json.dump(data, fp, indent=4, ensure_ascii=False, cls=ExtendedJSONEncoder)
        fp.write('\n')

#endregion
