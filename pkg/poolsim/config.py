"""
Scenario presets and configuration loading.

Layers, from lowest to highest precedence: built-in defaults, scenario preset, configuration file, command-line flags.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Literal, NamedTuple

from tabulate import tabulate

from . import ConfigError, __prog__
from .engine import SimConfig
from .workload import ArrivalModel

_logger = logging.getLogger(__name__)


class SweepAxis(NamedTuple):
    parameter: Literal['pool_size', 'n_services']
    values: tuple[int,...]


@dataclass(frozen=True)
class ScenarioPreset:
    name: Literal['short', 'long', 'contention', 'custom']
    overrides: dict[str,Any] = field(default_factory=dict)
    """ Flat configuration keys pinned by the preset (lists sweep the corresponding parameter). """
    sweep: SweepAxis|None = None
    """ Resolved sweep (set by `load_config`). """
    pool_sizes: tuple[int,...] = (0,)
    """ Pool conditions simulated at each sweep point, ascending, always including the no-pool baseline (set by `load_config`). """
    pooled: bool = False
    """ Aggregate percentiles over the pooled records of all trials instead of averaging per-trial percentiles. """
    description: str = ''


_APPLICATION = {
    'n_services': 5,
    'requests_per_service': 1000,
    'trials': 100,
    'pareto_shape': 1.1,
    'migration_s': 2.0,
}

PRESETS: dict[str,ScenarioPreset] = {
    'short': ScenarioPreset('short', {**_APPLICATION, 'cold_init_s': 7.0, 'cooldown_s': 30.0, 'pool_size': [0, 1]},
                            description="Short application (7 s init, 30 s cooldown), 5 services, pool of 0 and 1."),
    'long': ScenarioPreset('long', {**_APPLICATION, 'cold_init_s': 32.0, 'cooldown_s': 60.0, 'pool_size': [0, 1]},
                            description="Long application (32 s init, 60 s cooldown), 5 services, pool of 0 and 1."),
    'contention': ScenarioPreset('contention', {**_APPLICATION, 'cold_init_s': 7.0, 'cooldown_s': 30.0, 'pool_size': 1, 'n_services': list(range(1, 11))},
                            description="Pool of 1 shared by 1 to 10 short-application services."),
    'custom': ScenarioPreset('custom', {},
                            description="Built-in defaults, adjusted with a configuration file or flags."),
}

# Measured (cold, warm) first-request response times in seconds, used as (cold_init_s, migration_s)
MEASURED_LATENCIES: dict[str,tuple[float,float]] = {
    'http': (12.123, 5.076),
    'classifier': (39.25, 7.458),
    'short': (7.0, 2.0),
    'long': (32.0, 2.0),
}

_SIMCONFIG_KEYS = [f.name for f in fields(SimConfig) if f.name != 'arrival']
VALID_KEYS = ['scenario', *_SIMCONFIG_KEYS, 'arrival', 'pareto_shape', 'pareto_scale', 'pooled']

_INT_KEYS = {'requests_per_service', 'max_instances_per_service', 'trials', 'base_seed'}
_LIST_KEYS = {'pool_size', 'n_services'}
_FLOAT_KEYS = {'cold_init_s', 'migration_s', 'service_time_s', 'cooldown_s', 'pareto_shape', 'pareto_scale'}


def read_config_file(path: str|os.PathLike) -> dict[str,Any]:
    """
    Read a flat JSON configuration file. A run manifest is also accepted: its `config` member is used.
    """
    with open(path, 'r', encoding='utf-8') as fp:
        try:
            data = json.load(fp)
        except json.JSONDecodeError as err:
            raise ConfigError(f"invalid configuration file {path}: {err}") from None

    if not isinstance(data, dict):
        raise ConfigError(f"invalid configuration file {path}: expected a JSON object, got {type(data).__name__}")

    if data.get('tool') == __prog__ and isinstance(data.get('config'), dict):
        _logger.debug(f"read configuration from manifest {path}")
        data = data['config']

    return data


def load_config(path: str|os.PathLike|None = None, cli_overrides: dict[str,Any]|None = None) -> tuple[SimConfig,ScenarioPreset]:
    """
    Resolve the configuration of a run.

    Returns the base configuration (first sweep point, largest pool condition) and the preset, with its sweep axis
    and pool conditions resolved. Every sweep point is validated.
    """
    file_values = read_config_file(path) if path else {}
    cli_values = {key: value for key, value in (cli_overrides or {}).items() if value is not None}

    for origin, values in [(f"configuration file {path}", file_values), ("command line", cli_values)]:
        unknown = [key for key in values if key not in VALID_KEYS]
        if unknown:
            raise ConfigError(f"unknown configuration key{'s' if len(unknown) > 1 else ''} in {origin}: {', '.join(unknown)} (valid keys: {', '.join(VALID_KEYS)})")

    name = cli_values.get('scenario') or file_values.get('scenario') or 'custom'
    preset = PRESETS.get(name)
    if not preset:
        raise ConfigError(f"invalid scenario \"{name}\": expected one of {', '.join(PRESETS)}")

    values = {key: value for key, value in SimConfig().to_dict().items() if key in VALID_KEYS}
    values['pooled'] = False
    values.update(preset.overrides)
    values.update(file_values)
    values.update(cli_values)
    values['scenario'] = name

    pool_sizes = _parse_counts('pool_size', values['pool_size'], minimum=0)
    services = _parse_counts('n_services', values['n_services'], minimum=1)

    kwargs = {}
    for key in _SIMCONFIG_KEYS:
        if key in _LIST_KEYS:
            continue
        value = values[key]
        if key in _INT_KEYS:
            kwargs[key] = _parse_int(key, value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = _parse_float(key, value)
        elif key == 'replenish':
            kwargs[key] = _parse_bool(key, value)
        elif key == 'replenish_latency_s':
            kwargs[key] = None if value is None else _parse_float(key, value)
        else:
            kwargs[key] = value

    arrival = ArrivalModel.factory(str(values['arrival']), shape=_parse_float('pareto_shape', values['pareto_shape']), scale=_parse_float('pareto_scale', values['pareto_scale']))
    config = SimConfig(n_services=services[0], pool_size=pool_sizes[-1], arrival=arrival, **kwargs)

    conditions = tuple(sorted({0, *pool_sizes}))
    if len(services) > 1:
        sweep = SweepAxis('n_services', tuple(services))
    else:
        sweep = SweepAxis('pool_size', conditions)

    for n_services in services:
        for pool_size in conditions:
            replace(config, n_services=n_services, pool_size=pool_size).validate()

    preset = replace(preset, sweep=sweep, pool_sizes=conditions, pooled=_parse_bool('pooled', values['pooled']))
    return config, preset


def to_flat_config(config: SimConfig, preset: ScenarioPreset) -> dict[str,Any]:
    """
    Flat configuration of a resolved run, with the keys of configuration files: reading it back with `load_config`
    resolves the same run.
    """
    data = {'scenario': preset.name, **config.to_dict()}
    if preset.sweep and preset.sweep.parameter == 'n_services':
        data['n_services'] = list(preset.sweep.values)
    data['pool_size'] = list(preset.pool_sizes)
    data['pooled'] = preset.pooled
    return data


#region Parsing

def parse_counts_arg(value: str) -> list[int]:
    """
    Parse a command-line value such as `0,1` or `1-10` (argparse type).
    """
    counts = []
    for part in value.split(','):
        part = part.strip()
        start, sep, end = (part, '', '') if part.startswith('-') else part.partition('-')
        try:
            if sep:
                counts.extend(range(int(start), int(end) + 1))
            else:
                counts.append(int(part))
        except ValueError:
            raise ConfigError(f"invalid count list \"{value}\": expected comma-separated integers or ranges such as 1-10") from None
    return counts


def _parse_counts(key: str, value, *, minimum: int) -> list[int]:
    if not isinstance(value, (list,tuple)):
        value = [value]
    if not value:
        raise ConfigError(f"invalid {key}: list must not be empty")
    counts = [_parse_int(key, item) for item in value]
    for count in counts:
        if count < minimum:
            raise ConfigError(f"invalid {key} {count}: must be an integer greater than or equal to {minimum}")
    return sorted(set(counts))


def _parse_int(key: str, value) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"invalid {key} {value!r}: must be an integer")
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            pass
    raise ConfigError(f"invalid {key} {value!r}: must be an integer")


def _parse_float(key: str, value) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"invalid {key} {value!r}: must be a number")
    if isinstance(value, (int,float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"invalid {key} {value!r}: must be a number")


def _parse_bool(key: str, value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in {'on', 'true', 'yes', '1'}:
        return True
    if isinstance(value, str) and value.lower() in {'off', 'false', 'no', '0'}:
        return False
    raise ConfigError(f"invalid {key} {value!r}: must be a boolean (or on/off)")

#endregion


def presets():
    """
    List available scenario presets and the values they pin.
    """
    rows = []
    for preset in PRESETS.values():
        pinned = ', '.join(f"{key}={value}" for key, value in preset.overrides.items())
        rows.append([preset.name, preset.description, pinned or '-'])
    print(tabulate(rows, headers=['scenario', 'description', 'pinned values']))

handle = presets
