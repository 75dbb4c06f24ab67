"""
Discrete-event simulation of scale-to-zero services sharing a pool of pre-warmed instances.

Simulated time is kept in integer microseconds. Events are ordered by time, ties broken by scheduling order: all
arrivals of a trial are scheduled first (service by service), so at equal times arrivals are handled before any
readiness, idle or pool event.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from enum import Enum
from heapq import heappop, heappush
from typing import Any, Callable, NamedTuple

from . import ConfigError, SimulationError
from .workload import ArrivalModel, ArrivalTrace, gen_traces

_logger = logging.getLogger(__name__)

US_PER_S = 1_000_000


def to_us(seconds: float) -> int:
    return round(seconds * US_PER_S)


#region Configuration

@dataclass(frozen=True)
class SimConfig:
    """
    Parameters of one simulated condition. Durations are in seconds.
    """
    n_services: int = 5
    requests_per_service: int = 1000
    arrival: ArrivalModel = field(default_factory=ArrivalModel)
    cold_init_s: float = 7.0
    migration_s: float = 2.0
    service_time_s: float = 0.0
    cooldown_s: float = 30.0
    pool_size: int = 1
    replenish: bool = True
    replenish_latency_s: float|None = None
    """ Time for the platform to bring a new pool instance up after one was taken (defaults to `cold_init_s`). """
    max_instances_per_service: int = 1
    trials: int = 100
    base_seed: int = 42

    @property
    def replenish_delay_s(self) -> float:
        return self.cold_init_s if self.replenish_latency_s is None else self.replenish_latency_s

    def validate(self):
        for name in ['n_services', 'requests_per_service', 'trials', 'max_instances_per_service']:
            value = getattr(self, name)
            if not _is_int(value) or value < 1:
                raise ConfigError(f"invalid {name} {value!r}: must be an integer greater than or equal to 1")

        if not _is_int(self.pool_size) or self.pool_size < 0:
            raise ConfigError(f"invalid pool_size {self.pool_size!r}: must be an integer greater than or equal to 0")

        if not _is_int(self.base_seed) or not (0 <= self.base_seed < 2**64):
            raise ConfigError(f"invalid base_seed {self.base_seed!r}: must be an unsigned 64-bit integer")

        for name in ['cold_init_s', 'migration_s', 'service_time_s', 'cooldown_s', 'replenish_latency_s']:
            value = getattr(self, name)
            if value is None and name == 'replenish_latency_s':
                continue
            if isinstance(value, bool) or not isinstance(value, (int,float)) or not (0 <= value < math.inf):
                raise ConfigError(f"invalid {name} {value!r}: must be a finite number of seconds greater than or equal to 0")

        if not isinstance(self.replenish, bool):
            raise ConfigError(f"invalid replenish {self.replenish!r}: must be a boolean")

        if self.max_instances_per_service != 1:
            raise ConfigError(f"invalid max_instances_per_service {self.max_instances_per_service}: scaling a service above one instance is not supported")

        if not isinstance(self.arrival, ArrivalModel):
            raise ConfigError(f"invalid arrival model {self.arrival!r}")
        self.arrival.validate()

    def to_dict(self) -> dict[str,Any]:
        """
        Flat representation, with the keys accepted in configuration files.
        """
        data = asdict(self)
        data.pop('arrival')
        return {
            'n_services': data.pop('n_services'),
            'requests_per_service': data.pop('requests_per_service'),
            'arrival': self.arrival.kind,
            'pareto_shape': self.arrival.shape,
            'pareto_scale': self.arrival.scale,
            **data,
        }


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)

#endregion


#region Types

class StartKind(Enum):
    WARM = 'warm'
    POOL_HIT = 'pool_hit'
    COLD_START = 'cold_start'
    PENDING_ON_STARTING = 'pending_on_starting'


class Origin(Enum):
    COLD = 'cold'
    POOL = 'pool'


class EventKind(Enum):
    ARRIVAL = 'arrival'
    INSTANCE_READY = 'instance_ready'
    IDLE_CHECK = 'idle_check'
    POOL_POD_READY = 'pool_pod_ready'


class Event(NamedTuple):
    time: int
    """ Microseconds. """
    seq: int
    """ Scheduling order, unique within a trial. """
    kind: EventKind
    service: int|None = None
    value: Any = None
    """ Request index (arrival), origin (instance ready) or idle epoch (idle check). """


class Starting(NamedTuple):
    ready_at: int
    origin: Origin


class Ready:
    """ Instance of a service able to serve requests immediately. """
    __slots__ = ()

    def __repr__(self):
        return 'Ready()'

READY = Ready()


class ServiceState:
    __slots__ = ('service_id', 'instance', 'pending', 'last_activity', 'idle_epoch', 'scale_ups', 'scale_downs')

    def __init__(self, service_id: int):
        self.service_id = service_id
        self.instance: Starting|Ready|None = None
        self.pending: deque[tuple[int,int,StartKind]] = deque()
        """ Requests waiting for the starting instance: (req_index, arrival time, start kind). """
        self.last_activity = 0
        self.idle_epoch = 0
        self.scale_ups = 0
        self.scale_downs = 0

    def __repr__(self):
        return f"ServiceState({self.service_id}, instance={self.instance!r}, pending={len(self.pending)})"


class PoolState:
    """
    Shared pool of pre-warmed instances: `available + warming <= capacity` at all times.
    """
    __slots__ = ('available', 'warming', 'capacity')

    def __init__(self, capacity: int, *, available: int|None = None, warming: int = 0):
        self.capacity = capacity
        self.available = capacity if available is None else available
        self.warming = warming

    def check(self):
        if self.available < 0 or self.warming < 0 or self.available + self.warming > self.capacity:
            raise SimulationError(f"pool out of bounds: available={self.available}, warming={self.warming}, capacity={self.capacity}")

    def __repr__(self):
        return f"PoolState(available={self.available}, warming={self.warming}, capacity={self.capacity})"


class RequestRecord(NamedTuple):
    service_id: int
    req_index: int
    arrival_us: int
    response_us: int
    start_kind: StartKind

    @property
    def arrival_t(self) -> float:
        return self.arrival_us / US_PER_S

    @property
    def response_s(self) -> float:
        return self.response_us / US_PER_S

#endregion


def scale_up_split(desired_new: int, available: int) -> tuple[int,int]:
    """
    Split a scale-up of `desired_new` instances between the pool and cold starts: returns (from_pool, cold).
    """
    from_pool = min(desired_new, max(available, 0))
    return from_pool, desired_new - from_pool


class Simulation:
    """
    One trial of one condition. Call `run()` once to obtain the request records.
    """
    def __init__(self, config: SimConfig, trial_index: int = 0, *, traces: list[ArrivalTrace]|None = None):
        config.validate()
        self.config = config
        self.trial_index = trial_index

        if traces is None:
            traces = gen_traces(config.n_services, config.requests_per_service, config.arrival, config.base_seed, trial_index)
        elif len(traces) != config.n_services:
            raise ConfigError(f"expected {config.n_services} traces, got {len(traces)}")
        self.traces = traces

        self.now = 0
        self._queue: list[Event] = []
        self._seq = 0

        self.services = [ServiceState(service_id) for service_id in range(config.n_services)]
        self.pool = self._init_pool()
        self.records: list[RequestRecord] = []

        self._cold_init = to_us(config.cold_init_s)
        self._migration = to_us(config.migration_s)
        self._service_time = to_us(config.service_time_s)
        self._cooldown = to_us(config.cooldown_s)
        self._replenish_delay = to_us(config.replenish_delay_s)

        self._handlers: dict[EventKind,Callable[[Event],None]] = {
            EventKind.ARRIVAL: self.on_arrival,
            EventKind.INSTANCE_READY: self.on_instance_ready,
            EventKind.IDLE_CHECK: self.on_idle_check,
            EventKind.POOL_POD_READY: self.on_pool_pod_ready,
        }

    def _init_pool(self):
        return PoolState(self.config.pool_size)

    def schedule(self, time: int, kind: EventKind, service: int|None = None, value: Any = None):
        if time < self.now:
            raise SimulationError(f"cannot schedule {kind.value} event at {time} µs: current time is {self.now} µs")
        heappush(self._queue, Event(time, self._seq, kind, service, value))
        self._seq += 1

    def run(self) -> list[RequestRecord]:
        if self._seq:
            raise SimulationError(f"simulation of trial {self.trial_index} already ran")

        expected = 0
        for trace in self.traces:
            previous = 0
            for req_index, t in enumerate(trace.arrivals):
                time = to_us(t)
                if time < previous:
                    raise ConfigError(f"arrivals of service {trace.service_id} are not sorted (request {req_index})")
                previous = time
                self.schedule(time, EventKind.ARRIVAL, trace.service_id, req_index)
                expected += 1

        while self._queue:
            event = heappop(self._queue)
            self.now = event.time
            self._handlers[event.kind](event)

        if len(self.records) != expected:
            raise SimulationError(f"trial {self.trial_index} produced {len(self.records)} request records, expected {expected}")
        for state in self.services:
            if state.pending:
                raise SimulationError(f"service {state.service_id} still has {len(state.pending)} pending requests")

        self.records.sort(key=lambda record: (record.service_id, record.req_index))

        if _logger.isEnabledFor(logging.DEBUG):
            counts = {kind: 0 for kind in StartKind}
            for record in self.records:
                counts[record.start_kind] += 1
            _logger.debug(f"trial {self.trial_index}: {len(self.records):,} requests, {self._seq:,} events, " + ', '.join(f"{kind.value}={count:,}" for kind, count in counts.items()))

        return self.records

    #region Handlers

    def on_arrival(self, event: Event):
        state = self.services[event.service]
        req_index = event.value

        if state.instance is READY:
            self._record(state, req_index, event.time, StartKind.WARM)
            self._mark_active(state)
        elif state.instance is None:
            origin = self.acquire_instance(state)
            state.pending.append((req_index, event.time, StartKind.POOL_HIT if origin == Origin.POOL else StartKind.COLD_START))
        else:
            state.pending.append((req_index, event.time, StartKind.PENDING_ON_STARTING))

    def acquire_instance(self, state: ServiceState) -> Origin:
        """
        Start an instance for a service scaled to zero: take a pre-warmed one from the pool if any (and ask the
        platform for a replacement), otherwise cold-start.
        """
        if state.instance is not None:
            raise SimulationError(f"service {state.service_id} already has an instance: {state.instance}")

        from_pool, _ = scale_up_split(1, self.pool.available)
        if from_pool:
            origin = Origin.POOL
            ready_at = self.now + self._migration
            self.pool.available -= 1
            if self.config.replenish:
                self.pool.warming += 1
                self.schedule(self.now + self._replenish_delay, EventKind.POOL_POD_READY)
            self.pool.check()
        else:
            origin = Origin.COLD
            ready_at = self.now + self._cold_init

        state.instance = Starting(ready_at, origin)
        state.scale_ups += 1
        self.schedule(ready_at, EventKind.INSTANCE_READY, state.service_id, origin)
        return origin

    def on_instance_ready(self, event: Event):
        state = self.services[event.service]
        if not isinstance(state.instance, Starting) or state.instance.ready_at != event.time:
            _logger.debug(f"ignore stale readiness of service {state.service_id} at {event.time} µs")
            return

        state.instance = READY
        while state.pending:
            req_index, arrival, kind = state.pending.popleft()
            self._record(state, req_index, arrival, kind)
        self._mark_active(state)

    def on_idle_check(self, event: Event):
        state = self.services[event.service]
        if event.value != state.idle_epoch:
            return

        if state.instance is READY and not state.pending and self.now - state.last_activity >= self._cooldown:
            state.instance = None
            state.scale_downs += 1

    def on_pool_pod_ready(self, event: Event):
        if self.pool.warming < 1:
            raise SimulationError(f"pool instance ready at {event.time} µs while none was warming")
        self.pool.warming -= 1
        self.pool.available += 1
        self.pool.check()

    #endregion

    def _record(self, state: ServiceState, req_index: int, arrival: int, kind: StartKind):
        response = self.now - arrival + self._service_time
        if response < 0:
            raise SimulationError(f"negative response time for request {req_index} of service {state.service_id}")
        self.records.append(RequestRecord(state.service_id, req_index, arrival, response, kind))

    def _mark_active(self, state: ServiceState):
        state.last_activity = self.now
        state.idle_epoch += 1
        self.schedule(self.now + self._cooldown, EventKind.IDLE_CHECK, state.service_id, state.idle_epoch)


class BaselineSimulation(Simulation):
    """
    Scale-to-zero without any pool: every scale-up is a cold start, whatever the configured pool size.
    """
    def _init_pool(self):
        return PoolState(0)

    def acquire_instance(self, state: ServiceState) -> Origin:
        if state.instance is not None:
            raise SimulationError(f"service {state.service_id} already has an instance: {state.instance}")
        ready_at = self.now + self._cold_init
        state.instance = Starting(ready_at, Origin.COLD)
        state.scale_ups += 1
        self.schedule(ready_at, EventKind.INSTANCE_READY, state.service_id, Origin.COLD)
        return Origin.COLD


def run_trial(config: SimConfig, trial_index: int = 0, *, traces: list[ArrivalTrace]|None = None, baseline: bool = False) -> list[RequestRecord]:
    """
    Simulate one trial and return its request records, sorted by (service_id, req_index).
    """
    cls = BaselineSimulation if baseline else Simulation
    return cls(config, trial_index, traces=traces).run()
