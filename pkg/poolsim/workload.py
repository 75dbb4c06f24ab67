"""
Generate per-service request arrival traces with heavy-tailed inter-arrival times.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol

from . import ConfigError

_logger = logging.getLogger(__name__)

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


#region Random numbers

def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class Prng:
    """
    SplitMix64 generator. Its output sequence depends only on the seed, on every platform.
    """
    def __init__(self, seed: int):
        if not isinstance(seed, int) or not (0 <= seed <= MASK64):
            raise ConfigError(f"invalid seed {seed!r}: must be an unsigned 64-bit integer")
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _mix64(self.state)

    def next_uniform(self) -> float:
        """
        Return a float uniformly distributed in [0, 1), with 53 random bits.
        """
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


class UniformSource(Protocol):
    def next_uniform(self) -> float:
        ...


def derive_seed(base_seed: int, trial_index: int, service_id: int) -> int:
    """
    Derive the seed of one (trial, service) stream from the run seed.

    Each step is a bijection of the previous value, so two different trials (or two services of the same trial)
    never share a stream.
    """
    h = _mix64((base_seed + GOLDEN_GAMMA) & MASK64)
    h = _mix64(((h ^ trial_index) + GOLDEN_GAMMA) & MASK64)
    return _mix64(((h ^ service_id) + GOLDEN_GAMMA) & MASK64)

#endregion


#region Arrival models

@dataclass(frozen=True)
class ArrivalModel:
    """
    Pareto (type I) inter-arrival distribution: `P(X > x) = (scale/x)^shape` for `x >= scale`.

    With the default shape (1.1) the mean gap is 11 times the scale and the variance is infinite.
    """
    shape: float = 1.1
    scale: float = 1.0

    kind = 'pareto'

    @classmethod
    def factory(cls, kind: str, *, shape: float = 1.1, scale: float = 1.0) -> ArrivalModel:
        if kind == 'pareto':
            return ArrivalModel(shape, scale)
        elif kind == 'fixed':
            return FixedArrivals(shape, scale)
        else:
            raise ConfigError(f"invalid arrival model \"{kind}\": expected pareto or fixed")

    def validate(self):
        if isinstance(self.shape, bool) or not isinstance(self.shape, (int,float)) or not (0 < self.shape < math.inf):
            raise ConfigError(f"invalid pareto_shape {self.shape!r}: must be a finite number greater than 0")
        if isinstance(self.scale, bool) or not isinstance(self.scale, (int,float)) or not (0 < self.scale < math.inf):
            raise ConfigError(f"invalid pareto_scale {self.scale!r}: must be a finite number greater than 0")

    def sample(self, u: float) -> float:
        return self.scale * (1.0 - u) ** (-1.0 / self.shape)


@dataclass(frozen=True)
class FixedArrivals(ArrivalModel):
    """
    Constant inter-arrival gap equal to `scale` (debugging aid). A uniform draw is still consumed per gap so that
    streams stay aligned with the Pareto model.
    """
    kind = 'fixed'

    def sample(self, u: float) -> float:
        return self.scale


def pareto_sample(u: float, model: ArrivalModel) -> float:
    """
    Map a uniform draw `u` in [0, 1) to an inter-arrival gap (inverse CDF of the model).
    """
    model.validate()
    if not (0.0 <= u < 1.0):
        raise ConfigError(f"invalid uniform draw {u!r}: must be in [0, 1)")
    return model.sample(u)

#endregion


#region Traces

@dataclass
class ArrivalTrace:
    service_id: int
    arrivals: list[float] = field(default_factory=list)
    """ Absolute arrival times in seconds, non-decreasing. """

    def __len__(self):
        return len(self.arrivals)


def gen_trace(service_id: int, n: int, model: ArrivalModel, rng: UniformSource) -> ArrivalTrace:
    """
    Generate `n` arrivals for one service: the first arrival happens after one gap from t = 0, each following one after
    another gap. Consumes exactly `n` draws of `rng`.
    """
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"invalid requests_per_service {n!r}: must be an integer greater than or equal to 1")
    model.validate()

    arrivals = []
    t = 0.0
    for _ in range(n):
        t += model.sample(rng.next_uniform())
        arrivals.append(t)

    if not math.isfinite(t):
        raise ConfigError(f"arrival times of service {service_id} overflowed (last: {t}): reduce requests_per_service or increase pareto_shape")

    return ArrivalTrace(service_id, arrivals)


def gen_traces(n_services: int, n: int, model: ArrivalModel, base_seed: int, trial_index: int) -> list[ArrivalTrace]:
    """
    Generate the traces of all services for one trial, each service using its own derived stream.
    """
    return [gen_trace(service_id, n, model, Prng(derive_seed(base_seed, trial_index, service_id))) for service_id in range(n_services)]

#endregion
