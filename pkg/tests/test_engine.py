from dataclasses import replace
from unittest import TestCase

import numpy as np

from poolsim import (ArrivalModel, BaselineSimulation, ConfigError, Origin, SimConfig, Simulation, SimulationError,
                     StartKind, run_trial, scale_up_split)
from poolsim.engine import READY, Event, EventKind, PoolState, Starting
from poolsim.workload import ArrivalTrace

S = 1_000_000


def hand_config(**kwargs):
    options = dict(n_services=1, requests_per_service=2, cold_init_s=7.0, migration_s=2.0, service_time_s=0.0, cooldown_s=30.0, pool_size=0, replenish=False, trials=1)
    options.update(kwargs)
    return SimConfig(**options)


def traces(*arrivals: list[float]):
    return [ArrivalTrace(service_id, list(times)) for service_id, times in enumerate(arrivals)]


def responses(records):
    return [record.response_us / S for record in records]


def kinds(records):
    return [record.start_kind for record in records]


class HandTraceCase(TestCase):
    def test_cold_then_warm(self):
        records = run_trial(hand_config(), traces=traces([10, 20]))
        self.assertEqual(responses(records), [7, 0])
        self.assertEqual(kinds(records), [StartKind.COLD_START, StartKind.WARM])

    def test_cooldown_expiry(self):
        records = run_trial(hand_config(), traces=traces([10, 50]))
        self.assertEqual(responses(records), [7, 7])
        self.assertEqual(kinds(records), [StartKind.COLD_START, StartKind.COLD_START])

    def test_pool_hit(self):
        records = run_trial(hand_config(pool_size=1), traces=traces([10, 50]))
        self.assertEqual(responses(records), [2, 7])
        self.assertEqual(kinds(records), [StartKind.POOL_HIT, StartKind.COLD_START])

    def test_pool_hit_replenished(self):
        # replacement pool instance is ready at 17, before the second scale-up at 50
        records = run_trial(hand_config(pool_size=1, replenish=True), traces=traces([10, 50]))
        self.assertEqual(responses(records), [2, 2])
        self.assertEqual(kinds(records), [StartKind.POOL_HIT, StartKind.POOL_HIT])

    def test_pool_drain(self):
        # two services scale up one second apart: the first takes the only pool instance
        records = run_trial(hand_config(n_services=2, requests_per_service=1, pool_size=1), traces=traces([10], [11]))
        self.assertEqual(responses(records), [2, 7])
        self.assertEqual(kinds(records), [StartKind.POOL_HIT, StartKind.COLD_START])

    def test_pool_contention_same_time(self):
        # same arrival time: the service scheduled first gets the pool instance
        records = run_trial(hand_config(n_services=2, requests_per_service=1, pool_size=1), traces=traces([10], [10]))
        self.assertEqual(kinds(records), [StartKind.POOL_HIT, StartKind.COLD_START])

    def test_queue_drain(self):
        records = run_trial(hand_config(requests_per_service=3), traces=traces([10, 12, 14]))
        self.assertEqual(responses(records), [7, 5, 3])
        self.assertEqual(kinds(records), [StartKind.COLD_START, StartKind.PENDING_ON_STARTING, StartKind.PENDING_ON_STARTING])

    def test_service_time(self):
        records = run_trial(hand_config(requests_per_service=3, service_time_s=0.1), traces=traces([10, 16, 20]))
        self.assertEqual([record.response_us for record in records], [7_100_000, 1_100_000, 100_000])
        self.assertEqual(kinds(records), [StartKind.COLD_START, StartKind.PENDING_ON_STARTING, StartKind.WARM])

    def test_record_seconds(self):
        [record, _] = run_trial(hand_config(), traces=traces([10.25, 20]))
        self.assertEqual(record.arrival_t, 10.25)
        self.assertEqual(record.response_s, 7.0)


class HandlerCase(TestCase):
    def setUp(self):
        self.sim = Simulation(hand_config(n_services=2, pool_size=1, replenish=True), traces=traces([10, 20], [30, 40]))

    def test_arrival_ready(self):
        sim = Simulation(hand_config(service_time_s=0.1), traces=traces([10, 20]))
        sim.services[0].instance = READY
        sim.now = 5 * S
        sim.on_arrival(Event(5 * S, 0, EventKind.ARRIVAL, 0, 0))
        self.assertEqual(len(sim.records), 1)
        self.assertEqual(sim.records[0].response_us, 100_000)
        self.assertEqual(sim.records[0].start_kind, StartKind.WARM)
        self.assertEqual(sim.services[0].last_activity, 5 * S)

    def test_arrival_starting(self):
        state = self.sim.services[0]
        state.instance = Starting(14 * S, Origin.COLD)
        self.sim.now = 10 * S
        self.sim.on_arrival(Event(10 * S, 0, EventKind.ARRIVAL, 0, 0))
        self.assertEqual(len(state.pending), 1)
        self.assertEqual(self.sim.records, [])

        self.sim.now = 14 * S
        self.sim.on_instance_ready(Event(14 * S, 1, EventKind.INSTANCE_READY, 0, Origin.COLD))
        self.assertEqual(responses(self.sim.records), [4])
        self.assertEqual(kinds(self.sim.records), [StartKind.PENDING_ON_STARTING])

    def test_acquire_from_pool(self):
        state = self.sim.services[0]
        origin = self.sim.acquire_instance(state)
        self.assertEqual(origin, Origin.POOL)
        self.assertEqual((self.sim.pool.available, self.sim.pool.warming), (0, 1))
        self.assertEqual(state.instance, Starting(2 * S, Origin.POOL))

    def test_acquire_cold(self):
        self.sim.pool.available = 0
        state = self.sim.services[0]
        origin = self.sim.acquire_instance(state)
        self.assertEqual(origin, Origin.COLD)
        self.assertEqual((self.sim.pool.available, self.sim.pool.warming), (0, 0))
        self.assertEqual(state.instance, Starting(7 * S, Origin.COLD))

    def test_acquire_fifo(self):
        self.assertEqual(self.sim.acquire_instance(self.sim.services[0]), Origin.POOL)
        self.assertEqual(self.sim.acquire_instance(self.sim.services[1]), Origin.COLD)

    def test_acquire_twice(self):
        state = self.sim.services[0]
        self.sim.acquire_instance(state)
        with self.assertRaises(SimulationError):
            self.sim.acquire_instance(state)

    def test_ready_drains_queue(self):
        state = self.sim.services[0]
        state.instance = Starting(20 * S, Origin.COLD)
        for req_index, arrival in enumerate([15, 17, 19]):
            state.pending.append((req_index, arrival * S, StartKind.COLD_START if req_index == 0 else StartKind.PENDING_ON_STARTING))
        self.sim.now = 20 * S
        self.sim.on_instance_ready(Event(20 * S, 0, EventKind.INSTANCE_READY, 0, Origin.COLD))
        self.assertEqual(responses(self.sim.records), [5, 3, 1])
        self.assertIs(state.instance, READY)
        self.assertFalse(state.pending)
        self.assertEqual(state.idle_epoch, 1)

    def test_ready_without_pending(self):
        state = self.sim.services[0]
        state.instance = Starting(3 * S, Origin.POOL)
        self.sim.now = 3 * S
        self.sim.on_instance_ready(Event(3 * S, 0, EventKind.INSTANCE_READY, 0, Origin.POOL))
        self.assertIs(state.instance, READY)
        self.assertEqual(self.sim.records, [])

    def test_stale_ready(self):
        state = self.sim.services[0]
        self.sim.on_instance_ready(Event(3 * S, 0, EventKind.INSTANCE_READY, 0, Origin.POOL))
        self.assertIsNone(state.instance)

    def test_idle_check_expires(self):
        state = self.sim.services[0]
        state.instance = READY
        state.last_activity = 10 * S
        state.idle_epoch = 4
        self.sim.now = 40 * S
        self.sim.on_idle_check(Event(40 * S, 0, EventKind.IDLE_CHECK, 0, 4))
        self.assertIsNone(state.instance)
        self.assertEqual(self.sim.pool.available, 1, "scale-down does not return the instance to the pool")

    def test_idle_check_stale(self):
        state = self.sim.services[0]
        state.instance = READY
        state.last_activity = 10 * S
        state.idle_epoch = 5
        self.sim.now = 40 * S
        self.sim.on_idle_check(Event(40 * S, 0, EventKind.IDLE_CHECK, 0, 4))
        self.assertIs(state.instance, READY)

    def test_idle_check_without_instance(self):
        state = self.sim.services[0]
        self.sim.on_idle_check(Event(40 * S, 0, EventKind.IDLE_CHECK, 0, 0))
        self.assertIsNone(state.instance)

    def test_pool_pod_ready(self):
        self.sim.pool.available = 0
        self.sim.pool.warming = 1
        self.sim.on_pool_pod_ready(Event(0, 0, EventKind.POOL_POD_READY))
        self.assertEqual((self.sim.pool.available, self.sim.pool.warming), (1, 0))

    def test_pool_pod_ready_larger_pool(self):
        sim = Simulation(hand_config(pool_size=2, replenish=True), traces=traces([10, 20]))
        sim.pool.available = 1
        sim.pool.warming = 1
        sim.on_pool_pod_ready(Event(0, 0, EventKind.POOL_POD_READY))
        self.assertEqual((sim.pool.available, sim.pool.warming), (2, 0))

    def test_pool_pod_ready_without_warming(self):
        self.sim.pool.available = 0
        with self.assertRaises(SimulationError):
            self.sim.on_pool_pod_ready(Event(0, 0, EventKind.POOL_POD_READY))

    def test_schedule_in_past(self):
        self.sim.now = 10 * S
        with self.assertRaises(SimulationError):
            self.sim.schedule(5 * S, EventKind.POOL_POD_READY)

    def test_pool_bounds(self):
        with self.assertRaises(SimulationError):
            PoolState(1, available=1, warming=1).check()
        with self.assertRaises(SimulationError):
            PoolState(1, available=-1).check()
        PoolState(2, available=1, warming=1).check()


class ScaleUpSplitCase(TestCase):
    def test_examples(self):
        self.assertEqual(scale_up_split(3, 2), (2, 1))
        self.assertEqual(scale_up_split(0, 5), (0, 0))
        self.assertEqual(scale_up_split(2, 0), (0, 2))
        self.assertEqual(scale_up_split(1, 1), (1, 0))

    def test_sum(self):
        for desired in range(6):
            for available in range(6):
                from_pool, cold = scale_up_split(desired, available)
                self.assertEqual(from_pool + cold, desired)
                self.assertLessEqual(from_pool, available)


class ConfigValidationCase(TestCase):
    def test_invalid_values(self):
        for kwargs in [{'n_services': 0}, {'requests_per_service': 0}, {'trials': 0}, {'pool_size': -1}, {'cold_init_s': -1.0},
                       {'cooldown_s': float('nan')}, {'migration_s': float('inf')}, {'base_seed': -1}, {'base_seed': 2**64},
                       {'max_instances_per_service': 2}, {'replenish_latency_s': -0.5}, {'arrival': ArrivalModel(0, 1)}]:
            with self.subTest(**{key: repr(value) for key, value in kwargs.items()}):
                with self.assertRaises(ConfigError):
                    run_trial(SimConfig(**kwargs))

    def test_error_names_field(self):
        with self.assertRaises(ConfigError) as cm:
            SimConfig(pool_size=-1).validate()
        self.assertIn('pool_size', str(cm.exception))

    def test_replenish_delay(self):
        self.assertEqual(SimConfig(cold_init_s=32.0).replenish_delay_s, 32.0)
        self.assertEqual(SimConfig(cold_init_s=32.0, replenish_latency_s=5.0).replenish_delay_s, 5.0)


class PropertyCase(TestCase):
    def random_configs(self, count: int, seed: int):
        rng = np.random.default_rng(seed)
        for _ in range(count):
            yield SimConfig(
                n_services = int(rng.integers(1, 6)),
                requests_per_service = int(rng.integers(1, 200)),
                arrival = ArrivalModel(float(rng.uniform(0.8, 2.5)), float(rng.uniform(0.1, 5.0))),
                cold_init_s = float(rng.uniform(1, 40)),
                migration_s = float(rng.uniform(0.1, 1.0)),
                service_time_s = float(rng.choice([0.0, 0.05, 0.5])),
                cooldown_s = float(rng.uniform(1, 60)),
                pool_size = int(rng.integers(0, 4)),
                replenish = bool(rng.integers(0, 2)),
                trials = 1,
                base_seed = int(rng.integers(0, 2**63)),
            )

    def test_conservation_floor_and_coupling(self):
        for config in self.random_configs(20, 1):
            records = run_trial(config, 3)
            self.assertEqual(len(records), config.n_services * config.requests_per_service)
            self.assertEqual([(r.service_id, r.req_index) for r in records], [(s, i) for s in range(config.n_services) for i in range(config.requests_per_service)])

            service_time = round(config.service_time_s * S)
            for record in records:
                self.assertGreaterEqual(record.response_us, service_time)
                if record.start_kind == StartKind.WARM:
                    self.assertEqual(record.response_us, service_time)
                elif record.start_kind == StartKind.COLD_START:
                    self.assertEqual(record.response_us, round(config.cold_init_s * S) + service_time)
                elif record.start_kind == StartKind.POOL_HIT:
                    self.assertEqual(record.response_us, round(config.migration_s * S) + service_time)
                else:
                    self.assertGreater(record.response_us, service_time)

            if config.pool_size == 0:
                self.assertNotIn(StartKind.POOL_HIT, kinds(records))

    def test_pool_off_equivalence(self):
        for config in self.random_configs(20, 2):
            config = replace(config, pool_size=0)
            self.assertEqual(run_trial(config, 1), run_trial(replace(config, pool_size=3), 1, baseline=True))
            self.assertEqual(run_trial(config, 1), BaselineSimulation(config, 1).run())

    def test_first_start_dominance(self):
        for config in self.random_configs(20, 3):
            without_pool = run_trial(replace(config, pool_size=0))
            with_pool = run_trial(replace(config, pool_size=max(config.pool_size, 1)))
            first = min(range(len(without_pool)), key=lambda i: (without_pool[i].arrival_us, without_pool[i].service_id))
            self.assertEqual(with_pool[first].start_kind, StartKind.POOL_HIT)
            self.assertEqual(without_pool[first].response_us - with_pool[first].response_us, round(config.cold_init_s * S) - round(config.migration_s * S))

    def test_determinism(self):
        config = SimConfig(n_services=3, requests_per_service=300, pool_size=1)
        self.assertEqual(run_trial(config, 7), run_trial(config, 7))
        self.assertNotEqual(run_trial(config, 7), run_trial(config, 8))

    def test_pool_bound_holds(self):
        for config in self.random_configs(10, 4):
            sim = Simulation(config)
            sim.run()
            self.assertGreaterEqual(sim.pool.available, 0)
            self.assertLessEqual(sim.pool.available + sim.pool.warming, config.pool_size)
            if config.replenish:
                self.assertEqual((sim.pool.available, sim.pool.warming), (config.pool_size, 0))

    def test_run_once(self):
        sim = Simulation(hand_config(), traces=traces([10, 20]))
        sim.run()
        with self.assertRaises(SimulationError):
            sim.run()

    def test_unsorted_trace(self):
        with self.assertRaises(ConfigError):
            run_trial(hand_config(), traces=traces([20, 10]))
