import math

import numpy as np
import pytest

from src.events.index import Event, EventStream, SensorGeometry
from src.flow.realtime.index import (
    LatestEventMap,
    RealtimeFlowEstimator,
    aggregate_flow,
    process_event,
    realtime_flow_signal,
)
from src.models.index import FlowConfig, SensorModel
from src.models.signals import FlowEvent, FlowEvents, MotionTrace
from src.simulation.index import generate_speckle, render_events
from tests.helpers import weighted_median

GEOMETRY = SensorGeometry(32, 32)
CFG = FlowConfig(r=7)


def estimates(events, cfg=CFG, geometry=GEOMETRY):
    estimator = RealtimeFlowEstimator(geometry, cfg)
    return [estimator.process_event(Event(*e)) for e in events]


def brute_force_flow(stream: EventStream, cfg: FlowConfig):
    """Reference estimator: keep every earlier timestamp per pixel and polarity, take the max on lookup."""
    rows = []
    history = {}
    for e in stream:
        def latest(x, y):
            times = history.get((x, y, e.p))
            return max(times) if times else None

        axes = []
        for dx, dy in ((1, 0), (0, 1)):
            lo = latest(e.x - dx * cfg.r, e.y - dy * cfg.r)
            hi = latest(e.x + dx * cfg.r, e.y + dy * cfg.r)
            if lo == hi:
                axes.append(math.nan)
                continue
            if hi is None or (lo is not None and lo > hi):
                t_n, offset = lo, cfg.r
            else:
                t_n, offset = hi, -cfg.r
            dt = e.t - t_n
            v = offset / dt if 0 < dt <= cfg.dt_max_us else math.nan
            axes.append(v if abs(v) <= cfg.v_max else math.nan)
        history.setdefault((e.x, e.y, e.p), []).append(e.t)
        if not (math.isnan(axes[0]) and math.isnan(axes[1])):
            rows.append((e.t, axes[0], axes[1]))
    return rows


class TestPerEventFlow:
    def test_left_neighbor_gives_positive_velocity(self):
        first, second = estimates([(100, 3, 10, 1), (200, 10, 10, 1)])
        assert first is None
        assert second == FlowEvent(200, pytest.approx(0.07), None)

    def test_more_recent_side_wins(self):
        *_, left_recent = estimates([(0, 17, 10, 1), (150, 3, 10, 1), (200, 10, 10, 1)])
        assert left_recent.vx == pytest.approx(7 / 50)
        *_, right_recent = estimates([(0, 3, 10, 1), (150, 17, 10, 1), (200, 10, 10, 1)])
        assert right_recent.vx == pytest.approx(-7 / 50)

    def test_equal_ages_give_no_direction(self):
        *_, tied = estimates([(100, 3, 10, 1), (100, 17, 10, 1), (200, 10, 10, 1)])
        assert tied is None

    def test_tie_on_one_axis_keeps_the_other(self):
        *_, tied = estimates([(100, 3, 10, 1), (100, 17, 10, 1), (150, 10, 3, 1), (200, 10, 10, 1)])
        assert tied == FlowEvent(200, None, pytest.approx(7 / 50))

    def test_vertical_axis(self):
        _, below = estimates([(100, 10, 3, -1), (300, 10, 10, -1)])
        assert below.vx is None
        assert below.vy == pytest.approx(7 / 200)

    def test_opposite_polarity_is_ignored(self):
        assert estimates([(100, 3, 10, -1), (200, 10, 10, 1)]) == [None, None]

    def test_same_timestamp_is_discarded(self):
        assert estimates([(100, 3, 10, 1), (100, 10, 10, 1)]) == [None, None]

    def test_stale_neighbor_is_discarded(self):
        cfg = FlowConfig(r=7, dt_max_us=50)
        assert estimates([(100, 3, 10, 1), (200, 10, 10, 1)], cfg)[1] is None

    def test_implausible_speed_is_discarded(self):
        assert estimates([(100, 3, 10, 1), (102, 10, 10, 1)])[1] is None

    def test_neighbor_outside_sensor_never_fired(self):
        assert estimates([(0, 1, 1, 1), (10, 2, 1, 1)]) == [None, None]

    def test_event_outside_geometry(self):
        with pytest.raises(ValueError):
            estimates([(0, 40, 1, 1)])

    def test_state_map_is_updated(self):
        state = LatestEventMap(GEOMETRY)
        process_event(state, Event(5, 2, 3, -1), CFG)
        assert state.latest(2, 3, -1) == 5
        assert state.latest(2, 3, 1) is None
        state.reset()
        assert state.latest(2, 3, -1) is None

    def test_out_of_order_chunks_are_rejected(self):
        estimator = RealtimeFlowEstimator(GEOMETRY, CFG)
        estimator.process_event(Event(50, 0, 0, 1))
        with pytest.raises(ValueError):
            estimator.process_event(Event(40, 0, 0, 1))


class TestStreamingEquivalence:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_on_random_streams(self, seed, make_random_stream):
        cfg = FlowConfig(r=3, dt_max_us=500, v_max=1.0)
        rng = np.random.default_rng(seed)
        stream = make_random_stream(n=int(rng.integers(200, 1500)), t_span=int(rng.integers(500, 4000)), seed=seed)
        flow = RealtimeFlowEstimator(stream.geometry, cfg).process_stream(stream)
        expected = brute_force_flow(stream, cfg)
        assert len(flow) == len(expected)
        np.testing.assert_array_equal(flow.t, [row[0] for row in expected])
        np.testing.assert_allclose(flow.vx, [row[1] for row in expected], rtol=1e-12)
        np.testing.assert_allclose(flow.vy, [row[2] for row in expected], rtol=1e-12)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(100))
    def test_matches_brute_force_on_long_streams(self, seed, make_random_stream):
        cfg = FlowConfig(r=3, dt_max_us=2000, v_max=1.0)
        rng = np.random.default_rng(1000 + seed)
        stream = make_random_stream(n=10_000, t_span=int(rng.integers(5_000, 100_000)), seed=1000 + seed)
        flow = RealtimeFlowEstimator(stream.geometry, cfg).process_stream(stream)
        expected = brute_force_flow(stream, cfg)
        assert len(flow) == len(expected)
        np.testing.assert_array_equal(flow.t, [row[0] for row in expected])
        np.testing.assert_allclose(flow.vx, [row[1] for row in expected], rtol=1e-12)
        np.testing.assert_allclose(flow.vy, [row[2] for row in expected], rtol=1e-12)

    def test_chunked_processing_matches_one_pass(self, make_random_stream, rng):
        cfg = FlowConfig(r=3, dt_max_us=2000)
        stream = make_random_stream(n=5000, t_span=20_000)
        whole = RealtimeFlowEstimator(stream.geometry, cfg).process_stream(stream)

        estimator = RealtimeFlowEstimator(stream.geometry, cfg)
        cuts = np.sort(rng.choice(np.arange(1, len(stream)), size=20, replace=False))
        pieces = [estimator.process_stream(stream[a:b]) for a, b in zip([0, *cuts], [*cuts, len(stream)])]
        chunked = FlowEvents.concatenate(pieces)

        np.testing.assert_array_equal(chunked.t, whole.t)
        np.testing.assert_array_equal(chunked.vx, whole.vx)
        np.testing.assert_array_equal(chunked.vy, whole.vy)


class TestAggregation:
    def test_per_bin_means_and_weights(self):
        flow = FlowEvents([3, 7, 15], [0.1, 0.3, np.nan], [np.nan, np.nan, 0.2])
        signal = aggregate_flow(flow, FlowConfig(bin_rate=100_000.0), duration_us=30)
        assert signal.sample_rate == 100_000.0
        np.testing.assert_allclose(signal.vx, [0.2, 0.0, 0.0])
        np.testing.assert_allclose(signal.vy, [0.0, 0.2, 0.0])
        np.testing.assert_array_equal(signal.weight, [2, 1, 0])
        np.testing.assert_array_equal(signal.weight_x, [2, 0, 0])
        np.testing.assert_array_equal(signal.weight_y, [0, 1, 0])

    def test_accepts_flow_event_objects(self):
        signal = aggregate_flow([FlowEvent(0, 0.5, None)], FlowConfig(bin_rate=1000.0), duration_us=1000)
        assert signal.vx.tolist() == [0.5]
        assert signal.vy.tolist() == [0.0]

    def test_no_flow_gives_zero_signal(self):
        signal = aggregate_flow(FlowEvents.empty(), FlowConfig(bin_rate=100_000.0), duration_us=25)
        assert len(signal) == 3
        assert not np.any(signal.vx) and not np.any(signal.weight)

    def test_estimates_past_duration_are_dropped(self):
        flow = FlowEvents([5, 40], [0.1, 0.9], [np.nan, np.nan])
        signal = aggregate_flow(flow, FlowConfig(bin_rate=100_000.0), duration_us=20)
        np.testing.assert_allclose(signal.vx, [0.1, 0.0])

    def test_pipeline_matches_direct_aggregation(self, make_random_stream):
        cfg = FlowConfig(r=3, dt_max_us=2000, chunk_size=7, queue_size=1, bin_rate=10_000.0)
        stream = make_random_stream(n=3000, t_span=30_000)
        direct = aggregate_flow(RealtimeFlowEstimator(stream.geometry, cfg).process_stream(stream), cfg, stream.duration_us)
        piped = realtime_flow_signal(stream, cfg)
        np.testing.assert_allclose(piped.vx, direct.vx, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(piped.vy, direct.vy, rtol=1e-12, atol=1e-15)
        np.testing.assert_array_equal(piped.weight, direct.weight)

    def test_empty_stream_with_explicit_duration(self):
        signal = realtime_flow_signal(EventStream.empty(GEOMETRY), CFG, duration_us=100)
        assert len(signal) == 10
        assert not np.any(signal.weight)


class TestConstantVelocityScene:
    # 0.002 px/us along +x: the r=7 neighbor fired about 3.5 ms earlier
    SPEED = 0.002
    DURATION_US = 20_000
    STEADY_FROM_US = 5_000

    @pytest.fixture(scope="class")
    def flow_signal(self):
        geometry = SensorGeometry(64, 64)
        field = generate_speckle(3, geometry, grain=8.0, margin=44)
        rate = 100_000.0
        t_us = np.arange(int(self.DURATION_US * rate / 1e6)) * (1e6 / rate)
        motion = MotionTrace(rate, self.SPEED * t_us, np.zeros_like(t_us))
        stream = render_events(field, motion, SensorModel(epsilon=0.2), geometry)
        return realtime_flow_signal(stream, FlowConfig(r=7, bin_rate=10_000.0), duration_us=self.DURATION_US)

    def steady(self, signal):
        return np.arange(len(signal)) * (1e6 / signal.sample_rate) >= self.STEADY_FROM_US

    def test_vx_median_matches_speed(self, flow_signal):
        steady = self.steady(flow_signal)
        vx = weighted_median(flow_signal.vx[steady], flow_signal.weight_x[steady])
        assert vx == pytest.approx(self.SPEED, rel=0.2)

    def test_vy_median_stays_small(self, flow_signal):
        steady = self.steady(flow_signal)
        vy = weighted_median(flow_signal.vy[steady], flow_signal.weight_y[steady])
        assert abs(vy) < 0.1 * self.SPEED
