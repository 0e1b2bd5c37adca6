import time
from typing import Iterable, Iterator, Optional, Union

import numpy as np

from src.config.logging import get_logger
from src.events.index import Event, EventStream, SensorGeometry
from src.flow.realtime.utils import NEVER, bin_count, bin_indices, estimate_chunk
from src.models.index import FlowConfig
from src.models.signals import FlowEvent, FlowEvents, GlobalFlowSignal
from src.services.workers import pipelined

logger = get_logger(__name__)


class LatestEventMap:
    """Per-pixel, per-polarity latest timestamp; NEVER marks a pixel that has not fired."""

    def __init__(self, geometry: SensorGeometry):
        self.geometry = geometry
        # [polarity (+1 -> 0, -1 -> 1), row, col]
        self.timestamps = np.full((2, geometry.height, geometry.width), NEVER, dtype=np.int64)

    def latest(self, x: int, y: int, p: int) -> Optional[int]:
        if not (0 <= x < self.geometry.width and 0 <= y < self.geometry.height):
            return None
        value = int(self.timestamps[0 if p > 0 else 1, y, x])
        return None if value == NEVER else value

    def reset(self) -> None:
        self.timestamps.fill(NEVER)


class RealtimeFlowEstimator:
    """
    Streaming per-event flow. State carries across calls, so feeding a stream in
    chunks gives the same estimates as one pass.
    """

    def __init__(self, geometry: SensorGeometry, cfg: FlowConfig):
        self.geometry = geometry
        self.cfg = cfg
        self.state = LatestEventMap(geometry)
        self.events_seen = 0
        self.last_t = None

    def process_event(self, e: Event) -> Optional[FlowEvent]:
        if not e.inside(self.geometry):
            raise ValueError(
                f"event at ({e.x}, {e.y}) outside geometry {self.geometry.width}x{self.geometry.height}"
            )
        flow = self._run(
            np.array([e.t], np.int64), np.array([e.x], np.int32), np.array([e.y], np.int32), np.array([e.p], np.int8)
        )
        return next(iter(flow), None)

    def process_stream(self, stream: EventStream) -> FlowEvents:
        if stream.geometry != self.geometry:
            raise ValueError(f"stream geometry {stream.geometry} does not match estimator geometry {self.geometry}")
        return self._run(stream.t, stream.x, stream.y, stream.p)

    def _run(self, t, x, y, p) -> FlowEvents:
        if t.size == 0:
            return FlowEvents.empty()
        if self.last_t is not None and t[0] < self.last_t:
            raise ValueError(f"timestamp {int(t[0])} precedes already processed timestamp {self.last_t}")
        vx = np.empty(t.size, dtype=np.float64)
        vy = np.empty(t.size, dtype=np.float64)
        estimate_chunk(
            self.state.timestamps,
            np.ascontiguousarray(t, dtype=np.int64),
            np.ascontiguousarray(x, dtype=np.int64),
            np.ascontiguousarray(y, dtype=np.int64),
            np.ascontiguousarray(p, dtype=np.int8),
            int(self.cfg.r),
            int(self.cfg.dt_max_us),
            float(self.cfg.v_max),
            vx,
            vy,
        )
        self.events_seen += int(t.size)
        self.last_t = int(t[-1])
        keep = ~(np.isnan(vx) & np.isnan(vy))
        return FlowEvents(np.asarray(t)[keep], vx[keep], vy[keep])


def process_event(state: LatestEventMap, e: Event, cfg: FlowConfig) -> Optional[FlowEvent]:
    """Single-event form over an explicit state map; mutates `state`."""
    estimator = RealtimeFlowEstimator(state.geometry, cfg)
    estimator.state = state
    return estimator.process_event(e)


class FlowAccumulator:
    """Running per-bin sums so aggregation can consume flow batches as they arrive."""

    def __init__(self, cfg: FlowConfig, duration_us: int):
        self.cfg = cfg
        self.n_bins = bin_count(duration_us, cfg.bin_rate)
        self.sum_x = np.zeros(self.n_bins)
        self.sum_y = np.zeros(self.n_bins)
        self.count_x = np.zeros(self.n_bins)
        self.count_y = np.zeros(self.n_bins)
        self.count = np.zeros(self.n_bins)
        self.dropped = 0

    def add(self, batch: FlowEvents) -> None:
        if len(batch) == 0 or self.n_bins == 0:
            self.dropped += len(batch)
            return
        bins = bin_indices(batch.t, self.cfg.bin_rate)
        inside = bins < self.n_bins
        self.dropped += int(np.count_nonzero(~inside))
        bins = bins[inside]
        vx = batch.vx[inside]
        vy = batch.vy[inside]
        has_x = ~np.isnan(vx)
        has_y = ~np.isnan(vy)
        n = self.n_bins
        self.sum_x += np.bincount(bins[has_x], weights=vx[has_x], minlength=n)
        self.sum_y += np.bincount(bins[has_y], weights=vy[has_y], minlength=n)
        self.count_x += np.bincount(bins[has_x], minlength=n)
        self.count_y += np.bincount(bins[has_y], minlength=n)
        self.count += np.bincount(bins, minlength=n)

    def result(self) -> GlobalFlowSignal:
        vx = np.divide(self.sum_x, self.count_x, out=np.zeros(self.n_bins), where=self.count_x > 0)
        vy = np.divide(self.sum_y, self.count_y, out=np.zeros(self.n_bins), where=self.count_y > 0)
        return GlobalFlowSignal(
            sample_rate=self.cfg.bin_rate,
            vx=vx,
            vy=vy,
            weight=self.count,
            weight_x=self.count_x,
            weight_y=self.count_y,
        )


def aggregate_flow(flow_events: Union[FlowEvents, Iterable[FlowEvent]], cfg: FlowConfig, duration_us: int) -> GlobalFlowSignal:
    """
    Bin k covers [k/bin_rate, (k+1)/bin_rate). Per bin and axis: mean of the present
    estimates; empty bins hold 0. Estimates past the last bin are dropped.
    """
    if not isinstance(flow_events, FlowEvents):
        flow_events = FlowEvents.from_events(flow_events)
    accumulator = FlowAccumulator(cfg, duration_us)
    accumulator.add(flow_events)
    if accumulator.dropped:
        logger.warning("flow_events_past_duration_dropped", dropped=accumulator.dropped, duration_us=duration_us)
    return accumulator.result()


def _chunks(stream: EventStream, chunk_size: int) -> Iterator[EventStream]:
    for start in range(0, len(stream), chunk_size):
        yield stream[start:start + chunk_size]


def realtime_flow_signal(stream: EventStream, cfg: FlowConfig, duration_us: Optional[int] = None) -> GlobalFlowSignal:
    """
    * Step 1: Estimate per-event flow chunk by chunk on a producer thread.
    * Step 2: Aggregate each batch into per-bin sums as it arrives (bounded queue, producer blocks when full).
    * Step 3: Finalize per-bin means and weights.
    """
    duration_us = stream.duration_us if duration_us is None else int(duration_us)
    estimator = RealtimeFlowEstimator(stream.geometry, cfg)
    accumulator = FlowAccumulator(cfg, duration_us)
    started = time.perf_counter()
    try:
        batches = (estimator.process_stream(chunk) for chunk in _chunks(stream, cfg.chunk_size))
        pipelined(batches, accumulator.add, queue_size=cfg.queue_size, name="realtime_flow")
    except Exception as e:
        logger.error("realtime_flow_failed", event_count=len(stream), error=str(e), exc_info=True)
        raise
    elapsed = time.perf_counter() - started
    signal = accumulator.result()
    logger.info(
        "flow_signal_built",
        mode="realtime",
        event_count=len(stream),
        flow_events=int(signal.weight.sum()) + accumulator.dropped,
        bins=len(signal),
        seconds=round(elapsed, 4),
        events_per_second=round(len(stream) / elapsed, 1) if elapsed > 0 else None,
    )
    return signal
