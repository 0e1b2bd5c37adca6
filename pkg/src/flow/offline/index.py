import time
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np

from src.config.logging import get_logger
from src.events.index import EventStream
from src.exceptions import InsufficientDataError
from src.flow.offline.utils import accumulate, farneback, frame_bounds, normalize_pair, smooth
from src.models.index import OfflineConfig, PyramidConfig, WeightFrame
from src.models.signals import GlobalFlowSignal
from src.services.workers import parallel_map

logger = get_logger(__name__)

# frame pairs handed to the thread pool at once
PAIRS_PER_BATCH = 64


@dataclass(frozen=True, eq=False)
class FrameSequence:
    """Signed polarity sums and event counts per integration window."""

    frame_rate: float
    frames: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if not self.frame_rate > 0:
            raise ValueError(f"frame_rate must be > 0, got {self.frame_rate}")
        if self.frames.shape != self.counts.shape:
            raise ValueError(f"frames {self.frames.shape} and counts {self.counts.shape} differ in shape")

    def __len__(self) -> int:
        return int(self.frames.shape[0])


def frame_count(stream: EventStream, frame_rate: float, duration_us: Optional[int] = None) -> int:
    duration_us = stream.duration_us if duration_us is None else duration_us
    return int(np.ceil(duration_us * frame_rate / 1e6))


def iter_frames(stream: EventStream, frame_rate: float, duration_us: Optional[int] = None) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Yield (frame, counts) one window at a time; window k covers [k/frame_rate, (k+1)/frame_rate)."""
    if not frame_rate > 0:
        raise ValueError(f"frame_rate must be > 0, got {frame_rate}")
    n_frames = frame_count(stream, frame_rate, duration_us)
    bounds = frame_bounds(stream.t, frame_rate, n_frames)
    for k in range(n_frames):
        lo, hi = bounds[k], bounds[k + 1]
        yield accumulate(stream.x[lo:hi], stream.y[lo:hi], stream.p[lo:hi], stream.geometry.shape)


def integrate_frames(stream: EventStream, frame_rate: float, duration_us: Optional[int] = None) -> FrameSequence:
    n_frames = frame_count(stream, frame_rate, duration_us)
    shape = (n_frames,) + stream.geometry.shape
    frames = np.zeros(shape, dtype=np.float32)
    counts = np.zeros(shape, dtype=np.uint32)
    for k, (frame, count) in enumerate(iter_frames(stream, frame_rate, duration_us)):
        frames[k] = frame
        counts[k] = count
    return FrameSequence(frame_rate, frames, counts)


def dense_flow(prev: np.ndarray, nxt: np.ndarray, cfg: PyramidConfig) -> np.ndarray:
    """Per-pixel (u, v) in pixels per frame, shape (H, W, 2). Any frame scale is accepted."""
    if prev.shape != nxt.shape or prev.ndim != 2:
        raise ValueError(f"frames must be 2D with equal shape, got {prev.shape} and {nxt.shape}")
    pair = normalize_pair(prev, nxt)
    if pair is None:
        return np.zeros(prev.shape + (2,), dtype=np.float32)
    return farneback(*pair, cfg)


def weighted_global_flow(flow: np.ndarray, counts: np.ndarray) -> Tuple[float, float]:
    if flow.shape[:2] != counts.shape:
        raise ValueError(f"flow {flow.shape[:2]} and counts {counts.shape} differ in geometry")
    weights = counts.astype(np.float64)
    total = weights.sum()
    if total == 0:
        return 0.0, 0.0
    u = float((flow[..., 0] * weights).sum() / total)
    v = float((flow[..., 1] * weights).sum() / total)
    return u, v


def _pair_weights(earlier: np.ndarray, later: np.ndarray, weight_frame: WeightFrame) -> np.ndarray:
    if weight_frame is WeightFrame.EARLIER:
        return earlier
    if weight_frame is WeightFrame.BOTH:
        return earlier.astype(np.uint64) + later
    return later


def offline_flow_signal(
    stream: EventStream,
    frame_rate: float,
    cfg: PyramidConfig,
    offline: Optional[OfflineConfig] = None,
    duration_us: Optional[int] = None,
) -> GlobalFlowSignal:
    """
    * Step 1: Integrate events into frames, streamed so only a batch of frames is held at once.
    * Step 2: Dense flow for each consecutive pair (thread pool), after the optional box blur.
    * Step 3: Count-weighted mean per pair, converted from pixels/frame to pixels/µs.
    """
    offline = offline or OfflineConfig(frame_rate=frame_rate)
    n_frames = frame_count(stream, frame_rate, duration_us)
    if n_frames < 2:
        raise InsufficientDataError(f"offline flow needs at least 2 frames, got {n_frames}")

    started = time.perf_counter()
    per_frame_us = 1e6 / frame_rate

    def pair_flow(pair) -> Tuple[float, float, float]:
        (prev, prev_counts), (nxt, next_counts) = pair
        weights = _pair_weights(prev_counts, next_counts, offline.weight_frame)
        flow = dense_flow(smooth(prev, offline.pre_blur), smooth(nxt, offline.pre_blur), cfg)
        u, v = weighted_global_flow(flow, weights)
        return u / per_frame_us, v / per_frame_us, float(weights.sum())

    vx: List[float] = []
    vy: List[float] = []
    weight: List[float] = []
    try:
        frames = iter_frames(stream, frame_rate, duration_us)
        previous = next(frames)
        batch = []
        for current in frames:
            batch.append((previous, current))
            previous = current
            if len(batch) == PAIRS_PER_BATCH:
                for u, v, w in parallel_map(pair_flow, batch, offline.workers):
                    vx.append(u)
                    vy.append(v)
                    weight.append(w)
                batch = []
        for u, v, w in parallel_map(pair_flow, batch, offline.workers):
            vx.append(u)
            vy.append(v)
            weight.append(w)
    except Exception as e:
        logger.error("offline_flow_failed", event_count=len(stream), frames=n_frames, error=str(e), exc_info=True)
        raise

    elapsed = time.perf_counter() - started
    logger.info(
        "flow_signal_built",
        mode="offline",
        event_count=len(stream),
        frames=n_frames,
        bins=len(vx),
        seconds=round(elapsed, 4),
        events_per_second=round(len(stream) / elapsed, 1) if elapsed > 0 else None,
    )
    return GlobalFlowSignal(sample_rate=frame_rate, vx=vx, vy=vy, weight=weight)
