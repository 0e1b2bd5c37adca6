from dataclasses import dataclass
from typing import Optional

import numpy as np


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled mono signal, nominal range [-1, 1]."""

    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        object.__setattr__(self, "samples", _frozen_array(self.samples, np.float64))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return Waveform(self.sample_rate, samples)


@dataclass(frozen=True, eq=False)
class MotionTrace:
    """Ground-truth speckle displacement in pixels, relative to the rest position."""

    sample_rate: float
    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        dx = _frozen_array(self.dx, np.float64)
        dy = _frozen_array(self.dy, np.float64)
        if dx.size != dy.size:
            raise ValueError(f"dx and dy lengths differ: {dx.size} != {dy.size}")
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)

    def __len__(self) -> int:
        return int(self.dx.size)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def max_displacement(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(max(np.abs(self.dx).max(), np.abs(self.dy).max()))

    def velocity(self) -> "tuple[np.ndarray, np.ndarray]":
        """Per-sample velocity in pixels per microsecond (first sample 0)."""
        step_us = 1e6 / self.sample_rate
        vx = np.diff(self.dx, prepend=self.dx[:1]) / step_us
        vy = np.diff(self.dy, prepend=self.dy[:1]) / step_us
        return vx, vy


@dataclass(frozen=True)
class FlowEvent:
    """One per-event velocity estimate; an absent axis is None."""

    t: int
    vx: Optional[float]
    vy: Optional[float]

    def __post_init__(self):
        if self.vx is None and self.vy is None:
            raise ValueError("FlowEvent needs at least one velocity axis")


@dataclass(frozen=True, eq=False)
class FlowEvents:
    """Columnar batch of flow estimates; NaN marks an absent axis."""

    t: np.ndarray
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        t = _frozen_array(self.t, np.int64)
        vx = _frozen_array(self.vx, np.float64)
        vy = _frozen_array(self.vy, np.float64)
        if not (t.size == vx.size == vy.size):
            raise ValueError("FlowEvents columns must have equal length")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "vx", vx)
        object.__setattr__(self, "vy", vy)

    def __len__(self) -> int:
        return int(self.t.size)

    def __iter__(self):
        for t, vx, vy in zip(self.t, self.vx, self.vy):
            yield FlowEvent(int(t), None if np.isnan(vx) else float(vx), None if np.isnan(vy) else float(vy))

    @classmethod
    def empty(cls) -> "FlowEvents":
        return cls(np.empty(0, np.int64), np.empty(0), np.empty(0))

    @classmethod
    def from_events(cls, flow_events) -> "FlowEvents":
        flow_events = list(flow_events)
        return cls(
            [e.t for e in flow_events],
            [np.nan if e.vx is None else e.vx for e in flow_events],
            [np.nan if e.vy is None else e.vy for e in flow_events],
        )

    @classmethod
    def concatenate(cls, batches) -> "FlowEvents":
        batches = list(batches)
        if not batches:
            return cls.empty()
        return cls(
            np.concatenate([b.t for b in batches]),
            np.concatenate([b.vx for b in batches]),
            np.concatenate([b.vy for b in batches]),
        )


@dataclass(frozen=True, eq=False)
class GlobalFlowSignal:
    """Dense two-channel global velocity (pixels per microsecond) with per-bin weights."""

    sample_rate: float
    vx: np.ndarray
    vy: np.ndarray
    weight: np.ndarray
    weight_x: Optional[np.ndarray] = None
    weight_y: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        vx = _frozen_array(self.vx, np.float64)
        vy = _frozen_array(self.vy, np.float64)
        weight = _frozen_array(self.weight, np.float64)
        if not (vx.size == vy.size == weight.size):
            raise ValueError("vx, vy and weight must have equal length")
        if np.any(weight < 0):
            raise ValueError("weights must be nonnegative")
        empty = weight == 0
        if np.any(vx[empty] != 0) or np.any(vy[empty] != 0):
            raise ValueError("bins with zero weight must hold zero velocity")
        weight_x = weight if self.weight_x is None else _frozen_array(self.weight_x, np.float64)
        weight_y = weight if self.weight_y is None else _frozen_array(self.weight_y, np.float64)
        object.__setattr__(self, "vx", vx)
        object.__setattr__(self, "vy", vy)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "weight_x", weight_x)
        object.__setattr__(self, "weight_y", weight_y)

    def __len__(self) -> int:
        return int(self.vx.size)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate
