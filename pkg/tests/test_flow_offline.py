import numpy as np
import pytest
from scipy.ndimage import gaussian_filter, shift

from src.events.index import EventStream, SensorGeometry
from src.exceptions import InsufficientDataError
from src.flow.offline.index import (
    dense_flow,
    frame_count,
    integrate_frames,
    offline_flow_signal,
    weighted_global_flow,
)
from src.models.index import OfflineConfig, PyramidConfig, SensorModel, WeightFrame
from src.models.signals import MotionTrace
from src.simulation.index import generate_speckle, render_events
from tests.helpers import weighted_median

FRAME_RATE = 20_000.0


def texture(size: int = 64, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    smooth = gaussian_filter(rng.standard_normal((size, size)), sigma=3.0, mode="wrap")
    smooth -= smooth.min()
    return smooth / smooth.max()


def translating_stream(shift_px: int, frames: int = 3, size: int = 64) -> EventStream:
    """Each frame window holds the same graded pattern, moved shift_px further along x."""
    levels = np.floor(texture(size) * 5.0).astype(np.int64)
    frame_us = int(1e6 / FRAME_RATE)
    t, x, y = [], [], []
    for k in range(frames):
        image = np.roll(levels, shift_px * k, axis=1)
        rows, cols = np.nonzero(image)
        repeats = image[rows, cols]
        x.append(np.repeat(cols, repeats))
        y.append(np.repeat(rows, repeats))
        t.append(np.full(int(repeats.sum()), k * frame_us + 1))
    t, x, y = np.concatenate(t), np.concatenate(x), np.concatenate(y)
    return EventStream(SensorGeometry(size, size), t, x, y, np.ones_like(t))


class TestIntegration:
    def test_windows_sum_polarity_and_count_events(self):
        stream = EventStream(SensorGeometry(4, 4), [0, 10, 20, 60], [1, 1, 1, 2], [1, 1, 1, 2], [1, 1, -1, 1])
        frames = integrate_frames(stream, FRAME_RATE)
        assert len(frames) == 2
        assert frames.frames[0, 1, 1] == 1.0
        assert frames.counts[0, 1, 1] == 3
        assert frames.frames[1, 2, 2] == 1.0
        assert frames.counts[1].sum() == 1

    def test_every_event_lands_in_one_frame(self, make_random_stream):
        stream = make_random_stream(n=4000, t_span=10_000)
        frames = integrate_frames(stream, FRAME_RATE)
        assert frames.counts.sum() == len(stream)
        assert frames.frames.sum() == pytest.approx(float(stream.p.sum()))

    def test_explicit_duration_sets_frame_count(self):
        empty = EventStream.empty(SensorGeometry(4, 4))
        assert frame_count(empty, FRAME_RATE, duration_us=1000) == 20
        frames = integrate_frames(empty, FRAME_RATE, duration_us=1000)
        assert frames.frames.shape == (20, 4, 4)
        assert not frames.frames.any()


class TestDenseFlow:
    def test_identical_frames_have_no_flow(self):
        image = (texture() * 255.0).astype(np.float32)
        flow = dense_flow(image, image, PyramidConfig())
        assert flow.shape == (64, 64, 2)
        assert np.abs(flow).max() < 1e-2

    def test_shifted_texture(self):
        image = (texture() * 255.0).astype(np.float32)
        moved = np.roll(image, 2, axis=1)
        flow = dense_flow(image, moved, PyramidConfig())
        interior = np.zeros((64, 64), dtype=np.uint32)
        interior[16:48, 16:48] = 1
        u, v = weighted_global_flow(flow, interior)
        assert u == pytest.approx(2.0, abs=0.2)
        assert v == pytest.approx(0.0, abs=0.2)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            dense_flow(np.zeros((8, 8), np.float32), np.zeros((8, 9), np.float32), PyramidConfig())

    @staticmethod
    def interior_mean(flow: np.ndarray) -> "tuple[float, float]":
        interior = np.zeros(flow.shape[:2], dtype=np.uint32)
        interior[16:-16, 16:-16] = 1
        return weighted_global_flow(flow, interior)

    @staticmethod
    def speckle(seed: int = 0) -> np.ndarray:
        # unit-mean intensity, periodic so rolls and wrapped shifts stay consistent
        return generate_speckle(seed, SensorGeometry(64, 64), grain=4.0, margin=0).intensity

    def test_unit_scale_speckle_shift(self):
        image = self.speckle()
        u, v = self.interior_mean(dense_flow(image, np.roll(image, 2, axis=1), PyramidConfig()))
        assert u == pytest.approx(2.0, abs=0.2)
        assert v == pytest.approx(0.0, abs=0.2)

    def test_subpixel_shift(self):
        image = self.speckle(1)
        moved = shift(image, (-0.5, 0.5), order=3, mode="grid-wrap")
        u, v = self.interior_mean(dense_flow(image, moved, PyramidConfig()))
        assert u == pytest.approx(0.5, abs=0.2)
        assert v == pytest.approx(-0.5, abs=0.2)

    @pytest.mark.parametrize("seed", range(20))
    def test_random_translations(self, seed):
        rng = np.random.default_rng(seed)
        du, dv = rng.uniform(-1.4, 1.4, size=2)
        image = self.speckle(seed)
        moved = shift(image, (dv, du), order=3, mode="grid-wrap")
        u, v = self.interior_mean(dense_flow(image, moved, PyramidConfig()))
        assert u == pytest.approx(du, abs=0.2)
        assert v == pytest.approx(dv, abs=0.2)

    def test_frame_scale_does_not_change_flow(self):
        image = self.speckle(2)
        moved = np.roll(image, 1, axis=0)
        unit = dense_flow(image, moved, PyramidConfig())
        eight_bit = dense_flow(image * 255.0, moved * 255.0, PyramidConfig())
        np.testing.assert_allclose(unit, eight_bit, atol=1e-3)

    def test_flat_frames_have_no_flow(self):
        flat = np.full((32, 32), 3.0, dtype=np.float32)
        flow = dense_flow(flat, flat, PyramidConfig())
        assert flow.shape == (32, 32, 2)
        assert not flow.any()


class TestWeightedGlobalFlow:
    def test_single_active_pixel(self):
        flow = np.zeros((4, 4, 2))
        flow[..., 0] = 1.0
        counts = np.zeros((4, 4), dtype=np.uint32)
        counts[2, 3] = 5
        assert weighted_global_flow(flow, counts) == (1.0, 0.0)

    def test_count_weighting(self):
        flow = np.array([[[2.0, 0.0], [4.0, 1.0]]])
        counts = np.array([[1, 3]], dtype=np.uint32)
        assert weighted_global_flow(flow, counts) == (pytest.approx(3.5), pytest.approx(0.75))

    def test_no_events_gives_zero(self):
        flow = np.ones((4, 4, 2))
        assert weighted_global_flow(flow, np.zeros((4, 4), dtype=np.uint32)) == (0.0, 0.0)


class TestOfflineFlowSignal:
    def test_needs_two_frames(self):
        empty = EventStream.empty(SensorGeometry(8, 8))
        with pytest.raises(InsufficientDataError):
            offline_flow_signal(empty, FRAME_RATE, PyramidConfig(), duration_us=40)

    def test_silent_recording_gives_zero_flow(self):
        empty = EventStream.empty(SensorGeometry(8, 8))
        signal = offline_flow_signal(empty, FRAME_RATE, PyramidConfig(), duration_us=1000)
        assert len(signal) == 19
        assert signal.sample_rate == FRAME_RATE
        assert not np.any(signal.vx) and not np.any(signal.weight)

    def test_translation_in_pixels_per_microsecond(self):
        stream = translating_stream(shift_px=2)
        signal = offline_flow_signal(stream, FRAME_RATE, PyramidConfig(), OfflineConfig(frame_rate=FRAME_RATE, workers=1))
        assert len(signal) == 2
        # 2 px per 50 µs frame
        np.testing.assert_allclose(signal.vx, 0.04, rtol=0.3)
        np.testing.assert_allclose(signal.vy, 0.0, atol=0.01)
        assert np.all(signal.weight > 0)

    def test_thread_pool_matches_inline(self):
        stream = translating_stream(shift_px=1, frames=6)
        inline = offline_flow_signal(stream, FRAME_RATE, PyramidConfig(), OfflineConfig(workers=1))
        pooled = offline_flow_signal(stream, FRAME_RATE, PyramidConfig(), OfflineConfig(workers=4))
        np.testing.assert_allclose(pooled.vx, inline.vx)
        np.testing.assert_allclose(pooled.vy, inline.vy)

    def test_weight_frame_choice(self):
        stream = translating_stream(shift_px=1, frames=3)
        later = offline_flow_signal(stream, FRAME_RATE, PyramidConfig(), OfflineConfig(weight_frame=WeightFrame.LATER, workers=1))
        both = offline_flow_signal(stream, FRAME_RATE, PyramidConfig(), OfflineConfig(weight_frame=WeightFrame.BOTH, workers=1))
        np.testing.assert_allclose(both.weight, 2 * later.weight)


class TestConstantVelocityScene:
    # 1 px per 50 us frame along +x
    SPEED = 0.02
    DURATION_US = 3_000

    @pytest.fixture(scope="class")
    def flow_signal(self):
        geometry = SensorGeometry(64, 64)
        field = generate_speckle(5, geometry, grain=8.0, margin=64)
        rate = 100_000.0
        t_us = np.arange(int(self.DURATION_US * rate / 1e6)) * (1e6 / rate)
        motion = MotionTrace(rate, self.SPEED * t_us, np.zeros_like(t_us))
        stream = render_events(field, motion, SensorModel(epsilon=0.2), geometry)
        return offline_flow_signal(
            stream, FRAME_RATE, PyramidConfig(), OfflineConfig(workers=1), duration_us=self.DURATION_US
        )

    def test_vx_matches_speed(self, flow_signal):
        # the first pair still holds the start-up transient
        vx = weighted_median(flow_signal.vx[1:], flow_signal.weight[1:])
        assert vx == pytest.approx(self.SPEED, rel=0.1)

    def test_vy_stays_small(self, flow_signal):
        vy = weighted_median(flow_signal.vy[1:], flow_signal.weight[1:])
        assert abs(vy) < 0.1 * self.SPEED
