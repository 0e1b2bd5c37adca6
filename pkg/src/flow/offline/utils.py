import cv2
import numpy as np

from src.models.index import PyramidConfig

FLOW_CONTRAST_STD = 64.0
FLOW_MID_GRAY = 128.0


def frame_bounds(t: np.ndarray, frame_rate: float, n_frames: int) -> np.ndarray:
    """Index of the first event of every frame window, plus the stream length."""
    edges = np.ceil(np.arange(n_frames + 1) * (1e6 / frame_rate))
    return np.searchsorted(t, edges, side="left")


def accumulate(x: np.ndarray, y: np.ndarray, p: np.ndarray, shape) -> "tuple[np.ndarray, np.ndarray]":
    height, width = shape
    flat = y.astype(np.int64) * width + x.astype(np.int64)
    frame = np.bincount(flat, weights=p.astype(np.float64), minlength=height * width).reshape(shape)
    counts = np.bincount(flat, minlength=height * width).reshape(shape)
    return frame.astype(np.float32), counts.astype(np.uint32)


def smooth(frame: np.ndarray, pre_blur: int) -> np.ndarray:
    if pre_blur <= 1:
        return frame
    return cv2.blur(frame, (pre_blur, pre_blur), borderType=cv2.BORDER_REFLECT)


def normalize_pair(prev: np.ndarray, nxt: np.ndarray) -> "tuple[np.ndarray, np.ndarray] | None":
    """
    One affine map for both frames: joint mean to mid-gray, joint std to FLOW_CONTRAST_STD.
    Farneback's solver is regularized for 8-bit contrast and shrinks flow on unit-scale input.
    Returns None when the pair has no contrast at all.
    """
    prev = prev.astype(np.float64)
    nxt = nxt.astype(np.float64)
    mean = 0.5 * (prev.mean() + nxt.mean())
    std = np.sqrt(0.5 * (((prev - mean) ** 2).mean() + ((nxt - mean) ** 2).mean()))
    if not std > 0:
        return None
    gain = FLOW_CONTRAST_STD / std
    return (
        ((prev - mean) * gain + FLOW_MID_GRAY).astype(np.float32),
        ((nxt - mean) * gain + FLOW_MID_GRAY).astype(np.float32),
    )


def farneback(prev: np.ndarray, nxt: np.ndarray, cfg: PyramidConfig) -> np.ndarray:
    """Polynomial-expansion flow, shape (H, W, 2) with (u, v) in pixels per frame."""
    return cv2.calcOpticalFlowFarneback(
        np.ascontiguousarray(prev, dtype=np.float32),
        np.ascontiguousarray(nxt, dtype=np.float32),
        None,
        cfg.downscale,
        cfg.levels,
        cfg.window,
        cfg.iterations,
        cfg.poly_n,
        cfg.poly_sigma,
        0,
    )
