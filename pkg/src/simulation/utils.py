import math

import numpy as np
from numba import njit, prange

# log-intensity rounding slack when counting whole epsilon levels
LEVEL_TOLERANCE = 1e-9


@njit(cache=True)
def _log_intensity(field, px, py, log_floor):
    """Bilinear sample of the field at (px, py), clamped below by the floor, in log units."""
    rows, cols = field.shape
    x0 = int(math.floor(px))
    y0 = int(math.floor(py))
    fx = px - x0
    fy = py - y0
    x0 = min(max(x0, 0), cols - 1)
    y0 = min(max(y0, 0), rows - 1)
    x1 = min(x0 + 1, cols - 1)
    y1 = min(y0 + 1, rows - 1)
    value = (
        (1.0 - fx) * (1.0 - fy) * field[y0, x0]
        + fx * (1.0 - fy) * field[y0, x1]
        + (1.0 - fx) * fy * field[y1, x0]
        + fx * fy * field[y1, x1]
    )
    if value <= 0.0:
        return log_floor
    return max(math.log(value), log_floor)


@njit(cache=True)
def _pixel_events(field, x, y, margin, dx, dy, step_us, epsilon, log_floor, refractory_us, out_t, out_p, start, write):
    """
    Contrast-threshold events for one pixel over the whole motion trace.
    Returns the event count; writes into out_t/out_p from `start` when `write` is set.
    """
    n_steps = dx.shape[0]
    if n_steps < 2:
        return 0
    cx = x + margin
    cy = y + margin
    reference = _log_intensity(field, cx - dx[0], cy - dy[0], log_floor)
    previous = reference
    last_emit = -1.0e300
    count = 0
    for k in range(1, n_steps):
        current = _log_intensity(field, cx - dx[k], cy - dy[k], log_floor)
        change = current - reference
        # one event per whole epsilon; exact multiples fire their last level
        crossings = int(math.floor(abs(change) / epsilon + LEVEL_TOLERANCE))
        if crossings > 0:
            sign = 1 if change > 0.0 else -1
            t_prev = (k - 1) * step_us
            for j in range(1, crossings + 1):
                level = reference + sign * j * epsilon
                step = current - previous
                frac = (level - previous) / step if step != 0.0 else 1.0
                frac = min(max(frac, 0.0), 1.0)
                t_event = float(math.floor(t_prev + frac * step_us))
                if refractory_us > 0 and t_event - last_emit < refractory_us:
                    continue
                if write:
                    out_t[start + count] = np.int64(t_event)
                    out_p[start + count] = np.int8(sign)
                last_emit = t_event
                count += 1
            reference = reference + sign * crossings * epsilon
        previous = current
    return count


@njit(parallel=True, cache=True)
def count_pixel_events(field, width, height, margin, dx, dy, step_us, epsilon, log_floor, refractory_us):
    counts = np.zeros(width * height, dtype=np.int64)
    dummy_t = np.empty(0, dtype=np.int64)
    dummy_p = np.empty(0, dtype=np.int8)
    for pixel in prange(width * height):
        counts[pixel] = _pixel_events(
            field, pixel % width, pixel // width, margin, dx, dy, step_us,
            epsilon, log_floor, refractory_us, dummy_t, dummy_p, 0, False,
        )
    return counts


@njit(parallel=True, cache=True)
def fill_pixel_events(field, width, height, margin, dx, dy, step_us, epsilon, log_floor, refractory_us, offsets, out_t, out_x, out_y, out_p):
    for pixel in prange(width * height):
        start = offsets[pixel]
        written = _pixel_events(
            field, pixel % width, pixel // width, margin, dx, dy, step_us,
            epsilon, log_floor, refractory_us, out_t, out_p, start, True,
        )
        for i in range(start, start + written):
            out_x[i] = np.int32(pixel % width)
            out_y[i] = np.int32(pixel // width)


def render_pixel_events(field, width, height, margin, dx, dy, step_us, epsilon, floor, refractory_us):
    """
    Two passes over independent pixels (count, then fill at prefix-sum offsets),
    then one stable sort by timestamp. Output is pixel-major before the sort, so ties
    resolve by row then column.
    """
    field = np.ascontiguousarray(field, dtype=np.float64)
    dx = np.ascontiguousarray(dx, dtype=np.float64)
    dy = np.ascontiguousarray(dy, dtype=np.float64)
    log_floor = math.log(floor)
    args = (field, width, height, margin, dx, dy, float(step_us), float(epsilon), log_floor, float(refractory_us))

    counts = count_pixel_events(*args)
    offsets = np.zeros(counts.size, dtype=np.int64)
    np.cumsum(counts[:-1], out=offsets[1:])
    total = int(counts.sum())

    out_t = np.empty(total, dtype=np.int64)
    out_x = np.empty(total, dtype=np.int32)
    out_y = np.empty(total, dtype=np.int32)
    out_p = np.empty(total, dtype=np.int8)
    if total:
        fill_pixel_events(*args, offsets, out_t, out_x, out_y, out_p)

    order = np.argsort(out_t, kind="stable")
    return out_t[order], out_x[order], out_y[order], out_p[order]
