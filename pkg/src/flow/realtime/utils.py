import numpy as np
from numba import njit

NEVER = -1


@njit(cache=True)
def _neighbor_velocity(latest, pol, a, b, lo_index, hi_index, along_x, t, r, dt_max_us, v_max):
    """
    Velocity along one axis from the more recent same-polarity neighbor at -r / +r.
    Returns NaN when no usable neighbor exists or both sides fired at the same microsecond.
    """
    height = latest.shape[1]
    width = latest.shape[2]
    t_lo = NEVER
    t_hi = NEVER
    if along_x:
        if lo_index >= 0:
            t_lo = latest[pol, a, lo_index]
        if hi_index < width:
            t_hi = latest[pol, a, hi_index]
    else:
        if lo_index >= 0:
            t_lo = latest[pol, lo_index, b]
        if hi_index < height:
            t_hi = latest[pol, hi_index, b]

    if t_lo == t_hi:
        # no direction, or neither side fired
        return np.nan
    if t_lo > t_hi:
        t_n = t_lo
        offset = r
    else:
        t_n = t_hi
        offset = -r
    if t_n == NEVER:
        return np.nan
    dt = t - t_n
    if dt <= 0 or dt > dt_max_us:
        return np.nan
    v = offset / dt
    if abs(v) > v_max:
        return np.nan
    return v


@njit(cache=True)
def estimate_chunk(latest, t, x, y, p, r, dt_max_us, v_max, out_vx, out_vy):
    """
    Sequential per-event flow over one chunk. `latest` is the [polarity, row, col]
    latest-timestamp map and is updated in place after each lookup.
    """
    for i in range(t.shape[0]):
        pol = 0 if p[i] > 0 else 1
        xi = x[i]
        yi = y[i]
        ti = t[i]
        out_vx[i] = _neighbor_velocity(latest, pol, yi, xi, xi - r, xi + r, True, ti, r, dt_max_us, v_max)
        out_vy[i] = _neighbor_velocity(latest, pol, yi, xi, yi - r, yi + r, False, ti, r, dt_max_us, v_max)
        latest[pol, yi, xi] = ti


def bin_indices(t: np.ndarray, bin_rate: float) -> np.ndarray:
    # floor_divide is exact for integral products below 2**53
    return np.floor_divide(t.astype(np.float64) * bin_rate, 1e6).astype(np.int64)


def bin_count(duration_us: int, bin_rate: float) -> int:
    return int(np.ceil(duration_us * bin_rate / 1e6))
