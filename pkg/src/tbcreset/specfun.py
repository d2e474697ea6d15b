"""Integer-order Bessel functions of the first kind.

Small arguments (where the ascending series has monotonically shrinking
terms) use the series directly; everything else uses Miller's downward
recurrence normalised with ``J_0 + 2 * sum_k J_2k = 1``. Only numpy is used.
"""

from __future__ import annotations

import math

import numpy as np

MAX_ARG = 1.0e4
_RESCALE = 1.0e250
_TINY = 1.0e-20

# McMahon-style seeds for the first zeros of J_0, refined by Newton below.
_J0_ZERO_SEEDS = tuple((k - 0.25) * math.pi + 1.0 / (8.0 * (k - 0.25) * math.pi) for k in range(1, 21))


def truncation_index(x: float) -> int:
    """Index beyond which ``|J_p(x)|`` is negligible for series sums in ``p``."""
    return max(40, math.ceil(abs(x)) + 30)


def _start_index(nmax: int, x: float) -> int:
    m = max(nmax, math.ceil(x)) + 20 + math.ceil(12.0 * max(x, 1.0) ** (1.0 / 3.0))
    return m + (m % 2)


def _series(n: int, x: float) -> float:
    # n >= 0, x >= 0
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    log_lead = n * (math.log(x) - math.log(2.0)) - math.lgamma(n + 1)
    if log_lead < -745.0:
        return 0.0
    q = -0.25 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * (n + k))
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return math.exp(log_lead) * total


def _miller(nmax: int, x: float) -> np.ndarray:
    # x > 0; returns J_0..J_nmax
    m = _start_index(nmax, x)
    out = np.zeros(nmax + 1)
    two_over_x = 2.0 / x
    j_next, j_cur = 0.0, 1e-300
    norm = 0.0
    for k in range(m, 0, -1):
        j_prev = k * two_over_x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if k - 1 <= nmax:
            out[k - 1] = j_cur
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
        if abs(j_cur) > _RESCALE:
            j_cur /= _RESCALE
            j_next /= _RESCALE
            norm /= _RESCALE
            out /= _RESCALE
    norm += j_cur
    return out / norm


def _check_arg(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"Bessel argument must be finite, got {x}")
    return x


def bessel_j(n: int, x: float) -> float:
    """Return ``J_n(x)`` for integer ``n`` and real ``x``.

    Accurate to about 1e-13 absolute for ``|x| <= 1e4``. Negative orders and
    arguments use ``J_{-n}(x) = J_n(-x) = (-1)^n J_n(x)``.
    """
    n = int(n)
    x = _check_arg(x)
    sign = 1.0
    if n < 0:
        n = -n
        sign = -1.0 if n % 2 else 1.0
    if x < 0.0:
        x = -x
        if n % 2:
            sign = -sign
    if x * x <= 4.0 * (n + 1) or x == 0.0:
        value = _series(n, x)
    else:
        value = _miller(n, x)[n]
    return sign * value


def bessel_j_table(nmax: int, x: float) -> np.ndarray:
    """Return ``[J_0(x), ..., J_nmax(x)]`` from one recurrence pass."""
    x = _check_arg(x)
    if nmax < 0:
        raise ValueError("nmax must be non-negative")
    if x == 0.0:
        out = np.zeros(nmax + 1)
        out[0] = 1.0
        return out
    if abs(x) < _TINY:
        vals = np.array([_series(k, abs(x)) for k in range(nmax + 1)])
    else:
        vals = _miller(nmax, abs(x))
    if x < 0.0:
        vals[1::2] *= -1.0
    return vals


def bessel_j_array(n: int, x) -> np.ndarray:
    """Vectorised ``J_n`` over an array of non-negative-or-negative arguments.

    Runs Miller's recurrence for all elements at once with a common starting
    index, rescaling element-wise to avoid overflow.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("Bessel argument must be finite")
    n = int(n)
    sign = 1.0
    if n < 0:
        n = -n
        sign = -1.0 if n % 2 else 1.0
    ax = np.abs(x)
    flat = ax.ravel()
    result = np.zeros_like(flat)
    # Tiny arguments would overflow the recurrence; use the ascending series there.
    tiny = flat < _TINY
    if np.any(tiny):
        result[tiny] = [_series(n, v) for v in flat[tiny]]
    live = ~tiny
    if np.any(live):
        xs = flat[live]
        m = _start_index(n, float(xs.max()))
        two_over_x = 2.0 / xs
        j_next = np.zeros_like(xs)
        j_cur = np.full_like(xs, 1e-300)
        norm = np.zeros_like(xs)
        keep = np.zeros_like(xs)
        for k in range(m, 0, -1):
            j_prev = k * two_over_x * j_cur - j_next
            j_next, j_cur = j_cur, j_prev
            if k - 1 == n:
                keep = j_cur.copy()
            if (k - 1) % 2 == 0 and k - 1 > 0:
                norm += 2.0 * j_cur
            big = np.abs(j_cur) > _RESCALE
            if np.any(big):
                j_cur[big] /= _RESCALE
                j_next[big] /= _RESCALE
                norm[big] /= _RESCALE
                keep[big] /= _RESCALE
        norm += j_cur
        result[live] = keep / norm
    result = result.reshape(ax.shape)
    if n % 2:
        result = np.where(x < 0.0, -result, result)
    return sign * result


def j0_zero(k: int) -> float:
    """k-th positive zero of ``J_0`` for ``1 <= k <= 20``."""
    if not 1 <= int(k) <= len(_J0_ZERO_SEEDS):
        raise ValueError(f"k must lie in 1..{len(_J0_ZERO_SEEDS)}, got {k}")
    x = _J0_ZERO_SEEDS[int(k) - 1]
    for _ in range(50):
        step = bessel_j(0, x) / bessel_j(1, x)  # J_0' = -J_1
        x += step
        if abs(step) < 1e-15 * x:
            break
    return x
