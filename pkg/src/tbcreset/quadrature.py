"""Adaptive Simpson quadrature, refined breadth-first so the integrand is
called on whole arrays of nodes at a time."""

from __future__ import annotations

from typing import Callable

import numpy as np

MAX_INTERVALS = 2**20
MIN_DEPTH = 5


class QuadratureError(RuntimeError):
    """Raised when the interval cap is hit before the tolerance is met."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, error estimate={error:.3e})")
        self.estimate = estimate
        self.error = error


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-8,
    *,
    initial_panels: int = 1,
    max_intervals: int = MAX_INTERVALS,
    min_depth: int = MIN_DEPTH,
) -> tuple[float, float]:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    Each interval is accepted once ``|S_fine - S_coarse| / 15`` falls below
    its share of ``tol`` (proportional to its width), and the Richardson
    corrected value is kept. ``f`` must accept and return 1-d arrays.
    No interval is accepted before ``min_depth`` bisections, which guards
    against the coarse and fine rules agreeing by aliasing on an
    oscillatory integrand.

    Returns ``(value, error_estimate)``.
    """
    if b == a:
        return 0.0, 0.0
    if b < a:
        value, err = adaptive_simpson(
            f, b, a, tol, initial_panels=initial_panels, max_intervals=max_intervals, min_depth=min_depth
        )
        return -value, err
    length = b - a
    edges = np.linspace(a, b, max(1, int(initial_panels)) + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    n = len(lo)
    vals = np.asarray(f(np.concatenate([lo, mid, hi[-1:]])), dtype=float)
    f_lo = vals[:n]
    f_mid = vals[n : 2 * n]
    f_hi = np.append(f_lo[1:], vals[-1])
    coarse = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)

    total = 0.0
    err_total = 0.0
    n_intervals = n
    depth = 0
    while len(lo) > 0:
        q1 = 0.5 * (lo + mid)
        q3 = 0.5 * (mid + hi)
        fq = np.asarray(f(np.concatenate([q1, q3])), dtype=float)
        f_q1, f_q3 = fq[: len(lo)], fq[len(lo) :]
        width = hi - lo
        left = width / 12.0 * (f_lo + 4.0 * f_q1 + f_mid)
        right = width / 12.0 * (f_mid + 4.0 * f_q3 + f_hi)
        fine = left + right
        err = np.abs(fine - coarse) / 15.0
        done = (err <= tol * width / length) | (width <= 1e-13 * length)
        if depth < min_depth:
            done[:] = False
        depth += 1
        total += float(np.sum(fine[done] + (fine[done] - coarse[done]) / 15.0))
        err_total += float(np.sum(err[done]))
        keep = ~done
        if not np.any(keep):
            break
        n_intervals += int(np.count_nonzero(keep))
        if n_intervals > max_intervals:
            pending = float(np.sum(fine[keep]))
            raise QuadratureError(
                "adaptive Simpson hit the interval cap",
                total + pending,
                err_total + float(np.sum(err[keep])),
            )
        lo_k, mid_k, hi_k = lo[keep], mid[keep], hi[keep]
        lo = np.concatenate([lo_k, mid_k])
        hi = np.concatenate([mid_k, hi_k])
        mid = np.concatenate([q1[keep], q3[keep]])
        f_lo_new = np.concatenate([f_lo[keep], f_mid[keep]])
        f_hi = np.concatenate([f_mid[keep], f_hi[keep]])
        f_mid = np.concatenate([f_q1[keep], f_q3[keep]])
        f_lo = f_lo_new
        coarse = np.concatenate([left[keep], right[keep]])
    return total, err_total

