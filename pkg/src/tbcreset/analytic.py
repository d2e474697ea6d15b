"""Closed-form site probabilities and moments on the infinite chain.

Two conventions for the drive phase after a reset are supported through the
``clock`` keyword of the reset-averaged quantities:

``"restart"``
    the field's clock restarts at every reset, so each post-reset segment is
    a copy of the evolution from t = 0. The last-renewal integral then runs
    over ``J^2(delta |w(t')|)`` with ``t'`` the time since the last reset.
``"absolute"``
    the field keeps its global phase; a segment starting at ``s`` sees
    ``w(t) - w(s)``. This is the process generated by the reset master
    equation ``drho/dt = -i[H(t), rho] + lam (T rho - rho)``.

The two coincide for ``F0 = 0`` and differ at ``O(|J_p(F0/omega)| / omega)``
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drive import DriveField, w_values
from .quadrature import adaptive_simpson
from .specfun import bessel_j_array

CLOCKS = ("restart", "absolute")
DEFAULT_TOL = 1e-8
PLATEAU_CUTOFF = 40.0


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the driven, reset chain (hbar = 1)."""

    delta: float
    field: DriveField
    lam: float = 0.0
    n0: int = 0
    n_reset: int = 0

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.lam >= 0.0:
            raise ValueError(f"reset rate must be non-negative, got {self.lam}")
        if int(self.n0) != self.n0 or int(self.n_reset) != self.n_reset:
            raise ValueError("n0 and n_reset must be integers")

    @classmethod
    def build(cls, delta=1.0, f0=0.0, omega=1.0, lam=0.0, n0=0, n_reset=0) -> "ModelParams":
        return cls(delta, DriveField(f0, omega), lam, int(n0), int(n_reset))

    @property
    def shift(self) -> int:
        """Reset site minus initial site."""
        return self.n_reset - self.n0


def _check_clock(clock: str) -> None:
    if clock not in CLOCKS:
        raise ValueError(f"clock must be one of {CLOCKS}, got {clock!r}")


def _check_time(t) -> None:
    if np.any(np.asarray(t) < 0):
        raise ValueError("time must be non-negative")


def _panels(params: ModelParams, span: float) -> int:
    # Resolve the fastest of hopping, drive and field-phase scales before adapting.
    rate = max(params.delta, abs(params.field.f0), params.field.omega, params.lam)
    return max(4, math.ceil(2.0 * span * rate))


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def p_site_no_reset(params: ModelParams, m: int, t):
    """``J^2_{m-n0}(delta |w(t)|)``: occupation of site m without resets."""
    _check_time(t)
    arg = params.delta * np.abs(w_values(params.field, t))
    return _scalar(bessel_j_array(m - params.n0, arg) ** 2)


def mean_no_reset(params: ModelParams, t) -> float:
    _check_time(t)
    return 0.0


def msd_no_reset(params: ModelParams, t):
    """``delta^2 |w(t)|^2 / 2``."""
    _check_time(t)
    return _scalar(0.5 * params.delta**2 * np.abs(w_values(params.field, t)) ** 2)


def _renewal_integrand(params: ModelParams, m: int, t: float, clock: str):
    order = m - params.n_reset
    lam = params.lam
    if clock == "restart":

        def f(s):
            arg = params.delta * np.abs(w_values(params.field, s))
            return np.exp(-lam * s) * bessel_j_array(order, arg) ** 2

    else:
        w_t = complex(w_values(params.field, t))

        def f(s):
            arg = params.delta * np.abs(w_t - w_values(params.field, s))
            return np.exp(-lam * (t - s)) * bessel_j_array(order, arg) ** 2

    return f


def p_site_reset(params: ModelParams, m: int, t: float, tol: float = DEFAULT_TOL, clock: str = "restart") -> float:
    """Reset-averaged occupation of site ``m`` at time ``t``.

    ``exp(-lam t) J^2_{m-n0}(delta|w(t)|)`` plus the last-renewal integral
    over the time of the final reset, integrated to ``tol``. Raises
    :class:`~tbcreset.quadrature.QuadratureError` if the quadrature cannot
    reach ``tol``.
    """
    _check_clock(clock)
    if not 1e-12 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-12, 1e-6], got {tol}")
    _check_time(t)
    first = math.exp(-params.lam * t) * p_site_no_reset(params, m, t)
    if params.lam == 0.0 or t == 0.0:
        return first
    f = _renewal_integrand(params, m, t, clock)
    integral, _ = adaptive_simpson(f, 0.0, t, 0.5 * tol / params.lam, initial_panels=_panels(params, t))
    return first + params.lam * integral


def p_site_reset_curve(params: ModelParams, m: int, times, tol: float = DEFAULT_TOL, clock: str = "restart") -> np.ndarray:
    """:func:`p_site_reset` over an increasing grid of times.

    With the restart clock the integrand does not depend on ``t``, so the
    integral is accumulated interval by interval.
    """
    _check_clock(clock)
    times = np.asarray(times, dtype=float)
    _check_time(times)
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be non-decreasing")
    if clock == "absolute" or params.lam == 0.0:
        return np.array([p_site_reset(params, m, t, tol, clock) for t in times])
    f = _renewal_integrand(params, m, 0.0, clock)
    first = np.exp(-params.lam * times) * p_site_no_reset(params, m, times)
    edges = np.concatenate([[0.0], times])
    share = 0.5 * tol / params.lam / max(1, len(times))
    pieces = [
        adaptive_simpson(f, a, b, share, initial_panels=_panels(params, b - a))[0] for a, b in zip(edges[:-1], edges[1:])
    ]
    return first + params.lam * np.cumsum(pieces)


def mean_reset(params: ModelParams, t) -> float:
    """``(N_reset - n0)(1 - exp(-lam t))``; the same under both clocks."""
    _check_time(t)
    return _scalar(params.shift * -np.expm1(-params.lam * np.asarray(t, dtype=float)))


def msd_reset(params: ModelParams, t: float, tol: float = DEFAULT_TOL, clock: str = "restart") -> float:
    """Reset-averaged mean-squared displacement about ``n0``."""
    _check_clock(clock)
    _check_time(t)
    lam, d2 = params.lam, params.delta**2
    w_t = complex(w_values(params.field, t))
    first = math.exp(-lam * t) * 0.5 * d2 * abs(w_t) ** 2
    if lam == 0.0 or t == 0.0:
        return first
    if clock == "restart":

        def f(s):
            return np.exp(-lam * s) * np.abs(w_values(params.field, s)) ** 2

    else:

        def f(s):
            return np.exp(-lam * (t - s)) * np.abs(w_t - w_values(params.field, s)) ** 2

    scale = 0.5 * lam * d2
    integral, _ = adaptive_simpson(f, 0.0, t, 0.5 * tol / scale, initial_panels=_panels(params, t))
    return first + scale * integral + params.shift**2 * -math.expm1(-lam * t)


def plateau_tail_bound(params: ModelParams, cutoff: float) -> float:
    """Bound on ``(delta^2/2) int_cutoff^inf e^{-x} |w(x/lam)|^2 dx`` using ``|w(s)| <= s``."""
    c = cutoff
    return 0.5 * params.delta**2 * math.exp(-c) * (c * c + 2.0 * c + 2.0) / params.lam**2


def msd_plateau(params: ModelParams, tol: float = DEFAULT_TOL) -> float:
    """Long-time MSD with resets (restart clock), accurate to ``tol``.

    The integral over ``x = lam t`` is cut at 40, or further if the tail bound
    exceeds half of ``tol``.
    """
    if params.lam <= 0.0:
        raise ValueError("no plateau without resets (lam must be positive)")
    cutoff = PLATEAU_CUTOFF
    while plateau_tail_bound(params, cutoff) > 0.5 * tol:
        cutoff += 5.0
    lam = params.lam

    def f(x):
        return np.exp(-x) * np.abs(w_values(params.field, x / lam)) ** 2

    scale = 0.5 * params.delta**2
    integral, _ = adaptive_simpson(f, 0.0, cutoff, 0.5 * tol / scale, initial_panels=_panels(params, cutoff / lam))
    return params.shift**2 + scale * integral
