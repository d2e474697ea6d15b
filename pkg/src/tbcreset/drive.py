"""The drive integral w(t) = int_0^t exp(i (F0/omega) sin(omega t')) dt'.

Evaluated through the Bessel expansion of the integrand, which integrates
term by term in closed form:

    w(t) = J_0(r) t + sum_{p != 0} J_p(r) (exp(i p omega t) - 1) / (i p omega),

with r = F0/omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import bessel_j, bessel_j_table, truncation_index

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class DriveField:
    """Field ``F0 cos(omega t)`` acting on the position operator."""

    f0: float
    omega: float
    _coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.omega > 0.0 or not math.isfinite(self.omega):
            raise ValueError(f"omega must be positive and finite, got {self.omega}")
        if not math.isfinite(self.f0):
            raise ValueError(f"f0 must be finite, got {self.f0}")
        coeffs = bessel_j_table(self._order_cutoff(DEFAULT_TOL), self.ratio)
        coeffs.setflags(write=False)
        object.__setattr__(self, "_coeffs", coeffs)

    @property
    def ratio(self) -> float:
        return self.f0 / self.omega

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def _order_cutoff(self, tol: float) -> int:
        # |J_p(r)| <= (|r|/2)^p / p!, so the dropped tail is bounded by
        # 2 * sum_{p>P} (|r|/2)^p / p! * 2 / (p omega).
        half = 0.5 * abs(self.ratio)
        p = truncation_index(self.ratio)
        while True:
            bound, term, q = 0.0, 0.0, p + 1
            log_term = q * math.log(half) - math.lgamma(q + 1) if half > 0 else -math.inf
            while q < p + 400:
                term = math.exp(log_term) if log_term > -745 else 0.0
                bound += 4.0 * term / (q * self.omega)
                if term == 0.0 or term < 1e-30 * max(bound, 1e-300):
                    break
                q += 1
                log_term += math.log(half) - math.log(q)
            if bound <= 0.1 * tol:
                return p
            p += 10

    def coefficients(self, tol: float = DEFAULT_TOL) -> np.ndarray:
        """``J_p(ratio)`` for ``p = 0..P`` with ``P`` large enough for ``tol``."""
        cutoff = self._order_cutoff(tol)
        if cutoff < len(self._coeffs):
            return self._coeffs[: cutoff + 1]
        return bessel_j_table(cutoff, self.ratio)


@dataclass(frozen=True)
class DriveSample:
    t: float
    w: complex

    @property
    def u(self) -> float:
        return self.w.real

    @property
    def v(self) -> float:
        return self.w.imag


def w_values(drive: DriveField, t, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Vectorised w(t) over an array of non-negative times."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("w(t) is defined for t >= 0")
    c = drive.coefficients(tol)
    out = c[0] * t.astype(complex)
    if drive.f0 == 0.0 or len(c) == 1:
        return out
    p = np.arange(1, len(c))
    theta = np.multiply.outer(t, p * drive.omega)
    # J_{-p} = (-1)^p J_p pairs the +p and -p terms:
    #   J_p [(e^{i p wt} - 1) - (-1)^p (e^{-i p wt} - 1)] / (i p omega)
    sgn = np.where(p % 2 == 0, 1.0, -1.0)
    ep = np.expm1(1j * theta)
    em = np.expm1(-1j * theta)
    terms = (c[1:] / (1j * p * drive.omega)) * (ep - sgn * em)
    return out + terms.sum(axis=-1)


def eval_w(drive: DriveField, t: float, tol: float = DEFAULT_TOL) -> DriveSample:
    """Evaluate w(t) to absolute accuracy ``tol``."""
    if not 1e-14 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-14, 1e-6], got {tol}")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return DriveSample(float(t), complex(w_values(drive, float(t), tol)))


def w_increment(drive: DriveField, t_start, t_end, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``w(t_end) - w(t_start)``, the drive integral over ``[t_start, t_end]``."""
    return w_values(drive, t_end, tol) - w_values(drive, t_start, tol)


def effective_tunnelling(drive: DriveField, delta: float) -> float:
    """Stroboscopic hopping rate ``delta * J_0(F0/omega)``."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return delta * bessel_j(0, drive.ratio)
