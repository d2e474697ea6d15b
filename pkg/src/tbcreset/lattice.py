"""Monte Carlo density-matrix trajectories on a finite periodic chain.

Each realization starts from ``|n0><n0|``, evolves unitarily under
``H(t) = -(delta/2)(K + K^dagger) + F0 cos(omega t) N`` and is replaced by
``|N_reset><N_reset|`` at exponentially distributed reset times. Unitary
segments use the exponential midpoint rule (one Hermitian eigendecomposition
per step), which is second order in the step size.

Both the initial and the reset state are pure, so a trajectory is carried as
a state vector ``psi`` with ``rho = |psi><psi|``; conjugating the full matrix
would cost a factor ``N`` more for the same result.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import CLOCKS, ModelParams

RNG_ALGORITHM = "numpy.random.PCG64; gaps = -log1p(-U)/lam (inverse CDF)"
HERMITICITY_LIMIT = 1e-9
NORM_LIMIT = 1e-9


class ConfigurationError(ValueError):
    """Lattice/parameter combination that cannot be simulated."""


class ConsistencyError(RuntimeError):
    """Propagation drifted away from a valid density matrix."""


@dataclass(frozen=True)
class Lattice:
    """Periodic ring whose sites carry consecutive integer labels."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(int(x) for x in self.labels)
        if len(labels) < 4:
            raise ConfigurationError("a ring needs at least 4 sites")
        if any(b - a != 1 for a, b in zip(labels, labels[1:])):
            raise ConfigurationError("site labels must be consecutive increasing integers")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_range(cls, first: int, n_sites: int) -> "Lattice":
        return cls(tuple(range(first, first + n_sites)))

    @classmethod
    def centered(cls, n_sites: int, n0: int, n_reset: int) -> "Lattice":
        """Ring whose label range is centred on the midpoint of ``n0`` and ``n_reset``.

        Keeps the position operator's jump at the wrap bond as far as
        possible from both sites.
        """
        mid = 0.5 * (n0 + n_reset)
        first = math.floor(mid - 0.5 * (n_sites - 1))
        return cls.from_range(first, n_sites)

    @property
    def n_sites(self) -> int:
        return len(self.labels)

    @property
    def positions(self) -> np.ndarray:
        return np.array(self.labels, dtype=float)

    def __contains__(self, label) -> bool:
        return self.labels[0] <= label <= self.labels[-1]

    def index(self, label: int) -> int:
        if label not in self:
            raise ConfigurationError(f"site {label} is outside {self.labels[0]}..{self.labels[-1]}")
        return int(label) - self.labels[0]


@dataclass(frozen=True)
class LatticeOperators:
    hop: np.ndarray
    position: np.ndarray
    h_static: np.ndarray
    f0: float
    omega: float

    def hamiltonian(self, t: float) -> np.ndarray:
        return self.h_static + self.f0 * math.cos(self.omega * t) * self.position


def build_operators(params: ModelParams, lattice: Lattice) -> LatticeOperators:
    for site, name in ((params.n0, "n0"), (params.n_reset, "n_reset")):
        if site not in lattice:
            raise ConfigurationError(f"{name}={site} is not a site of the lattice")
    n = lattice.n_sites
    hop = np.zeros((n, n))
    idx = np.arange(n)
    hop[idx, (idx + 1) % n] = 1.0
    hop[(idx + 1) % n, idx] = 1.0
    position = np.diag(lattice.positions)
    h_static = -0.5 * params.delta * hop
    return LatticeOperators(hop, position, h_static, params.field.f0, params.field.omega)


def default_dt_max(params: ModelParams) -> float:
    """Step cap resolving hopping and drive, with at least 50 steps per period."""
    d, f = params.delta, params.field
    return min(0.02 / d, 0.02 * f.period, 0.2 / max(abs(f.f0), d))


def projector(lattice: Lattice, label: int) -> np.ndarray:
    rho = np.zeros((lattice.n_sites, lattice.n_sites), dtype=complex)
    i = lattice.index(label)
    rho[i, i] = 1.0
    return rho


def _basis(lattice: Lattice, label: int) -> np.ndarray:
    psi = np.zeros(lattice.n_sites, dtype=complex)
    psi[lattice.index(label)] = 1.0
    return psi


def step_propagator(ops: LatticeOperators, t_mid: float, h: float) -> np.ndarray:
    """``exp(-i H(t_mid) h)`` from a Hermitian eigendecomposition."""
    evals, evecs = np.linalg.eigh(ops.hamiltonian(t_mid))
    return (evecs * np.exp(-1j * evals * h)) @ evecs.conj().T


def _conjugate(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return u @ rho @ u.conj().T


def _apply(u: np.ndarray, state: np.ndarray) -> np.ndarray:
    # state vector or density matrix
    return u @ state if state.ndim == 1 else _conjugate(u, state)


def hermiticity_residual(rho: np.ndarray) -> float:
    return float(np.max(np.abs(rho - rho.conj().T)))


def _hermitize(rho: np.ndarray) -> np.ndarray:
    drift = hermiticity_residual(rho)
    if drift > HERMITICITY_LIMIT:
        raise ConsistencyError(f"density matrix lost Hermiticity (residual {drift:.2e})")
    return 0.5 * (rho + rho.conj().T)


def evolve_unitary(rho, ops: LatticeOperators, t_start: float, t_end: float, dt_max: float) -> np.ndarray:
    """Propagate ``rho`` from ``t_start`` to ``t_end`` with equal midpoint steps no longer than ``dt_max``."""
    if t_end < t_start:
        raise ValueError("t_end must not precede t_start")
    if not dt_max > 0:
        raise ValueError("dt_max must be positive")
    rho = np.array(rho, dtype=complex)
    span = t_end - t_start
    if span == 0.0:
        return rho
    n_steps = max(1, math.ceil(span / dt_max - 1e-9))
    h = span / n_steps
    for k in range(n_steps):
        rho = _conjugate(step_propagator(ops, t_start + (k + 0.5) * h, h), rho)
    return _hermitize(rho)


def apply_reset(rho, lattice: Lattice, target: int) -> np.ndarray:
    """Reset channel: any unit-trace state goes to ``|target><target|``."""
    trace = np.trace(rho).real
    if abs(trace - 1.0) > 1e-9:
        raise ValueError(f"reset expects a unit-trace state, got trace {trace}")
    return projector(lattice, target)


@dataclass(frozen=True)
class ResetTrajectory:
    reset_times: np.ndarray
    horizon: float
    seed: int

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.reset_times]))

    @property
    def longest_stretch(self) -> float:
        """Longest reset-free stretch, including the final segment."""
        return float(np.max(np.diff(np.concatenate([[0.0], self.reset_times, [self.horizon]]))))


def sample_reset_times(lam: float, horizon: float, seed: int) -> ResetTrajectory:
    """Draw i.i.d. Exp(lam) gaps until their cumulative sum passes ``horizon``."""
    if not lam > 0 or not horizon > 0:
        raise ValueError("lam and horizon must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    chunk = max(16, math.ceil(2 * lam * horizon) + 8)
    times = []
    t = 0.0
    while True:
        for u in rng.random(chunk):
            t += -math.log1p(-u) / lam
            if t >= horizon:
                return ResetTrajectory(np.array(times), float(horizon), int(seed))
            times.append(t)


def no_reset_trajectory(horizon: float, seed: int = 0) -> ResetTrajectory:
    return ResetTrajectory(np.array([]), float(horizon), int(seed))


class _GridStepper:
    """Midpoint steps on the clock grid ``k * h``; full-step propagators are cached."""

    def __init__(self, ops: LatticeOperators, h: float):
        self.ops = ops
        self.h = h
        self._cache: dict[int, np.ndarray] = {}
        self._static = ops.f0 == 0.0

    def _full(self, k: int) -> np.ndarray:
        key = 0 if self._static else k
        u = self._cache.get(key)
        if u is None:
            u = step_propagator(self.ops, (k + 0.5) * self.h, self.h)
            self._cache[key] = u
        return u

    def advance(self, rho: np.ndarray, tau_a: float, tau_b: float) -> np.ndarray:
        """Propagate a state vector or density matrix between clock times ``tau_a <= tau_b``."""
        h = self.h
        snap = 1e-9 * h
        k = math.floor(tau_a / h + 1e-9)
        tau = tau_a
        if tau - k * h > snap:
            end = min((k + 1) * h, tau_b)
            rho = _apply(step_propagator(self.ops, 0.5 * (tau + end), end - tau), rho)
            tau = end
            k += 1
        while (k + 1) * h <= tau_b + snap:
            rho = _apply(self._full(k), rho)
            k += 1
            tau = k * h
        if tau_b - tau > snap:
            rho = _apply(step_propagator(self.ops, 0.5 * (tau + tau_b), tau_b - tau), rho)
        return rho


@dataclass
class TrajectoryResult:
    diagonals: np.ndarray  # (n_times, n_sites)
    max_trace_error: float
    max_hermiticity_error: float
    min_eigenvalue: float
    longest_stretch: float


def run_trajectory(
    params: ModelParams,
    lattice: Lattice,
    traj: ResetTrajectory,
    sample_times,
    dt_max: float | None = None,
    clock: str = "absolute",
    *,
    check: bool = True,
    _stepper: _GridStepper | None = None,
) -> TrajectoryResult:
    """Evolve one reset realization and record site occupations at ``sample_times``.

    With ``clock="absolute"`` the drive phase uses global time; with
    ``"restart"`` it restarts from zero after every reset.
    """
    if clock not in CLOCKS:
        raise ValueError(f"clock must be one of {CLOCKS}")
    sample_times = np.asarray(sample_times, dtype=float)
    if np.any(np.diff(sample_times) < 0) or sample_times[0] < 0 or sample_times[-1] > traj.horizon + 1e-12:
        raise ValueError("sample_times must be increasing and inside [0, horizon]")
    if dt_max is None:
        dt_max = default_dt_max(params)
    stepper = _stepper or _GridStepper(build_operators(params, lattice), dt_max)

    # Samples sort ahead of resets at the same instant.
    events = sorted([(t, 0, i) for i, t in enumerate(sample_times)] + [(t, 1, -1) for t in traj.reset_times])
    psi = _basis(lattice, params.n0)
    t_now, origin = 0.0, 0.0
    diag = np.empty((len(sample_times), lattice.n_sites))
    trace_err = herm_err = 0.0
    min_eig = np.inf
    for t_event, kind, i in events:
        if t_event > t_now:
            psi = stepper.advance(psi, t_now - origin, t_event - origin)
            t_now = t_event
        if kind == 0:
            diag[i] = np.abs(psi) ** 2
            if check:
                rho = np.outer(psi, psi.conj())
                trace_err = max(trace_err, abs(np.trace(rho).real - 1.0))
                herm_err = max(herm_err, hermiticity_residual(rho))
                min_eig = min(min_eig, float(np.linalg.eigvalsh(rho)[0]))
        else:
            norm = float(np.vdot(psi, psi).real)
            if abs(norm - 1.0) > NORM_LIMIT:
                raise ConsistencyError(f"reset reached with norm {norm}")
            psi = _basis(lattice, params.n_reset)
            if clock == "restart":
                origin = t_event
    if abs(float(np.vdot(psi, psi).real) - 1.0) > NORM_LIMIT:
        raise ConsistencyError("state lost normalization")
    return TrajectoryResult(diag, trace_err, herm_err, float(min_eig), traj.longest_stretch)


def finite_size_margin(params: ModelParams, lattice: Lattice, query_sites) -> float:
    """``n_sites/2 - max|m - n0|, |m - N_reset|`` over the queried sites."""
    reach = max(max(abs(m - params.n0), abs(m - params.n_reset)) for m in query_sites)
    return 0.5 * lattice.n_sites - reach


def finite_size_flag(params: ModelParams, lattice: Lattice, stretch: float, query_sites) -> bool:
    """True when a reset-free stretch lets the particle feel the ring's finite size."""
    return params.delta * stretch > finite_size_margin(params, lattice, query_sites)


@dataclass
class ObservableSeries:
    times: np.ndarray
    labels: tuple
    p_site: np.ndarray  # (n_times, n_sites) ensemble mean
    p_site_sd: np.ndarray
    mean_disp: np.ndarray
    mean_disp_sd: np.ndarray
    msd: np.ndarray
    msd_sd: np.ndarray
    n_realizations: int
    n_flagged: int
    max_trace_error: float
    max_hermiticity_error: float
    min_eigenvalue: float
    metadata: dict = field(default_factory=dict)

    def column(self, label: int) -> int:
        return int(label) - self.labels[0]

    def p(self, label: int) -> np.ndarray:
        return self.p_site[:, self.column(label)]

    def p_se(self, label: int) -> np.ndarray:
        return self.p_site_sd[:, self.column(label)] / math.sqrt(self.n_realizations)

    def mean_disp_se(self) -> np.ndarray:
        return self.mean_disp_sd / math.sqrt(self.n_realizations)


def _run_chunk(args):
    params, lattice, indices, seed, horizon, sample_times, dt_max, clock = args
    stepper = _GridStepper(build_operators(params, lattice), dt_max)
    out = []
    for i in indices:
        if params.lam > 0:
            traj = sample_reset_times(params.lam, horizon, seed + i)
        else:
            traj = no_reset_trajectory(horizon, seed + i)
        out.append(run_trajectory(params, lattice, traj, sample_times, dt_max, clock, _stepper=stepper))
    return out


def ensemble_average(
    params: ModelParams,
    lattice: Lattice,
    n_realizations: int,
    sample_times,
    dt_max: float | None = None,
    seed: int = 0,
    clock: str = "absolute",
    *,
    query_sites=None,
    workers: int = 1,
) -> ObservableSeries:
    """Average ``n_realizations`` trajectories seeded ``seed + i``.

    Error bars are standard deviations across realizations. Results are
    merged by index, so ``workers`` does not change the output.
    """
    if n_realizations < 2:
        raise ValueError("need at least two realizations")
    sample_times = np.asarray(sample_times, dtype=float)
    horizon = float(sample_times[-1])
    if dt_max is None:
        dt_max = default_dt_max(params)
    if query_sites is None:
        query_sites = (params.n0, params.n_reset)
    build_operators(params, lattice)  # validate before fanning out

    indices = list(range(n_realizations))
    if workers > 1:
        chunks = [indices[w::workers] for w in range(workers)]
        jobs = [(params, lattice, c, seed, horizon, sample_times, dt_max, clock) for c in chunks]
        results: list = [None] * n_realizations
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk, res in zip(chunks, pool.map(_run_chunk, jobs)):
                for i, r in zip(chunk, res):
                    results[i] = r
    else:
        results = _run_chunk((params, lattice, indices, seed, horizon, sample_times, dt_max, clock))

    diag = np.stack([r.diagonals for r in results])  # (R, T, N)
    offsets = lattice.positions - params.n0
    disp = diag @ offsets
    sq = diag @ offsets**2
    n_flagged = sum(finite_size_flag(params, lattice, r.longest_stretch, query_sites) for r in results)
    meta = {
        "n_sites": lattice.n_sites,
        "labels": [lattice.labels[0], lattice.labels[-1]],
        "seed": int(seed),
        "seeds": f"seed + i for i in 0..{n_realizations - 1}",
        "rng": RNG_ALGORITHM,
        "dt_max": dt_max,
        "clock": clock,
        "query_sites": list(query_sites),
        "finite_size_flagged": int(n_flagged),
    }
    return ObservableSeries(
        times=sample_times,
        labels=lattice.labels,
        p_site=diag.mean(axis=0),
        p_site_sd=diag.std(axis=0, ddof=1),
        mean_disp=disp.mean(axis=0),
        mean_disp_sd=disp.std(axis=0, ddof=1),
        msd=sq.mean(axis=0),
        msd_sd=sq.std(axis=0, ddof=1),
        n_realizations=n_realizations,
        n_flagged=int(n_flagged),
        max_trace_error=max(r.max_trace_error for r in results),
        max_hermiticity_error=max(r.max_hermiticity_error for r in results),
        min_eigenvalue=min(r.min_eigenvalue for r in results),
        metadata=meta,
    )


def available_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
