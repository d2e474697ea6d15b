"""Command line front end: ``tbcreset {analytic,simulate,lindblad,compare,figures}``.

Every run writes a CSV with the columns in :data:`CSV_COLUMNS` plus a JSON
sidecar ``<csv>.meta.json`` holding the full configuration and run flags.
Settings come from (lowest to highest priority) built-in defaults, an INI
file given with ``--config`` (section ``[run]``), the ``TBCRESET_SEED``
environment variable, and explicit flags.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import os
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    ModelParams,
    mean_reset,
    msd_no_reset,
    msd_plateau,
    msd_reset,
    p_site_no_reset,
    p_site_reset_curve,
)
from .lattice import (
    RNG_ALGORITHM,
    Lattice,
    default_dt_max,
    ensemble_average,
    finite_size_flag,
    finite_size_margin,
    sample_reset_times,
)
from .lindblad import lindblad_evolve, renewal_check

CSV_COLUMNS = ("t", "m", "p_analytic", "p_mc_mean", "p_mc_sd", "mean_disp", "msd", "msd_plateau", "p_lindblad")
MODES = ("analytic", "simulate", "lindblad", "compare", "figures")
SEED_ENV = "TBCRESET_SEED"
FIG2_LAMBDAS = (0.0, 0.25, 1.0, 4.0)
FIRST_J0_ZERO_F0 = 0.2404825558

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_REJECTED = 0, 1, 2, 3


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "analytic"
    delta: float = 1.0
    f0: float = 1.0
    omega: float = 0.1
    lam: float = 0.25
    n0: int = 1
    n_reset: int = 10
    n_sites: int = 30
    t_start: float = 0.0
    t_end: float = 30.0
    grid_points: int = 60
    realizations: int = 1000
    seed: int = 0
    dt_max: float | None = None
    tol: float = 1e-8
    out: str = "tbcreset_out.csv"
    clock: str | None = None
    sites: tuple = (9, 10)
    max_discrepancy: float = 1e-5
    allow_finite_size: bool = False
    workers: int = 1
    figure: str = "all"

    def params(self) -> ModelParams:
        return ModelParams.build(self.delta, self.f0, self.omega, self.lam, self.n0, self.n_reset)

    def lattice(self) -> Lattice:
        return Lattice.centered(self.n_sites, self.n0, self.n_reset)

    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.grid_points)

    def resolved_clock(self) -> str:
        if self.clock is not None:
            return self.clock
        return "restart" if self.mode in ("analytic", "figures") else "absolute"

    def resolved_dt(self) -> float:
        return self.dt_max if self.dt_max is not None else default_dt_max(self.params())

    def validate(self) -> None:
        problems = []
        if self.mode not in MODES:
            problems.append(f"mode: must be one of {MODES}")
        for name in ("delta", "omega", "t_end", "tol", "max_discrepancy"):
            if not getattr(self, name) > 0:
                problems.append(f"{name}: must be positive")
        if self.lam < 0:
            problems.append("lam: must be non-negative")
        if self.t_start < 0 or self.t_start >= self.t_end:
            problems.append("t_start: must satisfy 0 <= t_start < t_end")
        if self.grid_points < 2:
            problems.append("grid_points: need at least 2")
        if self.n_sites < 4:
            problems.append("n_sites: need at least 4")
        if self.realizations < 2:
            problems.append("realizations: need at least 2")
        if self.dt_max is not None and not self.dt_max > 0:
            problems.append("dt_max: must be positive")
        if self.clock not in (None, "restart", "absolute"):
            problems.append("clock: must be 'restart' or 'absolute'")
        if self.mode in ("lindblad", "compare") and self.clock == "restart":
            problems.append("clock: the master equation uses the absolute drive phase")
        if not 1e-12 <= self.tol <= 1e-6:
            problems.append("tol: must lie in [1e-12, 1e-6]")
        if not 0 <= self.seed < 2**64:
            problems.append("seed: must be a 64-bit unsigned integer")
        if self.figure not in ("fig1", "fig2", "fig3", "all"):
            problems.append("figure: one of fig1, fig2, fig3, all")
        if not problems and self.mode in ("simulate", "lindblad", "compare"):
            lat = self.lattice()
            for m in self.sites:
                if m not in lat:
                    problems.append(f"sites: {m} is outside the lattice {lat.labels[0]}..{lat.labels[-1]}")
        if problems:
            raise UsageError("invalid configuration:\n  " + "\n  ".join(problems))


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw):
    if name == "sites":
        if isinstance(raw, str):
            return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
        return tuple(int(x) for x in raw)
    if name in ("dt_max", "clock") and (raw is None or str(raw).lower() in ("", "none", "default")):
        return None
    default = getattr(RunConfig, name)
    if isinstance(default, bool):
        return raw if isinstance(raw, bool) else str(raw).strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float) or name == "dt_max":
        return float(raw)
    return str(raw)


def _read_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise UsageError(f"config: cannot read {path}")
    section = parser["run"] if parser.has_section("run") else parser[parser.default_section]
    values = {}
    for key, raw in section.items():
        name = key.replace("-", "_")
        if name == "lambda":
            name = "lam"
        if name not in _FIELD_TYPES:
            raise UsageError(f"config: unknown key {key!r}")
        values[name] = raw
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tbcreset", description="Driven tight-binding chain with stochastic resets.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("figure", nargs="?", help="for 'figures': fig1, fig2, fig3 or all (default)")
    p.add_argument("--config", help="INI file with a [run] section of key = value settings")
    p.add_argument("--delta", type=float)
    p.add_argument("--f0", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--n0", type=int)
    p.add_argument("--n-reset", dest="n_reset", type=int)
    p.add_argument("--n-sites", dest="n_sites", type=int)
    p.add_argument("--t-start", dest="t_start", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int, help=f"master seed (also read from ${SEED_ENV})")
    p.add_argument("--dt-max", dest="dt_max", type=float)
    p.add_argument("--tol", type=float, help="quadrature tolerance")
    p.add_argument("--out", help="CSV path (a directory for 'figures')")
    p.add_argument(
        "--clock",
        choices=("restart", "absolute"),
        help="drive phase after a reset (default: restart for analytic/figures, absolute otherwise)",
    )
    p.add_argument("--sites", help="comma-separated site labels to report")
    p.add_argument("--max-discrepancy", dest="max_discrepancy", type=float, help="pass threshold for 'compare'")
    p.add_argument("--allow-finite-size", dest="allow_finite_size", action="store_true", default=None)
    p.add_argument("--workers", type=int)
    return p


def config_from_args(argv=None, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    args = build_parser().parse_intermixed_args(argv)
    values: dict = {}
    if args.config:
        values.update(_read_config_file(args.config))
    if environ.get(SEED_ENV):
        values["seed"] = environ[SEED_ENV]
    for name in _FIELD_TYPES:
        v = getattr(args, name, None)
        if v is not None and name not in ("mode", "figure"):
            values[name] = v
    values["mode"] = args.mode
    if args.figure is not None:
        if args.mode != "figures":
            raise UsageError("figure: only the 'figures' mode takes a positional figure name")
        values["figure"] = args.figure
    try:
        cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    cfg.validate()
    return cfg


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])


def write_metadata(path: Path, cfg: RunConfig, extra: dict) -> Path:
    meta = {
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(cfg).items()},
        "clock": cfg.resolved_clock(),
        "dt_max": cfg.resolved_dt(),
        "seed": cfg.seed,
        "rng": RNG_ALGORITHM,
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "columns": list(CSV_COLUMNS),
    }
    meta.update(extra)
    side = path.with_name(path.name + ".meta.json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")
    return side


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


def analytic_rows(params: ModelParams, times, sites, tol: float, clock: str) -> list[dict]:
    curves = {}
    for m in sites:
        if params.lam > 0:
            curves[m] = p_site_reset_curve(params, m, times, tol, clock)
        else:
            curves[m] = np.asarray(p_site_no_reset(params, m, times))
    plateau = msd_plateau(params, tol) if params.lam > 0 and clock == "restart" else None
    rows = []
    for i, t in enumerate(times):
        if params.lam > 0:
            mean, msd = mean_reset(params, t), msd_reset(params, t, tol, clock)
        else:
            mean, msd = 0.0, msd_no_reset(params, t)
        for m in sites:
            rows.append({"t": t, "m": m, "p_analytic": curves[m][i], "mean_disp": mean, "msd": msd, "msd_plateau": plateau})
    return rows


def moment_rows(params: ModelParams, times, tol: float) -> list[dict]:
    """MSD-only rows (restart clock) for the MSD figures."""
    plateau = msd_plateau(params, tol) if params.lam > 0 else None
    rows = []
    for t in times:
        if params.lam > 0:
            mean, msd = mean_reset(params, t), msd_reset(params, t, tol)
        else:
            mean, msd = 0.0, msd_no_reset(params, t)
        rows.append({"t": t, "mean_disp": mean, "msd": msd, "msd_plateau": plateau})
    return rows


def _guard_simulation(cfg: RunConfig, params: ModelParams, lattice: Lattice, horizon: float) -> int:
    if params.lam == 0:
        return cfg.realizations * int(finite_size_flag(params, lattice, horizon, cfg.sites))
    flagged = 0
    for i in range(cfg.realizations):
        traj = sample_reset_times(params.lam, horizon, cfg.seed + i)
        flagged += finite_size_flag(params, lattice, traj.longest_stretch, cfg.sites)
    return flagged


class Rejected(RuntimeError):
    pass


def run_simulate(cfg: RunConfig, out: Path) -> int:
    params, lattice, times = cfg.params(), cfg.lattice(), cfg.times()
    flagged = _guard_simulation(cfg, params, lattice, float(times[-1]))
    if flagged and not cfg.allow_finite_size:
        raise Rejected(
            f"finite-size guard fired for {flagged}/{cfg.realizations} realizations; "
            "use more sites or pass --allow-finite-size"
        )
    clock = cfg.resolved_clock()
    series = ensemble_average(
        params, lattice, cfg.realizations, times, cfg.resolved_dt(), cfg.seed, clock,
        query_sites=cfg.sites, workers=cfg.workers,
    )
    analytic = {m: _analytic_curve(params, m, times, cfg.tol, clock) for m in cfg.sites}
    rows = []
    for i, t in enumerate(times):
        for m in cfg.sites:
            rows.append({
                "t": t, "m": m, "p_analytic": analytic[m][i],
                "p_mc_mean": series.p(m)[i], "p_mc_sd": series.p_site_sd[i, series.column(m)],
                "mean_disp": series.mean_disp[i], "msd": series.msd[i],
            })
    write_csv(out, rows)
    write_metadata(out, cfg, {
        "ensemble": series.metadata,
        "flags": {"finite_size_flagged": series.n_flagged, "override": bool(flagged)},
        "conservation": {
            "max_trace_error": series.max_trace_error,
            "max_hermiticity_error": series.max_hermiticity_error,
            "min_eigenvalue": series.min_eigenvalue,
        },
    })
    return EXIT_OK


def _analytic_curve(params, m, times, tol, clock):
    if params.lam > 0:
        return p_site_reset_curve(params, m, times, tol, clock)
    return np.asarray(p_site_no_reset(params, m, times))


def run_lindblad(cfg: RunConfig, out: Path) -> int:
    params, lattice, times = cfg.params(), cfg.lattice(), cfg.times()
    fired = params.delta * times[-1] > finite_size_margin(params, lattice, cfg.sites)
    if fired and not cfg.allow_finite_size:
        raise Rejected("finite-size guard fired for the requested horizon; use more sites or --allow-finite-size")
    grid = times if times[0] > 0 else times[1:]
    rho = lindblad_evolve(params, lattice, grid, cfg.resolved_dt())
    diag = np.real(np.diagonal(rho, axis1=1, axis2=2))
    if times[0] == 0:
        d0 = np.zeros((1, lattice.n_sites))
        d0[0, lattice.index(params.n0)] = 1.0
        diag = np.vstack([d0, diag])
    offsets = lattice.positions - params.n0
    rows = []
    for i, t in enumerate(times):
        for m in cfg.sites:
            rows.append({
                "t": t, "m": m, "p_lindblad": diag[i, lattice.index(m)],
                "mean_disp": float(diag[i] @ offsets), "msd": float(diag[i] @ offsets**2),
            })
    write_csv(out, rows)
    trace_err = float(np.max(np.abs(np.trace(rho, axis1=1, axis2=2).real - 1.0)))
    write_metadata(out, cfg, {"flags": {"finite_size_guard": bool(fired)}, "conservation": {"max_trace_error": trace_err}})
    return EXIT_OK


def run_compare(cfg: RunConfig, out: Path) -> int:
    params, lattice, times = cfg.params(), cfg.lattice(), cfg.times()
    grid = times if times[0] > 0 else times[1:]
    dt = cfg.resolved_dt()
    lat_report = renewal_check(params, lattice, grid, cfg.max_discrepancy, sites=cfg.sites, dt_max=dt, reference="lattice")
    closed = renewal_check(params, lattice, grid, cfg.max_discrepancy, sites=cfg.sites, dt_max=dt, reference="closed_form")
    rows = []
    for i, t in enumerate(grid):
        for j, m in enumerate(cfg.sites):
            rows.append({"t": t, "m": m, "p_analytic": closed.expected[i, j], "p_lindblad": closed.lindblad[i, j]})
    write_csv(out, rows)
    report = {
        "lattice_renewal": {
            "max_discrepancy": lat_report.max_discrepancy, "tolerance": cfg.max_discrepancy, "passed": lat_report.passed,
        },
        "closed_form": {
            "max_discrepancy_in_window": closed.max_discrepancy,
            "max_discrepancy_all": float(closed.discrepancy.max()),
            "points_in_window": int(closed.in_window.sum()),
            "points_total": int(closed.in_window.size),
        },
    }
    write_metadata(out, cfg, {"report": report})
    print(json.dumps(report, indent=2))
    return EXIT_OK if lat_report.passed else EXIT_FAILED


PLOT_TEMPLATE = '''"""Plot {name} from the CSV files next to this script (matplotlib)."""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
FILES = {files!r}


def load(name):
    with open(HERE / name) as fh:
        rows = list(csv.DictReader(fh))
    num = lambda s: float(s) if s else float("nan")
    return [{{k: (num(v) if k != "m" else v) for k, v in r.items()}} for r in rows]


fig, axes = plt.subplots(1, len(FILES), figsize=(5 * len(FILES), 4), squeeze=False)
for ax, (label, name) in zip(axes[0], FILES.items()):
    rows = load(name)
    sites = sorted({{r["m"] for r in rows if r["m"]}})
    if sites:
        for m in sites:
            sel = [r for r in rows if r["m"] == m]
            t = [r["t"] for r in sel]
            ax.plot(t, [r["p_analytic"] for r in sel], label=f"m={{m}} analytic")
            ax.errorbar(t, [r["p_mc_mean"] for r in sel], yerr=[r["p_mc_sd"] for r in sel], fmt="o", ms=3,
                        label=f"m={{m}} Monte Carlo")
        ax.set_ylabel("site occupation")
    else:
        t = [r["t"] for r in rows]
        line, = ax.plot(t, [r["msd"] for r in rows], "--", label=label)
        plateau = rows[0]["msd_plateau"]
        if plateau == plateau:
            ax.axhline(plateau, color=line.get_color())
        ax.set_ylabel("mean-squared displacement")
    ax.set_xlabel("t")
    ax.set_title(label)
    ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig(HERE / "{name}.png", dpi=150)
if "--show" in sys.argv:
    plt.show()
'''


def _write_plot_script(directory: Path, name: str, files: dict) -> Path:
    path = directory / f"plot_{name}.py"
    path.write_text(PLOT_TEMPLATE.format(name=name, files=files))
    return path


def run_figures(cfg: RunConfig, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    which = ("fig1", "fig2", "fig3") if cfg.figure == "all" else (cfg.figure,)
    for name in which:
        if name == "fig1":
            _figure1(cfg, out_dir)
        else:
            _msd_figure(cfg, out_dir, name)
    return EXIT_OK


def _figure1(cfg: RunConfig, out_dir: Path) -> None:
    files = {}
    for panel, omega in (("a", 0.1), ("b", 10.0)):
        sub = dataclasses.replace(
            cfg, mode="simulate", delta=1.0, lam=0.25, f0=1.0, omega=omega, n0=1, n_reset=10, n_sites=30,
            sites=(9, 10), clock=cfg.clock or "restart", allow_finite_size=True,
        )
        path = out_dir / f"fig1{panel}_omega{omega:g}.csv"
        run_simulate(sub, path)
        files[f"({panel}) omega={omega:g}"] = path.name
    _write_plot_script(out_dir, "fig1", files)


def _msd_figure(cfg: RunConfig, out_dir: Path, name: str) -> None:
    f0 = 1.0 if name == "fig2" else FIRST_J0_ZERO_F0
    files = {}
    for lam in FIG2_LAMBDAS:
        sub = dataclasses.replace(cfg, mode="analytic", delta=1.0, f0=f0, omega=0.1, lam=lam, n0=1, n_reset=10, clock="restart")
        path = out_dir / f"{name}_lambda{lam:g}.csv"
        write_csv(path, moment_rows(sub.params(), sub.times(), sub.tol))
        write_metadata(path, sub, {"figure": name})
        files[f"lambda={lam:g}"] = path.name
    _write_plot_script(out_dir, name, files)


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    if cfg.mode == "analytic":
        rows = analytic_rows(cfg.params(), cfg.times(), cfg.sites, cfg.tol, cfg.resolved_clock())
        write_csv(out, rows)
        write_metadata(out, cfg, {})
        return EXIT_OK
    if cfg.mode == "simulate":
        return run_simulate(cfg, out)
    if cfg.mode == "lindblad":
        return run_lindblad(cfg, out)
    if cfg.mode == "compare":
        return run_compare(cfg, out)
    return run_figures(cfg, out if cfg.out != RunConfig.out else Path("figures"))


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except UsageError as exc:
        print(f"tbcreset: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(cfg)
    except Rejected as exc:
        print(f"tbcreset: run rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except (ArithmeticError, RuntimeError) as exc:
        print(f"tbcreset: numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
