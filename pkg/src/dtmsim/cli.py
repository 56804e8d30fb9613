"""Command-line front end: simulate, compare, sweep and reduce.

Every command writes into ``--out`` (default ``./out``) a ``manifest.json``
with the resolved configuration next to its CSV outputs.  Floats in CSV files
are written with ``repr`` so a trajectory read back compares exactly equal.
Exit codes: 0 ok, 2 invalid input, 3 series divergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .model import ScenarioError, SingularNetworkError, load_scenario
from .model.scenario import reduced_document, save_document
from .reference_rk4 import RK4Config, rk4_simulate
from .sas_engine import SeriesDivergence, SimConfig, Trajectory, simulate
from .tuning import BASE_STEP, error_map, optimal_order, post_fault_probes, rows_to_csv, tuning_grid

log = logging.getLogger("dtmsim")

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 2, 3
CHANNELS = ("delta", "omega", "epq", "epd", "pe")


class UsageError(ValueError):
    pass


# -- argument parsing -------------------------------------------------------------

def seconds(text: str) -> float:
    """Float or fraction such as ``1/1200``."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number of seconds: {text!r}") from exc


def order_range(text: str) -> list[int]:
    """``A..B`` (inclusive), ``A..B:S`` with a stride, or a comma list."""
    try:
        if ".." in text:
            span, _, stride = text.partition(":")
            lo, hi = (int(v) for v in span.split(".."))
            orders = list(range(lo, hi + 1, int(stride) if stride else 1))
        else:
            orders = [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad order range {text!r}") from exc
    if not orders or min(orders) < 1:
        raise argparse.ArgumentTypeError("orders must be >= 1")
    return orders


def float_list(text: str) -> list[float]:
    try:
        return [seconds(v) for v in text.split(",") if v.strip()]
    except argparse.ArgumentTypeError as exc:
        raise argparse.ArgumentTypeError(f"bad list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dtmsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dtmsim {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", default="ieee39", help="scenario JSON path or bundled name (default ieee39)")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--duration", type=seconds, help="horizon T in seconds (default from scenario)")
        p.add_argument("--step", type=seconds, help="output / RK4 step (default 1/1200)")

    def dtm(p):
        p.add_argument("--order", type=int, help="series order K")
        p.add_argument("--window", type=seconds, help="window length t_w in seconds")
        p.add_argument("--parallel", action="store_true", help="build coefficients on a thread pool")
        p.add_argument("--workers", type=int, default=4)
        p.add_argument("--algebraic", choices=("series", "pointwise"), default="series",
                       help="electrical power from its series or recomputed from the states")

    p = sub.add_parser("simulate", help="run one simulation")
    common(p)
    dtm(p)
    p.add_argument("--method", choices=("dtm", "rk4"), default="dtm")
    p.add_argument("--plot", action="store_true", help="also write trajectory.png (needs matplotlib)")

    p = sub.add_parser("compare", help="run DTM and RK4 and report their difference")
    common(p)
    dtm(p)
    p.add_argument("--plot", action="store_true")

    p = sub.add_parser("sweep", help="measure accurate windows and pick the cheapest order")
    common(p)
    p.add_argument("--sweep-orders", type=order_range, default=order_range("4..20:2"))
    p.add_argument("--sweep-windows", type=float_list, help="windows for the error map (multiples of the step)")
    p.add_argument("--tol", type=float_list, default=[1e-5], help="comma list of tolerances")
    p.add_argument("--repeats", type=int, default=20, help="timing repetitions per order")
    p.add_argument("--plot", action="store_true")

    p = sub.add_parser("reduce", help="write the scenario with staged reduced matrices inlined")
    common(p)
    return parser


# -- CSV and manifest -----------------------------------------------------------------

def trajectory_header(n: int) -> list[str]:
    return ["t"] + [f"{c}_{i + 1}" for i in range(n) for c in CHANNELS]


def write_trajectory_csv(traj: Trajectory, path: Path) -> None:
    n = traj.states.shape[1]
    pe = traj.p_e if traj.p_e is not None else np.full(traj.states.shape[:2], np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(n))
        for t, x, p in zip(traj.times, traj.states, pe):
            row = [repr(float(t))]
            for i in range(n):
                row += [repr(float(v)) for v in x[i]] + [repr(float(p[i]))]
            w.writerow(row)


def read_trajectory_csv(path: Path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = (len(header) - 1) // len(CHANNELS)
    if header != trajectory_header(n):
        raise ValueError(f"{path}: unexpected trajectory header")
    data = np.array([[float(v) for v in r] for r in body]).reshape(len(body), -1)
    per = data[:, 1:].reshape(len(body), n, len(CHANNELS))
    return Trajectory(data[:, 0], per[:, :, :4], per[:, :, 4])


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def manifest(args, command: str, resolved: dict) -> dict:
    return {
        "command": command,
        "scenario": str(args.scenario),
        "out": str(args.out),
        "config": resolved,
        "versions": {"dtmsim": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }


# -- commands -----------------------------------------------------------------------

def _load(args):
    scenario = load_scenario(args.scenario)
    d = scenario.defaults
    duration = args.duration if args.duration is not None else d.get("duration", 6.0)
    step = args.step if args.step is not None else d.get("step", BASE_STEP)
    if not (duration > 0 and step > 0):
        raise UsageError("duration and step must be positive")
    return scenario, duration, step


def _sim_config(args, scenario, duration, step) -> SimConfig:
    d = scenario.defaults
    order = args.order if args.order is not None else int(d.get("order", 12))
    window = args.window if args.window is not None else d.get("window", 0.2)
    return SimConfig(order=order, window=window, duration=duration, step=step,
                     parallel=args.parallel, workers=args.workers, algebraic=args.algebraic)


def _config_dict(cfg: SimConfig) -> dict:
    return {k: getattr(cfg, k) for k in ("order", "window", "duration", "step", "parallel", "workers", "algebraic")}


def _aligned(window: float, step: float) -> bool:
    ratio = window / step
    return abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio)


def _timing(traj: Trajectory) -> dict:
    out = {"method": traj.method, "total_s": traj.wall_seconds, "samples": int(traj.times.size)}
    if traj.window_seconds is not None:
        out["windows"] = traj.n_windows
        out["boundaries"] = [float(b) for b in traj.boundaries]
        out["window_ms"] = [1e3 * float(v) for v in traj.window_seconds]
    else:
        out["steps"] = int(traj.meta.get("steps", 0))
    return out


def cmd_simulate(args) -> int:
    scenario, duration, step = _load(args)
    model = scenario.model
    args.out.mkdir(parents=True, exist_ok=True)
    if args.method == "dtm":
        cfg = _sim_config(args, scenario, duration, step)
        resolved = {"method": "dtm", **_config_dict(cfg)}
        traj = simulate(model, cfg)
    else:
        cfg = RK4Config(step=step, duration=duration)
        resolved = {"method": "rk4", "step": step, "duration": duration}
        traj = rk4_simulate(model, cfg)
    write_trajectory_csv(traj, args.out / "trajectory.csv")
    write_json(args.out / "timing.json", _timing(traj))
    write_json(args.out / "manifest.json", manifest(args, "simulate", resolved))
    if args.plot:
        _plot_trajectories(args.out / "trajectory.png", [traj])
    if traj.window_seconds is not None:
        print(f"dtm: {traj.n_windows} windows, {traj.wall_seconds:.3f} s")
    else:
        print(f"rk4: {traj.meta['steps']} steps, {traj.wall_seconds:.3f} s")
    return EXIT_OK


def error_table(a: Trajectory, b: Trajectory, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Absolute state differences on the time points both trajectories share."""
    ia, ib = [], []
    j = 0
    for i, t in enumerate(a.times):
        while j < b.times.size and b.times[j] < t - tol:
            j += 1
        if j < b.times.size and abs(b.times[j] - t) <= tol:
            ia.append(i)
            ib.append(j)
    if not ia:
        raise UsageError("trajectories share no time points")
    return a.times[ia], np.abs(a.states[ia] - b.states[ib])


def cmd_compare(args) -> int:
    scenario, duration, step = _load(args)
    cfg = _sim_config(args, scenario, duration, step)
    if not _aligned(cfg.window, step):
        raise UsageError(f"window {cfg.window} is not a multiple of the step {step}")
    model = scenario.model
    args.out.mkdir(parents=True, exist_ok=True)
    dtm = simulate(model, cfg)
    rk4 = rk4_simulate(model, RK4Config(step=step, duration=duration))
    times, err = error_table(dtm, rk4)
    n = model.n
    with open(args.out / "error.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{c}_{i + 1}" for i in range(n) for c in CHANNELS[:4]])
        for t, e in zip(times, err):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in e.ravel()])
    write_trajectory_csv(dtm, args.out / "dtm.csv")
    write_trajectory_csv(rk4, args.out / "rk4.csv")
    summary = {
        "max_abs": {c: float(err[:, :, j].max()) for j, c in enumerate(CHANNELS[:4])},
        "max_state_error": float(err.max()),
        "dtm": _timing(dtm),
        "rk4": _timing(rk4),
        "speedup": rk4.wall_seconds / dtm.wall_seconds if dtm.wall_seconds > 0 else math.inf,
    }
    write_json(args.out / "summary.json", summary)
    write_json(args.out / "manifest.json", manifest(args, "compare", _config_dict(cfg)))
    if args.plot:
        _plot_trajectories(args.out / "compare.png", [dtm, rk4])
    print(f"max |delta error| {summary['max_abs']['delta']:.3e} rad, "
          f"max |omega error| {summary['max_abs']['omega']:.3e} p.u.")
    print(f"dtm {dtm.wall_seconds:.3f} s ({dtm.n_windows} windows), rk4 {rk4.wall_seconds:.3f} s, "
          f"speedup {summary['speedup']:.1f}x")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario, duration, step = _load(args)
    model = scenario.model
    args.out.mkdir(parents=True, exist_ok=True)
    probes = post_fault_probes(model, step=step)
    orders = args.sweep_orders
    grid = tuning_grid(model, orders, args.tol, probes)
    recommendations = {}
    rows = []
    for tol in args.tol:
        try:
            K, t_w, report = optimal_order(model, tol, orders, duration, probes, repeats=args.repeats)
        except ValueError as exc:
            print(f"tol {tol:g}: {exc}")
            continue
        rows += report.rows
        recommendations[repr(tol)] = {"K": K, "t_w": t_w}
        print(f"tol {tol:g}: K* = {K}, t_w* = {t_w:.4f} s")
    (args.out / "tuning.csv").write_text(rows_to_csv(rows) if rows else grid.to_csv())
    windows = args.sweep_windows
    if windows is None:
        windows = [i * step for i in range(12, int(round(0.3 / step)) + 1, 12)]
    windows = [round(w / step) * step for w in windows]
    emap = error_map(model, orders, windows, probes)
    (args.out / "error_map.csv").write_text(emap.to_csv())
    write_json(args.out / "recommendation.json", recommendations)
    resolved = {"orders": orders, "windows": windows, "tol": args.tol, "duration": duration,
                "step": step, "repeats": args.repeats}
    write_json(args.out / "manifest.json", manifest(args, "sweep", resolved))
    if args.plot:
        _plot_heatmap(args.out / "error_map.png", emap, step)
    return EXIT_OK


def cmd_reduce(args) -> int:
    scenario = load_scenario(args.scenario)
    out = args.out if args.out.suffix == ".json" else args.out / "reduced.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_document(reduced_document(scenario), out)
    write_json(out.parent / "manifest.json", manifest(args, "reduce", {"output": str(out)}))
    print(f"wrote {out} ({scenario.model.n} machines)")
    return EXIT_OK


# -- optional plots -----------------------------------------------------------------

def _pyplot():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise UsageError("plotting needs matplotlib (pip install dtmsim[plot])") from exc
    return plt


def _plot_trajectories(path: Path, trajs) -> None:
    plt = _pyplot()
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    for traj, style in zip(trajs, ("-", "--")):
        axes[0].plot(traj.times, traj.delta, style, lw=1)
        axes[1].plot(traj.times, traj.omega, style, lw=1)
    axes[0].set_ylabel("rotor angle (rad)")
    axes[1].set_ylabel("speed deviation (p.u.)")
    axes[1].set_xlabel("time (s)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_heatmap(path: Path, emap, step: float) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 5))
    with np.errstate(divide="ignore"):
        data = np.log10(emap.errors.T)
    im = ax.imshow(data, origin="lower", aspect="auto",
                   extent=(emap.orders[0] - 0.5, emap.orders[-1] + 0.5, 0, len(emap.windows)))
    ax.set_yticks(np.arange(len(emap.windows)) + 0.5)
    ax.set_yticklabels([str(round(w / step)) for w in emap.windows])
    ax.set_xlabel("order K")
    ax.set_ylabel("window (steps of 1/1200 s)")
    fig.colorbar(im, label="log10 max error")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


COMMANDS = {"simulate": cmd_simulate, "compare": cmd_compare, "sweep": cmd_sweep, "reduce": cmd_reduce}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SeriesDivergence as exc:
        last = "unknown" if exc.time is None else f"{exc.time:.6f} s"
        print(f"error: series diverged ({exc}); last good time {last}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ScenarioError, SingularNetworkError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
