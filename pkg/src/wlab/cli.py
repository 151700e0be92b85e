"""Command-line front end: ``wlab simulate | inequalities | convergence | regularity | gallery``.

Exit codes: 0 success, 2 invalid input, 3 degeneracy, 4 nonconvergence,
5 a diagnostic missed its threshold.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from . import io as wio
from .config import GALLERY, load
from .errors import DegeneracyError, NonconvergenceError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DEGENERACY = 3
EXIT_NONCONVERGENCE = 4
EXIT_THRESHOLD = 5

log = logging.getLogger("wlab")


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("WLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"WLAB_THREADS must be a whole number, got {env!r}")
    return 1


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {out}: {exc}") from exc
    return out


class _Run:
    """Collects manifest fields and writes the manifest on exit."""

    def __init__(self, command, out: Path | None, cfg=None, seeds=()):
        self.command = command
        self.out = out
        self.cfg = cfg
        self.seeds = list(seeds)
        self.outputs: list[str] = []
        self.started = time.time()

    def write(self, name: str, text: str):
        wio.write_text(self.out / name, text)
        self.outputs.append(name)

    def finish(self, status: int) -> int:
        if self.out is None:
            return status
        fields = {
            "command": self.command,
            "scenario": self.cfg.source if self.cfg else "",
            "scenario_hash": self.cfg.hash if self.cfg else "",
            "artifact_version": __version__,
            "rng_seeds": self.seeds or "none",
            "outputs": self.outputs,
            "started": _dt.datetime.fromtimestamp(self.started, _dt.timezone.utc).isoformat(timespec="seconds"),
            "duration_s": f"{time.time() - self.started:.3f}",
            "exit_status": status,
        }
        wio.write_text(self.out / "manifest.txt", wio.manifest_text(fields))
        return status


def _step_failure(exc) -> int:
    where = ""
    if getattr(exc, "step_index", None) is not None:
        where = f" at step {exc.step_index} (t={exc.t:.6g})"
    if isinstance(exc, DegeneracyError):
        print(f"degeneracy{where}: {exc}", file=sys.stderr)
        return EXIT_DEGENERACY
    print(f"nonconvergence{where}: {exc}", file=sys.stderr)
    return EXIT_NONCONVERGENCE


# -- simulate ------------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .integrator import StepMonitor, EnergyRow, energy_balance_report, simulate

    from .model import validate_scenario

    cfg = load(args.config)
    s = cfg.scenario()
    problems = validate_scenario(s)
    if problems:
        raise ValidationError("; ".join(str(p) for p in problems))
    out = _out_dir(args.out)
    run = _Run("simulate", out, cfg)
    traj = simulate(s)
    run.write("monitors.csv", wio.records_csv(traj.monitors, StepMonitor.CSV_COLUMNS))
    run.write("energy.csv", wio.records_csv(energy_balance_report(traj), EnergyRow.CSV_COLUMNS))
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    grid = traj.material.grid
    for stepno, st in zip(traj.snapshot_steps, traj.snapshots):
        for name in ("u", "v"):
            field = getattr(st, name)
            if grid.dim == 1:
                rel = f"snapshots/{name}_{stepno:06d}.csv"
                wio.write_text(out / rel, wio.snapshot_csv(field, grid))
            else:
                rel = f"snapshots/{name}_{stepno:06d}.bin"
                wio.write_snapshot(out / rel, field, grid, st.t)
            run.outputs.append(rel)
    if traj.error is not None:
        return run.finish(_step_failure(traj.error))
    print(f"{s.name}: {len(traj.monitors)} steps, final energy {traj.monitors[-1].energy:.6g}" if traj.monitors
          else f"{s.name}: no steps")
    return run.finish(EXIT_OK)


# -- inequalities --------------------------------------------------------------


def cmd_inequalities(args) -> int:
    from .qlaplace import INEQUALITY_IDS, MUST_HOLD, check_inequality, reports_to_csv

    try:
        dims = tuple(int(d) for d in args.dims.split(",")) if args.dims else ()
    except ValueError:
        raise ValidationError(f"--dims must be comma-separated whole numbers, got {args.dims!r}")
    threads = _threads(args)
    started = time.time()
    reports = [
        check_inequality(i, rng_seed=args.seed, samples=args.samples, q_range=(args.q_min, args.q_max),
                         magnitude_range=(0.0, args.magnitude_max), dims=dims, threads=threads)
        for i in INEQUALITY_IDS
    ]
    run = _Run("inequalities", _out_dir(args.out), seeds=[args.seed])
    run.started = started
    run.write("inequalities.csv", reports_to_csv(reports))
    failed = []
    for rep in reports:
        gate = "must-hold" if rep.inequality_id in MUST_HOLD else "reported"
        print(f"{rep.inequality_id:16s} {gate:9s} violations={rep.violations:<8d} worst={rep.worst_margin:.3e}")
        if rep.inequality_id in MUST_HOLD and rep.violations:
            failed.append(rep.inequality_id)
    if failed:
        print("must-hold inequalities violated: " + ", ".join(failed), file=sys.stderr)
        return run.finish(EXIT_THRESHOLD)
    return run.finish(EXIT_OK)


# -- convergence ---------------------------------------------------------------


def cmd_convergence(args) -> int:
    from .mms import ConvergenceRow, convergence_study

    cfg = load(args.config)
    s = cfg.scenario()
    if s.mms is None:
        raise ValidationError("source.mms: scenario has no manufactured solution")
    rows = convergence_study(s, args.levels)
    print(f"{'level':>5} {'n':>6} {'dt':>12} {'L2 error':>14} {'order':>7}")
    for r in rows:
        order = "" if math.isnan(r.order) else f"{r.order:7.3f}"
        print(f"{r.level:5d} {r.n:6d} {r.dt:12.6g} {r.error:14.6e} {order:>7}")
    status = EXIT_OK if rows[-1].order >= args.min_order else EXIT_THRESHOLD
    if args.out:
        run = _Run("convergence", _out_dir(args.out), cfg)
        run.write("convergence.csv", wio.records_csv(rows, ("level", "n", "dt", "error", "order")))
        return run.finish(status)
    return status


# -- regularity ----------------------------------------------------------------


def cmd_regularity(args) -> int:
    from .regularity import Thresholds, regularity_study

    cfg = load(args.config)
    s = cfg.scenario()
    shifts = [int(x) for x in args.shifts.split(",") if x.strip()]
    th = Thresholds(boundedness=args.boundedness)
    report = regularity_study(s, args.levels, args.margin, shifts, th, threads=_threads(args))
    print(report.summary())
    status = EXIT_OK if report.passed else EXIT_THRESHOLD
    if args.out:
        run = _Run("regularity", _out_dir(args.out), cfg)
        run.write("regularity.csv", report.to_csv())
        run.write("regularity_summary.txt", report.summary() + "\n")
        return run.finish(status)
    return status


# -- gallery -------------------------------------------------------------------


def cmd_gallery(args) -> int:
    if args.name is None:
        for name in GALLERY:
            print(name)
        return EXIT_OK
    if args.name not in GALLERY:
        raise ValidationError(f"no gallery scenario named {args.name!r}")
    sys.stdout.write(GALLERY[args.name])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"wlab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: $WLAB_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run one scenario and write monitors, energy and snapshots")
    sp.add_argument("config", help="config file or gallery scenario name")
    sp.add_argument("--out", default="out", help="output directory")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("inequalities", help="sample the q-Laplace inequalities")
    sp.add_argument("--q-min", type=float, default=1.0)
    sp.add_argument("--q-max", type=float, default=5.0)
    sp.add_argument("--dims", default="1,2,3")
    sp.add_argument("--samples", type=int, default=10**6)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--magnitude-max", type=float, default=10.0)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_inequalities)

    sp = sub.add_parser("convergence", help="manufactured-solution refinement study")
    sp.add_argument("config")
    sp.add_argument("--levels", type=int, default=3)
    sp.add_argument("--min-order", type=float, default=1.9)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_convergence)

    sp = sub.add_parser("regularity", help="interior and piecewise regularity diagnostics")
    sp.add_argument("config")
    sp.add_argument("--margin", type=int, default=4, help="window margin in cells of the coarsest grid")
    sp.add_argument("--shifts", default="1,2", help="comma-separated difference-quotient shifts in cells")
    sp.add_argument("--levels", type=int, default=3)
    sp.add_argument("--boundedness", type=float, default=0.2, help="allowed relative variation")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_regularity)

    sp = sub.add_parser("gallery", help="list shipped scenarios or print one")
    sp.add_argument("name", nargs="?")
    sp.set_defaults(func=cmd_gallery)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads is not None and args.threads < 1:
            raise ValidationError("--threads must be at least 1")
        return args.func(args)
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DegeneracyError, NonconvergenceError) as exc:
        return _step_failure(exc)


if __name__ == "__main__":
    sys.exit(main())
