"""Command-line driver: ``mbe run``, ``mbe run1d`` and ``mbe stability``.

Every command reads a config file (see :mod:`mbe.config`), expands any sweep
into independent runs ``run_000``, ``run_001``, ... under ``--out`` and writes
``manifest.json`` listing each run's parameters, status and the sha256 of
every artifact.  Outputs carry no timestamps, so identical inputs give
byte-identical files.

Exit codes: 0 success, 2 config error, 3 numerical failure in any run.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import model1d
from .config import ConfigError, ExperimentConfig, initial_field, load_config, parse_config, serialize
from .diagnostics import DiagnosticsRecord, slope_statistics, stability_experiment
from .grid import write_snapshot
from .solver import SolverError, run

log = logging.getLogger("mbe")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
MANIFEST = "manifest.json"
COMMANDS = ("run", "run1d", "stability")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return repr(v)
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v

    text = json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# individual commands ---------------------------------------------------------

def _run_2d(cfg: ExperimentConfig, out: Path, base_dir: Path) -> dict:
    h0 = initial_field(cfg, base_dir)
    every = cfg.output.snapshot_every
    n_steps = len(cfg.solver.time_steps())

    def on_sample(state):
        k = state.step_count
        if every and (k % every == 0 or k == n_steps):
            write_snapshot(out / f"snapshot_{k:08d}.bin", state.h)

    final, records = run(h0, cfg.flux, cfg.solver, cfg.output.sample_every, on_sample)
    write_csv(out / "diagnostics.csv", DiagnosticsRecord.columns(), (r.row() for r in records))
    stats = slope_statistics(final.h, cfg.flux)
    if cfg.output.histogram:
        write_csv(out / "histogram.csv", ["bin_center", "count"],
                  zip(stats.bin_centers, stats.counts.astype(int)))
    last = records[-1]
    return {"final_time": last.time, "mass": last.mass, "energy": last.energy,
            "max_slope": last.max_slope, "selected_fraction": last.selected_fraction,
            "histogram_mode": stats.mode, "target_slope": stats.target,
            "length_scale": last.length_scale}


def _run_1d(cfg: ExperimentConfig, out: Path, base_dir: Path) -> dict:
    line = model1d.Line1D(cfg.grid.nx, cfg.grid.lx)
    h0 = initial_field(cfg, base_dir).values[:, 0]
    samples, ledger = model1d.run_1d(h0, cfg.solver.nu, cfg.flux.alpha, line, cfg.solver.dt,
                                     cfg.solver.t_end, cfg.output.sample_every)
    write_csv(out / "ledger.csv", model1d.LEDGER_COLUMNS, ledger.rows)
    fractions = [(t, model1d.slope_selected_fraction(h, line.dx)) for t, h in samples]
    write_csv(out / "selection.csv", ["time", "selected_fraction"], fractions)
    final = samples[-1][1]
    return {"final_time": samples[-1][0],
            "mass": float(final.sum() * line.dx),
            "initial_mass": float(np.sum(h0) * line.dx),
            "min_young_slack": float(ledger.young_bound_slack().min()),
            "selected_fraction": fractions[-1][1]}


def _run_stability(cfg: ExperimentConfig, out: Path, base_dir: Path) -> dict:
    h0 = initial_field(cfg, base_dir)
    rng = np.random.default_rng(cfg.stability.seed)
    delta = cfg.stability.amp * rng.standard_normal(cfg.grid.shape)
    rep = stability_experiment(h0, delta, cfg.flux, cfg.solver)
    write_csv(out / "stability.csv", ["time", "u_norm", "envelope"], rep.rows())
    return {"c_fit": rep.c_fit, "c_bound": rep.c_bound,
            "bound_violated": rep.bound_violated, "identical": rep.identical}


_RUNNERS = {"run": _run_2d, "run1d": _run_1d, "stability": _run_stability}


def run_one(command: str, cfg_text: str, run_dir: str, base_dir: str) -> dict:
    """Execute one run in its own directory; never raises for numerical failures.

    Work happens in ``<run_dir>.partial`` which is renamed on completion, so a
    crash leaves sibling runs and earlier results untouched.
    """
    cfg = parse_config(cfg_text)
    final_dir = Path(run_dir)
    work = final_dir.with_name(final_dir.name + ".partial")
    if work.exists():
        shutil.rmtree(work)
    work.mkdir(parents=True)
    (work / "config.txt").write_text(cfg_text, encoding="utf-8")
    status, error, summary = "ok", None, {}
    try:
        summary = _RUNNERS[command](cfg, work, Path(base_dir))
    except (SolverError, FloatingPointError, ValueError) as exc:
        status, error = "failed", f"{type(exc).__name__}: {exc}"
        log.error("%s failed: %s", final_dir.name, error)
    _write_json(work / "summary.json", {"status": status, "error": error, **summary})
    if final_dir.exists():
        shutil.rmtree(final_dir)
    os.replace(work, final_dir)
    artifacts = {p.name: sha256(p) for p in sorted(final_dir.iterdir()) if p.is_file()}
    return {"status": status, "error": error, "artifacts": artifacts}


def _load_manifest(out: Path) -> dict:
    path = out / MANIFEST
    if not path.exists():
        return {}
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return {}


def _is_complete(entry: dict | None, run_dir: Path) -> bool:
    if not entry or entry.get("status") != "ok" or not run_dir.is_dir():
        return False
    arts = entry.get("artifacts", {})
    return bool(arts) and all((run_dir / n).is_file() and sha256(run_dir / n) == d
                              for n, d in arts.items())


def run_experiment(command: str, cfg: ExperimentConfig, out, jobs: int = 1,
                   resume: bool = False, base_dir=None) -> int:
    """Run every sweep point of ``cfg`` and write the manifest; returns an exit code."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    points = cfg.expand()
    names = [f"run_{i:03d}" for i in range(len(points))]
    previous = {r["name"]: r for r in _load_manifest(out).get("runs", [])} if resume else {}
    manifest = {"command": command, "config": serialize(cfg), "runs": []}
    entries: dict[str, dict] = {}
    todo = []
    for name, (params, sub) in zip(names, points):
        entry = {"name": name, "params": params}
        prev = previous.get(name)
        if resume and prev and prev.get("params") == params and _is_complete(prev, out / name):
            log.info("%s already complete, skipping", name)
            entry.update(status="ok", error=None, artifacts=prev["artifacts"])
        else:
            todo.append((name, serialize(sub)))
        entries[name] = entry

    def finish(name, result):
        entries[name].update(result)
        manifest["runs"] = [entries[n] for n in names if "status" in entries[n]]
        _write_json(out / MANIFEST, manifest)

    _write_json(out / MANIFEST, {**manifest, "runs": [entries[n] for n in names if "status" in entries[n]]})
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {name: pool.submit(run_one, command, text, str(out / name), str(base_dir))
                       for name, text in todo}
            for name, _ in todo:
                finish(name, futures[name].result())
    else:
        for name, text in todo:
            log.info("starting %s", name)
            finish(name, run_one(command, text, str(out / name), str(base_dir)))
    manifest["runs"] = [entries[n] for n in names]
    _write_json(out / MANIFEST, manifest)
    failed = [e["name"] for e in manifest["runs"] if e["status"] != "ok"]
    return EXIT_NUMERICAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbe", description="Epitaxial growth simulations.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"run": "integrate the 2D model and record diagnostics",
             "run1d": "integrate the 1D cubic model and record the estimate ledger",
             "stability": "twin runs from perturbed initial data"}
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--resume", action="store_true")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MBE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError, UnicodeDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run1d" and cfg.grid.nx < 8:
        print("config error: grid.nx: the 1D model needs at least 8 cells", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(args.command, cfg, args.out, args.jobs, args.resume,
                          base_dir=args.config.resolve().parent)


if __name__ == "__main__":
    sys.exit(main())
