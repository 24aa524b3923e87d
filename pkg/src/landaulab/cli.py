"""Command-line entry point.

Usage::

    landaulab run --config cfg.json [--out DIR] [--cache DIR] [--threads N] [--export-matrix]
    landaulab spectrum|drift-scan|projector|collapse|filter --config cfg.json ...
    landaulab report --out DIR

Exit codes: 0 all enabled checks pass, 1 a check failed, 2 bad config or
request, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from .cache import EigenCache
from .config import load_config
from .exceptions import (
    ClusterUndetectedError,
    ConvergenceError,
    GapViolationError,
    GridTooCoarseError,
    InvalidInputError,
    LandauLabError,
)
from .experiments import ANALYZERS, Session, collapse_ks, format_table, merge_sections

log = logging.getLogger("landaulab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

SUBCOMMANDS = {
    "run": None,
    "spectrum": ["clusters"],
    "drift-scan": ["drift"],
    "projector": ["projector"],
    "collapse": ["collapse"],
    "filter": ["filter"],
}

PLOT_STUB = '''"""Plot the CSV series written by landaulab (generated stub; edit freely)."""
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def read(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {key: [float(r[key]) for r in rows] for key in rows[0]} if rows else {}


for path in sorted(glob.glob(os.path.join(here, "radial_k*.csv"))):
    data = read(path)
    plt.semilogy(data["d"], data["abs"], ".", ms=2, label=os.path.basename(path))
if plt.gca().lines:
    plt.xlabel("d(x0, y)")
    plt.ylabel("|Pi(x0, y)|")
    plt.legend()
    plt.savefig(os.path.join(here, "radial.png"), dpi=150)
    plt.clf()

path = os.path.join(here, "collapse.csv")
if os.path.exists(path):
    data = read(path)
    for k in sorted(set(data["k"])):
        sel = [i for i, kk in enumerate(data["k"]) if kk == k and abs(data["u2"][i]) < 1e-12]
        plt.plot([data["u1"][i] for i in sel], [data["value"][i] for i in sel], label=f"k={k:g}")
    plt.xlabel("u1")
    plt.ylabel("|Pi_k(x0, x0 + u/sqrt(k))| / k")
    plt.legend()
    plt.savefig(os.path.join(here, "collapse.png"), dpi=150)
'''


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="landaulab", description="Spectral-cluster experiments for magnetic Laplacians.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="run-config JSON")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--cache", help="eigen-cache directory (overrides cache.dir)")
        sp.add_argument("--threads", type=int, default=1, help="concurrent (model, k) solves")
        sp.add_argument("--export-matrix", action="store_true", help="write Matrix Market files of the operators")
    rp = sub.add_parser("report", help="merge section files in --out into report.json")
    rp.add_argument("--out", required=True)
    rp.add_argument("--config", help="ignored; accepted for symmetry")
    return p


def _echo(cfg: dict) -> dict:
    # run-location settings stay out of the report so it is location independent
    return {k: v for k, v in cfg.items() if k not in ("output_dir", "cache")}


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.threads < 1:
        raise InvalidInputError("--threads must be >= 1")
    analyses = SUBCOMMANDS[args.command] or list(cfg["analyses"])
    out = Path(args.out or cfg["output_dir"])
    cache_dir = Path(args.cache or cfg["cache"]["dir"])
    cache = None if cfg["cache"]["policy"] == "off" else EigenCache(cache_dir, cfg["cache"]["policy"])
    session = Session(cfg, out, cache=cache, threads=args.threads, export_matrix=args.export_matrix)
    if "collapse" in analyses:
        collapse_ks(session)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    sections = {}
    for name in analyses:
        log.info("running %s", name)
        sections[name] = ANALYZERS[name](session)
        _dump(out / f"{name}.json", sections[name])
    matrices = session.export()
    report = merge_sections(sections, _echo(cfg))
    _dump(out / "report.json", report)
    (out / "plot_profiles.py").write_text(PLOT_STUB)
    meta = {
        "finished": datetime.now(timezone.utc).isoformat(),
        "elapsed_s": time.time() - started,
        "solver_calls": session.solver_calls,
        "cache_hits": 0 if cache is None else cache.hits,
        "cache_misses": 0 if cache is None else cache.misses,
        "threads": args.threads,
        "matrices": matrices,
    }
    _dump(out / "meta.json", meta)
    print(format_table(report))
    return EXIT_OK if report["summary"]["all_passed"] else EXIT_FAIL


def _report(args) -> int:
    out = Path(args.out)
    sections = {}
    for name in ANALYZERS:
        path = out / f"{name}.json"
        if path.exists():
            sections[name] = json.loads(path.read_text())
    if not sections:
        raise InvalidInputError(f"no section files found in {out}")
    prior = out / "report.json"
    echo = json.loads(prior.read_text()).get("config") if prior.exists() else None
    report = merge_sections(sections, echo)
    _dump(prior, report)
    print(format_table(report))
    return EXIT_OK if report["summary"]["all_passed"] else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _report(args) if args.command == "report" else _run(args)
    except (ConvergenceError, ClusterUndetectedError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvalidInputError, GapViolationError, GridTooCoarseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LandauLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
