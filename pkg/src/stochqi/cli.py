"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 experiment aborted, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time

import numpy as np

from . import __version__
from .config import ConfigError, config_to_dict, parse_config, parse_eval_config, parse_orders_config
from .experiments import ExperimentAborted, FitError, run_emae, run_probability, run_table1
from .quasi import interpolate
from .report import (
    CONVERGENCE_SCHEMA,
    ORDERS_SCHEMA,
    PROBABILITY_SCHEMA,
    csv_text,
    emit_csv,
    write_manifest,
)
from .sampling import sample_centers

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_IO = 0, 2, 3, 4


def _overrides(args) -> dict:
    out = {}
    for item in args.set or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = val.strip()
    for key in ("seed", "replications", "workers"):
        if getattr(args, key, None) is not None:
            out[key] = str(getattr(args, key))
    return out


def _emit(records, schema, args, command, config, seed, t0):
    if args.out:
        emit_csv(records, schema, args.out)
        write_manifest(args.out, command, config, seed, time.perf_counter() - t0, __version__)
    else:
        sys.stdout.write(csv_text(records, schema))


def cmd_orders(args) -> int:
    t0 = time.perf_counter()
    cfgs, settings = parse_orders_config(args.config, _overrides(args))
    rows = run_table1(cfgs)
    settings.pop("workers", None)
    _emit(rows, ORDERS_SCHEMA, args, "orders", settings, cfgs[0].base_seed if cfgs else 0, t0)
    return EXIT_OK


def cmd_convergence(args) -> int:
    t0 = time.perf_counter()
    cfg = parse_config(args.config, _overrides(args))
    recs = [
        {"n": r.n, "h": r.h, "emae": r.emae, "stderr": r.stderr, "empty_rate": r.empty_neighborhood_rate}
        for r in run_emae(cfg)
    ]
    snap = config_to_dict(cfg)
    snap.pop("workers")
    _emit(recs, CONVERGENCE_SCHEMA, args, "convergence", snap, cfg.base_seed, t0)
    return EXIT_OK


def cmd_probability(args) -> int:
    t0 = time.perf_counter()
    cfg = parse_config(args.config, _overrides(args))
    if not cfg.epsilons:
        raise ConfigError("epsilons: the probability experiment needs at least one threshold")
    snap = config_to_dict(cfg)
    snap.pop("workers")
    _emit(run_probability(cfg), PROBABILITY_SCHEMA, args, "probability", snap, cfg.base_seed, t0)
    return EXIT_OK


def _read_points(path, d: int) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if i == 0:
                    continue  # header
                raise ConfigError(f"{path}:{i + 1}: non-numeric query point {row!r}") from None
    pts = np.array(rows, dtype=float).reshape(-1, d) if rows else np.empty((0, d))
    if rows and any(len(r) != d for r in rows):
        raise ConfigError(f"{path}: every query point needs {d} columns")
    return pts


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    ec = parse_eval_config(args.config, _overrides(args))
    target = ec["target"]
    pts = _read_points(args.points, target.dim)
    if len(pts) and not np.all(target.domain.contains(pts)):
        raise ConfigError(f"{args.points}: query points must lie in the target domain")
    centers = sample_centers(ec["law"], target.domain, ec["n"], ec["seed"])
    q = interpolate(target, centers, ec["kernel"], ec["h"])
    res = q.evaluate_batch(pts) if len(pts) else None
    schema = tuple(f"x_{i + 1}" for i in range(target.dim)) + ("value", "denominator", "active_centers")
    records = []
    for i in range(len(pts)):
        rec = {f"x_{j + 1}": float(pts[i, j]) for j in range(target.dim)}
        rec.update(value=float(res.value[i]), denominator=float(res.denominator[i]),
                   active_centers=int(res.active_centers[i]))
        records.append(rec)
    if res is not None and not res.ok:
        logging.warning("%d query point(s) had an empty kernel neighborhood (value=nan)", int(res.empty.sum()))
    _emit(records, schema, args, "eval", ec["settings"], ec["seed"], t0)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run

    return EXIT_OK if run() else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochqi", description="Stochastic quasi-interpolation experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", "-c", help="key=value or JSON config (or a run manifest)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--seed", type=lambda s: int(s, 0), help="base seed (default $STOCHQI_SEED or 0)")
        sp.add_argument("--out", "-o", help="output CSV (a manifest is written next to it); default stdout")

    for name, fn, helptext in (
        ("orders", cmd_orders, "a-priori vs fitted convergence orders for each kernel/d/metric cell"),
        ("convergence", cmd_convergence, "EMAE per N"),
        ("probability", cmd_probability, "empirical exceedance probabilities per N and epsilon"),
    ):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--replications", type=int)
        sp.add_argument("--workers", type=int, help="worker threads (output does not depend on it)")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("eval", help="evaluate one interpolant at query points from a CSV")
    common(sp)
    sp.add_argument("--points", required=True, help="CSV with one query point per row")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("selftest", help="run the built-in invariant checks")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExperimentAborted, FitError) as e:
        print(f"experiment aborted: {e}", file=sys.stderr)
        return EXIT_ABORT
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


__all__ = ["main", "build_parser"]
