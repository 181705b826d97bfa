"""Command-line front end: ``gmhp {simulate,validate,trace} --config run.json``.

Exit codes: 0 ok, 1 usage or config error, 2 validation gate failure,
3 truncation under the ``error`` policy.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path as FsPath

from . import config as cfgmod
from .cluster import SimOptions, TruncationError, simulate_many
from .config import ConfigError, RunConfig
from .diagnostics import coordinate_counts, cross_engine_gaps, mean_count_report
from .io import write_events
from .markov import intensity_trace, simulate_batch, write_trace_csv

EXIT_OK, EXIT_CONFIG, EXIT_GATE, EXIT_TRUNCATION = 0, 1, 2, 3

log = logging.getLogger("gmhp")


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _dump_json(obj, fh):
    json.dump(_clean(obj), fh, indent=2, sort_keys=True)
    fh.write("\n")


def _resolve(out_dir, path):
    p = FsPath(path)
    return p if p.is_absolute() else FsPath(out_dir) / p


def _numbered(path: FsPath, j: int) -> FsPath:
    if "{j}" in path.name:
        return path.with_name(path.name.format(j=j))
    return path.with_name(f"{path.stem}_{j:05d}{path.suffix}")


def simulate_paths(cfg: RunConfig, spec, jobs: int = 1, engine: str = None, seed: int = None):
    """Paths for a run config; path j is seeded by ``derive_seed(seed, j)``."""
    engine = engine or cfg.engine
    seed = cfg.seed if seed is None else seed
    if engine == "markov":
        batch = simulate_batch(spec.markov, cfg.horizon, cfg.n_paths, seed)
        return [batch.path(j) for j in range(cfg.n_paths)]
    opts = SimOptions(cfg.horizon, cfg.max_generation, seed, cfg.truncation)
    return simulate_many(spec, opts, cfg.n_paths, jobs=jobs)


def _check_outputs(cfg, allowed):
    for k, o in enumerate(cfg.outputs):
        if o.kind not in allowed:
            raise ConfigError(f"outputs[{k}].kind", f"{o.kind!r} is not produced by this command")
        if o.kind == "intensity_trace" and cfg.model.preset != "bivariate_exp":
            raise ConfigError(f"outputs[{k}].kind",
                              "intensity traces need the bivariate_exp preset")


def _write_traces(cfg, spec, paths, target: FsPath):
    target.parent.mkdir(parents=True, exist_ok=True)
    for j, p in enumerate(paths):
        dest = target if len(paths) == 1 else _numbered(target, j)
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_trace_csv(intensity_trace(spec.markov, p, cfg.grid), fh)


def _write_outputs(cfg, spec, paths, out_dir, report=None):
    for o in cfg.outputs:
        dest = _resolve(out_dir, o.path)
        dest.parent.mkdir(parents=True, exist_ok=True)
        if o.kind == "events" and o.format == "csv":
            with open(dest, "w", newline="", encoding="utf-8") as fh:
                write_events(fh, paths, spec.flavors, with_path_id=True)
        elif o.kind == "events":
            for j, p in enumerate(paths):
                with open(_numbered(dest, j), "w", newline="", encoding="utf-8") as fh:
                    write_events(fh, p, spec.flavors, with_path_id=False)
        elif o.kind == "intensity_trace":
            _write_traces(cfg, spec, paths, dest)
        elif o.kind == "report":
            rep = report if report is not None else mean_count_report(spec, paths=paths)
            with open(dest, "w", encoding="utf-8") as fh:
                _dump_json(rep, fh)


def cmd_simulate(cfg: RunConfig, jobs: int = 1, out_dir=".", stdout=None) -> int:
    stdout = stdout or sys.stdout
    _check_outputs(cfg, {"events", "intensity_trace", "report"})
    spec = cfg.model.build()
    try:
        paths = simulate_paths(cfg, spec, jobs)
    except TruncationError as exc:
        print(f"truncation error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    _write_outputs(cfg, spec, paths, out_dir)
    counts = [coordinate_counts(spec, p) for p in paths]
    n_events = sum(len(p) for p in paths)
    truncated = sum(p.truncated for p in paths)
    d = spec.dimension
    means = " ".join(f"N{i}={sum(int(c[i - 1]) for c in counts) / len(paths):.4g}"
                     for i in range(1, d + 1))
    print(f"simulated {len(paths)} paths ({cfg.engine}, T={cfg.horizon:g}, seed={cfg.seed}): "
          f"{n_events} events, mean {means}, truncated {truncated}", file=stdout)
    return EXIT_OK


def _gate(value, threshold, passed):
    return {"status": "pass" if passed else "fail", "value": value, "threshold": threshold}


INSUFFICIENT = {"status": "insufficient data"}


def run_gates(cfg: RunConfig, spec, check_spec, paths, jobs=1):
    """Validation report plus per-gate verdicts."""
    report = mean_count_report(spec, paths=paths, check_spec=check_spec)
    g = cfg.gates
    gates = {}
    enough = len(paths) >= 2
    for i in range(1, spec.dimension + 1):
        name = str(i)
        ks = report["ks"][name]
        if not enough or ks is None:
            gates[f"ks_{name}"] = dict(INSUFFICIENT)
        else:
            gates[f"ks_{name}"] = _gate(ks["p"], g.ks_level, ks["p"] >= g.ks_level)
        gap = report["compensator_gap_se_units"][name]
        if gap is None:
            gates[f"compensator_{name}"] = dict(INSUFFICIENT)
        else:
            gates[f"compensator_{name}"] = _gate(gap, g.se_units, abs(gap) <= g.se_units)
    if g.cross_engine and cfg.model.preset == "bivariate_exp":
        other = "cluster" if cfg.engine == "markov" else "markov"
        other_paths = simulate_paths(cfg, spec, jobs, engine=other)
        gaps = cross_engine_gaps(spec, paths, other_paths)
        report["cross_engine_gap_se_units"] = gaps
        for key, val in gaps.items():
            if val is None:
                gates[f"cross_{key}"] = dict(INSUFFICIENT)
            else:
                gates[f"cross_{key}"] = _gate(val, g.se_units, abs(val) <= g.se_units)
    passed = all(v["status"] != "fail" for v in gates.values())
    return {"report": report, "gates": gates, "passed": passed}


def cmd_validate(cfg: RunConfig, jobs: int = 1, out_dir=".", stdout=None) -> int:
    stdout = stdout or sys.stdout
    _check_outputs(cfg, {"events", "report"})
    spec = cfg.model.build()
    check_spec = cfg.check_model.build() if cfg.check_model is not None else spec
    if check_spec.dimension != spec.dimension:
        raise ConfigError("check_model", "dimension differs from model")
    try:
        paths = simulate_paths(cfg, spec, jobs)
    except TruncationError as exc:
        print(f"truncation error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    result = run_gates(cfg, spec, check_spec, paths, jobs)
    if len(paths) < 2:
        log.warning("fewer than two paths: gates marked as insufficient data")
    _write_outputs(cfg, spec, paths, out_dir, report=result)
    if not any(o.kind == "report" for o in cfg.outputs):
        _dump_json(result, stdout)
    for name, gate in sorted(result["gates"].items()):
        print(f"{name}: {gate['status']}", file=stdout)
    return EXIT_OK if result["passed"] else EXIT_GATE


def cmd_trace(cfg: RunConfig, jobs: int = 1, out_dir=".", stdout=None) -> int:
    stdout = stdout or sys.stdout
    if cfg.model.preset != "bivariate_exp":
        raise ConfigError("model.preset", "trace needs the bivariate_exp preset")
    _check_outputs(cfg, {"intensity_trace"})
    targets = [o for o in cfg.outputs if o.kind == "intensity_trace"]
    if not targets:
        raise ConfigError("outputs", "trace needs an intensity_trace output")
    spec = cfg.model.build()
    try:
        paths = simulate_paths(cfg, spec, jobs)
    except TruncationError as exc:
        print(f"truncation error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    for o in targets:
        _write_traces(cfg, spec, paths, _resolve(out_dir, o.path))
    print(f"wrote intensity traces for {len(paths)} paths ({cfg.grid} grid points)", file=stdout)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "validate": cmd_validate, "trace": cmd_trace}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    p = _Parser(prog="gmhp", description="Simulate and validate multivariate Hawkes processes.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON run config")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
        s.add_argument("--out-dir", default=".", help="base directory for relative outputs")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs", "must be at least 1")
        cfg = cfgmod.load(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        os.makedirs(args.out_dir, exist_ok=True)
        return COMMANDS[args.command](cfg, jobs=args.jobs, out_dir=args.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
