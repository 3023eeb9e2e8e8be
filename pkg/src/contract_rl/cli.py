"""Command-line front end: ``run``, ``golden``, ``gen-tree`` and ``validate-mdp``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .runner import map_seeds

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def run_seed(cfg, seed):
    from . import experiments as ex

    if cfg.kind == "coingame":
        return ex.run_coingame(seed, cfg.learning, cfg.env, **cfg.protocol)
    if cfg.kind == "prisoners":
        return ex.run_prisoners(seed, cfg.learning, cfg.env)
    if cfg.solver == "tabular":
        return ex.run_tabular(cfg.kind, cfg.env, seed, cfg.learning)
    return ex.run_exact(cfg.kind, cfg.env, seed, cfg.max_iterations)


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    return str(x)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def aggregate(summaries):
    """Per-key mean and standard error over seeds; missing or null entries are skipped."""
    keys = []
    for s in summaries:
        keys += [k for k in s if k not in keys]
    mean, stderr = {}, {}
    for k in keys:
        vals = [s.get(k) for s in summaries]
        vals = [v for v in vals if v is not None and not (isinstance(v, float) and math.isnan(v))]
        if not vals:
            mean[k] = stderr[k] = None
            continue
        if all(isinstance(v, (bool, np.bool_)) for v in vals):
            mean[k] = float(np.mean(vals))
        elif all(isinstance(v, (int, np.integer)) for v in vals) and len(set(vals)) == 1:
            mean[k] = int(vals[0])
        else:
            mean[k] = float(np.mean(np.asarray(vals, float)))
        a = np.asarray(vals, float)
        stderr[k] = float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0
    return mean, stderr


def execute(cfg, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.json").write_text(json.dumps(_jsonable(cfg.resolved()), indent=2, sort_keys=True) + "\n")
    done = []

    def save(res):
        write_csv(out / f"seed_{res.seed}.csv", res.columns, res.rows)
        if res.trace is not None:
            (out / f"trace_seed_{res.seed}.jsonl").write_text(res.trace)
        if "payments" in res.extra:
            (out / f"payments_seed_{res.seed}.json").write_text(json.dumps(_jsonable(res.extra["payments"])) + "\n")
        done.append(res)

    try:
        map_seeds(run_seed, [(cfg, s) for s in cfg.seeds], cfg.workers, on_result=save)
    finally:
        if done:
            done.sort(key=lambda r: r.seed)
            mean, stderr = aggregate([r.summary for r in done])
            summary = {"kind": cfg.kind, "solver": cfg.solver, "seeds": [r.seed for r in done],
                       "complete": len(done) == len(cfg.seeds), **mean, "stderr": stderr,
                       "per_seed": {str(r.seed): r.summary for r in done}}
            (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2) + "\n")
    return mean


def cmd_run(args):
    try:
        cfg = cfgmod.load(args.config)
        if args.seeds is not None:
            cfg.seeds = cfgmod.parse_seeds(args.seeds)
        if args.workers is not None:
            cfg.workers = args.workers
        if args.nudge is not None:
            if cfg.learning is None:
                raise cfgmod.ConfigError("--nudge applies to tabular runs only")
            cfg.learning = cfg.learning.with_(nudge=args.nudge)
        if not cfg.seeds:
            raise cfgmod.ConfigError("no seeds given")
    except (cfgmod.ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output
    try:
        mean = execute(cfg, out)
    except Exception as e:  # noqa: BLE001 - any solver failure maps to one exit code
        print(f"run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    shown = {k: v for k, v in mean.items() if isinstance(v, (int, float)) and k != "seconds"}
    for k, v in shown.items():
        print(f"{k:32s} {_cell(v)}")
    print(f"artifacts in {out}")
    return EXIT_OK


def cmd_golden(args):
    from .golden import SUITES, run_suite

    if args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_suite(args.suite)
    print(report.table())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_gen_tree(args):
    from .envs import TreeGenConfig, generate_tree_mdp

    try:
        mdp = generate_tree_mdp(TreeGenConfig(args.depth, seed=args.seed, outcome_prob=args.outcome_prob,
                                              observed=args.observed))
    except (TypeError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    text = mdp.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_validate_mdp(args):
    from .exact import spe_backward_induction
    from .mdp import MalformedModelError, from_json

    try:
        mdp = from_json(Path(args.path).read_text())
    except OSError as e:
        print(f"cannot read {args.path}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MalformedModelError as e:
        for msg in str(e).split("; "):
            print(f"invalid: {msg}")
        return EXIT_FAIL
    print(f"ok: {mdp.n_states} states, {mdp.n_actions} actions, {mdp.n_outcomes} outcomes, "
          f"horizon {mdp.horizon if mdp.finite else 'infinite'}, variant {mdp.variant}")
    if args.solve:
        if not mdp.finite:
            print("--solve needs a finite horizon", file=sys.stderr)
            return EXIT_CONFIG
        print(spe_backward_induction(mdp).to_json())
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="contract-rl", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config over its seeds")
    r.add_argument("config")
    r.add_argument("--seeds", help="e.g. 0..4 or 0,2,7 (overrides the config)")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--workers", type=int, help="process pool size; 0 uses every CPU")
    r.add_argument("--nudge", type=float, help="payment nudge: a fraction of social welfare for multi-agent "
                                                "runs, an absolute bonus for single-agent ones")
    r.set_defaults(fn=cmd_run)

    g = sub.add_parser("golden", help="run a reference check suite")
    g.add_argument("suite")
    g.set_defaults(fn=cmd_golden)

    t = sub.add_parser("gen-tree", help="write a random binary-tree model as JSON")
    t.add_argument("--depth", type=int, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--outcome-prob", type=float, default=0.9)
    t.add_argument("--observed", action="store_true", help="outcome equals action")
    t.add_argument("--out")
    t.set_defaults(fn=cmd_gen_tree)

    v = sub.add_parser("validate-mdp", help="check a model JSON file")
    v.add_argument("path")
    v.add_argument("--solve", action="store_true", help="also print the subgame-perfect solution as JSON")
    v.set_defaults(fn=cmd_validate_mdp)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
