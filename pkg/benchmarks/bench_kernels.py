"""Compiled vs interpreted kernels on the same seeded workloads.

Each backend runs in its own interpreter because the switch is read at
import time. The compiled side is timed after a warm-up call, so numbers
exclude compilation. Results must agree between backends; the digest
column shows it.

    python benchmarks/bench_kernels.py [--scale 1.0]
"""
import argparse
import json
import os
import subprocess
import sys
import time

CHILD = r"""
import hashlib, json, sys, time
import numpy as np
from contract_rl import _jit
from contract_rl.envs import TreeGenConfig, generate_tree_mdp, make_coin_game, make_prisoners_dilemma
from contract_rl.lp import minimal_contract
from contract_rl.multi import MultiConfig, train_multi
from contract_rl.oracles import random_static_instance
from contract_rl.qlearn import LearningConfig, train_simultaneous

scale = float(sys.argv[1])

def lp(n):
    rng = np.random.default_rng(0)
    inst = [random_static_instance(rng) for _ in range(n)]
    return np.nan_to_num([minimal_contract(O, q, a).expected_payment for O, q, a in inst], posinf=-1.0)

def tree(n):
    mdp = generate_tree_mdp(TreeGenConfig(6, seed=0))
    res = train_simultaneous(mdp, LearningConfig(updates=n, eval_every=n))
    return np.concatenate([res.principal.values.ravel(), res.agent.values.ravel()])

def prisoners(n):
    st = train_multi(make_prisoners_dilemma(), MultiConfig(updates=n, eval_every=n, eps_initial=1.0))
    return np.concatenate([st.principal_q.ravel(), st.agent_q.ravel()])

def coin(n):
    st = train_multi(make_coin_game(), MultiConfig(updates=n, eval_every=n))
    return np.concatenate([st.principal_q.ravel(), st.agent_q.ravel()])

work = [("simplex_lp", lp, 200, 20), ("tree_tabular", tree, 50_000, 100),
        ("prisoners_multi", prisoners, 5_000, 10), ("coingame_multi", coin, 10_000, 10)]
for name, fn, n, warm in work:
    n = max(warm, int(n * scale))
    if _jit.ENABLED:
        fn(warm)
    t0 = time.perf_counter()
    out = fn(n)
    dt = time.perf_counter() - t0
    digest = hashlib.sha1(np.round(out, 9).tobytes()).hexdigest()[:12]
    print(json.dumps({"workload": name, "size": n, "backend": _jit.backend(), "seconds": dt, "digest": digest}))
"""


def run(disable, scale):
    env = dict(os.environ)
    env.pop("CONTRACT_RL_DISABLE_JIT", None)
    if disable:
        env["CONTRACT_RL_DISABLE_JIT"] = "1"
    proc = subprocess.run([sys.executable, "-c", CHILD, str(scale)], env=env, capture_output=True, text=True)
    if proc.returncode:
        sys.exit(f"benchmark child failed:\n{proc.stderr}")
    out = proc.stdout
    return {r["workload"]: r for r in map(json.loads, out.splitlines())}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0, help="multiply every workload size")
    args = ap.parse_args()
    compiled, interpreted = run(False, args.scale), run(True, args.scale)
    print(f"{'workload':18s} {'size':>8s} {'numba [s]':>10s} {'python [s]':>11s} {'speedup':>8s}  same result")
    for name, c in compiled.items():
        p = interpreted[name]
        print(f"{name:18s} {c['size']:8d} {c['seconds']:10.4f} {p['seconds']:11.4f} "
              f"{p['seconds'] / c['seconds']:8.1f}x  {c['digest'] == p['digest']}")


if __name__ == "__main__":
    main()
