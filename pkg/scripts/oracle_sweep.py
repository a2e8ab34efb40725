"""Merge random input sets and check every configuration against its input.

    python scripts/oracle_sweep.py [--sets 500] [--seed 1] [--algorithm heuristic]

Sweeps N in 2..5, 3-30 actors per network and the shared-actor ratio from
0 to 1. Prints failures and a one-line summary; exit status 1 on failure.
"""
import argparse
import random
import sys
import time

from cgrflow.ir import flatten
from cgrflow.merge import HEURISTIC, MOREANO, MergePolicy, merge_all
from cgrflow.samples import random_input_set
from cgrflow.verify import verify_merge


def sweep(n_sets=500, seed=1, algorithm=HEURISTIC, log=None):
    rng = random.Random(seed)
    policy = MergePolicy(algorithm=algorithm)
    failures = []
    stats = {"sboxes": 0, "actors_in": 0, "actors_out": 0}
    for k in range(n_sets):
        n = 2 + k % 4
        ratio = (k % 11) / 10
        nets = [flatten(x) for x in random_input_set(rng, n, 3, 30, shared_ratio=ratio)]
        m, ctab = merge_all(nets, policy)
        diags = verify_merge(m, ctab, nets)
        stats["sboxes"] += len(m.base.sboxes)
        stats["actors_in"] += sum(len(x.actors) for x in nets)
        stats["actors_out"] += sum(1 for a in m.base.actors if not a.is_sbox)
        if diags:
            failures.append((k, n, ratio, diags))
            if log:
                log(f"set {k} (N={n}, ratio={ratio}): {diags}")
    return failures, stats


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sets", type=int, default=500)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--algorithm", choices=(HEURISTIC, MOREANO), default=HEURISTIC)
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    failures, stats = sweep(args.sets, args.seed, args.algorithm, log=print)
    dt = time.perf_counter() - t0
    shared = 1 - stats["actors_out"] / max(1, stats["actors_in"])
    print(f"{args.sets} sets, {len(failures)} failures, {dt:.1f}s, "
          f"{stats['sboxes']} sboxes inserted, {shared:.1%} of actors shared away")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
