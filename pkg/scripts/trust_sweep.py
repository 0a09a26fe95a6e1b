#!/usr/bin/env python3
"""Compare evaluate_trust with the brute-force oracle over random instances.

Prints the agreement count and how often each verdict and section status
occurred, so the corpus can be checked for coverage as well as correctness.
"""

import argparse
import random
import sys
import time
from collections import Counter
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from conftest import T0  # noqa: E402
from oracles import agrees, random_trust_instance, trust_oracle  # noqa: E402

from agentfacts.scenario import finance_agent_doc  # noqa: E402
from agentfacts.trust import evaluate_trust  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-n", type=int, default=2000, help="number of instances (default 2000)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    base = finance_agent_doc(T0)
    overall, statuses, disagreements = Counter(), Counter(), 0
    start = time.perf_counter()
    for _ in range(args.n):
        inst = random_trust_instance(rng, base)
        verdict = evaluate_trust(inst.doc, inst.policy, inst.authorities, inst.revocations, inst.now)
        disagreements += not agrees(verdict, trust_oracle(inst))
        overall[verdict.overall] += 1
        statuses.update(sv.status for sv in verdict.per_section.values())
    elapsed = time.perf_counter() - start
    print(f"instances     {args.n}  ({elapsed:.1f}s, {1000 * elapsed / args.n:.2f} ms each)")
    print(f"disagreements {disagreements}")
    print("overall       " + "  ".join(f"{k}={v}" for k, v in sorted(overall.items())))
    print("sections      " + "  ".join(f"{k}={v}" for k, v in sorted(statuses.items())))
    return 1 if disagreements else 0


if __name__ == "__main__":
    sys.exit(main())
