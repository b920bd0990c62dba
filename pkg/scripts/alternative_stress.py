"""Exclusivity stress for the alternative-system decider.

Draws seeded random block quadruples, asks decide_alternative for a verdict,
re-verifies the returned certificate by substitution, and confirms with a
direct LP encoding that the opposite system really is infeasible.  Any
violation is printed with the offending seed; the run fails loudly.

    python3 scripts/alternative_stress.py [--count 1000] [--seed 0] [--max-dim 6]
"""

import argparse
import sys
import time

import numpy as np

from vopt.linprog import (
    LpProblem,
    MultiplierWitness,
    StrictWitness,
    _blocks,
    decide_alternative,
    solve_lp,
    verify_certificate,
)


def random_instance(rng, max_dim):
    s = int(rng.integers(1, max_dim + 1))
    q = int(rng.integers(1, max_dim + 1))
    r = int(rng.integers(0, max_dim + 1))
    p = int(rng.integers(0, max_dim + 1))
    A = rng.uniform(-3, 3, size=(s, q))
    B = rng.uniform(-3, 3, size=(s, r)) if r else None
    C = rng.uniform(-3, 3, size=(p, q)) if p else None
    D = rng.uniform(-3, 3, size=(p, r)) if (p and r) else None
    return A, B, C, D


def strict_system_solvable(A, B, C, D) -> bool:
    A, B, C, D = _blocks(A, B, C, D)
    s, q = A.shape
    r, p = B.shape[1], C.shape[0]
    if q == 0:
        return True
    nvar = s + p + 1
    rows = [np.concatenate([A[:, i], C[:, i], [1.0]]) for i in range(q)]
    rows += [np.concatenate([B[:, j], D[:, j], [0.0]]) for j in range(r)]
    cap = np.zeros(nvar)
    cap[-1] = 1.0
    rows.append(cap)
    rhs = np.zeros(len(rows))
    rhs[-1] = 1.0
    c = np.zeros(nvar)
    c[-1] = 1.0
    out = solve_lp(LpProblem(c, np.array(rows), ["<="] * len(rows), rhs,
                             free=tuple(range(s)) + (nvar - 1,), maximize=True))
    return out.status == "optimal" and out.objective is not None and out.objective > 1e-9


def multiplier_system_solvable(A, B, C, D) -> bool:
    A, B, C, D = _blocks(A, B, C, D)
    s, q = A.shape
    r, p = B.shape[1], C.shape[0]
    rows = [np.concatenate([A[i], B[i]]) for i in range(s)]
    senses = ["="] * s
    rhs = [0.0] * s
    for k in range(p):
        rows.append(np.concatenate([C[k], D[k]]))
        senses.append(">=")
        rhs.append(0.0)
    rows.append(np.concatenate([np.ones(q), np.zeros(r)]))
    senses.append("=")
    rhs.append(1.0)
    out = solve_lp(LpProblem(np.zeros(q + r), np.array(rows), senses, np.array(rhs)))
    return out.status == "optimal"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-dim", type=int, default=6)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    t0 = time.perf_counter()
    strict = 0
    violations = 0
    for k in range(args.count):
        A, B, C, D = random_instance(rng, args.max_dim)
        cert = decide_alternative(A, B, C, D)
        problems = []
        if not verify_certificate(cert, A, B, C, D):
            problems.append("certificate failed substitution")
        if isinstance(cert, StrictWitness):
            strict += 1
            if multiplier_system_solvable(A, B, C, D):
                problems.append("multiplier system also solvable")
        elif isinstance(cert, MultiplierWitness):
            if strict_system_solvable(A, B, C, D):
                problems.append("strict system also solvable")
        if problems:
            violations += 1
            print(f"instance {k}: " + "; ".join(problems))
    dt = time.perf_counter() - t0
    print(
        f"{args.count} instances in {dt:.2f}s: {strict} strict, "
        f"{args.count - strict} multiplier, {violations} violation(s)"
    )
    return 1 if violations else 0


if __name__ == "__main__":
    sys.exit(main())
