"""Writes tests/fixtures/sdp_random.txt: seeded random block SDPs with optima
certified by an independent conic solver (CLARABEL through cvxpy).

Each problem has 4 variables and blocks of sizes 6 and 3. A strictly feasible
primal point y0 and a strictly feasible dual point (X1, X2) are planted, so
the optimum exists and is attained.
"""
import pathlib

import cvxpy as cp
import numpy as np

N_PROBLEMS = 50
N_VARS = 4
BLOCKS = (6, 3)


def sym(rng, n):
    a = rng.standard_normal((n, n))
    return (a + a.T) / 2


def spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T / n + 0.5 * np.eye(n)


def make_problem(seed):
    rng = np.random.default_rng(seed)
    y0 = rng.standard_normal(N_VARS)
    blocks, c = [], np.zeros(N_VARS)
    for n in BLOCKS:
        fk = [sym(rng, n) for _ in range(N_VARS)]
        f0 = spd(rng, n) - sum(y0[k] * fk[k] for k in range(N_VARS))
        x = spd(rng, n)
        c += np.array([np.sum(f * x) for f in fk])
        blocks.append((f0, fk))
    return c, blocks


def solve(c, blocks):
    y = cp.Variable(N_VARS)
    cons = []
    for f0, fk in blocks:
        expr = f0 + sum(y[k] * fk[k] for k in range(N_VARS))
        cons.append((expr + expr.T) / 2 >> 0)
    prob = cp.Problem(cp.Minimize(c @ y), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    assert prob.status == cp.OPTIMAL, prob.status
    return prob.value


def write_matrix(out, m):
    for row in m:
        out.write(" ".join(repr(float(v)) for v in row) + "\n")


def main():
    path = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "sdp_random.txt"
    with path.open("w") as out:
        for seed in range(N_PROBLEMS):
            c, blocks = make_problem(seed)
            opt = solve(c, blocks)
            out.write(f"problem random_{seed}\n")
            out.write(f"n_vars {N_VARS}\n")
            out.write("objective " + " ".join(repr(float(v)) for v in c) + "\n")
            out.write(f"blocks {len(blocks)}\n")
            for f0, fk in blocks:
                out.write(f"block {f0.shape[0]}\n")
                write_matrix(out, f0)
                for f in fk:
                    write_matrix(out, f)
            out.write(f"optimum {float(opt)!r}\n")
            out.write("end\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
