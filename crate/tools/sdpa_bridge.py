#!/usr/bin/env python3
"""Solve an SDPA sparse problem with cvxpy and write a CSDP-style solution.

Usage: sdpa_bridge.py INPUT.dat-s OUTPUT.sol

The problem is read as max tr(F0 X) s.t. tr(Fi X) = ci, X >= 0, with the
dual min c^T y s.t. Z = sum yi Fi - F0 >= 0. The output has y on the first
line, then `1 blk i j v` for Z and `2 blk i j v` for X (upper triangle,
1-based).
"""

import re
import sys

import cvxpy as cp
import numpy as np
import scipy.sparse as sp


def tokens(text):
    out = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped[0] in "\"*":
            continue
        out.extend(re.sub(r"[{},()]", " ", stripped).split())
    return out


def read_sdpa(path):
    with open(path) as fh:
        tok = tokens(fh.read())
    pos = 0

    def take(n=1):
        nonlocal pos
        vals = tok[pos : pos + n]
        if len(vals) < n:
            raise ValueError("unexpected end of file")
        pos += n
        return vals

    m = int(take()[0])
    nblocks = int(take()[0])
    sizes = [int(float(s)) for s in take(nblocks)]
    c = np.array([float(v) for v in take(m)])
    mats = [[np.zeros((abs(s), abs(s))) for s in sizes] for _ in range(m + 1)]
    while pos < len(tok):
        k, b, i, j = (int(v) for v in take(4))
        v = float(take()[0])
        mats[k][b - 1][i - 1, j - 1] = v
        mats[k][b - 1][j - 1, i - 1] = v
    return sizes, c, mats


ATTEMPTS = (
    ("CLARABEL", dict(tol_gap_abs=1e-9, tol_gap_rel=1e-9, tol_feas=1e-9, max_iter=500)),

    ("SCS", dict(eps_abs=1e-9, eps_rel=1e-9, max_iters=200000)),
)


def solve_accurately(problem):
    installed = cp.installed_solvers()
    last = None
    for name, opts in ATTEMPTS:
        if name not in installed:
            continue
        try:
            problem.solve(solver=name, **opts)
        except cp.error.SolverError as err:
            last = str(err)
            continue
        if problem.status in ("optimal", "optimal_inaccurate"):
            return
        last = f"{name} status {problem.status}"
    raise RuntimeError(f"no solver reached optimality ({last})")


def solve(sizes, c, mats):
    xs = []
    for s in sizes:
        if s > 0:
            xs.append(cp.Variable((s, s), symmetric=True))
        else:
            xs.append(cp.Variable(-s, nonneg=True))

    def flat(x, s):
        return cp.vec(x, order="F") if s > 0 else x

    def coeffs(f, s):
        return f.flatten(order="F") if s > 0 else np.diag(f)

    stacked = cp.hstack([flat(x, s) for x, s in zip(xs, sizes)])
    rows = [np.concatenate([coeffs(mats[k][b], s) for b, s in enumerate(sizes)]) for k in range(len(c) + 1)]
    a = sp.csr_matrix(np.array(rows[1:]))
    eq = a @ stacked == c
    cons = [x >> 0 for x, s in zip(xs, sizes) if s > 0]
    problem = cp.Problem(cp.Maximize(rows[0] @ stacked), cons + [eq])
    solve_accurately(problem)
    y = np.asarray(eq.dual_value, dtype=float).ravel()

    def z_of(yv):
        return [sum(yv[k] * mats[k + 1][b] for k in range(len(c))) - mats[0][b] for b in range(len(sizes))]

    def min_eig(zs):
        return min(np.linalg.eigvalsh(z).min() for z in zs)

    # The sign of equality duals depends on the solver's convention.
    if min_eig(z_of(-y)) > min_eig(z_of(y)):
        y = -y
    xval = [x.value if s > 0 else np.diag(x.value) for x, s in zip(xs, sizes)]
    return y, z_of(y), xval


def write_solution(path, sizes, y, z, x):
    lines = [" ".join(repr(float(v)) for v in y)]
    for tag, mats in ((1, z), (2, x)):
        for b, (mat, s) in enumerate(zip(mats, sizes)):
            n = abs(s)
            for i in range(n):
                for j in range(i, n):
                    if s < 0 and i != j:
                        continue
                    v = float(mat[i, j])
                    if v != 0.0:
                        lines.append(f"{tag} {b + 1} {i + 1} {j + 1} {v!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def main(argv):
    if len(argv) != 3:
        print(__doc__.strip().splitlines()[2], file=sys.stderr)
        return 2
    sizes, c, mats = read_sdpa(argv[1])
    y, z, x = solve(sizes, c, mats)
    write_solution(argv[2], sizes, y, z, x)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
