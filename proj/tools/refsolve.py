#!/usr/bin/env python3
"""Reference conic solver: reads a conic-benchmark file, solves it with cvxpy,
writes a solution JSON. Usage: refsolve.py problem.cb solution.json"""

import json
import math
import sys

import numpy as np
import scipy.sparse as sp


class Expr:
    __slots__ = ("terms", "const")

    def __init__(self, terms, const):
        self.terms = terms  # list of (var, coef)
        self.const = const


def parse_expr(tokens, pos):
    k = int(tokens[pos])
    pos += 1
    terms = []
    for _ in range(k):
        terms.append((int(tokens[pos]), float(tokens[pos + 1])))
        pos += 2
    const = float(tokens[pos])
    return Expr(terms, const), pos + 1


def strip_tag(line):
    cut = line.find(" | ")
    return line if cut < 0 else line[:cut]


class Problem:
    def __init__(self):
        self.nvar = 0
        self.obj = None
        self.eq = []
        self.ineq = []
        self.cones = []  # (kind, [Expr])
        self.blocks = []  # (dim, {(r, c): Expr})


def parse(path):
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    it = iter(lines)

    def need(prefix):
        for ln in it:
            if not ln.strip():
                continue
            if not ln.startswith(prefix):
                raise ValueError(f"expected {prefix!r}, got {ln!r}")
            return ln
        raise ValueError(f"expected {prefix!r}, got end of file")

    p = Problem()
    need("CONICBENCH 1")
    p.nvar = int(need("NVAR").split()[1])
    for _ in range(p.nvar):
        need("VAR")
    p.obj, _ = parse_expr(need("OBJ").split()[1:], 0)
    neq = int(need("EQ").split()[1])
    for _ in range(neq):
        e, _ = parse_expr(strip_tag(need("ROW")).split()[1:], 0)
        p.eq.append(e)
    nin = int(need("INEQ").split()[1])
    for _ in range(nin):
        e, _ = parse_expr(strip_tag(need("ROW")).split()[1:], 0)
        p.ineq.append(e)
    ncones = int(need("CONES").split()[1])
    for _ in range(ncones):
        head = strip_tag(need("CONE")).split()
        kind, nent = head[1], int(head[2])
        entries = []
        for _ in range(nent):
            e, _ = parse_expr(need("E").split()[1:], 0)
            entries.append(e)
        p.cones.append((kind, entries))
    npsd = int(need("PSD").split()[1])
    for _ in range(npsd):
        head = strip_tag(need("BLOCK")).split()
        dim, nent, has_cs = int(head[1]), int(head[2]), int(head[3])
        entries = {}
        for _ in range(nent):
            toks = need("P").split()
            r, c = int(toks[1]), int(toks[2])
            e, _ = parse_expr(toks[3:], 0)
            entries[(r, c)] = e
        if has_cs:
            npairs = int(need("CS").split()[2])
            for _ in range(npairs):
                need("PAIR")
        p.blocks.append((dim, entries))
    need("END")
    return p


def to_matrix(exprs, nvar):
    """Stack affine expressions into (A, c) with value A @ x + c."""
    rows, cols, vals = [], [], []
    c = np.zeros(len(exprs))
    for i, e in enumerate(exprs):
        c[i] = e.const
        for var, coef in e.terms:
            rows.append(i)
            cols.append(var)
            vals.append(coef)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(exprs), nvar))
    return A, c


def solve(p):
    import cvxpy as cp

    x = cp.Variable(p.nvar)
    A, c = to_matrix([p.obj], p.nvar)
    objective = cp.Minimize(A[0] @ x + c[0])
    constraints = []
    if p.eq:
        A, c = to_matrix(p.eq, p.nvar)
        constraints.append(A @ x + c == 0)
    if p.ineq:
        A, c = to_matrix(p.ineq, p.nvar)
        constraints.append(A @ x + c >= 0)
    for kind, entries in p.cones:
        if kind == "rsoc":
            # 2uv >= |w|^2 -> ||(u-v, sqrt2 w)|| <= u+v
            u, v, w = entries[0], entries[1], entries[2:]
            rt2 = math.sqrt(2.0)
            head = Expr(
                [(var, cf) for var, cf in u.terms] + [(var, cf) for var, cf in v.terms],
                u.const + v.const,
            )
            tail = [
                Expr(
                    [(var, cf) for var, cf in u.terms]
                    + [(var, -cf) for var, cf in v.terms],
                    u.const - v.const,
                )
            ]
            tail += [Expr([(var, rt2 * cf) for var, cf in e.terms], rt2 * e.const) for e in w]
        else:
            head, tail = entries[0], entries[1:]
        At, ct = to_matrix([head], p.nvar)
        Av, cv = to_matrix(tail, p.nvar)
        constraints.append(cp.SOC(At[0] @ x + ct[0], Av @ x + cv))
    for dim, entries in p.blocks:
        exprs, slots = [], []
        for (r, cidx), e in entries.items():
            exprs.append(e)
            slots.append((r, cidx))
        A, cst = to_matrix(exprs, p.nvar)
        rows, cols, vals = [], [], []
        cm = np.zeros(dim * dim)
        for i, (r, cidx) in enumerate(slots):
            row = A.getrow(i).tocoo()
            for flat in sorted({r * dim + cidx, cidx * dim + r}):
                for j, v in zip(row.col, row.data):
                    rows.append(flat)
                    cols.append(j)
                    vals.append(v)
                cm[flat] = cst[i]
        Afull = sp.csr_matrix((vals, (rows, cols)), shape=(dim * dim, p.nvar))
        M = cp.reshape(Afull @ x + cm, (dim, dim), order="C")
        constraints.append((M + M.T) / 2 >> 0)
    prob = cp.Problem(objective, constraints)
    try:
        prob.solve(solver=cp.CVXOPT)
    except Exception:
        prob.solve(solver=cp.SCS, eps=1e-8, max_iters=100000)
    if prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        status = "optimal"
    elif prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        status = "infeasible"
    elif prob.status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        status = "unbounded"
    else:
        status = "numerical_failure"
    out = {"status": status, "message": f"cvxpy:{prob.status}"}
    stats = prob.solver_stats
    if stats is not None:
        if stats.num_iters is not None:
            out["iterations"] = int(stats.num_iters)
        if stats.solve_time is not None:
            out["seconds"] = float(stats.solve_time)
    if status == "optimal" and x.value is not None:
        out["objective"] = float(prob.value)
        out["x"] = [float(v) for v in x.value]
    return out


def main():
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    result = solve(parse(sys.argv[1]))
    with open(sys.argv[2], "w") as f:
        json.dump(result, f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
