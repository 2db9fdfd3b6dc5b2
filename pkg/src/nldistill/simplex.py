"""Exact-rational primal simplex for small LPs.

Solves  max c.x  subject to  A x <= b,  x >= 0  with b >= 0, so the
all-slack basis is feasible and no phase-1 is needed.  Bland's smallest
index rule guarantees termination without cycling; all arithmetic is
on Fractions, so the optimum and the certificate are exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


class UnboundedError(Exception):
    pass


@dataclass(frozen=True)
class SimplexResult:
    value: Fraction
    x: tuple[Fraction, ...]
    slack: tuple[Fraction, ...]
    reduced_costs: tuple[Fraction, ...]  # over structural variables, <= 0 at opt
    basis: tuple[int, ...]
    iterations: int


def solve_max(c: Sequence[Fraction], a: Sequence[Sequence[Fraction]],
              b: Sequence[Fraction]) -> SimplexResult:
    m, n = len(a), len(c)
    if any(bi < 0 for bi in b):
        raise ValueError("this solver requires b >= 0")
    zero, one = Fraction(0), Fraction(1)
    # tableau rows: [A | I | rhs]; cost row holds c_j - z_j
    rows = [[Fraction(v) for v in a[i]] + [one if j == i else zero for j in range(m)]
            + [Fraction(b[i])] for i in range(m)]
    cost = [Fraction(v) for v in c] + [zero] * (m + 1)
    basis = list(range(n, n + m))
    iterations = 0
    while True:
        enter = next((j for j in range(n + m) if cost[j] > 0), None)
        if enter is None:
            break
        ratio, leave = None, None
        for i in range(m):
            if rows[i][enter] > 0:
                r = rows[i][-1] / rows[i][enter]
                if ratio is None or r < ratio or (r == ratio and basis[i] < basis[leave]):
                    ratio, leave = r, i
        if leave is None:
            raise UnboundedError("objective unbounded above")
        piv = rows[leave][enter]
        rows[leave] = [v / piv for v in rows[leave]]
        for i in range(m):
            if i != leave and rows[i][enter] != 0:
                f = rows[i][enter]
                rows[i] = [v - f * w for v, w in zip(rows[i], rows[leave])]
        if cost[enter] != 0:
            f = cost[enter]
            cost = [v - f * w for v, w in zip(cost, rows[leave])]
        basis[leave] = enter
        iterations += 1

    x = [zero] * n
    slack = [zero] * m
    for i, j in enumerate(basis):
        if j < n:
            x[j] = rows[i][-1]
        else:
            slack[j - n] = rows[i][-1]
    value = sum(ci * xi for ci, xi in zip(c, x))
    return SimplexResult(
        value=value, x=tuple(x), slack=tuple(slack),
        reduced_costs=tuple(cost[:n]), basis=tuple(basis),
        iterations=iterations,
    )
