"""Exact linear algebra over Fraction / Gaussian-rational coefficients.

Two solvers are provided:

* :func:`solve_dense` - textbook Gaussian elimination with left-to-right
  column pivoting; free columns are set to zero, so the returned solution is
  the canonical gauge representative.  Used for planar stages, Lyapunov
  recursions and Morse stages, where systems stay small.

* :func:`solve_two_term` - a propagation solver for systems in which every
  equation touches at most two unknowns.  The degree-by-degree stage systems
  for diagonal leading polynomials (sums of d-th powers) have exactly this
  shape, which keeps stages tractable where dense elimination would not be.
"""

from __future__ import annotations

from collections import deque
from typing import Callable, Hashable, Iterable, Sequence


def solve_dense(rows: list[list], rhs: list, zero) -> tuple[list, list, bool]:
    """Solve A x = b exactly; returns (solution, residual, consistent).

    ``rows`` is a dense matrix (lists of field elements), ``zero`` the field
    zero.  Pivoting scans columns left to right and picks the first row with a
    nonzero entry; non-pivot columns are assigned zero.  The residual
    b - A x is computed against the original data, so it vanishes exactly
    when the system is consistent and otherwise certifies the obstruction.
    """
    m = len(rows)
    n = len(rows[0]) if m else 0
    a = [list(r) for r in rows]
    b = list(rhs)
    pivots: list[tuple[int, int]] = []
    row = 0
    for col in range(n):
        pivot = None
        for r in range(row, m):
            if a[r][col]:
                pivot = r
                break
        if pivot is None:
            continue
        a[row], a[pivot] = a[pivot], a[row]
        b[row], b[pivot] = b[pivot], b[row]
        inv = a[row][col]
        a[row] = [v / inv for v in a[row]]
        b[row] = b[row] / inv
        for r in range(m):
            if r != row and a[r][col]:
                factor = a[r][col]
                a[r] = [v - factor * w for v, w in zip(a[r], a[row])]
                b[r] = b[r] - factor * b[row]
        pivots.append((row, col))
        row += 1
        if row == m:
            break
    x = [zero] * n
    for r, c in pivots:
        x[c] = b[r]
    residual = []
    consistent = True
    for orig_row, orig_b in zip(rows, rhs):
        acc = orig_b
        for v, xv in zip(orig_row, x):
            if v and xv:
                acc = acc - v * xv
        residual.append(acc)
        if acc:
            consistent = False
    return x, residual, consistent


class TwoTermSystem:
    """Sparse exact system whose equations involve at most two unknowns."""

    def __init__(self, zero):
        self.zero = zero
        self.eqs: list[dict] = []          # unknown key -> coefficient
        self.rhs: list = []
        self.adj: dict[Hashable, list[int]] = {}
        self.keys: list[tuple] = []        # original (coeff pairs) for residuals
        self.rhs0: list = []

    def add_equation(self, terms: Sequence[tuple[Hashable, object]], rhs) -> None:
        merged: dict = {}
        for key, coeff in terms:
            if not coeff:
                continue
            merged[key] = merged.get(key, self.zero) + coeff
        merged = {k: c for k, c in merged.items() if c}
        if len(merged) > 2:
            raise ValueError("equation touches more than two unknowns")
        idx = len(self.eqs)
        self.eqs.append(dict(merged))
        self.rhs.append(rhs)
        self.keys.append(tuple(merged.items()))
        self.rhs0.append(rhs)
        for key in merged:
            self.adj.setdefault(key, []).append(idx)

    def solve(self, free_order: Callable[[Hashable], tuple]) -> tuple[dict, list, bool]:
        """Propagate; set free components to zero in ``free_order``-last order.

        Returns (assignment, residual list, consistent).  Mirrors dense
        elimination with lexicographic pivoting: within each underdetermined
        component the unknown that sorts last is the freed one.
        """
        values: dict = {}
        remaining = [dict(eq) for eq in self.eqs]
        queue = deque(i for i, eq in enumerate(remaining) if len(eq) <= 1)
        inconsistent = False
        unknown_keys = set(self.adj)

        def assign(key, value):
            values[key] = value
            unknown_keys.discard(key)
            for idx in self.adj.get(key, ()):
                eq = remaining[idx]
                if key in eq:
                    coeff = eq.pop(key)
                    self.rhs[idx] = self.rhs[idx] - coeff * value
                    if len(eq) <= 1:
                        queue.append(idx)

        while True:
            while queue:
                idx = queue.popleft()
                eq = remaining[idx]
                if len(eq) == 0:
                    if self.rhs[idx]:
                        inconsistent = True
                    continue
                if len(eq) == 1:
                    (key, coeff), = eq.items()
                    if key in values:
                        continue
                    eq.clear()
                    assign(key, self.rhs[idx] / coeff)
            if not unknown_keys:
                break
            free = max(unknown_keys, key=free_order)
            assign(free, self.zero)

        residual = []
        consistent = True
        for terms, rhs in zip(self.keys, self.rhs0):
            acc = rhs
            for key, coeff in terms:
                v = values.get(key, self.zero)
                if v:
                    acc = acc - coeff * v
            residual.append(acc)
            if acc:
                consistent = False
        assert consistent == (not inconsistent)
        return values, residual, consistent
