"""Degree-by-degree first-integral solver and its independent focal oracles.

The central operation writes a one-form w with exact leading jet dQ as
w = g * df through a requested truncation order, solving one homogeneous
stage at a time.  Each stage

    d f_{m+1} + g_{m-v} dQ  =  w_m - sum_{j=1}^{m-v-1} g_j d f_{m+1-j}

is an exact linear system over the rationals.  When Q is a diagonal sum of
d-th powers (the case of every built-in family) each scalar equation of the
stage couples at most one f coefficient with one g coefficient, and a sparse
propagation solver replaces dense elimination; otherwise, and always for
n = 2, dense elimination with lexicographic pivoting is used, free variables
set to zero.

A stage that cannot be solved is the obstruction: the residual one-form lies
outside the image of the stage map.  For planar forms with leading jet
d(x^2 + y^2) the residual class at each odd coefficient degree m is spanned by
Q^{(m-1)/2} (y dx - x dy); projecting on it yields the focal value V_{m+1},
and projecting it out lets the sequence continue past the first obstruction.
The Lyapunov recursion on the dual vector field provides the independent
cross-check of those values.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import fields
from .fields import RATIONAL, Scalar
from .forms import (KForm, exterior_derivative, homogeneous_parts,
                    integrability_residual, pullback)
from .linsolve import TwoTermSystem, solve_dense
from .series import MAX_ORDER, Exponent, TruncatedSeries, monomials

__all__ = [
    "FirstIntegralOutcome", "Obstruction", "FocalValueSequence",
    "CoordinateChange", "LieOutcome", "RankDeficiencyError",
    "LeadingPartError", "NotIntegrableError",
    "solve_gdf", "focal_values_from_obstructions", "solve_lie",
    "lie_obstruction", "morse_normalize", "restrict_hyperplane",
    "complexify_restrict_commutes", "planar_dual_field", "invert_map",
]


class LeadingPartError(ValueError):
    """The leading homogeneous jet does not match the requested dQ."""


class NotIntegrableError(ValueError):
    """w ^ dw is not exactly zero; the solver refuses to start."""


class RankDeficiencyError(ValueError):
    def __init__(self, rank: int, nvars: int):
        super().__init__(f"quadratic part has rank {rank} < {nvars}")
        self.rank = rank
        self.nvars = nvars


@dataclass(frozen=True)
class Obstruction:
    """First unsolvable stage: its degree, residual class and coefficients."""

    degree: int
    residual: KForm
    values: tuple[Fraction, ...]


@dataclass(frozen=True)
class FirstIntegralOutcome:
    status: str                       # "solved" | "obstructed"
    f: TruncatedSeries | None
    g: TruncatedSeries | None
    obstruction: Obstruction | None
    residual_is_zero: bool
    order: int

    @property
    def solved(self) -> bool:
        return self.status == "solved"


@dataclass(frozen=True)
class FocalValueSequence:
    """Focal values V_2, V_4, ... as exact rationals.

    ``values[k]`` is V_{2(k+1)}.  Entries after the first nonzero one are
    computed modulo the earlier obstructions (standard practice for Lyapunov
    quantities).
    """

    values: tuple[Fraction, ...]
    method: str

    def first_nonzero(self) -> tuple[int, Fraction] | None:
        for k, v in enumerate(self.values):
            if v:
                return 2 * (k + 1), v
        return None


@dataclass(frozen=True)
class LieOutcome:
    """Result of the scalar recursion X(F) = 0 with prescribed leading part."""

    obstructed_degree: int | None     # degree of the F-term that fails, or None
    residual: dict | None             # exponent -> coefficient at the failure
    f: TruncatedSeries


@dataclass(frozen=True)
class CoordinateChange:
    """Polynomial coordinate change with exact inverse through ``order``."""

    images: tuple[TruncatedSeries, ...]
    inverse_images: tuple[TruncatedSeries, ...]
    order: int


# --------------------------------------------------------------------------
# homogeneous dictionary helpers (exponent tuple -> coefficient)
# --------------------------------------------------------------------------

def _conv(a: dict, b: dict) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            exp = tuple(x + y for x, y in zip(ea, eb))
            val = out.get(exp)
            prod = ca * cb
            val = prod if val is None else val + prod
            if val:
                out[exp] = val
            elif exp in out:
                del out[exp]
    return out


def _dpart(a: dict, i: int) -> dict:
    out: dict = {}
    for exp, coeff in a.items():
        e = exp[i]
        if e:
            out[exp[:i] + (e - 1,) + exp[i + 1:]] = coeff * e
    return out


def _sub(a: dict, b: dict) -> dict:
    out = dict(a)
    for exp, coeff in b.items():
        val = out.get(exp)
        val = -coeff if val is None else val - coeff
        if val:
            out[exp] = val
        elif exp in out:
            del out[exp]
    return out


def _diagonal_profile(q: TruncatedSeries) -> dict[int, Scalar] | None:
    """Return {variable: coefficient} when q = sum c_j x_j^d, else None."""
    diag: dict[int, Scalar] = {}
    degree = None
    for exp, coeff in q.items():
        active = [i for i, e in enumerate(exp) if e]
        if len(active) != 1:
            return None
        j = active[0]
        if degree is None:
            degree = exp[j]
        elif exp[j] != degree:
            return None
        diag[j] = coeff
    return diag if diag else None


# --------------------------------------------------------------------------
# one stage of the g*df solver
# --------------------------------------------------------------------------

def _free_order(key):
    kind, exp = key
    return (0 if kind == "f" else 1, tuple(-e for e in exp))


def _stage_solve(nvars: int, field: str, m: int, nu: int, q: TruncatedSeries,
                 rhs: list[dict], augment: list[dict] | None = None):
    """Solve d f_{m+1} + g dQ = R on homogeneous slices.

    ``rhs`` (and the optional extra column ``augment``) hold one exponent
    dictionary per component.  Returns (f_terms, g_terms, c, residual_rows)
    with residual_rows None when consistent; ``c`` is the coefficient of the
    augment column (zero when not requested).
    """
    zero = fields.zero(field)
    diag = _diagonal_profile(q)
    d = nu + 1
    if diag is not None and augment is None and nvars > 2:
        system = TwoTermSystem(zero)
        eq_index: list[tuple[int, Exponent]] = []
        for i in range(nvars):
            ci = diag.get(i)
            for alpha in monomials(nvars, m):
                terms = []
                gamma = alpha[:i] + (alpha[i] + 1,) + alpha[i + 1:]
                terms.append((("f", gamma), fields.coerce(field, alpha[i] + 1)))
                if ci is not None and alpha[i] >= d - 1:
                    beta = alpha[:i] + (alpha[i] - (d - 1),) + alpha[i + 1:]
                    terms.append((("g", beta), fields.coerce(field, d) * ci))
                system.add_equation(terms, rhs[i].get(alpha, zero))
                eq_index.append((i, alpha))
        values, residual, consistent = system.solve(_free_order)
        f_terms = {exp: v for (kind, exp), v in values.items() if kind == "f" and v}
        g_terms = {exp: v for (kind, exp), v in values.items() if kind == "g" and v}
        if consistent:
            return f_terms, g_terms, zero, None
        res_rows = [dict() for _ in range(nvars)]
        for (i, alpha), r in zip(eq_index, residual):
            if r:
                res_rows[i][alpha] = r
        return f_terms, g_terms, zero, res_rows

    f_cols = list(monomials(nvars, m + 1))
    g_cols = list(monomials(nvars, m - nu))
    q_partials = [_dpart({e: c for e, c in q.items()}, i) for i in range(nvars)]
    ncols = len(f_cols) + len(g_cols) + (1 if augment is not None else 0)
    col_of_f = {e: k for k, e in enumerate(f_cols)}
    col_of_g = {e: len(f_cols) + k for k, e in enumerate(g_cols)}
    rows, b, row_index = [], [], []
    for i in range(nvars):
        qi = q_partials[i]
        for alpha in monomials(nvars, m):
            row = [zero] * ncols
            gamma = alpha[:i] + (alpha[i] + 1,) + alpha[i + 1:]
            row[col_of_f[gamma]] = fields.coerce(field, alpha[i] + 1)
            for q_exp, q_c in qi.items():
                beta = tuple(a - qe for a, qe in zip(alpha, q_exp))
                if all(e >= 0 for e in beta):
                    col = col_of_g.get(beta)
                    if col is not None:
                        row[col] = row[col] + q_c
            if augment is not None:
                row[-1] = augment[i].get(alpha, zero)
            rows.append(row)
            b.append(rhs[i].get(alpha, zero))
            row_index.append((i, alpha))
    x, residual, consistent = solve_dense(rows, b, zero)
    f_terms = {e: x[col_of_f[e]] for e in f_cols if x[col_of_f[e]]}
    g_terms = {e: x[col_of_g[e]] for e in g_cols if x[col_of_g[e]]}
    c = x[-1] if augment is not None else zero
    if consistent:
        return f_terms, g_terms, c, None
    res_rows = [dict() for _ in range(nvars)]
    for (i, alpha), r in zip(row_index, residual):
        if r:
            res_rows[i][alpha] = r
    return f_terms, g_terms, c, res_rows


def _leading_checks(omega: KForm, q: TruncatedSeries, order: int):
    if omega.degree != 1:
        raise ValueError("solver expects a one-form")
    if q.is_zero() or len(q.degrees()) != 1:
        raise ValueError("leading potential must be homogeneous and nonzero")
    nu = q.degrees()[0] - 1
    if nu < 1:
        raise ValueError("leading potential must have degree >= 2")
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"truncation order must be in [0, {MAX_ORDER}]")
    dq = exterior_derivative(KForm.from_function(q))
    dec = homogeneous_parts(omega)
    if dec.leading != nu or not dec.part(nu).same_jet(dq, nu):
        raise LeadingPartError(
            f"leading jet of the form does not equal d of the given potential "
            f"(leading index {dec.leading}, expected {nu})")
    return nu, dq


def solve_gdf(omega: KForm, q: TruncatedSeries, order: int,
              check_integrability: bool = True) -> FirstIntegralOutcome:
    """Decide w = g * df at truncated order with f = q + h.o.t. and g(0) = 1."""
    omega = omega.truncate(order)
    nu, _ = _leading_checks(omega, q, order)
    if check_integrability and omega.nvars >= 3:
        if not integrability_residual(omega).is_zero():
            raise NotIntegrableError("w ^ dw != 0 at truncated order")
    nvars, field = omega.nvars, omega.field
    q_terms = {e: c for e, c in q.items()}
    f_parts: dict[int, dict] = {nu + 1: q_terms}
    g_parts: dict[int, dict] = {0: {(0,) * nvars: fields.one(field)}}
    df_cache: dict[int, list[dict]] = {
        nu + 1: [_dpart(q_terms, i) for i in range(nvars)]}

    for m in range(nu + 1, order + 1):
        rhs = []
        for i in range(nvars):
            acc = dict(omega.coefficient((i,)).bucket(m))
            for j in range(1, m - nu):
                fdeg = m + 1 - j
                if fdeg in df_cache and j in g_parts:
                    acc = _sub(acc, _conv(g_parts[j], df_cache[fdeg][i]))
            rhs.append(acc)
        f_new, g_new, _, residual = _stage_solve(nvars, field, m, nu, q, rhs)
        if residual is not None:
            res_form = KForm(1, nvars, order, field, {
                (i,): TruncatedSeries(nvars, order, field, rows)
                for i, rows in enumerate(residual) if rows})
            values = tuple(c for _, s in res_form.items() for _, c in s.items())
            return FirstIntegralOutcome("obstructed", None, None,
                                        Obstruction(m, res_form, values),
                                        False, order)
        if f_new:
            f_parts[m + 1] = f_new
            df_cache[m + 1] = [_dpart(f_new, i) for i in range(nvars)]
        if g_new:
            g_parts[m - nu] = g_new

    f = TruncatedSeries(nvars, order + 1, field,
                        {e: c for part in f_parts.values() for e, c in part.items()})
    g = TruncatedSeries(nvars, max(order - nu, 0), field,
                        {e: c for part in g_parts.values() for e, c in part.items()})
    # independent re-multiplication, not the solver's internal bookkeeping
    gdf = exterior_derivative(KForm.from_function(f)).multiply_function(g)
    residual_form = omega - gdf
    ok = residual_form.order >= order and residual_form.truncate(order).is_zero()
    return FirstIntegralOutcome("solved", f, g, None, ok, order)


# --------------------------------------------------------------------------
# focal values via stage obstructions (planar center problem)
# --------------------------------------------------------------------------

def _circle_check(omega: KForm, order: int) -> TruncatedSeries:
    if omega.nvars != 2:
        raise ValueError("focal values are defined for planar forms")
    q = TruncatedSeries(2, order + 1, omega.field, {(2, 0): 1, (0, 2): 1})
    _leading_checks(omega, q, order)
    return q


def focal_values_from_obstructions(omega: KForm, order: int) -> FocalValueSequence:
    """Focal values read off the stage residual classes of the g*df solver.

    At each odd coefficient degree m the cokernel of the stage map is spanned
    by Q^{(m-1)/2} (y dx - x dy); the component V_{m+1} of the right-hand
    side along it is the focal value, and subtracting it makes the stage
    solvable, so the sequence continues past obstructions.
    """
    omega = omega.truncate(order)
    q = _circle_check(omega, order)
    nvars, field = 2, omega.field
    nu = 1
    q_terms = {e: c for e, c in q.items()}
    f_parts: dict[int, dict] = {2: q_terms}
    g_parts: dict[int, dict] = {0: {(0, 0): fields.one(field)}}
    df_cache: dict[int, list[dict]] = {2: [_dpart(q_terms, i) for i in range(2)]}
    values: list[Fraction] = [Fraction(0)]  # V_2 vanishes with the exact leading jet

    for m in range(2, order + 1):
        rhs = []
        for i in range(2):
            acc = dict(omega.coefficient((i,)).bucket(m))
            for j in range(1, m - nu):
                fdeg = m + 1 - j
                if fdeg in df_cache and j in g_parts:
                    acc = _sub(acc, _conv(g_parts[j], df_cache[fdeg][i]))
            rhs.append(acc)
        augment = None
        if m % 2 == 1:
            k = (m - 1) // 2
            qk = {(0, 0): fields.one(field)}
            for _ in range(k):
                qk = _conv(qk, q_terms)
            augment = [_conv(qk, {(0, 1): fields.one(field)}),
                       _conv(qk, {(1, 0): -fields.one(field)})]
        f_new, g_new, c, residual = _stage_solve(nvars, field, m, nu, q, rhs,
                                                 augment=augment)
        if residual is not None:
            raise ArithmeticError(
                f"stage {m} of the planar center solver is inconsistent beyond "
                f"its one-dimensional residual class; this contradicts the "
                f"normal-form structure")
        if m % 2 == 1:
            values.append(Fraction(c))
        if f_new:
            f_parts[m + 1] = f_new
            df_cache[m + 1] = [_dpart(f_new, i) for i in range(2)]
        if g_new:
            g_parts[m - nu] = g_new
    return FocalValueSequence(tuple(values), "solver-obstruction")


# --------------------------------------------------------------------------
# Lyapunov recursion on a planar vector field (independent oracle)
# --------------------------------------------------------------------------

def _field_parts(x_comp: TruncatedSeries, y_comp: TruncatedSeries):
    parts: dict[int, tuple[dict, dict]] = {}
    for d in set(x_comp.degrees()) | set(y_comp.degrees()):
        parts[d] = (x_comp.bucket(d), y_comp.bucket(d))
    return parts


def _apply_field_part(part: tuple[dict, dict], fdict: dict) -> dict:
    a, b = part
    out = _conv(a, _dpart(fdict, 0))
    for exp, coeff in _conv(b, _dpart(fdict, 1)).items():
        val = out.get(exp)
        val = coeff if val is None else val + coeff
        if val:
            out[exp] = val
        elif exp in out:
            del out[exp]
    return out


def solve_lie(x_comp: TruncatedSeries, y_comp: TruncatedSeries,
              order: int, f2: TruncatedSeries | None = None) -> FocalValueSequence:
    """Classical Lyapunov recursion: build F = x^2 + y^2 + ... with
    X(F) = sum V_{2k} (x^2+y^2)^k and return the V sequence.

    The linear part of X must be exactly the unit rotation -y d/dx + x d/dy.
    """
    if x_comp.nvars != 2 or y_comp.nvars != 2:
        raise ValueError("the Lyapunov recursion is planar")
    if x_comp.bucket(1) != {(0, 1): Fraction(-1)} or \
            y_comp.bucket(1) != {(1, 0): Fraction(1)}:
        raise LeadingPartError("linear part must be the rotation -y d/dx + x d/dy")
    field = x_comp.field
    q_terms = {(2, 0): fields.one(field), (0, 2): fields.one(field)}
    if f2 is not None and {e: c for e, c in f2.items()} != q_terms:
        raise ValueError("the quadratic seed must be x^2 + y^2")
    parts = _field_parts(x_comp, y_comp)
    f_parts: dict[int, dict] = {2: dict(q_terms)}
    values: list[Fraction] = [Fraction(0)]
    zero = fields.zero(field)
    for m in range(3, order + 1):
        acc: dict = {}
        for d, part in parts.items():
            if d < 2:
                continue
            e = m + 1 - d
            if e in f_parts:
                for exp, coeff in _apply_field_part(part, f_parts[e]).items():
                    val = acc.get(exp)
                    val = coeff if val is None else val + coeff
                    if val:
                        acc[exp] = val
                    elif exp in acc:
                        del acc[exp]
        cols = list(monomials(2, m))
        col_of = {e: k for k, e in enumerate(cols)}
        even = m % 2 == 0
        ncols = len(cols) + (1 if even else 0)
        rows_idx = list(monomials(2, m))
        row_of = {e: k for k, e in enumerate(rows_idx)}
        rows = [[zero] * ncols for _ in rows_idx]
        for e, col in col_of.items():
            e1, e2 = e
            if e1:
                rows[row_of[(e1 - 1, e2 + 1)]][col] -= e1
            if e2:
                rows[row_of[(e1 + 1, e2 - 1)]][col] += e2
        if even:
            qk = {(0, 0): fields.one(field)}
            for _ in range(m // 2):
                qk = _conv(qk, q_terms)
            for exp, coeff in qk.items():
                rows[row_of[exp]][-1] = -coeff
        b = [-acc.get(e, zero) for e in rows_idx]
        x, _, consistent = solve_dense(rows, b, zero)
        if not consistent:
            raise ArithmeticError("rotation stage unsolvable; broken invariant")
        if even:
            values.append(Fraction(x[-1]))
        f_new = {e: x[col_of[e]] for e in cols if x[col_of[e]]}
        if f_new:
            f_parts[m] = f_new
    return FocalValueSequence(tuple(values), "lyapunov-recursion")


def lie_obstruction(x_comp: TruncatedSeries, y_comp: TruncatedSeries,
                    leading: TruncatedSeries, order: int) -> LieOutcome:
    """Solve X(F) = 0 degree by degree with F = leading + h.o.t.

    Works for any planar field whose lowest-degree part annihilates
    ``leading``; reports the degree of the first F-term that cannot be chosen
    (the same index at which the g*df solver obstructs, shifted to f-degree).
    """
    if x_comp.nvars != 2:
        raise ValueError("planar fields only")
    parts = _field_parts(x_comp, y_comp)
    nu_x = min(parts)
    lead_part = parts[nu_x]
    q_deg = leading.degrees()[0]
    f_parts: dict[int, dict] = {q_deg: {e: c for e, c in leading.items()}}
    if _apply_field_part(lead_part, f_parts[q_deg]):
        raise LeadingPartError("leading field part does not annihilate the seed")
    zero = fields.zero(x_comp.field)
    max_known = min(x_comp.order, y_comp.order)
    for e in range(q_deg + 1, order + 1):
        mu = nu_x + e - 1
        # every field part of degree <= mu - 1 must be inside the truncation
        if mu - 1 > max_known:
            break
        acc: dict = {}
        for d, part in parts.items():
            if d == nu_x:
                continue
            src = mu + 1 - d
            if src in f_parts:
                for exp, coeff in _apply_field_part(part, f_parts[src]).items():
                    val = acc.get(exp)
                    val = coeff if val is None else val + coeff
                    if val:
                        acc[exp] = val
                    elif exp in acc:
                        del acc[exp]
        cols = list(monomials(2, e))
        col_of = {c: k for k, c in enumerate(cols)}
        rows_idx = list(monomials(2, mu))
        row_of = {r: k for k, r in enumerate(rows_idx)}
        rows = [[zero] * len(cols) for _ in rows_idx]
        for c_exp, col in col_of.items():
            for exp, coeff in _apply_field_part(lead_part, {c_exp: fields.one(x_comp.field)}).items():
                rows[row_of[exp]][col] += coeff
        b = [-acc.get(r, zero) for r in rows_idx]
        x, residual, consistent = solve_dense(rows, b, zero)
        if not consistent:
            f = TruncatedSeries(2, e - 1, x_comp.field,
                                {ee: c for part in f_parts.values()
                                 for ee, c in part.items()})
            res = {rows_idx[k]: r for k, r in enumerate(residual) if r}
            return LieOutcome(e, res, f)
        f_new = {c: x[col_of[c]] for c in cols if x[col_of[c]]}
        if f_new:
            f_parts[e] = f_new
    f = TruncatedSeries(2, order, x_comp.field,
                        {ee: c for part in f_parts.values() for ee, c in part.items()})
    return LieOutcome(None, None, f)


# --------------------------------------------------------------------------
# Morse normalization and coordinate changes
# --------------------------------------------------------------------------

def _hessian(q2: TruncatedSeries) -> list[list[Fraction]]:
    n = q2.nvars
    h = [[Fraction(0)] * n for _ in range(n)]
    for exp, coeff in q2.items():
        active = [i for i, e in enumerate(exp) if e]
        if len(active) == 1:
            i = active[0]
            h[i][i] = 2 * Fraction(coeff)
        else:
            i, j = active
            h[i][j] = Fraction(coeff)
            h[j][i] = Fraction(coeff)
    return h


def _congruence_diagonalize(h: list[list[Fraction]]):
    """Return (P, diag) with P^T H P diagonal, exact over the rationals."""
    n = len(h)
    a = [row[:] for row in h]
    p = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]

    def col_op(dst, src, factor):
        for r in range(n):
            a[r][dst] += factor * a[r][src]
        for r in range(n):
            a[dst][r] += factor * a[src][r]
        for r in range(n):
            p[r][dst] += factor * p[r][src]

    def col_swap(i, j):
        for r in range(n):
            a[r][i], a[r][j] = a[r][j], a[r][i]
        for r in range(n):
            a[i][r], a[j][r] = a[j][r], a[i][r]
        for r in range(n):
            p[r][i], p[r][j] = p[r][j], p[r][i]

    for k in range(n):
        if a[k][k] == 0:
            swap = next((l for l in range(k + 1, n) if a[l][l] != 0), None)
            if swap is not None:
                col_swap(k, swap)
            else:
                mix = next((l for l in range(k + 1, n) if a[k][l] != 0), None)
                if mix is None:
                    continue
                col_op(k, mix, Fraction(1))
        for l in range(k + 1, n):
            if a[k][l]:
                col_op(l, k, -a[k][l] / a[k][k])
    return p, [a[i][i] for i in range(n)]


def _compose_maps(outer: Sequence[TruncatedSeries],
                  inner: Sequence[TruncatedSeries]) -> list[TruncatedSeries]:
    return [s.substitute(list(inner)) for s in outer]


def _identity_map(nvars: int, order: int, field: str) -> list[TruncatedSeries]:
    return [TruncatedSeries.variable(i, nvars, order, field) for i in range(nvars)]


def invert_map(images: Sequence[TruncatedSeries], order: int) -> list[TruncatedSeries]:
    """Formal inverse of a map with zero constant term and invertible linear part."""
    n = len(images)
    field = images[0].field
    lin = [[Fraction(0)] * n for _ in range(n)]
    for i, s in enumerate(images):
        if s.constant_term():
            raise ValueError("map must fix the origin")
        for exp, coeff in s.bucket(1).items():
            lin[i][exp.index(1)] = Fraction(coeff)
    rows = [[lin[i][j] for j in range(n)] for i in range(n)]
    inv_cols = []
    for j in range(n):
        e = [Fraction(1) if i == j else Fraction(0) for i in range(n)]
        x, _, ok = solve_dense(rows, e, Fraction(0))
        if not ok:
            raise ValueError("linear part is singular")
        inv_cols.append(x)
    linv = [[inv_cols[j][i] for j in range(n)] for i in range(n)]

    images = [s.truncate(order) for s in images]
    psi = [
        TruncatedSeries(n, order, field,
                        {tuple(1 if k == j else 0 for k in range(n)): linv[i][j]
                         for j in range(n) if linv[i][j]})
        for i in range(n)
    ]
    ident = _identity_map(n, order, field)
    for _ in range(order + 1):
        err = [a - b for a, b in zip(_compose_maps(images, psi), ident)]
        low = min((e.valuation() for e in err), default=order + 1)
        if low > order:
            break
        corr = []
        for i in range(n):
            acc = TruncatedSeries.zero(n, order, field)
            for j in range(n):
                if linv[i][j]:
                    acc = acc + err[j].scale(linv[i][j])
            corr.append(acc)
        psi = [p - c for p, c in zip(psi, corr)]
    return psi


def morse_normalize(f: TruncatedSeries, order: int) -> CoordinateChange:
    """Coordinate change phi with f(phi(x)) = quadratic part of f, exactly
    through ``order`` (the formal Morse normal form).

    Requires a nondegenerate quadratic part; degenerate ranks are rejected
    with the rank in the error.
    """
    n = f.nvars
    if f.constant_term() or f.bucket(1):
        raise ValueError("germ must vanish at the origin with zero differential")
    q2 = f.homogeneous_part(2)
    h = _hessian(q2)
    p, diag = _congruence_diagonalize(h)
    rank = sum(1 for d in diag if d)
    if rank < n:
        raise RankDeficiencyError(rank, n)
    field = f.field
    coeffs = [d / 2 for d in diag]

    p_images = [
        TruncatedSeries(n, order, field,
                        {tuple(1 if k == j else 0 for k in range(n)): p[i][j]
                         for j in range(n) if p[i][j]})
        for i in range(n)
    ]
    p_inv_images = invert_map(p_images, order)

    current = f.truncate(order).substitute(p_images)
    psi = _identity_map(n, order, field)
    while True:
        extra = [d for d in current.degrees() if d >= 3]
        if not extra:
            break
        e = min(extra)
        correction: dict[int, dict] = {}
        for alpha, coeff in current.bucket(e).items():
            j = next(i for i, a in enumerate(alpha) if a)
            beta = alpha[:j] + (alpha[j] - 1,) + alpha[j + 1:]
            correction.setdefault(j, {})[beta] = -coeff / (2 * coeffs[j])
        sigma = []
        for i in range(n):
            terms = {tuple(1 if k == i else 0 for k in range(n)): fields.one(field)}
            for exp, c in correction.get(i, {}).items():
                terms[exp] = terms.get(exp, fields.zero(field)) + c
            sigma.append(TruncatedSeries(n, order, field, terms))
        psi = _compose_maps(psi, sigma)
        current = current.substitute(sigma)

    images = _compose_maps(_compose_maps(p_images, psi), p_inv_images)
    inverse = invert_map(images, order)
    return CoordinateChange(tuple(images), tuple(inverse), order)


# --------------------------------------------------------------------------
# hyperplane restriction and complexification
# --------------------------------------------------------------------------

def restrict_hyperplane(omega: KForm, coeffs: Sequence[Scalar]) -> KForm:
    """Substitute x_n = sum a_j x_j, producing a form in n - 1 variables."""
    n = omega.nvars
    if len(coeffs) != n - 1:
        raise ValueError(f"need {n - 1} hyperplane coefficients")
    if n < 2:
        raise ValueError("nothing to restrict in one variable")
    field = omega.field
    order = omega.order
    images = [TruncatedSeries.variable(i, n - 1, order, field) for i in range(n - 1)]
    last = TruncatedSeries(n - 1, order, field, {
        tuple(1 if k == j else 0 for k in range(n - 1)): fields.coerce(field, c)
        for j, c in enumerate(coeffs) if c
    })
    return pullback(omega, images + [last])


def complexify_restrict_commutes(omega: KForm, coeffs: Sequence[Scalar]) -> bool:
    """Exact equality of complexify(restrict(w)) and restrict(complexify(w))."""
    first = restrict_hyperplane(omega, coeffs).complexify()
    second = restrict_hyperplane(omega.complexify(), coeffs)
    return first == second


def planar_dual_field(omega: KForm) -> tuple[TruncatedSeries, TruncatedSeries]:
    """Dual field X = b d/dx - a d/dy of a planar one-form a dx + b dy."""
    if omega.degree != 1 or omega.nvars != 2:
        raise ValueError("planar one-forms only")
    return omega.coefficient((1,)), -omega.coefficient((0,))
