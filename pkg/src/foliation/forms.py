"""Exterior algebra of differential forms with truncated-series coefficients.

Supports k-forms for k = 0..3 in any number of variables: exterior derivative,
wedge product, contraction with the radial (Euler) field, decomposition into
homogeneous pieces, the integrability residual w ^ dw, and the remainder of a
form under coefficient-wise division by a single homogeneous polynomial.

A k-form stores coefficients on the basis of strictly increasing index tuples
(i_1 < ... < i_k); a 0-form has the single key ().  All coefficient series of
one form share nvars, order and field; the constructor re-truncates to the
common minimum order.  Values are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from . import fields
from .fields import GAUSSIAN, RATIONAL, FieldMismatchError, Scalar
from .series import DimensionMismatchError, TruncatedSeries, default_names

Index = tuple[int, ...]

MAX_FORM_DEGREE = 3


class UnsupportedDegreeError(ValueError):
    """Raised for operations that would need forms of degree > 3."""


class KForm:
    """Differential k-form, k in {0, 1, 2, 3}, with TruncatedSeries coefficients."""

    __slots__ = ("degree", "nvars", "order", "field", "_coeffs")

    def __init__(self, degree: int, nvars: int, order: int, field: str = RATIONAL,
                 coeffs: Mapping[Index, TruncatedSeries] | None = None):
        if not 0 <= degree <= MAX_FORM_DEGREE:
            raise UnsupportedDegreeError(f"forms of degree {degree} are unsupported")
        clean: dict[Index, TruncatedSeries] = {}
        if coeffs:
            order = min([order] + [s.order for s in coeffs.values()])
            for idx, s in coeffs.items():
                if len(idx) != degree or list(idx) != sorted(set(idx)):
                    raise ValueError(f"basis index {idx!r} is not strictly increasing "
                                     f"of length {degree}")
                if any(not 0 <= i < nvars for i in idx):
                    raise IndexError(f"basis index {idx!r} out of range")
                if s.nvars != nvars:
                    raise DimensionMismatchError("coefficient nvars mismatch")
                if s.field != field:
                    raise FieldMismatchError("coefficient field mismatch")
                s = s.truncate(order)
                if not s.is_zero():
                    clean[idx] = s
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "_coeffs", clean)

    def __setattr__(self, name, value):
        raise AttributeError("KForm is immutable")

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def zero(degree: int, nvars: int, order: int, field: str = RATIONAL) -> "KForm":
        return KForm(degree, nvars, order, field)

    @staticmethod
    def from_function(s: TruncatedSeries) -> "KForm":
        return KForm(0, s.nvars, s.order, s.field, {(): s})

    @staticmethod
    def one_form(coeffs: Sequence[TruncatedSeries]) -> "KForm":
        nvars = coeffs[0].nvars
        data = {(i,): c for i, c in enumerate(coeffs)}
        order = min(c.order for c in coeffs)
        return KForm(1, nvars, order, coeffs[0].field, data)

    # -- inspection -------------------------------------------------------------

    def coefficient(self, idx: Index) -> TruncatedSeries:
        got = self._coeffs.get(tuple(idx))
        if got is None:
            return TruncatedSeries.zero(self.nvars, self.order, self.field)
        return got

    def items(self) -> Iterator[tuple[Index, TruncatedSeries]]:
        for idx in sorted(self._coeffs):
            yield idx, self._coeffs[idx]

    def is_zero(self) -> bool:
        return not self._coeffs

    def as_function(self) -> TruncatedSeries:
        if self.degree != 0:
            raise ValueError("not a 0-form")
        return self.coefficient(())

    def __eq__(self, other) -> bool:
        if not isinstance(other, KForm):
            return NotImplemented
        return (self.degree == other.degree and self.nvars == other.nvars
                and self.field == other.field and self.order == other.order
                and self._coeffs == other._coeffs)

    def same_jet(self, other: "KForm", through: int | None = None) -> bool:
        """Coefficient-wise jet comparison through the given degree."""
        if self.degree != other.degree or self.nvars != other.nvars:
            return False
        limit = min(self.order, other.order) if through is None else through
        for idx in set(self._coeffs) | set(other._coeffs):
            if not self.coefficient(idx).same_jet(other.coefficient(idx), limit):
                return False
        return True

    # -- linear structure ----------------------------------------------------------

    def _check(self, other: "KForm") -> None:
        if self.nvars != other.nvars:
            raise DimensionMismatchError("forms over different variable counts")
        if self.field != other.field:
            raise FieldMismatchError("forms over different coefficient fields")

    def __add__(self, other: "KForm") -> "KForm":
        self._check(other)
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degrees")
        order = min(self.order, other.order)
        data: dict[Index, TruncatedSeries] = {}
        for idx in set(self._coeffs) | set(other._coeffs):
            s = self.coefficient(idx).truncate(order) + other.coefficient(idx).truncate(order)
            if not s.is_zero():
                data[idx] = s
        return KForm(self.degree, self.nvars, order, self.field, data)

    def __neg__(self) -> "KForm":
        data = {i: -s for i, s in self._coeffs.items()}
        return KForm(self.degree, self.nvars, self.order, self.field, data)

    def __sub__(self, other: "KForm") -> "KForm":
        return self + (-other)

    def scale(self, value: Scalar) -> "KForm":
        data = {i: s.scale(value) for i, s in self._coeffs.items()}
        return KForm(self.degree, self.nvars, self.order, self.field, data)

    def multiply_function(self, s: TruncatedSeries) -> "KForm":
        """Product with a 0-form; order propagates valuation-sharp per coefficient."""
        if s.nvars != self.nvars or s.field != self.field:
            raise DimensionMismatchError("incompatible scalar factor")
        data = {}
        order = None
        for idx, c in self._coeffs.items():
            prod = c * s
            data[idx] = prod
            order = prod.order if order is None else min(order, prod.order)
        if order is None:
            order = min(self.order + s.valuation(), s.order + self.order + 1)
        return KForm(self.degree, self.nvars, order, self.field, data)

    def truncate(self, order: int) -> "KForm":
        data = {i: s.truncate(order) for i, s in self._coeffs.items()}
        return KForm(self.degree, self.nvars, order, self.field, data)

    # -- field promotion -------------------------------------------------------------

    def complexify(self) -> "KForm":
        if self.field == GAUSSIAN:
            return self
        data = {i: s.complexify() for i, s in self._coeffs.items()}
        return KForm(self.degree, self.nvars, self.order, GAUSSIAN, data)

    # -- evaluation --------------------------------------------------------------------

    def evaluate(self, point: Sequence[complex]) -> dict[Index, complex]:
        return {idx: s.evaluate(point) for idx, s in self.items()}

    # -- display -----------------------------------------------------------------------

    def to_str(self, names: Sequence[str] | None = None) -> str:
        if names is None:
            names = default_names(self.nvars, self.field)
        if self.is_zero():
            return "0"
        parts = []
        for idx, s in self.items():
            base = "^".join(f"d{names[i]}" for i in idx)
            coeff = s.to_str(names)
            if base:
                parts.append(f"({coeff}) {base}")
            else:
                parts.append(coeff)
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"<{self.degree}-form n={self.nvars} N={self.order} {self.to_str()}>"


@dataclass(frozen=True)
class HomogeneousDecomposition:
    """Split of a form into pieces with homogeneous coefficients.

    ``leading`` is the lowest coefficient degree nu with a nonzero piece; it is
    None for the zero form and callers must branch on that explicitly (guessing
    a leading index would corrupt the dicriticality test downstream).
    """

    parts: tuple[tuple[int, KForm], ...]
    leading: int | None

    def part(self, degree: int) -> KForm | None:
        for d, f in self.parts:
            if d == degree:
                return f
        return None


def exterior_derivative(a: KForm) -> KForm:
    """d of a k-form, k <= 2; coefficient order drops by one."""
    if a.degree >= MAX_FORM_DEGREE:
        raise UnsupportedDegreeError("d of a 3-form would be a 4-form (unsupported)")
    order = max(a.order - 1, 0)
    acc: dict[Index, TruncatedSeries] = {}
    for idx, s in a.items():
        for j in range(a.nvars):
            if j in idx:
                continue
            ds = s.partial(j)
            if ds.is_zero():
                continue
            pos = sum(1 for i in idx if i < j)
            new = tuple(sorted(idx + (j,)))
            signed = ds if pos % 2 == 0 else -ds
            acc[new] = acc[new] + signed if new in acc else signed
    return KForm(a.degree + 1, a.nvars, order, a.field, acc)


def _merge_sign(left: Index, right: Index) -> tuple[Index, int]:
    """Sorted union of disjoint index tuples and the permutation sign."""
    inversions = sum(1 for i in left for j in right if i > j)
    merged = tuple(sorted(left + right))
    return merged, (-1) ** inversions


def wedge(a: KForm, b: KForm) -> KForm:
    """Graded-antisymmetric product; result degree must stay <= 3."""
    a._check(b)
    if a.degree + b.degree > MAX_FORM_DEGREE:
        raise UnsupportedDegreeError(
            f"wedge of degrees {a.degree} and {b.degree} exceeds degree 3")
    acc: dict[Index, TruncatedSeries] = {}
    orders = []
    for ia, sa in a.items():
        for ib, sb in b.items():
            if set(ia) & set(ib):
                continue
            merged, sign = _merge_sign(ia, ib)
            prod = sa * sb
            orders.append(prod.order)
            if sign < 0:
                prod = -prod
            acc[merged] = acc[merged] + prod if merged in acc else prod
    if orders:
        order = min(orders)
    else:
        order = min(a.order + b_valuation(b), b.order + b_valuation(a))
    return KForm(a.degree + b.degree, a.nvars, order, a.field, acc)


def b_valuation(a: KForm) -> int:
    """Least coefficient valuation of a form (order + 1 when zero)."""
    if a.is_zero():
        return a.order + 1
    return min(s.valuation() for _, s in a.items())


def euler_contract(a: KForm) -> KForm:
    """Interior product with the radial field R = sum x_j d/dx_j."""
    if a.degree == 0:
        raise UnsupportedDegreeError("cannot contract a 0-form")
    acc: dict[Index, TruncatedSeries] = {}
    order = a.order
    for idx, s in a.items():
        for p, i in enumerate(idx):
            rest = idx[:p] + idx[p + 1:]
            term = s * TruncatedSeries.variable(i, a.nvars, a.order + 1, a.field)
            if p % 2 == 1:
                term = -term
            acc[rest] = acc[rest] + term if rest in acc else term
            order = min(order, term.order)
    # Contraction multiplies by coordinates: coefficient degree rises by one,
    # and completeness through a.order + 1 is certified by the valuation rule.
    return KForm(a.degree - 1, a.nvars, order, a.field, acc)


def homogeneous_parts(a: KForm) -> HomogeneousDecomposition:
    """Decompose by coefficient total degree; leading index None for zero forms."""
    degrees: set[int] = set()
    for _, s in a.items():
        degrees.update(s.degrees())
    parts = []
    for m in sorted(degrees):
        data = {i: s.homogeneous_part(m) for i, s in a.items()}
        piece = KForm(a.degree, a.nvars, a.order, a.field, data)
        if not piece.is_zero():
            parts.append((m, piece))
    leading = parts[0][0] if parts else None
    return HomogeneousDecomposition(tuple(parts), leading)


def integrability_residual(omega: KForm) -> KForm:
    """w ^ dw, the obstruction to integrability (identically zero for n = 2)."""
    if omega.degree != 1:
        raise ValueError("integrability residual is defined for 1-forms")
    return wedge(omega, exterior_derivative(omega))


def _divide_once(poly: dict, divisor_lt: tuple, divisor_rest: list) -> dict:
    """One full reduction pass of a raw exponent->coeff dict modulo the divisor."""
    lt_exp, lt_coeff = divisor_lt
    work = dict(poly)
    while True:
        target = None
        for exp in sorted(work, reverse=True):
            if all(e >= l for e, l in zip(exp, lt_exp)):
                target = exp
                break
        if target is None:
            return work
        factor = work[target] / lt_coeff
        shift = tuple(e - l for e, l in zip(target, lt_exp))
        del work[target]
        for exp, coeff in divisor_rest:
            key = tuple(s + e for s, e in zip(shift, exp))
            val = work.get(key)
            term = factor * coeff
            val = -term if val is None else val - term
            if val:
                work[key] = val
            elif key in work:
                del work[key]


def divisibility_residual(a: KForm, p: TruncatedSeries) -> KForm:
    """Remainder of each coefficient modulo the homogeneous polynomial p.

    Reduction by the single divisor p in pure lexicographic order with
    x_1 > x_2 > ...; the result is zero exactly when p divides every
    coefficient.  For homogeneous p this commutes with truncation.
    """
    if p.is_zero():
        raise ValueError("division by the zero polynomial")
    if len(p.degrees()) != 1:
        raise ValueError("divisor must be homogeneous")
    if p.nvars != a.nvars or p.field != a.field:
        raise DimensionMismatchError("divisor incompatible with the form")
    terms = sorted(((e, c) for e, c in p.items()), reverse=True)
    lt = terms[0]
    rest = terms[1:]
    data: dict[Index, TruncatedSeries] = {}
    for idx, s in a.items():
        raw = {e: c for e, c in s.items()}
        rem = _divide_once(raw, lt, rest)
        if rem:
            data[idx] = TruncatedSeries(a.nvars, a.order, a.field, rem)
    return KForm(a.degree, a.nvars, a.order, a.field, data)


def pullback(a: KForm, images: Sequence[TruncatedSeries], order: int | None = None) -> KForm:
    """Pullback of a form under the map whose component functions are ``images``.

    The i-th image is the i-th coordinate of the map, written in the target
    variables.  Coefficients are composed with the map and each basis covector
    dx_i is replaced by d(images[i]).
    """
    if len(images) != a.nvars:
        raise DimensionMismatchError(f"map needs {a.nvars} component functions")
    tgt = images[0].nvars
    if a.degree == 0:
        return KForm.from_function(a.as_function().substitute(images, order=order))
    d_images = [
        exterior_derivative(KForm.from_function(im)) for im in images
    ]
    total: KForm | None = None
    for idx, s in a.items():
        pulled = s.substitute(images, order=order)
        term: KForm | None = None
        for i in idx:
            term = d_images[i] if term is None else wedge(term, d_images[i])
        assert term is not None
        term = term.multiply_function(pulled)
        total = term if total is None else total + term
    if total is None:
        ordr = order if order is not None else min(im.order for im in images)
        return KForm.zero(a.degree, tgt, ordr, a.field)
    return total
