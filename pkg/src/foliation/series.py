"""Graded truncated multivariate power series over exact coefficient fields.

A :class:`TruncatedSeries` stores the jet of an analytic germ through a total
degree ``order``: a sparse map from exponent tuples to nonzero coefficients,
bucketed by total degree.  The bucketing makes truncation free and lets the
degree-by-degree solvers read off one homogeneous slice in O(1).

The ``order`` attribute is a completeness promise: every monomial of total
degree <= order of the represented germ is stored (or genuinely zero).
Arithmetic propagates the sharpest order it can certify; in particular the
product rule uses valuations, so that g * df with g known through N - v and
df starting at degree v is still complete through N.

Values are immutable after construction and safe to share across threads;
every operation allocates a fresh result.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from . import fields
from .fields import GAUSSIAN, RATIONAL, FieldMismatchError, GaussianRational, Scalar

Exponent = tuple[int, ...]

#: Practical cap on user-requested truncation orders; cost grows steeply past it.
MAX_ORDER = 24


class DimensionMismatchError(ValueError):
    """Raised when series over different variable counts are combined."""


def monomials(nvars: int, degree: int) -> Iterator[Exponent]:
    """Yield all exponent tuples of the given total degree, lex-descending."""
    if nvars == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in monomials(nvars - 1, degree - first):
            yield (first,) + rest


def _check_exponent(nvars: int, exp: Exponent) -> None:
    if len(exp) != nvars or any(e < 0 for e in exp):
        raise ValueError(f"bad exponent {exp!r} for {nvars} variables")


class TruncatedSeries:
    """Sparse polynomial jet of total degree <= ``order``; exact coefficients."""

    __slots__ = ("nvars", "order", "field", "_buckets")

    def __init__(self, nvars: int, order: int, field: str = RATIONAL,
                 terms: Mapping[Exponent, Scalar] | None = None):
        if nvars < 1:
            raise ValueError("need at least one variable")
        if order < 0:
            raise ValueError("truncation order must be >= 0")
        buckets: dict[int, dict[Exponent, Scalar]] = {}
        if terms:
            for exp, value in terms.items():
                _check_exponent(nvars, exp)
                deg = sum(exp)
                if deg > order:
                    continue
                coeff = fields.coerce(field, value)
                if not coeff:
                    continue
                bucket = buckets.setdefault(deg, {})
                if exp in bucket:
                    coeff = bucket[exp] + coeff
                if coeff:
                    bucket[exp] = coeff
                elif exp in bucket:
                    del bucket[exp]
            for deg in [d for d, b in buckets.items() if not b]:
                del buckets[deg]
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "_buckets", buckets)

    def __setattr__(self, name, value):
        raise AttributeError("TruncatedSeries is immutable")

    # -- constructors --------------------------------------------------------

    @staticmethod
    def zero(nvars: int, order: int, field: str = RATIONAL) -> "TruncatedSeries":
        return TruncatedSeries(nvars, order, field)

    @staticmethod
    def constant(value: Scalar, nvars: int, order: int,
                 field: str = RATIONAL) -> "TruncatedSeries":
        return TruncatedSeries(nvars, order, field, {(0,) * nvars: value})

    @staticmethod
    def variable(j: int, nvars: int, order: int,
                 field: str = RATIONAL) -> "TruncatedSeries":
        """The coordinate function x_j (0-based index)."""
        if not 0 <= j < nvars:
            raise IndexError(f"variable index {j} out of range for n={nvars}")
        exp = tuple(1 if i == j else 0 for i in range(nvars))
        return TruncatedSeries(nvars, order, field, {exp: 1})

    @staticmethod
    def monomial(exp: Exponent, value: Scalar, nvars: int, order: int,
                 field: str = RATIONAL) -> "TruncatedSeries":
        return TruncatedSeries(nvars, order, field, {exp: value})

    # -- inspection -----------------------------------------------------------

    def items(self) -> Iterator[tuple[Exponent, Scalar]]:
        for deg in sorted(self._buckets):
            bucket = self._buckets[deg]
            for exp in sorted(bucket, reverse=True):
                yield exp, bucket[exp]

    def coefficient(self, exp: Exponent):
        _check_exponent(self.nvars, exp)
        return self._buckets.get(sum(exp), {}).get(exp, fields.zero(self.field))

    def bucket(self, degree: int) -> dict[Exponent, Scalar]:
        return dict(self._buckets.get(degree, {}))

    def is_zero(self) -> bool:
        return not self._buckets

    def valuation(self) -> int:
        """Lowest stored total degree; order + 1 for the stored-zero series."""
        if not self._buckets:
            return self.order + 1
        return min(self._buckets)

    def max_degree(self) -> int:
        return max(self._buckets) if self._buckets else 0

    def constant_term(self):
        return self._buckets.get(0, {}).get((0,) * self.nvars, fields.zero(self.field))

    def degrees(self) -> list[int]:
        return sorted(self._buckets)

    def __len__(self) -> int:
        return sum(len(b) for b in self._buckets.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return (self.nvars == other.nvars and self.field == other.field
                and self.order == other.order and self._buckets == other._buckets)

    def same_jet(self, other: "TruncatedSeries", through: int | None = None) -> bool:
        """Compare coefficients through ``through`` (default: min common order)."""
        self._compatible(other)
        limit = min(self.order, other.order) if through is None else through
        for deg in range(0, limit + 1):
            if self._buckets.get(deg, {}) != other._buckets.get(deg, {}):
                return False
        return True

    def _compatible(self, other: "TruncatedSeries") -> None:
        if self.nvars != other.nvars:
            raise DimensionMismatchError(
                f"series over {self.nvars} and {other.nvars} variables")
        if self.field != other.field:
            raise FieldMismatchError(
                f"series over {self.field} and {other.field} coefficients")

    # -- ring operations -------------------------------------------------------

    def _raw(self, order: int, data: dict[int, dict[Exponent, Scalar]]) -> "TruncatedSeries":
        out = TruncatedSeries.__new__(TruncatedSeries)
        clean = {d: b for d, b in data.items() if b and d <= order}
        object.__setattr__(out, "nvars", self.nvars)
        object.__setattr__(out, "order", order)
        object.__setattr__(out, "field", self.field)
        object.__setattr__(out, "_buckets", clean)
        return out

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._compatible(other)
        order = min(self.order, other.order)
        data: dict[int, dict[Exponent, Scalar]] = {}
        for deg in set(self._buckets) | set(other._buckets):
            if deg > order:
                continue
            merged = dict(self._buckets.get(deg, {}))
            for exp, coeff in other._buckets.get(deg, {}).items():
                val = merged.get(exp)
                val = coeff if val is None else val + coeff
                if val:
                    merged[exp] = val
                elif exp in merged:
                    del merged[exp]
            if merged:
                data[deg] = merged
        return self._raw(order, data)

    def __neg__(self) -> "TruncatedSeries":
        data = {d: {e: -c for e, c in b.items()} for d, b in self._buckets.items()}
        return self._raw(self.order, data)

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return self + (-other)

    def scale(self, value: Scalar) -> "TruncatedSeries":
        coeff = fields.coerce(self.field, value)
        if not coeff:
            return TruncatedSeries.zero(self.nvars, self.order, self.field)
        data = {d: {e: c * coeff for e, c in b.items()} for d, b in self._buckets.items()}
        return self._raw(self.order, data)

    def __mul__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._compatible(other)
        # Valuation-sharp completeness: unknown tails enter the product only at
        # degrees above min(order_a + val_b, order_b + val_a).
        order = min(self.order + other.valuation(), other.order + self.valuation())
        data: dict[int, dict[Exponent, Scalar]] = {}
        for da, ba in self._buckets.items():
            for db, bb in other._buckets.items():
                deg = da + db
                if deg > order:
                    continue
                bucket = data.setdefault(deg, {})
                for ea, ca in ba.items():
                    for eb, cb in bb.items():
                        exp = tuple(a + b for a, b in zip(ea, eb))
                        val = bucket.get(exp)
                        prod = ca * cb
                        val = prod if val is None else val + prod
                        if val:
                            bucket[exp] = val
                        elif exp in bucket:
                            del bucket[exp]
        return self._raw(order, data)

    def __pow__(self, k: int) -> "TruncatedSeries":
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out = TruncatedSeries.constant(1, self.nvars, self.order, self.field)
        for _ in range(k):
            out = out * self
        return out

    # -- calculus ----------------------------------------------------------------

    def partial(self, j: int) -> "TruncatedSeries":
        """Exact formal partial derivative d/dx_j; order drops by one."""
        if not 0 <= j < self.nvars:
            raise IndexError(f"variable index {j} out of range for n={self.nvars}")
        order = max(self.order - 1, 0)
        data: dict[int, dict[Exponent, Scalar]] = {}
        for deg, bucket in self._buckets.items():
            if deg == 0 or deg - 1 > order:
                continue
            out = data.setdefault(deg - 1, {})
            for exp, coeff in bucket.items():
                e = exp[j]
                if e == 0:
                    continue
                new = exp[:j] + (e - 1,) + exp[j + 1:]
                val = out.get(new)
                term = coeff * e
                val = term if val is None else val + term
                if val:
                    out[new] = val
                elif new in out:
                    del out[new]
        return self._raw(order, data)

    def homogeneous_part(self, degree: int) -> "TruncatedSeries":
        return self._raw(self.order, {degree: dict(self._buckets.get(degree, {}))})

    def truncate(self, order: int) -> "TruncatedSeries":
        data = {d: dict(b) for d, b in self._buckets.items() if d <= order}
        return self._raw(order, data)

    def with_order(self, order: int) -> "TruncatedSeries":
        """Re-tag the completeness order (caller certifies the extension)."""
        return self._raw(order, {d: dict(b) for d, b in self._buckets.items() if d <= order})

    # -- composition and evaluation ------------------------------------------------

    def substitute(self, images: Sequence["TruncatedSeries"], order: int | None = None,
                   allow_constant_term: bool = False) -> "TruncatedSeries":
        """Formal composition self(images[0], ..., images[n-1]).

        Images must have zero constant term, so that the composition of
        truncations stays complete through min of the orders.  With
        ``allow_constant_term=True`` the caller asserts this series is an exact
        polynomial (not the truncation of a longer germ); the result is then
        computed exactly and trusted through the images' order.
        """
        if len(images) != self.nvars:
            raise DimensionMismatchError(
                f"need {self.nvars} substitution images, got {len(images)}")
        tgt_nvars = images[0].nvars
        for im in images:
            if im.nvars != tgt_nvars:
                raise DimensionMismatchError("substitution images disagree on nvars")
            if im.field != self.field:
                raise FieldMismatchError("substitution images over a different field")
            if not allow_constant_term and im.constant_term():
                raise ValueError(
                    "substitution image has a nonzero constant term; pass "
                    "allow_constant_term=True only for exact polynomial series")
        img_order = min(im.order for im in images)
        if order is None:
            order = img_order if allow_constant_term else min(self.order, img_order)
        out = TruncatedSeries.zero(tgt_nvars, order, self.field)
        powers: list[dict[int, TruncatedSeries]] = [
            {0: TruncatedSeries.constant(1, tgt_nvars, order, self.field)}
            for _ in range(self.nvars)
        ]

        def power(i: int, k: int) -> TruncatedSeries:
            cache = powers[i]
            if k not in cache:
                kk = max(cache)
                base = images[i].truncate(order)
                while kk < k:
                    cache[kk + 1] = cache[kk] * base
                    kk += 1
            return cache[k]

        for exp, coeff in self.items():
            term = TruncatedSeries.constant(coeff, tgt_nvars, order, self.field)
            for i, e in enumerate(exp):
                if e:
                    term = term * power(i, e)
            out = out + term
        return out.with_order(order)

    def inverse_unit(self) -> "TruncatedSeries":
        """Multiplicative inverse of a series with invertible constant term."""
        c0 = self.constant_term()
        if not c0:
            raise ZeroDivisionError("series has zero constant term")
        inv0 = fields.one(self.field) / c0
        out: dict[int, dict[Exponent, Scalar]] = {0: {(0,) * self.nvars: inv0}}
        for m in range(1, self.order + 1):
            bucket: dict[Exponent, Scalar] = {}
            for j in range(1, m + 1):
                aj = self._buckets.get(j)
                bj = out.get(m - j)
                if not aj or not bj:
                    continue
                for ea, ca in aj.items():
                    for eb, cb in bj.items():
                        exp = tuple(a + b for a, b in zip(ea, eb))
                        val = bucket.get(exp)
                        prod = ca * cb
                        val = prod if val is None else val + prod
                        if val:
                            bucket[exp] = val
                        elif exp in bucket:
                            del bucket[exp]
            scaled = {e: -inv0 * c for e, c in bucket.items() if c}
            if scaled:
                out[m] = scaled
        return self._raw(self.order, out)

    def evaluate(self, point: Sequence[complex]) -> complex:
        """Evaluate the truncated polynomial at a point, in double precision."""
        if len(point) != self.nvars:
            raise DimensionMismatchError(
                f"point has {len(point)} coordinates, series has {self.nvars}")
        pt = [complex(p) for p in point]
        powers: list[list[complex]] = [[1.0 + 0.0j] for _ in range(self.nvars)]
        total = 0.0 + 0.0j
        for deg in sorted(self._buckets):
            for exp, coeff in self._buckets[deg].items():
                term = fields.to_complex(coeff)
                for i, e in enumerate(exp):
                    cache = powers[i]
                    while len(cache) <= e:
                        cache.append(cache[-1] * pt[i])
                    term *= cache[e]
                total += term
        return total

    # -- field promotion / splitting -------------------------------------------

    def complexify(self) -> "TruncatedSeries":
        """Promote rational coefficients into Q(i) (identity on Gaussian series)."""
        if self.field == GAUSSIAN:
            return self
        terms = {e: GaussianRational.of(c) for e, c in self.items()}
        return TruncatedSeries(self.nvars, self.order, GAUSSIAN, terms)

    def real_part(self) -> "TruncatedSeries":
        if self.field == RATIONAL:
            return self
        terms = {e: c.re for e, c in self.items()}
        return TruncatedSeries(self.nvars, self.order, RATIONAL, terms)

    def imag_part(self) -> "TruncatedSeries":
        if self.field == RATIONAL:
            return TruncatedSeries.zero(self.nvars, self.order, RATIONAL)
        terms = {e: c.im for e, c in self.items()}
        return TruncatedSeries(self.nvars, self.order, RATIONAL, terms)

    # -- monomial divisibility ---------------------------------------------------

    def variable_multiplicity(self, j: int) -> int:
        """Largest k with x_j^k dividing every stored monomial (0 for the zero series)."""
        if self.is_zero():
            return 0
        return min(exp[j] for bucket in self._buckets.values() for exp in bucket)

    def divide_variable_power(self, j: int, k: int) -> "TruncatedSeries":
        """Exact division by x_j^k; the completeness order drops by k."""
        if k == 0:
            return self
        data: dict[int, dict[Exponent, Scalar]] = {}
        for deg, bucket in self._buckets.items():
            out: dict[Exponent, Scalar] = {}
            for exp, coeff in bucket.items():
                if exp[j] < k:
                    raise ValueError(f"series not divisible by variable {j} power {k}")
                out[exp[:j] + (exp[j] - k,) + exp[j + 1:]] = coeff
            if out:
                data[deg - k] = out
        return self._raw(max(self.order - k, 0), data)

    # -- display -------------------------------------------------------------------

    def to_str(self, names: Sequence[str] | None = None) -> str:
        if names is None:
            names = default_names(self.nvars, self.field)
        parts = []
        for exp, coeff in self.items():
            mono = "*".join(
                f"{names[i]}^{e}" if e > 1 else names[i]
                for i, e in enumerate(exp) if e
            )
            c = str(coeff)
            if mono:
                parts.append(f"{c}*{mono}" if c not in ("1", "-1") else
                             (mono if c == "1" else f"-{mono}"))
            else:
                parts.append(c)
        return " + ".join(parts).replace("+ -", "- ") if parts else "0"

    def __repr__(self) -> str:
        return f"<series n={self.nvars} N={self.order} {self.to_str()}>"


def default_names(nvars: int, field: str = RATIONAL) -> list[str]:
    """Display names: x, y, z, u, t for small real n; x1.. / z1.. otherwise."""
    letter = "x" if field == RATIONAL else "z"
    if field == RATIONAL and nvars <= 5:
        return ["x", "y", "z", "u", "t"][:nvars]
    return [f"{letter}{i + 1}" for i in range(nvars)]


def power_sum(r: int, nvars: int, d: int, order: int,
              field: str = RATIONAL) -> TruncatedSeries:
    """Sum of d-th powers of the first r coordinates, x_1^d + ... + x_r^d."""
    if not 1 <= r <= nvars:
        raise ValueError("need 1 <= r <= nvars")
    terms: dict[Exponent, Scalar] = {}
    for j in range(r):
        exp = tuple(d if i == j else 0 for i in range(nvars))
        terms[exp] = 1
    return TruncatedSeries(nvars, order, field, terms)


def real_imaginary_parts(series: TruncatedSeries) -> tuple[TruncatedSeries, TruncatedSeries]:
    """Split a Gaussian series in n complex variables into real series.

    Substitutes z_j = u_j + i*v_j and returns (Re, Im) as rational series in
    the 2n real variables ordered (u_1, v_1, ..., u_n, v_n).
    """
    n = series.nvars
    gmix = series.complexify()
    images = []
    for j in range(n):
        terms = {
            tuple(1 if i == 2 * j else 0 for i in range(2 * n)): GaussianRational(1, 0),
            tuple(1 if i == 2 * j + 1 else 0 for i in range(2 * n)): GaussianRational(0, 1),
        }
        images.append(TruncatedSeries(2 * n, series.order, GAUSSIAN, terms))
    mixed = gmix.substitute(images)
    return mixed.real_part(), mixed.imag_part()
