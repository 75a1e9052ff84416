"""Exact coefficient arithmetic: rationals and Gaussian rationals.

Real coefficients are plain ``fractions.Fraction``.  Complex coefficients are
``GaussianRational`` values, i.e. elements of Q(i) stored as a pair of
Fractions.  Everything in the symbolic layer stays in one of these two exact
fields; floating point enters only in the numerics module.

A series or form carries a *field tag* (:data:`RATIONAL` or :data:`GAUSSIAN`)
and values over different tags never combine silently.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

RATIONAL = "rational"
GAUSSIAN = "gaussian-rational"

Scalar = Union[int, Fraction, "GaussianRational"]


class FieldMismatchError(TypeError):
    """Raised when values over different coefficient fields are combined."""


class GaussianRational:
    """An element a + b*i of Q(i) with exact Fraction components."""

    __slots__ = ("re", "im")

    def __init__(self, re: int | Fraction = 0, im: int | Fraction = 0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("GaussianRational is immutable")

    # -- coercion -----------------------------------------------------------

    @staticmethod
    def of(value: Scalar) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        return GaussianRational(Fraction(value), 0)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: Scalar) -> "GaussianRational":
        o = GaussianRational.of(other)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self) -> "GaussianRational":
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other: Scalar) -> "GaussianRational":
        return self + (-GaussianRational.of(other))

    def __rsub__(self, other: Scalar) -> "GaussianRational":
        return GaussianRational.of(other) + (-self)

    def __mul__(self, other: Scalar) -> "GaussianRational":
        o = GaussianRational.of(other)
        return GaussianRational(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other: Scalar) -> "GaussianRational":
        o = GaussianRational.of(other)
        n = o.re * o.re + o.im * o.im
        if n == 0:
            raise ZeroDivisionError("division by zero in Q(i)")
        return GaussianRational(
            (self.re * o.re + self.im * o.im) / n,
            (self.im * o.re - self.re * o.im) / n,
        )

    def __rtruediv__(self, other: Scalar) -> "GaussianRational":
        return GaussianRational.of(other) / self

    def __pow__(self, k: int) -> "GaussianRational":
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = GaussianRational(1, 0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    # -- predicates and conversions -----------------------------------------

    def __bool__(self) -> bool:
        return bool(self.re or self.im)

    def __eq__(self, other) -> bool:
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        return NotImplemented

    def __hash__(self) -> int:
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def is_real(self) -> bool:
        return self.im == 0

    def __repr__(self) -> str:
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}*i)"


I = GaussianRational(0, 1)
HALF_I_INV = GaussianRational(0, Fraction(-1, 2))  # 1 / (2i)


def coerce(field: str, value: Scalar):
    """Coerce a scalar into the given coefficient field."""
    if field == RATIONAL:
        if isinstance(value, GaussianRational):
            if not value.is_real():
                raise FieldMismatchError("complex value in rational context")
            return value.re
        return Fraction(value)
    if field == GAUSSIAN:
        return GaussianRational.of(value)
    raise ValueError(f"unknown coefficient field {field!r}")


def zero(field: str):
    return Fraction(0) if field == RATIONAL else GaussianRational(0, 0)


def one(field: str):
    return Fraction(1) if field == RATIONAL else GaussianRational(1, 0)


def to_complex(value: Scalar) -> complex:
    if isinstance(value, GaussianRational):
        return complex(value)
    return complex(float(value), 0.0)


def promote(value: Scalar) -> GaussianRational:
    """Promote a rational (or Gaussian) value into Q(i)."""
    return GaussianRational.of(value)
