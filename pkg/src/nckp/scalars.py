"""Exact coefficient arithmetic: arbitrary-precision rationals and Gaussian rationals.

Every coefficient in the workbench is a ``Scalar``, an element of Q(i) with
``Fraction`` real and imaginary parts.  Equality is structural and decidable,
which is what makes "this expression is identically zero" a theorem rather
than a tolerance.
"""

from __future__ import annotations

import re
from fractions import Fraction

try:  # gmpy2 gives the same reduced-rational semantics at C speed
    from gmpy2 import mpq as _RAT
except ImportError:  # pragma: no cover - exercised only without gmpy2
    _RAT = Fraction

__all__ = [
    "Rational",
    "Scalar",
    "ScalarDivisionError",
    "RationalRing",
    "ScalarRing",
    "RATIONAL_RING",
    "SCALAR_RING",
]

# Arbitrary-precision reduced rationals; the backend keeps gcd(num, den) == 1
# and den > 0 as invariants, which is exactly the canonical form we need.
Rational = Fraction

_RZERO = _RAT(0)
_RONE = _RAT(1)


class ScalarDivisionError(ZeroDivisionError):
    """Raised when inverting the zero scalar."""


def _as_fraction(x):
    if isinstance(x, (_RAT, Fraction)):
        return _RAT(x)
    if isinstance(x, int):
        return _RAT(x)
    if isinstance(x, str):
        return _RAT(Fraction(x))
    raise TypeError(f"cannot coerce {x!r} to a rational")


class Scalar:
    """A Gaussian rational a + b*i with exact Fraction components."""

    __slots__ = ("re", "im", "_hash")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", _as_fraction(re))
        object.__setattr__(self, "im", _as_fraction(im))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Scalar is immutable")

    # -- coercion -----------------------------------------------------------

    @staticmethod
    def coerce(x) -> "Scalar":
        if isinstance(x, Scalar):
            return x
        if isinstance(x, (int, Fraction)):
            return Scalar(x)
        raise TypeError(f"cannot coerce {x!r} to a Scalar")

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Scalar):
            other = Scalar.coerce(other)
        out = Scalar.__new__(Scalar)
        object.__setattr__(out, "re", self.re + other.re)
        object.__setattr__(out, "im", self.im + other.im)
        object.__setattr__(out, "_hash", None)
        return out

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Scalar):
            other = Scalar.coerce(other)
        out = Scalar.__new__(Scalar)
        object.__setattr__(out, "re", self.re - other.re)
        object.__setattr__(out, "im", self.im - other.im)
        object.__setattr__(out, "_hash", None)
        return out

    def __rsub__(self, other):
        return Scalar.coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Scalar):
            other = Scalar.coerce(other)
        out = Scalar.__new__(Scalar)
        if self.im == 0 and other.im == 0:  # the common, purely real case
            object.__setattr__(out, "re", self.re * other.re)
            object.__setattr__(out, "im", _RZERO)
        else:
            object.__setattr__(out, "re", self.re * other.re - self.im * other.im)
            object.__setattr__(out, "im", self.re * other.im + self.im * other.re)
        object.__setattr__(out, "_hash", None)
        return out

    __rmul__ = __mul__

    def __neg__(self):
        out = Scalar.__new__(Scalar)
        object.__setattr__(out, "re", -self.re)
        object.__setattr__(out, "im", -self.im)
        object.__setattr__(out, "_hash", None)
        return out

    def inv(self) -> "Scalar":
        n = self.re * self.re + self.im * self.im
        if n == 0:
            raise ScalarDivisionError("inverse of zero Scalar")
        return Scalar(self.re / n, -self.im / n)

    def __truediv__(self, other):
        return self * Scalar.coerce(other).inv()

    def __rtruediv__(self, other):
        return Scalar.coerce(other) * self.inv()

    def conjugate(self) -> "Scalar":
        return Scalar(self.re, -self.im)

    # -- predicates ----------------------------------------------------------

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_one(self) -> bool:
        return self.re == 1 and self.im == 0

    def is_real(self) -> bool:
        return self.im == 0

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        if isinstance(other, Scalar):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        return NotImplemented

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.re, self.im))
            object.__setattr__(self, "_hash", h)
        return h

    def sort_key(self):
        """Lexicographic key (not a field order; used for canonical term order)."""
        return (self.re, self.im)

    # -- numeric bridge -------------------------------------------------------

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    # -- text and JSON --------------------------------------------------------

    def __repr__(self):
        return f"Scalar({self.re!r}, {self.im!r})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i" if self.im != 1 else "i"
        sign = "+" if self.im > 0 else "-"
        mag = abs(self.im)
        imtxt = "i" if mag == 1 else f"{mag}i"
        return f"{self.re}{sign}{imtxt}"

    @staticmethod
    def parse(text: str) -> "Scalar":
        """Parse "p/q", "p/q+r/s i", "i", "-2/3i" and friends."""
        s = text.replace(" ", "")
        if not s:
            raise ValueError("empty Scalar literal")
        if "i" not in s:
            return Scalar(Fraction(s))
        m = re.fullmatch(r"(?P<re>[+-]?[0-9/]+)?(?P<im>[+-]?[0-9/]*)i", s)
        if m is None:
            raise ValueError(f"bad Scalar literal: {text!r}")
        re_part = m.group("re") or "0"
        im_part = m.group("im")
        if im_part in ("", "+"):
            im_part = "1"
        elif im_part == "-":
            im_part = "-1"
        return Scalar(Fraction(re_part), Fraction(im_part))

    def to_json(self) -> dict:
        return {"re": str(self.re), "im": str(self.im)}

    @staticmethod
    def from_json(obj) -> "Scalar":
        return Scalar(Fraction(obj["re"]), Fraction(obj["im"]))


ZERO = Scalar(0)
ONE = Scalar(1)
I = Scalar(0, 1)
HALF_I = Scalar(0, Fraction(1, 2))


class RationalRing:
    """Fraction field as a differential ring with d/dx = 0 (constants)."""

    def zero(self):
        return Fraction(0)

    def one(self):
        return Fraction(1)

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def scalar_mul(self, c, a):
        if isinstance(c, Scalar):
            if c.im != 0:
                raise TypeError("complex scalar on a rational element")
            c = c.re
        return _as_fraction(c) * a

    def d_x(self, a):
        return Fraction(0)

    def is_zero(self, a):
        return a == 0

    def from_scalar(self, c):
        c = Scalar.coerce(c)
        if c.im != 0:
            raise TypeError("complex scalar on a rational element")
        return c.re

    def inv(self, a):
        if a == 0:
            raise ScalarDivisionError("inverse of zero rational")
        return 1 / a


class ScalarRing:
    """Q(i) as a differential ring of constants."""

    def zero(self):
        return ZERO

    def one(self):
        return ONE

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def scalar_mul(self, c, a):
        return Scalar.coerce(c) * a

    def d_x(self, a):
        return ZERO

    def is_zero(self, a):
        return a.is_zero()

    def from_scalar(self, c):
        return Scalar.coerce(c)

    def inv(self, a):
        return a.inv()


RATIONAL_RING = RationalRing()
SCALAR_RING = ScalarRing()
