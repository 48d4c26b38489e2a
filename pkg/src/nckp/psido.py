"""Pseudo-differential operator calculus over a noncommutative differential ring.

An operator is a finite map degree -> coefficient together with a *cutoff*: the
lowest degree at which the stored data is guaranteed correct.  Degrees below
the cutoff are unknown (they stand for a genuinely infinite tail), not zero;
``cutoff=None`` means the operator is exact.  Every operation computes the
provable cutoff of its result and refuses to read below it, so truncation is
explicit state rather than silent error.

The coefficient ring is anything exposing the small adapter interface used
throughout this package (``zero/one/add/neg/mul/scalar_mul/d_x/is_zero/
from_scalar``); both symbolic NCPoly coefficients and explicit star-product
function coefficients run through the same calculus.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = [
    "PsDO",
    "binom",
    "leibniz",
    "compose",
    "power",
    "invert_monic",
    "sqrt_monic",
    "PsdoCutoffError",
    "NonMonicError",
]

# Above this many Leibniz terms without the derivative chain dying out we
# assume the tail is infinite and demand an explicit cutoff.
_TAIL_SAFETY = 512


class PsdoCutoffError(ValueError):
    """A computation reached degrees below the tracked cutoff."""


class NonMonicError(ValueError):
    """An operation requiring a monic operator got a non-monic one."""


def binom(n: int, i: int) -> Fraction:
    """Generalized binomial n(n-1)...(n-i+1)/i!, valid for negative n."""
    if i < 0:
        raise ValueError("lower index must be >= 0")
    num = 1
    for k in range(i):
        num *= n - k
    den = 1
    for k in range(1, i + 1):
        den *= k
    return Fraction(num, den)


class PsDO:
    """Pseudo-differential operator sum_r a_r d^r with tracked tail cutoff."""

    __slots__ = ("ring", "_coeffs", "cutoff")

    def __init__(self, ring, coeffs=None, cutoff=None):
        self.ring = ring
        clean = {}
        if coeffs:
            for d, a in coeffs.items():
                if cutoff is not None and d < cutoff:
                    continue
                if not ring.is_zero(a):
                    clean[int(d)] = a
        self._coeffs = clean
        self.cutoff = cutoff

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def zero(ring, cutoff=None):
        return PsDO(ring, {}, cutoff)

    @staticmethod
    def identity(ring):
        return PsDO(ring, {0: ring.one()})

    @staticmethod
    def d(ring, n: int = 1):
        """The pure power d^n (for n < 0 a formal integration symbol)."""
        return PsDO(ring, {n: ring.one()})

    @staticmethod
    def from_function(ring, f):
        """The multiplication operator by a coefficient-ring element."""
        return PsDO(ring, {0: f})

    # -- inspection -----------------------------------------------------------

    @property
    def top(self):
        """Highest stored degree, or None for a (tracked) zero operator."""
        return max(self._coeffs) if self._coeffs else None

    def degrees(self):
        return sorted(self._coeffs, reverse=True)

    def coeff(self, d: int):
        if self.cutoff is not None and d < self.cutoff:
            raise PsdoCutoffError(
                f"degree {d} is below the tracked cutoff {self.cutoff}"
            )
        return self._coeffs.get(d, self.ring.zero())

    def is_zero_tracked(self) -> bool:
        """True when every tracked coefficient vanishes."""
        return not self._coeffs

    def is_monic(self) -> bool:
        t = self.top
        if t is None:
            return False
        a = self._coeffs[t]
        return self.ring.is_zero(self.ring.add(a, self.ring.neg(self.ring.one())))

    # -- linear structure -----------------------------------------------------

    def _merged_cutoff(self, other):
        if self.cutoff is None:
            return other.cutoff
        if other.cutoff is None:
            return self.cutoff
        return max(self.cutoff, other.cutoff)

    def __add__(self, other):
        if not isinstance(other, PsDO):
            return NotImplemented
        ring = self.ring
        cut = self._merged_cutoff(other)
        out = dict(self._coeffs)
        for d, a in other._coeffs.items():
            s = ring.add(out.get(d, ring.zero()), a)
            if ring.is_zero(s):
                out.pop(d, None)
            else:
                out[d] = s
        return PsDO(ring, out, cut)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return PsDO(self.ring, {d: self.ring.neg(a) for d, a in self._coeffs.items()}, self.cutoff)

    def scaled(self, c):
        ring = self.ring
        return PsDO(ring, {d: ring.scalar_mul(c, a) for d, a in self._coeffs.items()}, self.cutoff)

    def scale_left(self, f):
        """Left multiplication f o A (exact: coefficient-wise)."""
        ring = self.ring
        return PsDO(ring, {d: ring.mul(f, a) for d, a in self._coeffs.items()}, self.cutoff)

    # -- projections ----------------------------------------------------------

    def project_geq(self, r: int) -> "PsDO":
        if self.cutoff is not None and r < self.cutoff:
            raise PsdoCutoffError(
                f"projection >= {r} reaches below the cutoff {self.cutoff}"
            )
        return PsDO(self.ring, {d: a for d, a in self._coeffs.items() if d >= r}, None)

    def project_leq(self, r: int) -> "PsDO":
        if self.cutoff is not None and r < self.cutoff:
            raise PsdoCutoffError(
                f"projection <= {r} reaches below the cutoff {self.cutoff}"
            )
        return PsDO(self.ring, {d: a for d, a in self._coeffs.items() if d <= r}, self.cutoff)

    def res(self, r: int = -1):
        """Coefficient at degree r; res(-1) is the residue."""
        return self.coeff(r)

    # -- printing -------------------------------------------------------------

    def text(self, coeff_str=str) -> str:
        if not self._coeffs:
            body = "0"
        else:
            parts = []
            for d in self.degrees():
                a = self._coeffs[d]
                s = coeff_str(a)
                if d == 0:
                    parts.append(s)
                else:
                    dsym = "∂" if d == 1 else f"∂^{d}"
                    parts.append(dsym if s == "1" else f"({s})*{dsym}")
            body = " + ".join(parts)
        if self.cutoff is not None:
            body += f"   [tracked to {self.cutoff}]"
        return body

    def latex(self, coeff_latex=None) -> str:
        conv = coeff_latex or (lambda a: str(a))
        if not self._coeffs:
            return "0"
        parts = []
        for d in self.degrees():
            a = self._coeffs[d]
            s = conv(a)
            dsym = "" if d == 0 else (r"\partial_x" if d == 1 else rf"\partial_x^{{{d}}}")
            if d == 0:
                parts.append(s)
            elif s == "1":
                parts.append(dsym)
            else:
                parts.append(rf"\left({s}\right){dsym}")
        return " + ".join(parts)

    def to_json(self, coeff_to_json):
        return {
            "cutoff": self.cutoff,
            "coeffs": {str(d): coeff_to_json(a) for d, a in sorted(self._coeffs.items())},
        }

    def __repr__(self):
        return f"PsDO({self.text()})"


def _top_bound(op: PsDO):
    """Upper bound on the true top degree, including the unknown tail."""
    t = op.top
    if t is not None:
        return t if op.cutoff is None else max(t, op.cutoff - 1)
    return None if op.cutoff is None else op.cutoff - 1


def leibniz(ring, n: int, f, cutoff=None) -> PsDO:
    """Expansion of d^n o f by the generalized Leibniz rule.

    For n >= 0 the sum is finite and the result exact; for n < 0 the tail is
    infinite unless the derivative chain of ``f`` terminates, so a cutoff is
    required in general.
    """
    out = {}
    der = f
    i = 0
    while True:
        d = n - i
        if cutoff is not None and d < cutoff:
            break
        if n >= 0 and i > n:
            break
        if ring.is_zero(der):
            break
        c = binom(n, i)
        if c != 0:
            out[d] = ring.scalar_mul(c, der)
        i += 1
        if cutoff is None and i > _TAIL_SAFETY:
            raise PsdoCutoffError(
                "d^n o f has an infinite tail for n < 0; pass an explicit cutoff"
            )
        der = ring.d_x(der)
    return PsDO(ring, out, None if n >= 0 else cutoff)


def compose(A: PsDO, B: PsDO, floor=None) -> PsDO:
    """Operator composition A o B.

    The result cutoff is the tightest degree provably correct from the input
    cutoffs and tops; an explicit ``floor`` truncates deeper tails (needed when
    both inputs are exact but the expansion itself is infinite).
    """
    ring = A.ring
    if A.cutoff is None and not A._coeffs:
        return PsDO.zero(ring)
    if B.cutoff is None and not B._coeffs:
        return PsDO.zero(ring)

    bounds = []
    if A.cutoff is not None:
        bt = _top_bound(B)
        if bt is not None:
            bounds.append(A.cutoff + bt)
    if B.cutoff is not None:
        at = _top_bound(A)
        if at is not None:
            bounds.append(at + B.cutoff)
    if floor is not None:
        bounds.append(floor)
    cut = max(bounds) if bounds else None

    out = {}
    for r, a in A._coeffs.items():
        for s, b in B._coeffs.items():
            der = b
            i = 0
            while True:
                d = r + s - i
                if cut is not None and d < cut:
                    break
                if r >= 0 and i > r:
                    break
                if ring.is_zero(der):
                    break
                c = binom(r, i)
                if c != 0:
                    term = ring.scalar_mul(c, ring.mul(a, der))
                    prev = out.get(d)
                    term = term if prev is None else ring.add(prev, term)
                    if ring.is_zero(term):
                        out.pop(d, None)
                    else:
                        out[d] = term
                i += 1
                if cut is None and i > _TAIL_SAFETY:
                    raise PsdoCutoffError(
                        "composition has an infinite tail; inputs need a finite "
                        "cutoff (or pass floor=...)"
                    )
                der = ring.d_x(der)
    return PsDO(ring, out, cut)


def power(A: PsDO, m: int, floor=None) -> PsDO:
    """A composed with itself m times (m >= 1)."""
    if m < 1:
        raise ValueError("power expects m >= 1")
    out = A
    for _ in range(m - 1):
        out = compose(out, A, floor=floor)
    return out


def commutator(A: PsDO, B: PsDO, floor=None) -> PsDO:
    return compose(A, B, floor=floor) - compose(B, A, floor=floor)


def _require_monic(A: PsDO, what: str) -> int:
    t = A.top
    if t is None or not A.is_monic():
        raise NonMonicError(f"{what} requires a monic operator")
    return t


def invert_monic(A: PsDO, cutoff: int) -> PsDO:
    """Two-sided inverse of a monic operator, correct down to ``cutoff``.

    Solved top-down: monicity makes the triangular system solvable with ring
    arithmetic only (no coefficient inverses needed).
    """
    ring = A.ring
    n = _require_monic(A, "invert_monic")
    if A.cutoff is not None and A.cutoff > cutoff + n:
        raise PsdoCutoffError(
            f"inverting to cutoff {cutoff} needs the operator tracked to {cutoff + n}"
        )
    floor = cutoff + n
    bcoeffs = {-n: ring.one()}
    # r = 1 - A o B, updated incrementally as corrections enter B
    r = PsDO.identity(ring) - compose(A, PsDO(ring, bcoeffs, None), floor=floor)
    while True:
        t = r.top
        if t is None or t - n < cutoff:
            break
        delta = r.coeff(t)
        bcoeffs[t - n] = delta
        r = r - compose(A, PsDO(ring, {t - n: delta}, None), floor=floor)
    return PsDO(ring, bcoeffs, cutoff)


def sqrt_monic(A: PsDO, cutoff: int) -> PsDO:
    """Monic square root S (S o S = A) of a monic even-order operator.

    Coefficients are matched degree by degree from the top; each new one enters
    the square linearly with factor 2, so the ring only needs division by 2.
    """
    ring = A.ring
    order = _require_monic(A, "sqrt_monic")
    if order % 2 != 0:
        raise NonMonicError("sqrt_monic requires even order")
    n = order // 2
    if A.cutoff is not None and A.cutoff > cutoff + n:
        raise PsdoCutoffError(
            f"square root to cutoff {cutoff} needs the operand tracked to {cutoff + n}"
        )
    floor = cutoff + n
    scoeffs = {n: ring.one()}
    half = Fraction(1, 2)
    # r = A - S o S, updated incrementally: adding D changes the square by
    # D o S + S o D + D o D
    S = PsDO(ring, scoeffs, None)
    r = A - compose(S, S, floor=floor)
    while True:
        t = r.top
        if t is None or t - n < cutoff:
            break
        delta = ring.scalar_mul(half, r.coeff(t))
        scoeffs[t - n] = delta
        D = PsDO(ring, {t - n: delta}, None)
        S = PsDO(ring, scoeffs, None)
        r = (
            r
            - compose(D, S, floor=floor)
            - compose(S - D, D, floor=floor)
        )
    return PsDO(ring, scoeffs, cutoff)
