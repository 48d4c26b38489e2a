"""Explicit-function Moyal algebra on exponential-polynomial rationals.

The function class is quotients of exponential polynomials: finite sums
c * x^mono * exp(lin . x + const) with exact Gaussian-rational data.  It is
closed under derivatives, products and the quotient rule, and its zero test is
sound and complete (distinct phases are linearly independent, and exp of a
nonzero rational cannot cancel a rational coefficient).

Deformation is handled as a formal power series in theta: a StarSeries carries
exact coefficients through order theta^K, so "verified to order K" statements
are theorems, not float comparisons.  Numbers enter only in eval_numeric.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .psido import binom
from .scalars import Scalar

__all__ = [
    "ExpPoly",
    "ExpRational",
    "ThetaConfig",
    "StarSeries",
    "moyal",
    "strachan",
    "star_inv",
    "moyal_exp_linear",
    "star_exp",
    "divide_exact",
    "NonlinearPhaseError",
    "PoleError",
    "StarInverseError",
    "StarRing",
    "ExpRationalRing",
]


class NonlinearPhaseError(ValueError):
    """Star exponentials are only provided for strictly linear arguments."""


class PoleError(ZeroDivisionError):
    """Numeric evaluation hit a zero of a denominator."""


class StarInverseError(ZeroDivisionError):
    """Star inversion needs a nonzero theta^0 part."""


def _zero_tuple(n):
    return (0,) * n


_SZERO = Scalar(0)
_SONE = Scalar(1)


class ExpPoly:
    """Exponential polynomial: finite sum of c * x^mono * e^{lin.x + const}.

    Internally a term key is (mono, phase) with ``phase`` a flat tuple of
    exact rationals (re, im interleaved, the last pair being the constant), so
    dictionary hashing and comparison stay in C.  The public term view decodes
    back to (mono, lin Scalars, const Scalar).
    """

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        clean = {}
        if terms:
            for key, c in terms.items():
                if not isinstance(c, Scalar):
                    c = Scalar.coerce(c)
                if c.is_zero():
                    continue
                mono, lin, const = key
                if len(mono) != nvars or len(lin) != nvars:
                    raise ValueError("term arity does not match nvars")
                ekey = _encode_key(tuple(mono), lin, const)
                prev = clean.get(ekey)
                c = c if prev is None else prev + c
                if c.is_zero():
                    clean.pop(ekey, None)
                else:
                    clean[ekey] = c
        self._terms = clean
        self._hash = None

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "ExpPoly":
        return ExpPoly._raw(nvars, {})

    @staticmethod
    def constant(nvars: int, c) -> "ExpPoly":
        c = Scalar.coerce(c)
        if c.is_zero():
            return ExpPoly.zero(nvars)
        return ExpPoly._raw(nvars, {(_zero_tuple(nvars), _zero_phase(nvars)): c})

    @staticmethod
    def one(nvars: int) -> "ExpPoly":
        return ExpPoly.constant(nvars, 1)

    @staticmethod
    def coordinate(nvars: int, i: int) -> "ExpPoly":
        mono = tuple(1 if j == i else 0 for j in range(nvars))
        return ExpPoly._raw(nvars, {(mono, _zero_phase(nvars)): _SONE})

    @staticmethod
    def exp_linear(nvars: int, lin, const=0) -> "ExpPoly":
        """The exponential e^{lin . x + const} for an exact linear phase."""
        lin = tuple(Scalar.coerce(c) for c in lin)
        if len(lin) != nvars:
            raise ValueError("phase arity does not match nvars")
        key = _encode_key(_zero_tuple(nvars), lin, Scalar.coerce(const))
        return ExpPoly._raw(nvars, {key: _SONE})

    # -- predicates ------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self._terms

    def is_one(self) -> bool:
        if len(self._terms) != 1:
            return False
        ((mono, phase), c), = self._terms.items()
        return c.is_one() and not any(mono) and not any(phase)

    def constant_value(self):
        """The Scalar value if this is a constant, else None."""
        if not self._terms:
            return _SZERO
        if len(self._terms) != 1:
            return None
        ((mono, phase), c), = self._terms.items()
        if not any(mono) and not any(phase):
            return c
        return None

    def __len__(self):
        return len(self._terms)

    # -- arithmetic -------------------------------------------------------------

    def _check(self, other):
        if self.nvars != other.nvars:
            raise ValueError("mixing expressions over different coordinates")

    def __add__(self, other):
        if not isinstance(other, ExpPoly):
            return NotImplemented
        self._check(other)
        out = dict(self._terms)
        for key, c in other._terms.items():
            prev = out.get(key)
            s = c if prev is None else prev + c
            if s.is_zero():
                out.pop(key, None)
            else:
                out[key] = s
        return ExpPoly._raw(self.nvars, out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return ExpPoly._raw(self.nvars, {k: -c for k, c in self._terms.items()})

    def scaled(self, c) -> "ExpPoly":
        c = Scalar.coerce(c)
        if c.is_zero():
            return ExpPoly.zero(self.nvars)
        return ExpPoly._raw(self.nvars, {k: c * v for k, v in self._terms.items()})

    def __mul__(self, other):
        if not isinstance(other, ExpPoly):
            return NotImplemented
        self._check(other)
        out = {}
        get = out.get
        for (m1, p1), v1 in self._terms.items():
            any_m1 = any(m1)
            for (m2, p2), v2 in other._terms.items():
                if any_m1 or any(m2):
                    mono = tuple(a + b for a, b in zip(m1, m2))
                else:
                    mono = m1
                key = (mono, tuple(a + b for a, b in zip(p1, p2)))
                v = v1 * v2
                prev = get(key)
                v = v if prev is None else prev + v
                if v.is_zero():
                    out.pop(key, None)
                else:
                    out[key] = v
        return ExpPoly._raw(self.nvars, out)

    def mul_exp(self, lin, const) -> "ExpPoly":
        """Multiply by e^{lin.x + const} (phase shift, term count preserved)."""
        delta = _encode_phase(tuple(Scalar.coerce(c) for c in lin), Scalar.coerce(const))
        return self._shift_phase(delta)

    def _shift_phase(self, delta) -> "ExpPoly":
        out = {}
        for (m, p), v in self._terms.items():
            out[(m, tuple(a + b for a, b in zip(p, delta)))] = v
        return ExpPoly._raw(self.nvars, out)

    def diff(self, i: int) -> "ExpPoly":
        return _exppoly_diff(self, i)

    # -- numeric ---------------------------------------------------------------

    def eval(self, point) -> complex:
        """Plain pointwise evaluation (no overflow guard)."""
        acc = 0j
        for (m, p), v in self._terms.items():
            term = complex(v)
            for e, x in zip(m, point):
                if e:
                    term *= x**e
            phase = complex(float(p[-2]), float(p[-1]))
            for i, x in enumerate(point):
                phase += complex(float(p[2 * i]), float(p[2 * i + 1])) * x
            acc += term * cmath.exp(phase)
        return acc

    def max_phase_re(self, point) -> float:
        """max over terms of Re(phase at point); -inf for the zero polynomial."""
        best = float("-inf")
        for (_, p), _v in self._terms.items():
            acc = float(p[-2])
            for i, x in enumerate(point):
                xr = x.real if isinstance(x, complex) else x
                acc += float(p[2 * i]) * xr
            best = max(best, acc)
        return best

    def eval_shifted(self, point, shift: float) -> complex:
        """Evaluate with every phase reduced by ``shift`` (overflow control)."""
        acc = 0j
        for (m, p), v in self._terms.items():
            term = complex(v)
            for e, x in zip(m, point):
                if e:
                    term *= x**e
            phase = complex(float(p[-2]), float(p[-1])) - shift
            for i, x in enumerate(point):
                phase += complex(float(p[2 * i]), float(p[2 * i + 1])) * x
            acc += term * cmath.exp(phase)
        return acc

    # -- structure ---------------------------------------------------------------

    def terms(self):
        """Canonically ordered public view: ((mono, lin, const), coeff)."""
        return [
            (_decode_key(k), v) for k, v in sorted(self._terms.items())
        ]

    def __eq__(self, other):
        if not isinstance(other, ExpPoly):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    def __repr__(self):
        return f"ExpPoly({self.text()})"

    def text(self, coords=None) -> str:
        if not self._terms:
            return "0"
        names = coords or [f"x{i + 1}" for i in range(self.nvars)]
        parts = []
        for (m, l, c), v in self.terms():
            factors = []
            for e, nm in zip(m, names):
                if e == 1:
                    factors.append(nm)
                elif e:
                    factors.append(f"{nm}^{e}")
            phase = [
                (f"{s}*{nm}" if not s.is_one() else nm)
                for s, nm in zip(l, names)
                if not s.is_zero()
            ]
            if not c.is_zero():
                phase.append(str(c))
            if phase:
                factors.append(f"exp({'+'.join(phase)})".replace("+-", "-"))
            body = "*".join(factors) if factors else "1"
            if v.is_one() and factors:
                parts.append(body)
            else:
                parts.append(f"{v}*{body}" if factors else str(v))
        return " + ".join(parts).replace("+ -", "- ")

    def to_json(self):
        return [
            {
                "coeff": v.to_json(),
                "mono": list(m),
                "lin": [s.to_json() for s in l],
                "const": c.to_json(),
            }
            for (m, l, c), v in self.terms()
        ]

    @staticmethod
    def from_json(nvars, obj) -> "ExpPoly":
        terms = {}
        for t in obj:
            key = (
                tuple(int(e) for e in t["mono"]),
                tuple(Scalar.from_json(s) for s in t["lin"]),
                Scalar.from_json(t["const"]),
            )
            terms[key] = Scalar.from_json(t["coeff"])
        return ExpPoly(nvars, terms)

    @staticmethod
    def _raw(nvars, terms) -> "ExpPoly":
        p = ExpPoly.__new__(ExpPoly)
        p.nvars = nvars
        p._terms = terms
        p._hash = None
        return p


def _encode_phase(lin, const):
    out = []
    for s in lin:
        out.append(s.re)
        out.append(s.im)
    out.append(const.re)
    out.append(const.im)
    return tuple(out)


def _zero_phase(nvars):
    from .scalars import _RZERO

    return (_RZERO,) * (2 * nvars + 2)


def _encode_key(mono, lin, const):
    return (mono, _encode_phase(lin, const))


def _decode_key(key):
    mono, p = key
    lin = tuple(Scalar(p[2 * i], p[2 * i + 1]) for i in range(len(mono)))
    return (mono, lin, Scalar(p[-2], p[-1]))


@lru_cache(maxsize=1 << 17)
def _exppoly_diff(p: ExpPoly, i: int) -> ExpPoly:
    out = {}
    i2 = 2 * i
    for (m, ph), v in p._terms.items():
        if m[i]:
            key = (m[:i] + (m[i] - 1,) + m[i + 1 :], ph)
            dv = v * m[i]
            prev = out.get(key)
            dv = dv if prev is None else prev + dv
            if dv.is_zero():
                out.pop(key, None)
            else:
                out[key] = dv
        re, im = ph[i2], ph[i2 + 1]
        if re or im:
            key = (m, ph)
            dv = v * Scalar(re, im)
            prev = out.get(key)
            dv = dv if prev is None else prev + dv
            if dv.is_zero():
                out.pop(key, None)
            else:
                out[key] = dv
    return ExpPoly._raw(p.nvars, out)


class ExpRational:
    """Quotient of exponential polynomials with the denominator kept factored.

    The denominator is a multiset of monic multi-term bases with positive
    exponents (scalar and single-exponential content is absorbed into the
    numerator).  Sums take true least common multiples over the factor
    structure and derivatives bump only the exponents of factors that depend
    on the coordinate, so repeated arithmetic cannot square denominators into
    exponential blowup.  Equality goes through cross-multiplication.
    """

    __slots__ = ("num", "_den", "_dexp", "_hash")

    def __init__(self, num: ExpPoly, den: ExpPoly | None = None):
        factors = ()
        if den is not None and not den.is_one():
            if den.is_zero():
                raise ZeroDivisionError("ExpRational with zero denominator")
            factors = ((den, 1),)
        num, factors = _norm_factors(num, factors)
        self.num = num
        self._den = factors
        self._dexp = None
        self._hash = None

    # -- constructors ------------------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "ExpRational":
        return ExpRational(ExpPoly.zero(nvars))

    @staticmethod
    def one(nvars: int) -> "ExpRational":
        return ExpRational(ExpPoly.one(nvars))

    @staticmethod
    def constant(nvars: int, c) -> "ExpRational":
        return ExpRational(ExpPoly.constant(nvars, c))

    @staticmethod
    def _make(num: ExpPoly, factors) -> "ExpRational":
        r = ExpRational.__new__(ExpRational)
        num, factors = _norm_factors(num, factors)
        r.num = num
        r._den = factors
        r._dexp = None
        r._hash = None
        return r

    # -- structure ----------------------------------------------------------------

    @property
    def nvars(self):
        return self.num.nvars

    def den_factors(self):
        """Denominator as ((base, exponent), ...); empty means 1."""
        return self._den

    @property
    def den(self) -> ExpPoly:
        """Expanded denominator (cached)."""
        if self._dexp is None:
            acc = ExpPoly.one(self.num.nvars)
            for base, e in self._den:
                for _ in range(e):
                    acc = acc * base
            self._dexp = acc
        return self._dexp

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_one(self) -> bool:
        if not self._den:
            return self.num.is_one()
        return self.num == self.den

    # -- arithmetic ------------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, ExpPoly):
            other = ExpRational(other)
        if not isinstance(other, ExpRational):
            return NotImplemented
        if self._den == other._den:
            return ExpRational._make(self.num + other.num, self._den)
        mine = dict(self._den)
        theirs = dict(other._den)
        merged = dict(mine)
        for b, e in theirs.items():
            if merged.get(b, 0) < e:
                merged[b] = e
        num1 = self.num
        for b, e in merged.items():
            gap = e - mine.get(b, 0)
            for _ in range(gap):
                num1 = num1 * b
        num2 = other.num
        for b, e in merged.items():
            gap = e - theirs.get(b, 0)
            for _ in range(gap):
                num2 = num2 * b
        return ExpRational._make(num1 + num2, tuple(merged.items()))

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        r = ExpRational.__new__(ExpRational)
        r.num = -self.num
        r._den = self._den
        r._dexp = self._dexp
        r._hash = None
        return r

    def scaled(self, c) -> "ExpRational":
        r = ExpRational.__new__(ExpRational)
        r.num = self.num.scaled(c)
        r._den = self._den
        r._dexp = self._dexp
        r._hash = None
        return r

    def __mul__(self, other):
        if isinstance(other, ExpPoly):
            other = ExpRational(other)
        if not isinstance(other, ExpRational):
            return NotImplemented
        merged = dict(self._den)
        for b, e in other._den:
            merged[b] = merged.get(b, 0) + e
        num1, num2 = self.num, other.num
        if merged:
            num1 = _cancel_factor(num1, merged)
            num2 = _cancel_factor(num2, merged)
        return ExpRational._make(num1 * num2, tuple(merged.items()))

    def inv(self) -> "ExpRational":
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of zero ExpRational")
        return ExpRational._make(self.den, ((self.num, 1),))

    def __truediv__(self, other):
        if isinstance(other, ExpPoly):
            other = ExpRational(other)
        return self * other.inv()

    def diff(self, i: int) -> "ExpRational":
        return _exprational_diff(self, i)

    def _diff_impl(self, i: int) -> "ExpRational":
        dn = self.num.diff(i)
        if not self._den:
            return ExpRational._make(dn, ())
        active = [(b, e) for b, e in self._den if not b.diff(i).is_zero()]
        if not active:
            return ExpRational._make(dn, self._den)
        passive = tuple((b, e) for b, e in self._den if b.diff(i).is_zero())
        bases = [b for b, _ in active]
        # prefix/suffix products give prod_{j != k} b_j without division
        n = len(bases)
        pref = [ExpPoly.one(self.nvars)] * (n + 1)
        for k in range(n):
            pref[k + 1] = pref[k] * bases[k]
        suff = [ExpPoly.one(self.nvars)] * (n + 1)
        for k in range(n - 1, -1, -1):
            suff[k] = bases[k] * suff[k + 1]
        total = pref[n]
        corr = ExpPoly.zero(self.nvars)
        for k, (b, e) in enumerate(active):
            others = pref[k] * suff[k + 1]
            corr = corr + (b.diff(i) * others).scaled(e)
        num_new = dn * total - self.num * corr
        factors = passive + tuple((b, e + 1) for b, e in active)
        return ExpRational._make(num_new, factors)

    # -- comparison --------------------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, ExpPoly):
            other = ExpRational(other)
        if not isinstance(other, ExpRational):
            return NotImplemented
        if self._den == other._den:
            return self.num == other.num
        return (self.num * other.den) == (other.num * self.den)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num, self._den))
        return self._hash

    # -- numeric -----------------------------------------------------------------------

    def eval(self, point) -> complex:
        """Stable evaluation: dominant exponentials are factored out of the
        numerator and of every denominator base before exponentiating."""
        if self.num.is_zero():
            return 0j
        sn = self.num.max_phase_re(point)
        nv = self.num.eval_shifted(point, sn)
        scale = sn
        dv = 1.0 + 0j
        for base, e in self._den:
            sb = base.max_phase_re(point)
            bv = base.eval_shifted(point, sb)
            if bv == 0:
                raise PoleError(f"denominator vanishes at {point}")
            dv *= bv**e
            scale -= e * sb
        if scale < -700:
            return 0j
        return (nv / dv) * cmath.exp(scale)

    def __repr__(self):
        return f"ExpRational({self.text()})"

    def text(self, coords=None) -> str:
        if not self._den:
            return self.num.text(coords)
        dtxt = "*".join(
            f"({b.text(coords)})" + (f"^{e}" if e > 1 else "") for b, e in self._den
        )
        return f"({self.num.text(coords)}) / {dtxt}"

    def to_json(self):
        return {"num": self.num.to_json(), "den": self.den.to_json()}

    @staticmethod
    def from_json(nvars, obj) -> "ExpRational":
        return ExpRational(
            ExpPoly.from_json(nvars, obj["num"]), ExpPoly.from_json(nvars, obj["den"])
        )


def _norm_factors(num: ExpPoly, factors):
    """Canonical factored form: merge equal bases, absorb trivial ones, keep
    bases monic, drop everything on a zero numerator."""
    if num.is_zero() or not factors:
        return num, ()
    counts: dict = {}
    for base, e in factors:
        if e < 0:
            raise ValueError("denominator exponents must be positive")
        if e:
            counts[base] = counts.get(base, 0) + e
    out = []
    for base, e in counts.items():
        if base.is_zero():
            raise ZeroDivisionError("ExpRational with zero denominator factor")
        if len(base._terms) == 1:
            ((m, p), v), = base._terms.items()
            if any(m):
                raise ValueError("monomial denominators are not supported")
            shift = tuple(-e * x for x in p)
            vinv = v.inv()
            scale = vinv
            for _ in range(e - 1):
                scale = scale * vinv
            num = num._shift_phase(shift).scaled(scale)
            continue
        lead = base._terms[min(base._terms)]
        if not lead.is_one():
            inv = lead.inv()
            base = base.scaled(inv)
            scale = inv
            for _ in range(e - 1):
                scale = scale * inv
            num = num.scaled(scale)
        # structural cancellation against the numerator
        while e and num == base:
            num = ExpPoly.one(num.nvars)
            e -= 1
        if e:
            out.append((base, e))
    out.sort(key=_factor_key)
    return num, tuple(out)


def _factor_key(item):
    base, _e = item
    return (len(base._terms), min(base._terms), hash(base))


def _cancel_factor(num: ExpPoly, merged: dict) -> ExpPoly:
    """Consume a denominator factor structurally equal to the numerator."""
    e = merged.get(num)
    if e:
        if e == 1:
            del merged[num]
        else:
            merged[num] = e - 1
        return ExpPoly.one(num.nvars)
    return num


@lru_cache(maxsize=1 << 16)
def _exprational_diff(r: ExpRational, i: int) -> ExpRational:
    return r._diff_impl(i)


def divide_exact(num: ExpPoly, den: ExpPoly, step_cap: int | None = None):
    """Exact quotient num/den as an ExpPoly, or None if it does not divide.

    Standard leading-term division in the canonical (translation-invariant)
    term order; exponential phases subtract freely, monomial exponents must
    stay non-negative.  A step cap guards against runaway non-exact division.
    """
    if den.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    if num.is_zero():
        return num
    dk = max(den._terms)
    dc = den._terms[dk]
    dm, dp = dk
    rest = [(k, v) for k, v in den._terms.items() if k != dk]
    r = dict(num._terms)
    q: dict = {}
    cap = step_cap if step_cap is not None else 8 * (len(num._terms) + 4)
    steps = 0
    while r:
        steps += 1
        if steps > cap:
            return None
        rk = max(r)
        rm, rp = rk
        qm = tuple(a - b for a, b in zip(rm, dm))
        if any(e < 0 for e in qm):
            return None
        qp = tuple(a - b for a, b in zip(rp, dp))
        qc = r[rk] / dc
        q[(qm, qp)] = qc
        del r[rk]
        for (tm, tp), tv in rest:
            key = (
                tuple(a + b for a, b in zip(qm, tm)),
                tuple(a + b for a, b in zip(qp, tp)),
            )
            s = r.get(key, _SZERO) - qc * tv
            if s.is_zero():
                r.pop(key, None)
            else:
                r[key] = s
    return ExpPoly._raw(num.nvars, q)


# -- theta configuration ------------------------------------------------------------


@dataclass(frozen=True)
class ThetaConfig:
    """Which coordinate pair is deformed, and the series truncation order.

    Exactly one component theta^{mu nu} = -theta^{nu mu} = theta is nonzero;
    theta itself stays a formal expansion parameter.
    """

    coords: tuple
    mu: int
    nu: int
    K: int

    @staticmethod
    def make(coords, pair, K: int = 2) -> "ThetaConfig":
        coords = tuple(coords)
        mu, nu = (coords.index(pair[0]), coords.index(pair[1]))
        if mu == nu:
            raise ValueError("the deformed pair needs two distinct coordinates")
        if K < 0:
            raise ValueError("truncation order must be >= 0")
        return ThetaConfig(coords, mu, nu, K)

    @property
    def nvars(self) -> int:
        return len(self.coords)

    def index(self, coord) -> int:
        return coord if isinstance(coord, int) else self.coords.index(coord)

    def component(self, i, j) -> int:
        """theta^{ij} in units of theta: +1, -1 or 0."""
        i, j = self.index(i), self.index(j)
        if (i, j) == (self.mu, self.nu):
            return 1
        if (i, j) == (self.nu, self.mu):
            return -1
        return 0

    def pair_names(self):
        return (self.coords[self.mu], self.coords[self.nu])

    def to_json(self):
        return {"coords": list(self.coords), "pair": "".join(self.pair_names()), "K": self.K}


# -- star series -----------------------------------------------------------------------


class StarSeries:
    """Element of the theta-truncated Moyal algebra: exact ExpRational
    coefficients c_0..c_K of theta^0..theta^K."""

    __slots__ = ("cfg", "orders", "_hash")

    def __init__(self, cfg: ThetaConfig, orders):
        orders = tuple(orders)
        if len(orders) != cfg.K + 1:
            raise ValueError("need exactly K+1 coefficients")
        for c in orders:
            if c.nvars != cfg.nvars:
                raise ValueError("coefficient arity does not match the configuration")
        self.cfg = cfg
        self.orders = orders
        self._hash = None

    # -- constructors -------------------------------------------------------------------

    @staticmethod
    def zero(cfg: ThetaConfig) -> "StarSeries":
        z = ExpRational.zero(cfg.nvars)
        return StarSeries(cfg, (z,) * (cfg.K + 1))

    @staticmethod
    def one(cfg: ThetaConfig) -> "StarSeries":
        return StarSeries.from_exprational(cfg, ExpRational.one(cfg.nvars))

    @staticmethod
    def constant(cfg: ThetaConfig, c) -> "StarSeries":
        return StarSeries.from_exprational(cfg, ExpRational.constant(cfg.nvars, c))

    @staticmethod
    def from_exprational(cfg: ThetaConfig, r: ExpRational) -> "StarSeries":
        z = ExpRational.zero(cfg.nvars)
        return StarSeries(cfg, (r,) + (z,) * cfg.K)

    @staticmethod
    def from_exppoly(cfg: ThetaConfig, p: ExpPoly) -> "StarSeries":
        return StarSeries.from_exprational(cfg, ExpRational(p))

    @staticmethod
    def coordinate(cfg: ThetaConfig, coord) -> "StarSeries":
        i = cfg.index(coord)
        return StarSeries.from_exppoly(cfg, ExpPoly.coordinate(cfg.nvars, i))

    # -- structure ----------------------------------------------------------------------

    def order(self, j: int) -> ExpRational:
        return self.orders[j]

    def _check(self, other):
        if self.cfg != other.cfg:
            raise ValueError("mixing StarSeries with different theta configurations")

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.orders)

    def __eq__(self, other):
        if not isinstance(other, StarSeries):
            return NotImplemented
        return self.cfg == other.cfg and all(
            a == b for a, b in zip(self.orders, other.orders)
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.cfg, self.orders))
        return self._hash

    # -- linear operations ----------------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, StarSeries):
            return NotImplemented
        self._check(other)
        return StarSeries(self.cfg, tuple(a + b for a, b in zip(self.orders, other.orders)))

    def __sub__(self, other):
        if not isinstance(other, StarSeries):
            return NotImplemented
        self._check(other)
        return StarSeries(self.cfg, tuple(a - b for a, b in zip(self.orders, other.orders)))

    def __neg__(self):
        return StarSeries(self.cfg, tuple(-a for a in self.orders))

    def scaled(self, c) -> "StarSeries":
        return StarSeries(self.cfg, tuple(a.scaled(c) for a in self.orders))

    def shift_theta(self, j: int, scale=1) -> "StarSeries":
        """Multiply by scale * theta^j, truncating above K."""
        z = ExpRational.zero(self.cfg.nvars)
        out = [z] * (self.cfg.K + 1)
        for n, c in enumerate(self.orders):
            if n + j <= self.cfg.K:
                out[n + j] = c.scaled(scale)
        return StarSeries(self.cfg, out)

    def diff(self, coord) -> "StarSeries":
        i = self.cfg.index(coord)
        return StarSeries(self.cfg, tuple(c.diff(i) for c in self.orders))

    # -- star operations --------------------------------------------------------------------

    def __mul__(self, other):
        if isinstance(other, StarSeries):
            return moyal(self, other)
        return NotImplemented

    def inv(self) -> "StarSeries":
        return star_inv(self)

    # -- numeric ---------------------------------------------------------------------------

    def eval_numeric(self, point, theta_num: float) -> complex:
        """sum_j c_j(point) theta^j with floating exponentials."""
        pt = self._point(point)
        acc = 0j
        p = 1.0
        for c in self.orders:
            if not c.is_zero():
                acc += c.eval(pt) * p
            p *= theta_num
        return acc

    def _point(self, point):
        if isinstance(point, dict):
            return tuple(point[c] for c in self.cfg.coords)
        return tuple(point)

    def __repr__(self):
        body = " + ".join(
            f"theta^{j}*({c.text(self.cfg.coords)})"
            for j, c in enumerate(self.orders)
            if not c.is_zero()
        )
        return f"StarSeries({body or '0'})"

    def to_json(self):
        return {
            "theta": self.cfg.to_json(),
            "orders": [c.to_json() for c in self.orders],
        }


# -- bidifferential machinery ---------------------------------------------------------------


@lru_cache(maxsize=1 << 16)
def _mixed_diff(f: ExpRational, mu: int, nu: int, a: int, b: int) -> ExpRational:
    if a > 0:
        return _mixed_diff(f, mu, nu, a - 1, b).diff(mu)
    if b > 0:
        return _mixed_diff(f, mu, nu, a, b - 1).diff(nu)
    return f


class _DerivTable:
    """Mixed (mu, nu) partials of one ExpRational, shared across products."""

    __slots__ = ("cfg", "f")

    def __init__(self, cfg: ThetaConfig, f: ExpRational):
        self.cfg = cfg
        self.f = f

    def get(self, a: int, b: int) -> ExpRational:
        return _mixed_diff(self.f, self.cfg.mu, self.cfg.nu, a, b)


def _bidiff(cfg: ThetaConfig, c: int, F: _DerivTable, G: _DerivTable) -> ExpRational:
    """c-th power of the antisymmetric bidifferential, contracted on (F, G)."""
    if c == 0:
        return F.get(0, 0) * G.get(0, 0)
    acc = ExpRational.zero(cfg.nvars)
    for j in range(c + 1):
        coef = binom(c, j) * (-1) ** (c - j)
        term = F.get(j, c - j) * G.get(c - j, j)
        acc = acc + term.scaled(Fraction(coef))
    return acc


def _moyal_coeff(c: int) -> Scalar:
    # (i/2)^c / c!
    out = Scalar(Fraction(1, _factorial(c)))
    half_i = Scalar(0, Fraction(1, 2))
    for _ in range(c):
        out = out * half_i
    return out


def _strachan_coeff(s: int) -> Fraction:
    # (-1)^s / (2s+1)! * (1/2)^{2s}
    return Fraction((-1) ** s, _factorial(2 * s + 1) * 4**s)


def _factorial(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def moyal(f: StarSeries, g: StarSeries) -> StarSeries:
    """Moyal product through order theta^K."""
    f._check(g)
    cfg = f.cfg
    ftab = [_DerivTable(cfg, c) for c in f.orders]
    gtab = [_DerivTable(cfg, c) for c in g.orders]
    out = []
    for n in range(cfg.K + 1):
        acc = ExpRational.zero(cfg.nvars)
        for a in range(n + 1):
            if f.orders[a].is_zero():
                continue
            for b in range(n - a + 1):
                if g.orders[b].is_zero():
                    continue
                c = n - a - b
                acc = acc + _bidiff(cfg, c, ftab[a], gtab[b]).scaled(_moyal_coeff(c))
        out.append(acc)
    return StarSeries(cfg, out)


def strachan(f: StarSeries, g: StarSeries) -> StarSeries:
    """Strachan's commutative, non-associative companion product (even orders)."""
    f._check(g)
    cfg = f.cfg
    ftab = [_DerivTable(cfg, c) for c in f.orders]
    gtab = [_DerivTable(cfg, c) for c in g.orders]
    out = []
    for n in range(cfg.K + 1):
        acc = ExpRational.zero(cfg.nvars)
        for a in range(n + 1):
            if f.orders[a].is_zero():
                continue
            for b in range(n - a + 1):
                if g.orders[b].is_zero():
                    continue
                c = n - a - b
                if c % 2:
                    continue
                acc = acc + _bidiff(cfg, c, ftab[a], gtab[b]).scaled(
                    _strachan_coeff(c // 2)
                )
        out.append(acc)
    return StarSeries(cfg, out)


def star_inv(f: StarSeries) -> StarSeries:
    """Order-by-order star inverse; needs an invertible theta^0 part."""
    cfg = f.cfg
    if f.orders[0].is_zero():
        raise StarInverseError("cannot star-invert a series with zero theta^0 part")
    g0 = f.orders[0].inv()
    ftab = [_DerivTable(cfg, c) for c in f.orders]
    gorders = [g0]
    gtab = [_DerivTable(cfg, g0)]
    neg_g0 = None
    for n in range(1, cfg.K + 1):
        acc = ExpRational.zero(cfg.nvars)
        for a in range(n + 1):
            if f.orders[a].is_zero():
                continue
            for b in range(n - a + 1):
                if b == n:  # unknown order; excluded, it is f0 * g_n
                    continue
                c = n - a - b
                acc = acc + _bidiff(cfg, c, ftab[a], gtab[b]).scaled(_moyal_coeff(c))
        if neg_g0 is None:
            neg_g0 = -g0
        gn = neg_g0 * acc
        gorders.append(gn)
        gtab.append(_DerivTable(cfg, gn))
    return StarSeries(cfg, gorders)


def moyal_exp_linear(cfg: ThetaConfig, lin, const=0) -> ExpPoly:
    """Star exponential of a linear phase.

    All star powers of a fixed linear phase coincide with ordinary powers (the
    antisymmetric bidifferential kills same-phase pairs), so the Moyal
    exponential of lin.x + const is the ordinary exponential.
    """
    return ExpPoly.exp_linear(cfg.nvars, lin, const)


def star_exp(cfg: ThetaConfig, arg: ExpPoly) -> ExpPoly:
    """Star exponential of an ExpPoly argument, defined for linear arguments only."""
    lin = [Scalar(0)] * cfg.nvars
    const = Scalar(0)
    for (m, l, c), v in arg.terms():
        if any(not s.is_zero() for s in l) or not c.is_zero():
            raise NonlinearPhaseError("argument already contains exponentials")
        deg = sum(m)
        if deg == 0:
            const = const + v
        elif deg == 1:
            i = next(idx for idx, e in enumerate(m) if e)
            lin[i] = lin[i] + v
        else:
            raise NonlinearPhaseError("star exponentials need a linear argument")
    return moyal_exp_linear(cfg, lin, const)


# -- ring adapters ------------------------------------------------------------------------


class StarRing:
    """StarSeries as a coefficient ring for the operator calculus.

    d_x is the derivative along the configured x coordinate (by default the
    coordinate named "x", else the first coordinate).
    """

    def __init__(self, cfg: ThetaConfig, x_coord="x"):
        self.cfg = cfg
        self.x = cfg.index(x_coord) if x_coord in cfg.coords else 0

    def zero(self):
        return StarSeries.zero(self.cfg)

    def one(self):
        return StarSeries.one(self.cfg)

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return moyal(a, b)

    def scalar_mul(self, c, a):
        return a.scaled(c)

    def d_x(self, a):
        return a.diff(self.x)

    def is_zero(self, a):
        return a.is_zero()

    def from_scalar(self, c):
        return StarSeries.constant(self.cfg, c)

    def inv(self, a):
        return star_inv(a)


class ExpRationalRing:
    """Commutative explicit-function ring (the theta -> 0 shadow)."""

    def __init__(self, nvars: int, x_index: int = 0):
        self.nvars = nvars
        self.x = x_index

    def zero(self):
        return ExpRational.zero(self.nvars)

    def one(self):
        return ExpRational.one(self.nvars)

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def scalar_mul(self, c, a):
        return a.scaled(c)

    def d_x(self, a):
        return a.diff(self.x)

    def is_zero(self, a):
        return a.is_zero()

    def from_scalar(self, c):
        return ExpRational.constant(self.nvars, c)

    def inv(self, a):
        return a.inv()
