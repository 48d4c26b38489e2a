"""Free associative differential algebra on generators u_k^(j).

Elements are finite Scalar-linear combinations of words; a word is a tuple of
generators ``(field, order)`` where ``field`` is an integer index (the KP
fields u_2, u_3, ...) or a name such as ``"u"`` for the reduced KdV field, and
``order`` counts x-derivatives.  The product is word concatenation: nothing is
ever reordered, so this is the right home for equations whose term ordering
carries meaning.

Time derivatives are not generators; evolution equations are represented as
(label, right-hand side) pairs by the hierarchy layer, and derivations along a
flow are applied with :func:`derive`.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping

from .scalars import Scalar

__all__ = [
    "DiffGen",
    "NCPoly",
    "gen",
    "u",
    "commutator",
    "derive",
    "substitute",
    "SubstitutionError",
    "NCPolyRing",
    "NCPOLY_RING",
]

# A generator is (field, order); a word is a tuple of generators.
DiffGen = tuple


class SubstitutionError(KeyError):
    """A substitution or derivation is missing an image for a generator."""


def _field_key(field):
    # integers before named fields, each group ordered internally
    if isinstance(field, int):
        return (0, field, "")
    return (1, 0, str(field))


def _gen_key(g):
    f, j = g
    return (*_field_key(f), j)


def _word_key(w):
    return (len(w), tuple(_gen_key(g) for g in w))


def _coerce_coeff(c) -> Scalar:
    if isinstance(c, Scalar):
        return c
    if isinstance(c, (int, Fraction)):
        return Scalar(c)
    raise TypeError(f"cannot use {c!r} as an NCPoly coefficient")


class NCPoly:
    """Noncommutative polynomial: finite map word -> Scalar, zeros dropped."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[tuple, Scalar] | None = None):
        clean = {}
        if terms:
            for w, c in terms.items():
                c = _coerce_coeff(c)
                if not c.is_zero():
                    clean[tuple(w)] = c
        self._terms = clean
        self._hash = None

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def zero() -> "NCPoly":
        return _ZERO

    @staticmethod
    def one() -> "NCPoly":
        return _ONE

    @staticmethod
    def constant(c) -> "NCPoly":
        return NCPoly({(): _coerce_coeff(c)})

    # -- inspection -----------------------------------------------------------

    def terms(self):
        """Terms as (word, coeff) pairs in canonical (graded) order."""
        return sorted(self._terms.items(), key=lambda it: _word_key(it[0]))

    def coeff(self, word) -> Scalar:
        return self._terms.get(tuple(word), Scalar(0))

    def generators(self):
        """Set of generators appearing in any word."""
        out = set()
        for w in self._terms:
            out.update(w)
        return out

    def max_derivative_order(self) -> int:
        return max((g[1] for w in self._terms for g in w), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    # -- ring operations ------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction, Scalar)):
            other = NCPoly.constant(other)
        if not isinstance(other, NCPoly):
            return NotImplemented
        out = dict(self._terms)
        for w, c in other._terms.items():
            s = out.get(w)
            s = c if s is None else s + c
            if s.is_zero():
                out.pop(w, None)
            else:
                out[w] = s
        return NCPoly._raw(out)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other if isinstance(other, NCPoly) else -_coerce_coeff(other))

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return NCPoly._raw({w: -c for w, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Scalar)):
            return self.scaled(other)
        if not isinstance(other, NCPoly):
            return NotImplemented
        out = {}
        for w1, c1 in self._terms.items():
            for w2, c2 in other._terms.items():
                w = w1 + w2
                c = c1 * c2
                s = out.get(w)
                s = c if s is None else s + c
                if s.is_zero():
                    out.pop(w, None)
                else:
                    out[w] = s
        return NCPoly._raw(out)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, Scalar)):
            return self.scaled(other)
        return NotImplemented

    def scaled(self, c) -> "NCPoly":
        c = _coerce_coeff(c)
        if c.is_zero():
            return _ZERO
        return NCPoly._raw({w: c * v for w, v in self._terms.items()})

    def d_x(self) -> "NCPoly":
        """Leibniz derivation raising the derivative order of each factor in turn."""
        out = {}
        for w, c in self._terms.items():
            for pos, (f, j) in enumerate(w):
                nw = w[:pos] + ((f, j + 1),) + w[pos + 1 :]
                s = out.get(nw)
                s = c if s is None else s + c
                if s.is_zero():
                    out.pop(nw, None)
                else:
                    out[nw] = s
        return NCPoly._raw(out)

    # -- equality -------------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, Scalar)):
            other = NCPoly.constant(other)
        if not isinstance(other, NCPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # -- printing -------------------------------------------------------------

    def __repr__(self):
        return f"NCPoly({self.text()})"

    def __str__(self):
        return self.text()

    def text(self, group_commutators: bool = True) -> str:
        if not self._terms:
            return "0"
        items = _display_items(self, group_commutators)
        parts = []
        for label, coeff in items:
            c = _coeff_prefix(coeff)
            if label == "1":
                parts.append(str(coeff))
            elif c == "":
                parts.append(label)
            elif c == "-":
                parts.append(f"-{label}")
            else:
                parts.append(f"{c}*{label}")
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def latex(self) -> str:
        if not self._terms:
            return "0"
        items = _display_items(self, group_commutators=True)
        parts = []
        for label, coeff in items:
            label = label if label != "1" else ""
            c = _coeff_latex(coeff)
            parts.append(f"{c}{_label_latex(label)}" if label else _scalar_latex(coeff))
        out = parts[0]
        for p in parts[1:]:
            out += f" {p}" if p.startswith("-") else f" + {p}"
        return out

    # -- JSON -----------------------------------------------------------------

    def to_json(self):
        return [
            {"coeff": c.to_json(), "word": [[f, j] for (f, j) in w]}
            for w, c in self.terms()
        ]

    @staticmethod
    def from_json(obj) -> "NCPoly":
        terms = {}
        for t in obj:
            w = tuple((f if isinstance(f, str) else int(f), int(j)) for f, j in t["word"])
            terms[w] = Scalar.from_json(t["coeff"])
        return NCPoly(terms)

    # -- internal -------------------------------------------------------------

    @staticmethod
    def _raw(terms: dict) -> "NCPoly":
        p = NCPoly.__new__(NCPoly)
        p._terms = terms
        p._hash = None
        return p


_ZERO = NCPoly._raw({})
_ONE = NCPoly._raw({(): Scalar(1)})


def gen(field, order: int = 0) -> NCPoly:
    """The generator field^(order) as a one-term polynomial."""
    if order < 0:
        raise ValueError("derivative order must be >= 0")
    return NCPoly._raw({((field, order),): Scalar(1)})


def u(k: int, order: int = 0) -> NCPoly:
    """The KP field generator u_k^(order)."""
    if k < 2:
        raise ValueError("KP field index starts at 2")
    return gen(k, order)


def commutator(a: NCPoly, b: NCPoly) -> NCPoly:
    return a * b - b * a


def derive(p: NCPoly, base_images: Mapping, missing: str = "error") -> NCPoly:
    """Apply the derivation D with D(f^(j)) = d_x^j(base_images[f]).

    ``base_images`` maps a field to the image of its underived generator; the
    extension to derived generators is forced by commutation with d_x, and the
    extension to products is Leibniz.  ``missing`` controls what happens on a
    field without an image: "error" raises, "zero" annihilates it.
    """
    img_cache: dict = {}

    def image(g):
        if g in img_cache:
            return img_cache[g]
        f, j = g
        try:
            base = base_images[f]
        except KeyError:
            if missing == "zero":
                img_cache[g] = NCPoly.zero()
                return img_cache[g]
            raise SubstitutionError(f"no derivation image for field {f!r}")
        for _ in range(j):
            base = base.d_x()
        img_cache[g] = base
        return base

    out = NCPoly.zero()
    for w, c in p._terms.items():
        for pos, g in enumerate(w):
            img = image(g)
            if img.is_zero():
                continue
            left = NCPoly._raw({w[:pos]: Scalar(1)})
            right = NCPoly._raw({w[pos + 1 :]: Scalar(1)})
            out = out + (left * img * right).scaled(c)
    return out


def substitute(p: NCPoly, assign: Mapping, ring) -> object:
    """Ring homomorphism image of ``p`` under field -> ring element.

    ``assign`` maps each base field to an element of the target ring; derived
    generators go to iterated ``ring.d_x`` images, so the assignment is
    automatically compatible with the derivation.  Words multiply with the
    ring's (noncommutative) product.
    """
    img_cache: dict = {}

    def image(g):
        if g in img_cache:
            return img_cache[g]
        f, j = g
        try:
            val = assign[f]
        except KeyError:
            raise SubstitutionError(f"no substitution image for field {f!r}")
        prev = (f, j - 1)
        if j > 0 and prev in img_cache:
            val = ring.d_x(img_cache[prev])
        else:
            for _ in range(j):
                val = ring.d_x(val)
        img_cache[g] = val
        return val

    acc = ring.zero()
    for w, c in p._terms.items():
        cur = ring.from_scalar(c)
        for g in w:
            cur = ring.mul(cur, image(g))
        acc = ring.add(acc, cur)
    return acc


# -- display helpers ------------------------------------------------------------


def _gen_label(g) -> str:
    f, j = g
    name = f"u{f}" if isinstance(f, int) else str(f)
    if j == 0:
        return name
    if j <= 3:
        return name + "'" * j
    return f"{name}^({j})"


def _word_label(w) -> str:
    if not w:
        return "1"
    return "*".join(_gen_label(g) for g in w)


def _display_items(p: NCPoly, group_commutators: bool):
    """(label, coeff) pairs; antisymmetric length-2 pairs print as [a,b]."""
    terms = dict(p._terms)
    items = []
    if group_commutators:
        for w in sorted([w for w in terms if len(w) == 2 and w[0] != w[1]], key=_word_key):
            if w not in terms:
                continue
            rev = (w[1], w[0])
            if _gen_key(w[0]) < _gen_key(w[1]) and terms.get(rev) == -terms[w]:
                items.append((f"[{_gen_label(w[0])},{_gen_label(w[1])}]", terms[w]))
                del terms[w]
                del terms[rev]
    items.extend((_word_label(w), c) for w, c in sorted(terms.items(), key=lambda it: _word_key(it[0])))
    items.sort(key=lambda it: it[0] == "1")
    return items


def _coeff_prefix(c: Scalar) -> str:
    if c.is_one():
        return ""
    if c == Scalar(-1):
        return "-"
    return str(c)


def _scalar_latex(c: Scalar) -> str:
    def frac(q):
        if q.denominator == 1:
            return str(q.numerator)
        sign = "-" if q < 0 else ""
        return rf"{sign}\frac{{{abs(q.numerator)}}}{{{q.denominator}}}"

    if c.im == 0:
        return frac(c.re)
    if c.re == 0:
        return ("i" if c.im == 1 else ("-i" if c.im == -1 else frac(c.im) + "i"))
    return f"({frac(c.re)}+{frac(c.im)}i)"


def _coeff_latex(c: Scalar) -> str:
    if c.is_one():
        return ""
    if c == Scalar(-1):
        return "-"
    return _scalar_latex(c)


def _label_latex(label: str) -> str:
    out = []
    for piece in label.split("*"):
        comm = piece.startswith("[")
        body = piece.strip("[]")
        parts = []
        for atom in body.split(","):
            primes = len(atom) - len(atom.rstrip("'"))
            stem = atom.rstrip("'")
            if "^(" in stem:
                stem, _, rest = stem.partition("^(")
                order = rest.rstrip(")")
                sup = rf"^{{({order})}}"
            else:
                sup = r"^{\prime}" * 0 if primes == 0 else "^{" + r"\prime" * primes + "}"
            if stem.startswith("u") and stem[1:].isdigit():
                stem = f"u_{{{stem[1:]}}}"
            parts.append(stem + sup)
        if comm:
            out.append(rf"[{parts[0]},{parts[1]}]_\star")
        else:
            out.append(r" \star ".join(parts))
    return r" \star ".join(out)


class NCPolyRing:
    """Ring adapter exposing NCPoly to the generic operator calculus."""

    def zero(self):
        return _ZERO

    def one(self):
        return _ONE

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def scalar_mul(self, c, a):
        return a.scaled(c)

    def d_x(self, a):
        return a.d_x()

    def is_zero(self, a):
        return a.is_zero()

    def from_scalar(self, c):
        return NCPoly.constant(c)

    def inv(self, a):
        items = list(a._terms.items())
        if len(items) == 1 and items[0][0] == ():
            return NCPoly.constant(items[0][1].inv())
        raise ArithmeticError("only constants are invertible in the free algebra")


NCPOLY_RING = NCPolyRing()
