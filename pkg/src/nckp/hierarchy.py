"""KP hierarchy flows, l-reductions, and conserved-density structure.

Everything here is derived, never hard-coded: flows come out of the Lax
equation by residue extraction, the KdV family comes out of the constraint
L^2 = d^2 + u via a monic square root, and the printed equations of the
literature serve only as test fixtures downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import psido
from .freealg import NCPOLY_RING, NCPoly, derive, gen, substitute, u
from .psido import PsDO, binom

__all__ = [
    "LaxKP",
    "FlowEquation",
    "ReductionTable",
    "HierarchyDepthError",
    "make_lax",
    "b_m",
    "kp_flow",
    "kp_flow_single",
    "apply_kp_flow",
    "l_reduce",
    "kdv_lax",
    "kdv_flow",
    "deformation_indices",
    "ConservedDensityRecipe",
    "conserved_density_recipe",
]


class HierarchyDepthError(ValueError):
    """The Lax operator is not tracked deep enough for the request."""


@dataclass(frozen=True)
class LaxKP:
    """Lax operator d + u_2 d^-1 + u_3 d^-2 + ... tracked to field u_depth."""

    op: PsDO
    depth: int


def make_lax(depth: int) -> LaxKP:
    if depth < 2:
        raise ValueError("depth must be >= 2")
    coeffs = {1: NCPoly.one()}
    for k in range(2, depth + 1):
        coeffs[1 - k] = u(k)
    return LaxKP(PsDO(NCPOLY_RING, coeffs, cutoff=1 - depth), depth)


def b_m(lax: LaxKP, m: int) -> PsDO:
    """B_m = (L^m)_{>=0}, the differential-operator part of the m-th power."""
    if m < 1:
        raise ValueError("flow index must be >= 1")
    if lax.depth < m:
        raise HierarchyDepthError(
            f"B_{m} needs depth >= {m}, lax is tracked to depth {lax.depth}"
        )
    return psido.power(lax.op, m).project_geq(0)


@dataclass(frozen=True)
class FlowEquation:
    """One evolution equation d_m(field) = rhs."""

    m: int
    field: object  # 2, 3, ... or "u" for the reduced KdV field
    rhs: NCPoly

    def _field_label(self) -> str:
        return f"u{self.field}" if isinstance(self.field, int) else str(self.field)

    def text(self) -> str:
        return f"d_{self.m} {self._field_label()} = {self.rhs.text()}"

    def latex(self) -> str:
        name = (
            f"u_{{{self.field}}}" if isinstance(self.field, int) else str(self.field)
        )
        return rf"\partial_{{{self.m}}} {name} = {self.rhs.latex()}"

    def to_json(self):
        return {"m": self.m, "field": self.field, "rhs": self.rhs.to_json()}


def kp_flow(m: int, k_max: int, depth=None) -> list:
    """Flows d_m u_k = res_{1-k}([B_m, L]) for k = 2..k_max, derived exactly.

    The default depth k_max + m guarantees the extracted equations are exact
    rather than truncated.
    """
    if m < 1 or k_max < 2:
        raise ValueError("need m >= 1 and k_max >= 2")
    if depth is None:
        depth = k_max + m
    lax = make_lax(depth)
    if depth < k_max + m:
        raise HierarchyDepthError(
            f"flow (m={m}, k_max={k_max}) needs depth >= {k_max + m}"
        )
    comm = psido.commutator(b_m(lax, m), lax.op)
    # the Lax equation lives at strictly negative degrees
    if not comm.project_geq(0).is_zero_tracked():
        raise AssertionError("[B_m, L] has unexpected non-negative part")
    return [FlowEquation(m, k, comm.res(1 - k)) for k in range(2, k_max + 1)]


def kp_flow_single(m: int, k: int) -> FlowEquation:
    return kp_flow(m, k)[k - 2]


def apply_kp_flow(p: NCPoly, m: int) -> NCPoly:
    """Derivation d_m applied to a polynomial in the KP fields.

    Time derivatives of each field are replaced by the derived flow right-hand
    sides, extended to derivatives and products in the unique compatible way.
    """
    fields = {f for (f, _) in p.generators()}
    if not fields:
        return NCPoly.zero()
    if not all(isinstance(f, int) for f in fields):
        raise ValueError("apply_kp_flow expects raw KP fields u_k")
    k_max = max(fields)
    images = {eq.field: eq.rhs for eq in kp_flow(m, k_max)}
    return derive(p, images)


@dataclass(frozen=True)
class ReductionTable:
    """Solution of (L^l)_{<=-1} = 0: higher fields in terms of the survivors.

    For l = 2 the surviving field is renamed u = 2 u_2, so the table includes
    the seed entry u_2 -> u/2.
    """

    l: int
    depth: int
    table: dict

    def assignment(self):
        """Substitution map for every field that may appear at this depth."""
        out = {"u": gen("u")}
        for k in range(2, self.depth + 1):
            out[k] = self.table.get(k, u(k))
        return out

    def apply(self, p: NCPoly) -> NCPoly:
        return substitute(p, self.assignment(), NCPOLY_RING)


def l_reduce(l: int, depth: int) -> ReductionTable:
    """Triangular solve of the l-reduction constraint down to u_depth."""
    if l < 2:
        raise ValueError("reduction order must be >= 2")
    if depth <= l:
        raise ValueError("depth must exceed the reduction order")
    lax = make_lax(depth)
    lpow = psido.power(lax.op, l)
    table: dict = {}
    if l == 2:
        table[2] = gen("u").scaled(Fraction(1, 2))

    for j in range(1, depth - l + 1):
        k_new = l + j
        assign = {"u": gen("u")}
        for k in range(2, depth + 1):
            assign[k] = table.get(k, u(k))
        e = substitute(lpow.res(-j), assign, NCPOLY_RING)
        # e = l * u_{k_new} + rest, with rest free of u_{k_new}
        coeff = e.coeff(((k_new, 0),))
        if coeff != l:
            raise AssertionError("reduction system lost triangularity")
        rest = e - u(k_new).scaled(l)
        if any(f == k_new for (f, _) in rest.generators()):
            raise AssertionError("reduction residue not linear in the new field")
        table[k_new] = rest.scaled(Fraction(-1, l))
    return ReductionTable(l, depth, table)


def kdv_lax(cutoff: int) -> PsDO:
    """The KdV Lax operator: monic square root of d^2 + u, tracked to cutoff."""
    P = PsDO(NCPOLY_RING, {2: NCPoly.one(), 0: gen("u")})
    return psido.sqrt_monic(P, cutoff)


def kdv_flow(m: int) -> FlowEquation:
    """m-th KdV flow d u/d x^m = [B_m, L^2] with L = sqrt(d^2 + u).

    Even m give the zero flow; odd m >= 3 give the higher KdV equations.
    """
    if m < 1:
        raise ValueError("flow index must be >= 1")
    P = PsDO(NCPOLY_RING, {2: NCPoly.one(), 0: gen("u")})
    L = kdv_lax(cutoff=-m - 1)
    B = psido.power(L, m).project_geq(0)
    comm = psido.commutator(B, P)
    rhs = comm.coeff(0)
    if not (comm - PsDO.from_function(NCPOLY_RING, rhs)).is_zero_tracked():
        raise AssertionError("[B_m, L^2] did not collapse to a multiplication operator")
    return FlowEquation(m, "u", rhs)


def deformation_indices(m: int):
    """(k, l, binomial) triples indexing the deformation part of the density."""
    return [(k, l, binom(k, l)) for k in range(m) for l in range(k + 1)]


@dataclass(frozen=True)
class RecipeTerm:
    coeff: Fraction
    k: int
    l: int
    left: NCPoly  # d_x^{k-l} res_{-(l+1)} L^n
    right: NCPoly  # d_x res_k L^m

    def to_json(self):
        return {
            "coeff": str(self.coeff),
            "k": self.k,
            "l": self.l,
            "left": self.left.to_json(),
            "right": self.right.to_json(),
        }


@dataclass(frozen=True)
class ConservedDensityRecipe:
    """Structure of the n-th conserved density for the m-th flow.

    ``leading`` is the residue of L^n.  For space-time noncommutativity the
    density also carries the double sum of Strachan-product corrections with
    prefactor theta^{x,t}; the diamond products themselves need explicit
    functions, so the terms are kept as (left, right) pairs to be combined by
    the solution layer.  For space-space noncommutativity the density
    degenerates to the leading residue and ``terms`` is empty.
    """

    n: int
    m: int
    space_time: bool
    leading: NCPoly
    terms: tuple

    def to_json(self):
        return {
            "n": self.n,
            "m": self.m,
            "space_time": self.space_time,
            "theta_prefactor": "theta^{x t-index}" if self.space_time else None,
            "leading": self.leading.to_json(),
            "terms": [t.to_json() for t in self.terms],
        }


def conserved_density_recipe(
    n: int, m: int, *, space_time: bool, reduced: bool = True, depth=None
) -> ConservedDensityRecipe:
    """Symbolic recipe for sigma_n of the m-th flow.

    With ``reduced`` the residues are differential polynomials in the KdV
    field u (via the square-root Lax operator); otherwise they stay in the raw
    KP fields and ``depth`` bounds the tracked tail.
    """
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    if reduced:
        L = kdv_lax(cutoff=-(m + n + 1))
    else:
        if depth is None:
            depth = n + m + 2
        L = make_lax(depth).op
    Ln = psido.power(L, n) if n > 1 else L
    leading = Ln.res(-1)
    if not space_time:
        return ConservedDensityRecipe(n, m, False, leading, ())
    Lm = psido.power(L, m) if m > 1 else L
    terms = []
    for k, l, c in deformation_indices(m):
        left = Ln.res(-(l + 1))
        for _ in range(k - l):
            left = left.d_x()
        right = Lm.res(k).d_x()
        terms.append(RecipeTerm(c, k, l, left, right))
    return ConservedDensityRecipe(n, m, True, leading, tuple(terms))
