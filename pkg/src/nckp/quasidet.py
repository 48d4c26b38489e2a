"""Quasideterminants and block inversion over a division-capable ring.

|A|_ij is the inverse of the (j,i) entry of A^{-1}; it is computed here by the
iterative expansion (pivoting the recursion on submatrices), with full block
inversion available as an independent cross-check.  In the commutative limit
|A|_ij reduces to (-1)^{i+j} det A / det A^{ij}.
"""

from __future__ import annotations

__all__ = [
    "NCMatrix",
    "SingularMatrixError",
    "invert",
    "quasidet",
    "det_cofactor",
    "commutative_limit_value",
]


class SingularMatrixError(ArithmeticError):
    """An inverse required by the expansion does not exist."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class NCMatrix:
    """Square matrix over a noncommutative ring adapter."""

    __slots__ = ("ring", "entries", "n")

    def __init__(self, ring, entries):
        entries = tuple(tuple(row) for row in entries)
        n = len(entries)
        if any(len(row) != n for row in entries):
            raise ValueError("matrix must be square")
        self.ring = ring
        self.entries = entries
        self.n = n

    @staticmethod
    def identity(ring, n: int) -> "NCMatrix":
        return NCMatrix(
            ring,
            [[ring.one() if i == j else ring.zero() for j in range(n)] for i in range(n)],
        )

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __mul__(self, other):
        if not isinstance(other, NCMatrix):
            return NotImplemented
        ring = self.ring
        out = []
        for i in range(self.n):
            row = []
            for j in range(other.n):
                acc = ring.zero()
                for k in range(self.n):
                    acc = ring.add(acc, ring.mul(self.entries[i][k], other.entries[k][j]))
                row.append(acc)
            out.append(row)
        return NCMatrix(ring, out)

    def __add__(self, other):
        ring = self.ring
        return NCMatrix(
            ring,
            [
                [ring.add(a, b) for a, b in zip(r1, r2)]
                for r1, r2 in zip(self.entries, other.entries)
            ],
        )

    def __sub__(self, other):
        ring = self.ring
        return NCMatrix(
            ring,
            [
                [ring.add(a, ring.neg(b)) for a, b in zip(r1, r2)]
                for r1, r2 in zip(self.entries, other.entries)
            ],
        )

    def __neg__(self):
        ring = self.ring
        return NCMatrix(ring, [[ring.neg(a) for a in row] for row in self.entries])

    def is_zero(self) -> bool:
        return all(self.ring.is_zero(a) for row in self.entries for a in row)

    def is_identity(self) -> bool:
        ring = self.ring
        for i in range(self.n):
            for j in range(self.n):
                want = ring.one() if i == j else ring.zero()
                if not ring.is_zero(ring.add(self.entries[i][j], ring.neg(want))):
                    return False
        return True

    def submatrix(self, drop_row: int, drop_col: int) -> "NCMatrix":
        return NCMatrix(
            self.ring,
            [
                [a for j, a in enumerate(row) if j != drop_col]
                for i, row in enumerate(self.entries)
                if i != drop_row
            ],
        )

    def text(self, box=None, entry_str=str) -> str:
        """Row-per-line display; ``box=(i, j)`` marks the quasideterminant entry."""
        cells = [
            [
                f"[{entry_str(a)}]" if box == (i, j) else entry_str(a)
                for j, a in enumerate(row)
            ]
            for i, row in enumerate(self.entries)
        ]
        width = max(len(c) for row in cells for c in row)
        return "\n".join("| " + "  ".join(c.rjust(width) for c in row) + " |" for row in cells)

    def latex(self, box=None, entry_latex=str) -> str:
        rows = []
        for i, row in enumerate(self.entries):
            cells = [
                rf"\fbox{{${entry_latex(a)}$}}" if box == (i, j) else entry_latex(a)
                for j, a in enumerate(row)
            ]
            rows.append(" & ".join(cells))
        body = r" \\ ".join(rows)
        return rf"\begin{{vmatrix}} {body} \end{{vmatrix}}"

    def to_json(self, entry_to_json):
        return [[entry_to_json(a) for a in row] for row in self.entries]


def invert(A: NCMatrix) -> NCMatrix:
    """Inverse by the 2x2 block-decomposition formula, pivoting on the (1,1)
    entry (no pivot search: failures surface as structured errors)."""
    ring = A.ring

    def inv_entry(x, where):
        try:
            return ring.inv(x)
        except (ZeroDivisionError, ArithmeticError) as exc:
            raise SingularMatrixError(f"singular pivot at {where}: {exc}", where) from exc

    def go(entries, labels):
        n = len(entries)
        if n == 1:
            return [[inv_entry(entries[0][0], labels[0])]]
        a = entries[0][0]
        B = entries[0][1:]
        C = [row[0] for row in entries[1:]]
        D = [row[1:] for row in entries[1:]]
        a_inv = inv_entry(a, labels[0])
        D_inv = go(D, labels[1:])
        # Schur complement of D: a - B D^{-1} C  (1x1)
        acc = a
        for p in range(n - 1):
            s = ring.zero()
            for q in range(n - 1):
                s = ring.add(s, ring.mul(D_inv[p][q], C[q]))
            acc = ring.add(acc, ring.neg(ring.mul(B[p], s)))
        e11 = inv_entry(acc, labels[0])
        # Schur complement of a: D - C a^{-1} B  ((n-1)x(n-1))
        S = [
            [
                ring.add(D[p][q], ring.neg(ring.mul(ring.mul(C[p], a_inv), B[q])))
                for q in range(n - 1)
            ]
            for p in range(n - 1)
        ]
        S_inv = go(S, labels[1:])
        top = [e11]
        for q in range(n - 1):
            s = ring.zero()
            for p in range(n - 1):
                s = ring.add(s, ring.mul(B[p], S_inv[p][q]))
            top.append(ring.neg(ring.mul(a_inv, s)))
        rows = [top]
        for p in range(n - 1):
            s = ring.zero()
            for q in range(n - 1):
                s = ring.add(s, ring.mul(S_inv[p][q], C[q]))
            row = [ring.neg(ring.mul(s, a_inv))]
            row.extend(S_inv[p])
            rows.append(row)
        return rows

    return NCMatrix(ring, go([list(r) for r in A.entries], tuple(range(A.n))))


def quasidet(A: NCMatrix, i: int, j: int):
    """|A|_ij by the iterative expansion, memoized over index subsets.

    Indices are 0-based.  Agrees with inv(invert(A)[j][i]) whenever both
    sides exist.
    """
    if not (0 <= i < A.n and 0 <= j < A.n):
        raise IndexError("quasideterminant index out of range")
    ring = A.ring
    entries = A.entries
    memo = {}

    def q(rows, cols, r, c):
        if len(rows) == 1:
            return entries[rows[0]][cols[0]]
        key = (rows, cols, r, c)
        got = memo.get(key)
        if got is not None:
            return got
        sub_rows = tuple(x for x in rows if x != r)
        sub_cols = tuple(x for x in cols if x != c)
        acc = entries[r][c]
        for cp in sub_cols:
            left = entries[r][cp]
            if ring.is_zero(left):
                continue
            for rp in sub_rows:
                right = entries[rp][c]
                if ring.is_zero(right):
                    continue
                inner = q(sub_rows, sub_cols, rp, cp)
                try:
                    inner_inv = ring.inv(inner)
                except (ZeroDivisionError, ArithmeticError) as exc:
                    raise SingularMatrixError(
                        f"|A^{{{r}{c}}}|_{{{rp}{cp}}} is not invertible: {exc}",
                        where=(rows, cols, rp, cp),
                    ) from exc
                acc = ring.add(acc, ring.neg(ring.mul(ring.mul(left, inner_inv), right)))
        memo[key] = acc
        return acc

    idx = tuple(range(A.n))
    return q(idx, idx, i, j)


def det_cofactor(ring, entries):
    """Determinant by first-row cofactor expansion (commutative oracle)."""
    n = len(entries)
    if n == 1:
        return entries[0][0]
    acc = ring.zero()
    for j in range(n):
        a = entries[0][j]
        if ring.is_zero(a):
            continue
        minor = [
            [row[c] for c in range(n) if c != j]
            for row in entries[1:]
        ]
        term = ring.mul(a, det_cofactor(ring, minor))
        if j % 2:
            term = ring.neg(term)
        acc = ring.add(acc, term)
    return acc


def commutative_limit_value(A: NCMatrix, i: int, j: int):
    """(-1)^{i+j} det A / det A^{ij} via the cofactor oracle (commutative ring)."""
    ring = A.ring
    det = det_cofactor(ring, [list(r) for r in A.entries])
    minor = det_cofactor(ring, [list(r) for r in A.submatrix(i, j).entries])
    try:
        minor_inv = ring.inv(minor)
    except (ZeroDivisionError, ArithmeticError) as exc:
        raise SingularMatrixError(f"zero minor at ({i},{j})", where=(i, j)) from exc
    val = ring.mul(det, minor_inv)
    if (i + j) % 2:
        val = ring.neg(val)
    return val
