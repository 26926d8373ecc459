"""Exact integer matrix algebra.

Everything here works on Python ints (and ``Fraction`` for intermediate
inverses), so results stay exact no matter how large the entries grow.
Vectors are plain tuples of ints.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DimensionError, SingularMatrixError

IntVector = tuple  # tuple[int, ...]


def _as_int(x) -> int:
    if isinstance(x, bool) or not isinstance(x, numbers.Integral):
        if isinstance(x, Fraction) and x.denominator == 1:
            return int(x.numerator)
        raise TypeError(f"expected an integer entry, got {x!r}")
    return int(x)


def as_vector(v: Iterable) -> IntVector:
    return tuple(_as_int(x) for x in v)


class IntMatrix:
    """Immutable dense matrix of arbitrary-precision integers."""

    __slots__ = ("_rows", "nrows", "ncols")

    def __init__(self, rows: Iterable[Iterable]):
        data = tuple(tuple(_as_int(x) for x in row) for row in rows)
        if not data:
            raise DimensionError("matrix must have at least one row")
        ncols = len(data[0])
        if ncols == 0 or any(len(r) != ncols for r in data):
            raise DimensionError("ragged or empty matrix rows")
        self._rows = data
        self.nrows = len(data)
        self.ncols = ncols

    @classmethod
    def identity(cls, n: int) -> IntMatrix:
        return cls([[int(i == j) for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> IntMatrix:
        return cls([[0] * ncols for _ in range(nrows)])

    @classmethod
    def diag(cls, *values: int) -> IntMatrix:
        n = len(values)
        return cls([[values[i] if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def from_columns(cls, cols: Sequence[Sequence[int]]) -> IntMatrix:
        return cls(zip(*cols))

    @property
    def rows(self) -> tuple:
        return self._rows

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    @property
    def is_square(self) -> bool:
        return self.nrows == self.ncols

    @property
    def T(self) -> IntMatrix:
        return IntMatrix(zip(*self._rows))

    def col(self, j: int) -> IntVector:
        return tuple(r[j] for r in self._rows)

    def columns(self) -> list[IntVector]:
        return [self.col(j) for j in range(self.ncols)]

    def tolist(self) -> list[list[int]]:
        return [list(r) for r in self._rows]

    def submatrix(self, r0: int, r1: int, c0: int, c1: int) -> IntMatrix:
        return IntMatrix(row[c0:c1] for row in self._rows[r0:r1])

    def hstack(self, other: IntMatrix) -> IntMatrix:
        if other.nrows != self.nrows:
            raise DimensionError("hstack needs equal row counts")
        return IntMatrix(a + b for a, b in zip(self._rows, other._rows))

    def __getitem__(self, idx):
        i, j = idx
        return self._rows[i][j]

    def __iter__(self):
        return iter(self._rows)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntMatrix) and self._rows == other._rows

    def __hash__(self) -> int:
        return hash(self._rows)

    def __repr__(self) -> str:
        return f"IntMatrix({self.tolist()})"

    def __neg__(self) -> IntMatrix:
        return IntMatrix([-x for x in r] for r in self._rows)

    def __add__(self, other: IntMatrix) -> IntMatrix:
        if self.shape != other.shape:
            raise DimensionError(f"shape mismatch {self.shape} vs {other.shape}")
        return IntMatrix([a + b for a, b in zip(r, s)] for r, s in zip(self._rows, other._rows))

    def __sub__(self, other: IntMatrix) -> IntMatrix:
        return self + (-other)

    def __mul__(self, k: int) -> IntMatrix:
        k = _as_int(k)
        return IntMatrix([k * x for x in r] for r in self._rows)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, IntMatrix):
            if self.ncols != other.nrows:
                raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
            cols = list(zip(*other._rows))
            return IntMatrix([sum(a * b for a, b in zip(r, c)) for c in cols] for r in self._rows)
        v = tuple(other)
        if len(v) != self.ncols:
            raise DimensionError(f"cannot multiply {self.shape} by vector of length {len(v)}")
        return tuple(sum(a * b for a, b in zip(r, v)) for r in self._rows)


def _require_square(M: IntMatrix) -> None:
    if not M.is_square:
        raise DimensionError(f"square matrix required, got shape {M.shape}")


def determinant(M: IntMatrix) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    _require_square(M)
    a = M.tolist()
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _minor(M: IntMatrix, i: int, j: int) -> IntMatrix:
    return IntMatrix(
        [x for c, x in enumerate(row) if c != j] for r, row in enumerate(M.rows) if r != i
    )


def adjugate(M: IntMatrix) -> IntMatrix:
    _require_square(M)
    n = M.nrows
    if n == 1:
        return IntMatrix([[1]])
    # adj[i][j] is the (j, i) cofactor
    return IntMatrix(
        [(-1) ** (i + j) * determinant(_minor(M, j, i)) for j in range(n)] for i in range(n)
    )


def is_unimodular(M: IntMatrix) -> bool:
    return M.is_square and abs(determinant(M)) == 1


def rational_inverse(M: IntMatrix) -> list[list[Fraction]]:
    d = determinant(M)
    if d == 0:
        raise SingularMatrixError("matrix is singular")
    return [[Fraction(x, d) for x in row] for row in adjugate(M).rows]


def unimodular_inverse(U: IntMatrix) -> IntMatrix:
    d = determinant(U)
    if abs(d) != 1:
        raise ValueError("matrix is not unimodular")
    return adjugate(U) * d


def left_quotient(A: IntMatrix, M: IntMatrix) -> IntMatrix | None:
    """Return ``A^{-1} M`` when it is an integer matrix, else ``None``."""
    d = determinant(A)
    if d == 0:
        raise SingularMatrixError("left divisor is singular")
    prod = adjugate(A) @ M
    if any(x % d for row in prod.rows for x in row):
        return None
    return IntMatrix([x // d for x in row] for row in prod.rows)


def left_divides(A: IntMatrix, M: IntMatrix) -> bool:
    return left_quotient(A, M) is not None


def same_column_lattice(A: IntMatrix, B: IntMatrix) -> bool:
    """True iff ``A = B X`` for a unimodular ``X`` (equal lattices L(A) = L(B))."""
    return left_divides(A, B) and left_divides(B, A)


def same_row_lattice(A: IntMatrix, B: IntMatrix) -> bool:
    return same_column_lattice(A.T, B.T)


# --------------------------------------------------------------------------
# Smith normal form


@dataclass(frozen=True)
class SmithDecomposition:
    """``U @ M @ V == S`` with ``S`` in Smith normal form."""

    U: IntMatrix
    S: IntMatrix
    V: IntMatrix

    @property
    def invariant_factors(self) -> tuple[int, ...]:
        k = min(self.S.nrows, self.S.ncols)
        return tuple(self.S[i, i] for i in range(k))

    @property
    def rank(self) -> int:
        return sum(1 for d in self.invariant_factors if d != 0)

    @property
    def Lambda(self) -> IntMatrix:
        return IntMatrix.diag(*self.invariant_factors)


def smith_normal_form(M: IntMatrix) -> SmithDecomposition:
    """Smith form by elementary row/column operations.

    The pivot at step ``t`` is always the smallest nonzero entry of the
    trailing block; once its row and column are cleared, any trailing entry
    it fails to divide is folded back into the pivot row so the
    divisibility chain holds on exit.
    """
    a = M.tolist()
    D, K = M.nrows, M.ncols
    U = [[int(i == j) for j in range(D)] for i in range(D)]
    V = [[int(i == j) for j in range(K)] for i in range(K)]

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in V:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):  # row_dst -= q * row_src
        a[dst] = [x - q * y for x, y in zip(a[dst], a[src])]
        U[dst] = [x - q * y for x, y in zip(U[dst], U[src])]

    def add_col(dst, src, q):  # col_dst -= q * col_src
        for row in a:
            row[dst] -= q * row[src]
        for row in V:
            row[dst] -= q * row[src]

    for t in range(min(D, K)):
        while True:
            best = None
            for i in range(t, D):
                for j in range(t, K):
                    if a[i][j] and (best is None or abs(a[i][j]) < abs(a[best[0]][best[1]])):
                        best = (i, j)
            if best is None:
                break
            swap_rows(t, best[0])
            swap_cols(t, best[1])
            p = a[t][t]
            dirty = False
            for i in range(t + 1, D):
                if a[i][t]:
                    add_row(i, t, a[i][t] // p)
                    dirty = dirty or a[i][t] != 0
            for j in range(t + 1, K):
                if a[t][j]:
                    add_col(j, t, a[t][j] // p)
                    dirty = dirty or a[t][j] != 0
            if dirty:
                continue
            bad = next(
                (i for i in range(t + 1, D) for j in range(t + 1, K) if a[i][j] % p),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, -1)
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            U[t] = [-x for x in U[t]]
    return SmithDecomposition(IntMatrix(U), IntMatrix(a), IntMatrix(V))


def determinantal_divisors(M: IntMatrix) -> list[int]:
    """``d_i`` = gcd of all ``i x i`` minors, for i = 1..min(D, K)."""
    from itertools import combinations

    out = []
    for k in range(1, min(M.nrows, M.ncols) + 1):
        g = 0
        for rs in combinations(range(M.nrows), k):
            for cs in combinations(range(M.ncols), k):
                g = math.gcd(g, determinant(IntMatrix([[M[r, c] for c in cs] for r in rs])))
        out.append(g)
    return out


# --------------------------------------------------------------------------
# Divisors and multiples


@dataclass(frozen=True)
class BezoutCertificate:
    """``M @ P + N @ Q == L`` where ``L`` is a gcld of ``M`` and ``N``."""

    L: IntMatrix
    P: IntMatrix
    Q: IntMatrix


def _require_nonsingular_pair(M: IntMatrix, N: IntMatrix) -> None:
    _require_square(M)
    _require_square(N)
    if M.nrows != N.nrows:
        raise DimensionError("moduli must share the same dimension")
    if determinant(M) == 0 or determinant(N) == 0:
        raise SingularMatrixError("gcld/lcrm need nonsingular matrices")


def gcld(M: IntMatrix, N: IntMatrix) -> BezoutCertificate:
    """Greatest common left divisor via the Smith form of ``[M N]``."""
    _require_nonsingular_pair(M, N)
    D = M.nrows
    snf = smith_normal_form(M.hstack(N))
    L = unimodular_inverse(snf.U) @ snf.Lambda
    P = snf.V.submatrix(0, D, 0, D)
    Q = snf.V.submatrix(D, 2 * D, 0, D)
    return BezoutCertificate(L, P, Q)


def gcrd(M: IntMatrix, N: IntMatrix) -> IntMatrix:
    return gcld(M.T, N.T).L.T


def lcrm(M: IntMatrix, N: IntMatrix) -> IntMatrix:
    """Least common right multiple ``R = M P = N Q``."""
    _require_nonsingular_pair(M, N)
    H = rational_inverse(M)
    H = [[sum(h * n for h, n in zip(row, col)) for col in zip(*N.rows)] for row in H]
    d = math.lcm(*(x.denominator for row in H for x in row))
    snf = smith_normal_form(IntMatrix([[x * d for x in row] for row in H]))
    ratios = [Fraction(delta, d) for delta in snf.invariant_factors]
    P = unimodular_inverse(snf.U) @ IntMatrix.diag(*(r.numerator for r in ratios))
    Q = snf.V @ IntMatrix.diag(*(r.denominator for r in ratios))
    R = M @ P
    assert R == N @ Q
    return R


def lclm(M: IntMatrix, N: IntMatrix) -> IntMatrix:
    return lcrm(M.T, N.T).T


def lcrm_many(Ms: Sequence[IntMatrix]) -> IntMatrix:
    if len(Ms) < 1:
        raise ValueError("need at least one matrix")
    R = Ms[0]
    if determinant(R) == 0:
        raise SingularMatrixError("lcrm needs nonsingular matrices")
    for M in Ms[1:]:
        R = lcrm(R, M)
    return R


# --------------------------------------------------------------------------
# Division with remainder


def mod_reduce(m: Sequence[int], M: IntMatrix) -> tuple[IntVector, IntVector]:
    """Split ``m = M n + r`` with ``r`` in N(M).

    ``r = M (adj(M) m mod |det M|) / |det M|`` after flipping the sign of
    ``adj(M) m`` when ``det M < 0``; ``n`` is then ``floor(M^{-1} m)``.
    """
    _require_square(M)
    m = as_vector(m)
    if len(m) != M.nrows:
        raise DimensionError("vector/matrix dimension mismatch")
    d = determinant(M)
    if d == 0:
        raise SingularMatrixError("modulus is singular")
    s, ad = (1, d) if d > 0 else (-1, -d)
    a = [s * x for x in adjugate(M) @ m]
    k = [x % ad for x in a]
    n = tuple((x - y) // ad for x, y in zip(a, k))
    r = tuple(x // ad for x in M @ k)
    return n, r


def remainder(m: Sequence[int], M: IntMatrix) -> IntVector:
    return mod_reduce(m, M)[1]


def in_N(k: Sequence[int], M: IntMatrix) -> bool:
    """Exact test ``M^{-1} k in [0, 1)^D``."""
    d = determinant(M)
    if d == 0:
        raise SingularMatrixError("modulus is singular")
    return all(0 <= Fraction(x, d) < 1 for x in adjugate(M) @ as_vector(k))


def floor_solve(M: IntMatrix, m: Sequence) -> IntVector:
    """Exact ``floor(M^{-1} m)`` for an integer or rational vector ``m``."""
    d = determinant(M)
    if d == 0:
        raise SingularMatrixError("matrix is singular")
    adj = adjugate(M)
    return tuple(
        math.floor(sum(Fraction(a) * Fraction(x) for a, x in zip(row, m)) / d) for row in adj.rows
    )
