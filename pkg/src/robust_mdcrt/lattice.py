"""Shortest and closest vector computations on small full-rank lattices.

Bases hold their generators as columns.  Integer and rational bases are
handled exactly (distances compared without rounding); real bases use
floats.  Both SVP and CVP first LLL-reduce the basis, which leaves the
lattice unchanged, and then enumerate every coefficient vector inside a
box that provably contains all candidates.
"""

from __future__ import annotations

import itertools
import math
import numbers
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DimensionError, SingularMatrixError, SizeLimitError
from .intalg import IntMatrix, adjugate, determinant, smith_normal_form, unimodular_inverse

NORMS = ("l1", "l2", "linf")
DEFAULT_TIE_TOL = 1e-9
DEFAULT_COSET_CAP = 10**7


def _is_exact(x) -> bool:
    return isinstance(x, (numbers.Integral, Fraction)) and not isinstance(x, bool)


def _exactify(x):
    if isinstance(x, bool):
        raise TypeError("boolean entry")
    if isinstance(x, numbers.Integral):
        return int(x)
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else x
    return float(x)


def vector_norm(v: Sequence, norm: str = "l2"):
    """Norm of ``v``; exact for ``l1``/``linf`` on exact input."""
    if norm == "l1":
        return sum(abs(x) for x in v)
    if norm == "linf":
        return max(abs(x) for x in v)
    if norm == "l2":
        return math.sqrt(sum(float(x) ** 2 for x in v))
    raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")


def _norm_key(v: Sequence, norm: str):
    """Monotone surrogate of the norm, exact when entries are exact."""
    if norm == "l2":
        return sum(x * x for x in v)
    return vector_norm(v, norm)


def _key_to_distance(key, norm: str) -> float:
    return math.sqrt(float(key)) if norm == "l2" else float(key)


def _matvec(B, c):
    return tuple(sum(b * x for b, x in zip(row, c)) for row in B)


def _lll(B: list[list], exact: bool, delta=Fraction(3, 4)):
    """LLL-reduce the columns of ``B``.

    Returns ``(B_red, T)`` with ``B_red = B @ T`` and ``T`` unimodular.
    """
    n = len(B)
    cols = [list(c) for c in zip(*B)]
    T = [[int(i == j) for j in range(n)] for i in range(n)]  # stored as columns
    if not exact:
        delta = float(delta)

    def dot(u, v):
        return sum(a * b for a, b in zip(u, v))

    def gso():
        bstar, mu = [], [[0] * n for _ in range(n)]
        for i in range(n):
            v = list(cols[i])
            for j in range(i):
                num = dot(cols[i], bstar[j])
                mu[i][j] = (Fraction(num) if exact else num) / dot(bstar[j], bstar[j])
                v = [a - mu[i][j] * b for a, b in zip(v, bstar[j])]
            bstar.append(v)
        return bstar, mu

    k = 1
    bstar, mu = gso()
    while k < n:
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q:
                cols[k] = [a - q * b for a, b in zip(cols[k], cols[j])]
                T[k] = [a - q * b for a, b in zip(T[k], T[j])]
                bstar, mu = gso()
        lhs = dot(bstar[k], bstar[k])
        rhs = (delta - mu[k][k - 1] ** 2) * dot(bstar[k - 1], bstar[k - 1])
        if lhs >= rhs:
            k += 1
        else:
            cols[k], cols[k - 1] = cols[k - 1], cols[k]
            T[k], T[k - 1] = T[k - 1], T[k]
            bstar, mu = gso()
            k = max(k - 1, 1)
    return [list(r) for r in zip(*cols)], [list(r) for r in zip(*T)]


def _float_inverse_row_norms(B) -> np.ndarray:
    inv = np.linalg.inv(np.array([[float(x) for x in row] for row in B]))
    return inv, np.linalg.norm(inv, axis=1)


@dataclass(frozen=True)
class CvpResult:
    point: tuple
    coefficients: tuple
    distance: float
    unique: bool


class LatticeBasis:
    """Generator matrix (columns are basis vectors) plus a norm choice.

    ``tie_tol`` is the relative distance tolerance under which a second
    closest point counts as a tie.
    """

    def __init__(self, B, norm: str = "l2", tie_tol: float = DEFAULT_TIE_TOL):
        if isinstance(B, np.ndarray):
            B = B.tolist()
        rows = tuple(tuple(_exactify(x) for x in row) for row in B)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise DimensionError("basis must be a nonempty square matrix")
        if norm not in NORMS:
            raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")
        self.B = rows
        self.norm = norm
        self.tie_tol = float(tie_tol)
        if self.exact:
            det = _rational_det(rows)
        else:
            det = float(np.linalg.det(np.array(rows, dtype=float)))
        if det == 0:
            raise SingularMatrixError("lattice basis is singular")

    def __repr__(self) -> str:
        return f"LatticeBasis({[list(r) for r in self.B]}, norm={self.norm!r})"

    @property
    def dim(self) -> int:
        return len(self.B)

    @cached_property
    def exact(self) -> bool:
        return all(_is_exact(x) for row in self.B for x in row)

    @cached_property
    def _reduced(self):
        return _lll([list(r) for r in self.B], self.exact)

    def with_norm(self, norm: str) -> LatticeBasis:
        return LatticeBasis(self.B, norm, self.tie_tol)

    def _enumerate(self, center, radius_key, skip_zero: bool):
        """Yield ``(key, coeffs_reduced, point)`` for lattice points within ``radius_key``."""
        Bred, _ = self._reduced
        D = self.dim
        inv, row_norms = _float_inverse_row_norms(Bred)
        # any norm ball of this radius sits inside an l2 ball of radius r2
        r = _key_to_distance(radius_key, self.norm)
        r2 = r * (math.sqrt(D) if self.norm == "linf" else 1.0)
        slack = 4 * max(self.tie_tol, 1e-9)
        r2 = r2 * (1 + slack) + 1e-9
        limit = radius_key * (1 + slack) + (0 if self.exact else 1e-12)
        c0 = inv @ np.array([float(x) for x in center])
        lo = np.floor(c0 - r2 * row_norms - 1e-9).astype(np.int64)
        hi = np.ceil(c0 + r2 * row_norms + 1e-9).astype(np.int64)
        for c in itertools.product(*(range(int(a), int(b) + 1) for a, b in zip(lo, hi))):
            if skip_zero and not any(c):
                continue
            p = _matvec(Bred, c)
            key = _norm_key([a - b for a, b in zip(p, center)], self.norm)
            if key <= limit:
                yield key, c, p

    def _to_original(self, c_red):
        _, T = self._reduced
        return tuple(int(x) for x in _matvec(T, c_red))

    def minimum_distance(self) -> float:
        return self.shortest_vector()[1]

    def shortest_vector(self):
        """Return ``(vector, length)`` for a shortest nonzero lattice vector."""
        Bred, _ = self._reduced
        zero = (0,) * self.dim
        radius = min(_norm_key(col, self.norm) for col in zip(*Bred))
        best = None
        for key, c, p in self._enumerate(zero, radius, skip_zero=True):
            cand = (key, tuple(c))
            if best is None or cand < best[0]:
                best = (cand, p)
        (key, _), p = best
        return tuple(p), _key_to_distance(key, self.norm)

    def closest_point(self, w: Sequence) -> CvpResult:
        if len(w) != self.dim:
            raise DimensionError("target dimension does not match the lattice")
        w = tuple(_exactify(x) for x in w)
        Bred, T = self._reduced
        inv, _ = _float_inverse_row_norms(Bred)
        babai = tuple(int(round(x)) for x in inv @ np.array([float(x) for x in w]))
        p0 = _matvec(Bred, babai)
        radius = _norm_key([a - b for a, b in zip(p0, w)], self.norm)
        cands = sorted(
            ((key, self._to_original(c), p) for key, c, p in self._enumerate(w, radius, False)),
            key=lambda t: (t[0], t[1]),
        )
        best_key, coeffs, point = cands[0]
        best_d = _key_to_distance(best_key, self.norm)
        limit = best_d * (1 + self.tie_tol)
        ties = [c for c in cands[1:] if _key_to_distance(c[0], self.norm) <= limit]
        if self.exact and best_d == 0:
            ties = []
        return CvpResult(tuple(point), coeffs, best_d, not ties)

    def contains(self, w: Sequence, tol: float = 1e-9) -> bool:
        """Fundamental parallelepiped membership ``B^{-1} w in [0, 1)^D``."""
        return fp_contains(self, w, tol)


def _rational_det(rows) -> Fraction:
    a = [[Fraction(x) for x in row] for row in rows]
    n = len(a)
    det = Fraction(1)
    for k in range(n):
        piv = next((i for i in range(k, n) if a[i][k] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            det = -det
        det *= a[k][k]
        for i in range(k + 1, n):
            f = a[i][k] / a[k][k]
            a[i] = [x - f * y for x, y in zip(a[i], a[k])]
    return det


def _rational_solve(rows, w) -> list[Fraction]:
    n = len(rows)
    a = [[Fraction(x) for x in row] + [Fraction(y)] for row, y in zip(rows, w)]
    for k in range(n):
        piv = next(i for i in range(k, n) if a[i][k] != 0)
        a[k], a[piv] = a[piv], a[k]
        for i in range(n):
            if i != k and a[i][k] != 0:
                f = a[i][k] / a[k][k]
                a[i] = [x - f * y for x, y in zip(a[i], a[k])]
    return [a[i][n] / a[i][i] for i in range(n)]


def solve(B: LatticeBasis | Sequence, w: Sequence) -> list:
    """Coordinates ``B^{-1} w``; exact when everything is rational."""
    rows = B.B if isinstance(B, LatticeBasis) else (B.rows if isinstance(B, IntMatrix) else B)
    if all(_is_exact(x) for row in rows for x in row) and all(_is_exact(x) for x in w):
        return _rational_solve(rows, w)
    return list(np.linalg.solve(np.array(rows, dtype=float), np.array(w, dtype=float)))


def fp_contains(B: LatticeBasis | Sequence, w: Sequence, tol: float = 1e-9) -> bool:
    x = solve(B, w)
    if all(isinstance(v, Fraction) for v in x):
        return all(0 <= v < 1 for v in x)
    return all(-tol <= v < 1 - tol for v in x)


def minimum_distance(B, norm: str = "l2") -> float:
    return (B if isinstance(B, LatticeBasis) else LatticeBasis(B, norm)).minimum_distance()


def closest_point(B, w, norm: str = "l2") -> CvpResult:
    return (B if isinstance(B, LatticeBasis) else LatticeBasis(B, norm)).closest_point(w)


def coset_representatives(M: IntMatrix, cap: int = DEFAULT_COSET_CAP) -> list[tuple]:
    """All integer points of N(M), sorted lexicographically."""
    return [tuple(int(x) for x in row) for row in coset_array(M, cap)]


def coset_array(M: IntMatrix, cap: int = DEFAULT_COSET_CAP) -> np.ndarray:
    """N(M) as an ``(|det M|, D)`` array in lexicographic row order.

    Uses the Smith form ``U M V = Lambda``: ``k -> U k mod diag(Lambda)``
    identifies Z^D / M Z^D with a product of cyclic groups, so the
    representatives are ``U^{-1} t`` reduced modulo ``M`` for every ``t`` in
    that box.
    """
    d = determinant(M)
    if d == 0:
        raise SingularMatrixError("modulus is singular")
    if abs(d) > cap:
        raise SizeLimitError(f"|det| = {abs(d)} exceeds the coset cap {cap}")
    D = M.nrows
    snf = smith_normal_form(M)
    deltas = snf.invariant_factors
    Uinv = unimodular_inverse(snf.U)
    grids = np.meshgrid(*(np.arange(x, dtype=object) for x in deltas), indexing="ij")
    t = np.stack([g.ravel() for g in grids], axis=1)
    k = t @ np.array(Uinv.T.tolist(), dtype=object)
    ad = abs(d)
    s = 1 if d > 0 else -1
    adj = np.array(adjugate(M).tolist(), dtype=object)
    a = (k @ adj.T) * s
    frac = a % ad
    r = (frac @ np.array(M.T.tolist(), dtype=object)) // ad
    r = np.array(sorted(map(tuple, r.tolist())), dtype=object).reshape(-1, D)
    try:
        return r.astype(np.int64)
    except OverflowError:
        return r


__all__ = [
    "NORMS",
    "CvpResult",
    "LatticeBasis",
    "closest_point",
    "coset_array",
    "coset_representatives",
    "fp_contains",
    "minimum_distance",
    "solve",
    "vector_norm",
]
