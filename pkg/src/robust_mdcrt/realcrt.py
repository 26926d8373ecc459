"""Robust reconstruction of real vectors ``m = M Psi_i n_i + r_i``.

The lattices ``L(M Psi_ij)`` are real, so closest points are found in
floating point (or exactly when ``M`` is rational).  Each closest point is
pulled back through ``M^{-1}`` and snapped to an integer vector; from there
on everything is the exact integer cascade over the ``Psi_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DimensionError, DuplicateModuliError, IntegerSnapError, SingularMatrixError
from .intalg import IntMatrix, gcld, in_N, left_quotient
from .lattice import DEFAULT_TIE_TOL, LatticeBasis, _exactify, _is_exact, solve
from .mdcrt import (
    CascadePlan,
    RobustResult,
    _check_moduli,
    _pairwise_cvp,
    _solve_integer,
    choose_reference,
    crt_reconstruct,
    plan_cascade,
)

SNAP_TOL = 1e-6
BOUNDARY_TOL = 1e-9


def _as_real_matrix(M) -> tuple[tuple, ...]:
    if isinstance(M, IntMatrix):
        return M.rows
    if isinstance(M, np.ndarray):
        M = M.tolist()
    return tuple(tuple(_exactify(x) for x in row) for row in M)


def _matmul(A, B) -> tuple[tuple, ...]:
    cols = list(zip(*B))
    return tuple(tuple(sum(a * b for a, b in zip(row, col)) for col in cols) for row in A)


def _matvec(A, v) -> tuple:
    return tuple(sum(a * x for a, x in zip(row, v)) for row in A)


def _is_exact_matrix(A) -> bool:
    return all(_is_exact(x) for row in A for x in row)


def _floor_coords(x: Sequence) -> tuple[int, ...]:
    """Floor of real coordinates, pulling values within tolerance of an integer onto it."""
    out = []
    for v in x:
        if isinstance(v, Fraction) or isinstance(v, int):
            out.append(math.floor(v))
            continue
        k = round(v)
        out.append(int(k) if abs(v - k) <= BOUNDARY_TOL * max(1.0, abs(v)) else math.floor(v))
    return tuple(out)


def real_remainder(m: Sequence, M, Psi: IntMatrix) -> tuple[tuple[int, ...], tuple]:
    """``(n, r)`` with ``m = M Psi n + r`` and ``r`` in F(M Psi).

    Exact when ``M`` and ``m`` are rational; otherwise coordinates within
    ``1e-9`` (relative) of an integer are treated as lying on it, so the
    half-open boundary resolves the same way as in the exact case.
    """
    B = _matmul(_as_real_matrix(M), Psi.rows)
    m = tuple(_exactify(x) for x in m)
    if len(m) != len(B):
        raise DimensionError("vector and matrix dimensions differ")
    try:
        x = solve(B, m)
    except (ZeroDivisionError, StopIteration, np.linalg.LinAlgError):
        raise SingularMatrixError("M Psi is singular") from None
    if not all(math.isfinite(float(v)) for v in x):
        raise SingularMatrixError("M Psi is singular")
    n = _floor_coords(x)
    Bn = _matvec(B, n)
    return n, tuple(a - b for a, b in zip(m, Bn))


@dataclass(frozen=True, eq=False)
class RealCongruenceSystem:
    """Integer moduli ``Psi_i`` scaled by a common real matrix ``M``."""

    Psi: tuple[IntMatrix, ...]
    M: tuple[tuple, ...]
    gcld_table: dict
    lambda_table: dict
    reference: int
    robustness_bound: float
    plan: CascadePlan
    norm: str = "l2"
    tie_tol: float = DEFAULT_TIE_TOL

    @property
    def moduli(self) -> tuple[IntMatrix, ...]:
        return self.Psi

    @property
    def lcrm(self) -> IntMatrix:
        return self.plan.lcrm

    @property
    def dim(self) -> int:
        return len(self.M)

    @property
    def exact(self) -> bool:
        return _is_exact_matrix(self.M)

    def pair_lambda(self, i: int, j: int) -> float:
        return self.lambda_table[min(i, j), max(i, j)]

    @cached_property
    def _lattices(self) -> dict:
        return {
            k: LatticeBasis(_matmul(self.M, G.rows), self.norm, self.tie_tol)
            for k, G in self.gcld_table.items()
        }

    def pair_lattice(self, i: int, j: int) -> LatticeBasis:
        return self._lattices[min(i, j), max(i, j)]

    def modulus(self, i: int) -> tuple[tuple, ...]:
        """The real modulus ``M Psi_i``."""
        return _matmul(self.M, self.Psi[i].rows)


def build_real_system(
    Psi: Sequence[IntMatrix],
    M,
    norm: str = "l2",
    reference: int | None = None,
    lcrm_basis: IntMatrix | None = None,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> RealCongruenceSystem:
    Psi = _check_moduli(Psi, min_count=2)
    L = len(Psi)
    if len(set(Psi)) != L:
        raise DuplicateModuliError("moduli must be pairwise distinct")
    Mr = _as_real_matrix(M)
    D = Psi[0].nrows
    if len(Mr) != D or any(len(row) != D for row in Mr):
        raise DimensionError("M must be D x D")
    LatticeBasis(Mr)  # raises SingularMatrixError
    gcld_table, lambda_table = {}, {}
    for i in range(L):
        for j in range(i + 1, L):
            G = gcld(Psi[i], Psi[j]).L
            gcld_table[i, j] = G
            lambda_table[i, j] = LatticeBasis(_matmul(Mr, G.rows), norm, tie_tol).minimum_distance()
    if reference is None:
        reference = choose_reference(lambda_table, L, tie_tol)
    elif not 0 <= reference < L:
        raise ValueError(f"reference index {reference} out of range")
    bound = min(lambda_table[min(reference, j), max(reference, j)] for j in range(L) if j != reference) / 4
    return RealCongruenceSystem(
        Psi, Mr, gcld_table, lambda_table, reference, bound,
        plan_cascade(Psi, lcrm_basis), norm, tie_tol,
    )


def _snap_integer(x: Sequence) -> tuple[int, ...]:
    out = []
    for v in x:
        if isinstance(v, (int, Fraction)):
            if Fraction(v).denominator != 1:
                raise IntegerSnapError(f"M^-1 v = {[str(t) for t in x]} is not an integer vector")
            out.append(int(v))
            continue
        k = round(v)
        if abs(v - k) > SNAP_TOL:
            raise IntegerSnapError(f"M^-1 v = {list(x)} is not within {SNAP_TOL} of an integer vector")
        out.append(int(k))
    return tuple(out)


def robust_reconstruct_real(system: RealCongruenceSystem, remainders, strict: bool = False) -> RobustResult:
    """Real-valued counterpart of :func:`robust_mdcrt.mdcrt.robust_reconstruct`.

    ``folded`` and ``folding_vectors`` hold the integer ``Psi_i n_i`` and
    ``n_i``; ``estimate`` is ``(1/L) sum(M Psi_i n_i + r_i)``, exact
    (Fractions) when ``M`` and the remainders are rational.
    """
    rs = [tuple(_exactify(x) for x in r) for r in remainders]
    L, l0, D = len(system.Psi), system.reference, system.dim
    if len(rs) != L or any(len(r) != D for r in rs):
        raise DimensionError(f"expected {L} remainders of length {D}")
    cvp, unique = _pairwise_cvp(system, rs, strict)
    u = []
    for c in cvp:
        if c is None:
            u.append((0,) * D)
        else:
            u.append(_snap_integer(solve(system.M, c.point)))
    zeta = crt_reconstruct(system.plan, u)
    folded = tuple(tuple(a - b for a, b in zip(zeta, uj)) for uj in u)
    folding = []
    for P, f in zip(system.Psi, folded):
        n = _solve_integer(P, f)
        folding.append(n)
    exact = system.exact and all(_is_exact(x) for r in rs for x in r)
    total = [Fraction(0) if exact else 0.0] * D
    for f, r in zip(folded, rs):
        Mf = _matvec(system.M, f)
        total = [t + a + b for t, a, b in zip(total, Mf, r)]
    estimate = tuple(t / L for t in total)
    within = range_check_real(system, estimate)
    return RobustResult(
        estimate, folded, tuple(folding),
        tuple(None if c is None else tuple(c.point) for c in cvp), tuple(unique), within, l0,
    )


def range_check_real(system: RealCongruenceSystem, m: Sequence) -> bool:
    """``floor(Psi_l0^{-1} M^{-1} m) in N(Psi_l0^{-1} lcrm(Psi))``."""
    P0 = system.Psi[system.reference]
    x = solve(system.M, [_exactify(v) for v in m])
    y = _floor_coords(solve(P0.rows, x))
    return in_N(y, left_quotient(P0, system.lcrm))


__all__ = [
    "RealCongruenceSystem",
    "build_real_system",
    "real_remainder",
    "robust_reconstruct_real",
    "range_check_real",
]
