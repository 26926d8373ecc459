"""Exact and robust multidimensional CRT over integer matrix moduli."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import gcd
from typing import Sequence

from .errors import (
    AmbiguousClosestPointError,
    DimensionError,
    DuplicateModuliError,
    InconsistentSystemError,
    NotCoprimeError,
    SingularMatrixError,
)
from .intalg import (
    IntMatrix,
    as_vector,
    determinant,
    floor_solve,
    gcld,
    in_N,
    is_unimodular,
    lcrm,
    left_quotient,
    mod_reduce,
    rational_inverse,
    same_column_lattice,
    smith_normal_form,
    unimodular_inverse,
)
from .lattice import DEFAULT_TIE_TOL, CvpResult, LatticeBasis


def _check_moduli(moduli: Sequence[IntMatrix], min_count: int = 1) -> tuple[IntMatrix, ...]:
    moduli = tuple(m if isinstance(m, IntMatrix) else IntMatrix(m) for m in moduli)
    if len(moduli) < min_count:
        raise ValueError(f"need at least {min_count} moduli, got {len(moduli)}")
    D = moduli[0].nrows
    for M in moduli:
        if not M.is_square or M.nrows != D:
            raise DimensionError("moduli must all be D x D")
        if determinant(M) == 0:
            raise SingularMatrixError(f"modulus {M.tolist()} is singular")
    return moduli


def _solve_integer(M: IntMatrix, v: Sequence[int]) -> tuple[int, ...] | None:
    q = left_quotient(M, IntMatrix([[x] for x in v]))
    return None if q is None else q.col(0)


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


# --------------------------------------------------------------------------
# Cascaded MD-CRT


@dataclass(frozen=True)
class CascadeStage:
    """Merge step ``m = <m_prev + R P G^{-1} (r - m_prev)>_{R_next}``."""

    R: IntMatrix
    modulus: IntMatrix
    G: IntMatrix
    P: IntMatrix
    R_next: IntMatrix


@dataclass(frozen=True)
class CascadePlan:
    moduli: tuple[IntMatrix, ...]
    stages: tuple[CascadeStage, ...]
    lcrm: IntMatrix


def plan_cascade(moduli: Sequence[IntMatrix], lcrm_basis: IntMatrix | None = None) -> CascadePlan:
    """Precompute the lcrm chain and Bezout matrices for the cascade.

    ``lcrm_basis`` fixes which basis of the final lcrm lattice is used; the
    reconstruction range N(R) depends on that choice.  It must generate the
    same lattice as the computed lcrm.
    """
    moduli = _check_moduli(moduli)
    stages = []
    R = moduli[0]
    for M in moduli[1:]:
        cert = gcld(R, M)
        R_next = lcrm(R, M)
        stages.append(CascadeStage(R, M, cert.L, cert.P, R_next))
        R = R_next
    if lcrm_basis is not None:
        lcrm_basis = lcrm_basis if isinstance(lcrm_basis, IntMatrix) else IntMatrix(lcrm_basis)
        if not same_column_lattice(lcrm_basis, R):
            raise ValueError("supplied lcrm basis does not generate the lcrm lattice of the moduli")
        if stages:
            last = stages[-1]
            stages[-1] = CascadeStage(last.R, last.modulus, last.G, last.P, lcrm_basis)
        R = lcrm_basis
    return CascadePlan(moduli, tuple(stages), R)


def crt_reconstruct(system, remainders: Sequence[Sequence[int]], trace: bool = False):
    """Unique solution in N(R) of ``m = r_i mod M_i``, via the cascade.

    ``system`` may be a :class:`CongruenceSystem`, a :class:`CascadePlan`
    or a plain list of moduli.  With ``trace=True`` the intermediate
    solutions ``m_1, m_2, ...`` are returned as well.

    Raises :class:`InconsistentSystemError` when no solution exists.
    """
    plan = system if isinstance(system, CascadePlan) else (
        system.plan if isinstance(system, CongruenceSystem) else plan_cascade(system))
    rs = [as_vector(r) for r in remainders]
    if len(rs) != len(plan.moduli):
        raise DimensionError(f"expected {len(plan.moduli)} remainders, got {len(rs)}")
    m = mod_reduce(rs[0], plan.lcrm)[1] if not plan.stages else rs[0]
    steps = []
    for stage, r in zip(plan.stages, rs[1:]):
        t = _solve_integer(stage.G, _sub(r, m))
        if t is None:
            raise InconsistentSystemError(
                "congruences are inconsistent: G^{-1}(r - m) is not an integer vector")
        m = mod_reduce(_add(m, stage.R @ (stage.P @ t)), stage.R_next)[1]
        steps.append(m)
    return (m, steps) if trace else m


def crt_closed_form_coprime(moduli: Sequence[IntMatrix], remainders: Sequence[Sequence[int]]):
    """Closed-form CRT for pairwise commuting, coprime moduli.

    ``m = <sum_i W_i What_i r_i>_R`` with ``W_i`` the product of the other
    moduli, ``W_i What_i + M_i Q_i = I`` and ``R`` the product of all moduli.
    """
    moduli = _check_moduli(moduli)
    rs = [as_vector(r) for r in remainders]
    for i, A in enumerate(moduli):
        for B in moduli[i + 1:]:
            if A @ B != B @ A:
                raise NotCoprimeError("moduli are not commutative-coprime: a pair does not commute")
            if not is_unimodular(gcld(A, B).L):
                raise NotCoprimeError("moduli are not commutative-coprime: a pair is not coprime")
    D = moduli[0].nrows
    R = IntMatrix.identity(D)
    for M in moduli:
        R = R @ M
    total = (0,) * D
    for i, (M, r) in enumerate(zip(moduli, rs)):
        W = IntMatrix.identity(D)
        for j, other in enumerate(moduli):
            if j != i:
                W = W @ other
        cert = gcld(W, M)
        What = cert.P @ unimodular_inverse(cert.L)
        total = _add(total, W @ (What @ r))
    return mod_reduce(total, R)[1]


# --------------------------------------------------------------------------
# Robust MD-CRT


@dataclass(frozen=True, eq=False)
class CongruenceSystem:
    """Moduli plus everything the robust reconstruction precomputes.

    Indices are 0-based.  ``gcld_table`` and ``lambda_table`` are keyed by
    ``(i, j)`` with ``i < j``; use :meth:`pair_gcld` / :meth:`pair_lambda`
    for symmetric access.
    """

    moduli: tuple[IntMatrix, ...]
    gcld_table: dict
    lambda_table: dict
    reference: int
    robustness_bound: float
    plan: CascadePlan
    norm: str = "l2"
    tie_tol: float = DEFAULT_TIE_TOL

    @property
    def lcrm(self) -> IntMatrix:
        return self.plan.lcrm

    @property
    def dim(self) -> int:
        return self.moduli[0].nrows

    def pair_gcld(self, i: int, j: int) -> IntMatrix:
        return self.gcld_table[min(i, j), max(i, j)]

    def pair_lambda(self, i: int, j: int) -> float:
        return self.lambda_table[min(i, j), max(i, j)]

    @cached_property
    def _lattices(self) -> dict:
        return {k: LatticeBasis(G, self.norm, self.tie_tol) for k, G in self.gcld_table.items()}

    def pair_lattice(self, i: int, j: int) -> LatticeBasis:
        return self._lattices[min(i, j), max(i, j)]


def choose_reference(lambda_table: dict, L: int, tie_tol: float = DEFAULT_TIE_TOL) -> int:
    """Index maximising ``min_{j != i} lambda_ij``; the smallest index wins ties.

    Values within ``tie_tol`` (relative) of the maximum count as tied, so a
    scaled real system picks the same reference as its integer original.
    """
    worst = [min(lambda_table[min(i, j), max(i, j)] for j in range(L) if j != i) for i in range(L)]
    best = max(worst)
    return next(i for i in range(L) if worst[i] >= best - tie_tol * best)


def build_system(
    moduli: Sequence[IntMatrix],
    norm: str = "l2",
    reference: int | None = None,
    lcrm_basis: IntMatrix | None = None,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> CongruenceSystem:
    """Precompute pairwise gclds, their minimum distances and the reference.

    ``reference`` overrides the optimal choice (useful for comparisons);
    ``lcrm_basis`` pins the basis of the lcrm lattice that defines the
    reconstruction range.
    """
    moduli = _check_moduli(moduli, min_count=2)
    L = len(moduli)
    if len(set(moduli)) != L:
        raise DuplicateModuliError("moduli must be pairwise distinct")
    gcld_table, lambda_table = {}, {}
    for i in range(L):
        for j in range(i + 1, L):
            G = gcld(moduli[i], moduli[j]).L
            gcld_table[i, j] = G
            lambda_table[i, j] = LatticeBasis(G, norm, tie_tol).minimum_distance()
    if reference is None:
        reference = choose_reference(lambda_table, L, tie_tol)
    elif not 0 <= reference < L:
        raise ValueError(f"reference index {reference} out of range")
    bound = min(lambda_table[min(reference, j), max(reference, j)] for j in range(L) if j != reference) / 4
    return CongruenceSystem(
        moduli, gcld_table, lambda_table, reference, bound,
        plan_cascade(moduli, lcrm_basis), norm, tie_tol,
    )


@dataclass(frozen=True)
class RobustResult:
    estimate: tuple  # Fractions
    folded: tuple  # M_i n_i
    folding_vectors: tuple
    cvp_points: tuple  # v_j, None at the reference
    cvp_unique: tuple
    within_range: bool
    reference: int

    @property
    def estimate_float(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.estimate)

    @property
    def rounded(self) -> tuple[int, ...]:
        return tuple(round(x) for x in self.estimate)

    @property
    def ambiguous(self) -> bool:
        return not all(self.cvp_unique)


def _pairwise_cvp(system: CongruenceSystem, remainders, strict: bool):
    l0 = system.reference
    points, unique = [], []
    for j, r in enumerate(remainders):
        if j == l0:
            points.append(None)
            unique.append(True)
            continue
        res = system.pair_lattice(l0, j).closest_point(_sub(r, remainders[l0]))
        if strict and not res.unique:
            raise AmbiguousClosestPointError(
                f"closest lattice point for pair ({l0}, {j}) is not unique")
        points.append(res)
        unique.append(res.unique)
    return points, unique


def robust_reconstruct(system: CongruenceSystem, remainders, strict: bool = False) -> RobustResult:
    """Recover ``{M_i n_i}`` from erroneous remainders and average.

    For every non-reference ``j`` the closest point ``v_j`` of
    L(gcld(M_l0, M_j)) to ``r_j - r_l0`` estimates the remainder
    difference; the cascade then solves ``z = 0 mod M_l0, z = v_j mod M_j``
    for ``z = M_l0 n_l0`` and ``M_j n_j = z - v_j``.

    A CVP tie is reported through ``cvp_unique`` (and raised when
    ``strict``).  An unsolvable congruence system raises
    :class:`InconsistentSystemError`.
    """
    rs = [as_vector(r) for r in remainders]
    L, l0 = len(system.moduli), system.reference
    if len(rs) != L:
        raise DimensionError(f"expected {L} remainders, got {len(rs)}")
    cvp, unique = _pairwise_cvp(system, rs, strict)
    v = [(0,) * system.dim if c is None else tuple(c.point) for c in cvp]
    zeta = crt_reconstruct(system.plan, v)
    folded = tuple(_sub(zeta, vj) for vj in v)
    folding = []
    for M, f in zip(system.moduli, folded):
        n = _solve_integer(M, f)
        if n is None:  # cannot happen when the cascade succeeded
            raise InconsistentSystemError("reconstructed multiple is not in the modulus lattice")
        folding.append(n)
    estimate = tuple(
        sum(Fraction(f[k] + r[k]) for f, r in zip(folded, rs)) / L for k in range(system.dim)
    )
    within = range_check(system, tuple(round(x) for x in estimate))
    return RobustResult(
        estimate, folded, tuple(folding),
        tuple(None if c is None else tuple(c.point) for c in cvp), tuple(unique), within, l0,
    )


def check_condition_sn(system: CongruenceSystem, errors) -> bool:
    """True iff 0 is the unique closest point of L(M_{l0 j}) to ``dr_j - dr_l0`` for all j."""
    l0 = system.reference
    errs = [tuple(e) for e in errors]
    for j in range(len(system.moduli)):
        if j == l0:
            continue
        res = system.pair_lattice(l0, j).closest_point(_sub(errs[j], errs[l0]))
        if not res.unique or any(res.point):
            return False
    return True


def range_check(system: CongruenceSystem, m) -> bool:
    """Exact test ``floor(M_l0^{-1} m) in N(M_l0^{-1} R)``."""
    Ml0 = system.moduli[system.reference]
    K = left_quotient(Ml0, system.lcrm)
    return in_N(floor_solve(Ml0, m), K)


def detect_redundant(moduli: Sequence[IntMatrix]) -> list[tuple[int, tuple[int, int]]]:
    """Moduli ``M_b`` that left-divide some other ``M_a`` (``M_a = M_b P``).

    Returns ``(b, (a, b))`` pairs, one per redundant index.  When two moduli
    generate the same lattice only the later one is flagged, so dropping
    every flagged modulus keeps the lcrm lattice.
    """
    moduli = _check_moduli(moduli, min_count=2)
    out = []
    for b, Mb in enumerate(moduli):
        for a, Ma in enumerate(moduli):
            if a == b or left_quotient(Mb, Ma) is None:
                continue
            if left_quotient(Ma, Mb) is not None and b < a:
                continue
            out.append((b, (a, b)))
            break
    return out


def per_modulus_bounds(system: CongruenceSystem) -> list[float]:
    """Individual remainder error bounds.

    The reference gets ``min_j lambda_{l0 j} / 4`` (a strict bound); every
    other modulus ``i`` gets ``lambda_{l0 i} / 2 - min_j lambda_{l0 j} / 4``.
    """
    l0 = system.reference
    uniform = system.robustness_bound
    return [
        uniform if i == l0 else system.pair_lambda(l0, i) / 2 - uniform
        for i in range(len(system.moduli))
    ]


def _unimodular_to_e1(v: Sequence[int]) -> IntMatrix:
    """Unimodular ``U`` with ``U v = e_1`` for a primitive integer vector ``v``."""
    dec = smith_normal_form(IntMatrix([[x] for x in v]))
    if dec.S[0, 0] != 1:
        raise ValueError("vector is not primitive")
    U = dec.U
    if dec.V[0, 0] == -1:
        U = IntMatrix([[-x for x in U.rows[0]]] + [list(r) for r in U.rows[1:]])
    return U


def centered_lcrm_basis(moduli: Sequence[IntMatrix], point: Sequence[int], reference: int) -> IntMatrix:
    """A basis ``R'`` of the lcrm lattice for which ``point`` passes :func:`range_check`.

    With ``K = M_l0^{-1} R`` and ``n0 = floor(M_l0^{-1} point)`` we need
    ``K'^{-1} n0`` in ``[0, 1)^D``.  Writing ``K^{-1} n0 = t v0`` with ``v0``
    primitive, a unimodular change of basis sends ``v0`` to a primitive
    ``v`` whose scaled image ``t v`` sits near the middle of the cube.  No
    basis works when ``t >= 1``; that raises ``ValueError``.
    """
    moduli = _check_moduli(moduli)
    R = plan_cascade(moduli).lcrm
    Ml0 = moduli[reference]
    n0 = floor_solve(Ml0, point)
    K = left_quotient(Ml0, R)
    y = [Fraction(sum(a * b for a, b in zip(row, n0))) for row in rational_inverse(K)]
    D = len(y)
    if not any(y):
        return R
    den = 1
    for x in y:
        den = den * x.denominator // gcd(den, x.denominator)
    ints = [int(x * den) for x in y]
    g = 0
    for x in ints:
        g = gcd(g, x)
    v0 = [x // g for x in ints]
    t = Fraction(g, den)
    if t >= 1:
        raise ValueError("no lcrm basis puts this point in the reconstruction range")
    c = int(Fraction(1, 2) / t)
    v = [c + 1 if k == 1 else c for k in range(D)] if t < Fraction(1, 2) and D > 1 else [1] + [0] * (D - 1)
    # W maps v to v0, so (K W)^{-1} n0 = W^{-1} (t v0) = t v
    W = unimodular_inverse(_unimodular_to_e1(v0)) @ _unimodular_to_e1(v)
    Rc = R @ W
    assert in_N(n0, left_quotient(Ml0, Rc))
    return Rc
