"""Monte-Carlo frequency estimation from several sub-Nyquist sampling lattices.

A complex exponential with integer frequency ``f`` is sampled on the
lattice generated by ``M_i^{-T}``.  The MD DFT over N(M_i^T) peaks at the
remainder ``<f>_{M_i}``; the detected peaks are fed to the robust CRT.

Two experiment modes:

``snr_db``  noisy samples, remainders detected from the spectrum
``tau``     exact remainders perturbed directly by errors of norm <= tau
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import MDCRTError
from .intalg import IntMatrix, adjugate, as_vector, determinant, mod_reduce, smith_normal_form
from .lattice import DEFAULT_COSET_CAP, NORMS, coset_array
from .mdcrt import CongruenceSystem, build_system, centered_lcrm_basis, range_check, robust_reconstruct

MODES = ("snr_db", "tau")
CSV_HEADER = ("grid_value", "mean_error", "mean_relative_error", "detection_probability", "trials")


# --------------------------------------------------------------------------
# MD DFT over N(M^T)


def _int_array(M: IntMatrix) -> np.ndarray:
    return np.array(M.tolist(), dtype=object)


class DftPlan:
    """Index bookkeeping for the MD DFT of samples on N(M^T) into bins on N(M).

    With ``A = M^T`` and Smith form ``U A V = diag(delta)`` the kernel
    ``k^T A^{-1} n`` equals ``sum_i (V^T k)_i (U n)_i / delta_i``, so the
    transform is an ordinary ``fftn`` of shape ``delta`` after scattering
    sample ``n`` to ``U n mod delta`` and reading bin ``k`` at
    ``V^T k mod delta``.
    """

    def __init__(self, M: IntMatrix, cap: int = DEFAULT_COSET_CAP):
        self.M = M
        self.det = abs(determinant(M))
        A = M.T
        self.samples = coset_array(A, cap)  # n in N(M^T)
        self.bins = coset_array(M, cap)  # k in N(M)
        snf = smith_normal_form(A)
        self.shape = tuple(snf.invariant_factors)
        delta = np.array(self.shape, dtype=object)
        self._V = snf.V
        self.scatter = tuple(
            np.asarray((self.samples.astype(object) @ _int_array(snf.U).T) % delta, dtype=np.int64).T)
        self.gather = tuple(
            np.asarray((self.bins.astype(object) @ _int_array(snf.V)) % delta, dtype=np.int64).T)

    @cached_property
    def _bin_index(self) -> dict:
        return {tuple(int(x) for x in k): i for i, k in enumerate(self.bins)}

    def phase_fraction(self, f: Sequence[int]) -> np.ndarray:
        """``f^T M^{-T} n mod 1`` for every sample ``n``, computed exactly."""
        Vf = self._V.T @ as_vector(f)
        acc = np.zeros(len(self.samples))
        for i, d in enumerate(self.shape):
            if d == 1:
                continue
            num = (self.scatter[i].astype(object) * (Vf[i] % d)) % d
            acc = acc + num.astype(np.float64) / d
        return acc % 1.0

    def exponential(self, f: Sequence[int]) -> np.ndarray:
        return np.exp(2j * np.pi * self.phase_fraction(f))

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.det,):
            raise ValueError(f"expected {self.det} samples, got shape {x.shape}")
        grid = np.zeros(self.shape, dtype=complex)
        grid[self.scatter] = x
        return np.fft.fftn(grid)[self.gather]

    def bin_of(self, k: Sequence[int]) -> int:
        return self._bin_index[tuple(k)]


def md_dft(samples: np.ndarray, M: IntMatrix, plan: DftPlan | None = None) -> np.ndarray:
    """``X[k] = sum_n x[n] exp(-j 2 pi k^T M^{-T} n)`` for k in N(M).

    Samples follow the lexicographic order of N(M^T); bins follow the
    lexicographic order of N(M).  Computed through an FFT (see
    :class:`DftPlan`); :func:`md_dft_direct` is the plain summation.
    """
    plan = plan or DftPlan(M)
    return plan.transform(samples)


def md_dft_direct(samples: np.ndarray, M: IntMatrix, chunk: int = 256) -> np.ndarray:
    """Direct O(|det M|^2) evaluation of the MD DFT, exact phases."""
    n = coset_array(M.T)
    k = coset_array(M)
    d = determinant(M)
    ad = abs(d)
    x = np.asarray(samples, dtype=complex)
    if x.shape != (ad,):
        raise ValueError(f"expected {ad} samples, got shape {x.shape}")
    # M^{-T} = adj(M^T) / det; phases k^T adj(M^T) n mod |det|
    adjT = _int_array(adjugate(M.T)) * (1 if d > 0 else -1)
    KA = (k.astype(object) @ adjT) % ad
    nT = n.astype(object).T
    out = np.empty(ad, dtype=complex)
    for s in range(0, ad, chunk):
        ph = np.asarray((KA[s:s + chunk] @ nT) % ad, dtype=np.float64) / ad
        out[s:s + chunk] = np.exp(-2j * np.pi * ph) @ x
    return out


def detect_remainder(spectrum: np.ndarray, M: IntMatrix, plan: DftPlan | None = None) -> tuple[int, ...]:
    """Coset representative of the largest-magnitude bin; first in lexicographic order on ties."""
    bins = plan.bins if plan is not None else coset_array(M)
    i = int(np.argmax(np.abs(spectrum)))
    return tuple(int(x) for x in bins[i])


# --------------------------------------------------------------------------
# Experiment configuration


def _as_matrix(x) -> IntMatrix:
    return x if isinstance(x, IntMatrix) else IntMatrix(x)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: moduli, true frequency, grid of SNRs (dB) or error radii.

    ``lcrm_basis`` may be a matrix or ``"centered"``, which picks a basis of
    the lcrm lattice with the true frequency inside the reconstruction
    range.  The frequency is checked against that range at construction.
    """

    moduli: tuple
    true_frequency: tuple
    grid: tuple
    mode: str = "snr_db"
    trials: int = 200
    rng_seed: int = 0
    norm: str = "l2"
    reference: int | None = None
    lcrm_basis: object = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "moduli", tuple(_as_matrix(M) for M in self.moduli))
        object.__setattr__(self, "true_frequency", as_vector(self.true_frequency))
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must fit in 64 bits")
        if self.mode == "tau" and any(g < 0 for g in self.grid):
            raise ValueError("error radii must be non-negative")
        if self.lcrm_basis is not None and not isinstance(self.lcrm_basis, str):
            object.__setattr__(self, "lcrm_basis", _as_matrix(self.lcrm_basis))
        elif isinstance(self.lcrm_basis, str) and self.lcrm_basis != "centered":
            raise ValueError("lcrm_basis must be a matrix or 'centered'")
        if len(self.true_frequency) != self.moduli[0].nrows:
            raise ValueError("frequency dimension does not match the moduli")
        if not range_check(self.system, self.true_frequency):
            raise ValueError(
                f"frequency {self.true_frequency} is outside the reconstruction range of the system")

    @cached_property
    def system(self) -> CongruenceSystem:
        basis = self.lcrm_basis
        if basis == "centered":
            ref = self.reference
            if ref is None:
                ref = build_system(self.moduli, self.norm).reference
            basis = centered_lcrm_basis(self.moduli, self.true_frequency, ref)
        return build_system(self.moduli, self.norm, self.reference, basis)

    @cached_property
    def dft_plans(self) -> tuple[DftPlan, ...]:
        return tuple(DftPlan(M) for M in self.moduli)

    @cached_property
    def clean_samples(self) -> tuple[np.ndarray, ...]:
        return tuple(p.exponential(self.true_frequency) for p in self.dft_plans)

    @cached_property
    def remainders(self) -> tuple[tuple[int, ...], ...]:
        return tuple(mod_reduce(self.true_frequency, M)[1] for M in self.moduli)

    def replace(self, **changes) -> ExperimentConfig:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return ExperimentConfig(**d)

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        from .serialize import SchemaError, parse_matrix, parse_vector

        if not isinstance(d, dict):
            raise SchemaError("config must be a JSON object")

        d = dict(d)
        if "snr_db_grid" in d:
            d.setdefault("mode", "snr_db")
            d["grid"] = d.pop("snr_db_grid")
        elif "tau_grid" in d:
            d.setdefault("mode", "tau")
            d["grid"] = d.pop("tau_grid")
        d["moduli"] = [parse_matrix(M) for M in d["moduli"]]
        d["true_frequency"] = parse_vector(d["true_frequency"])
        d["grid"] = [float(g) for g in d["grid"]]
        if isinstance(d.get("lcrm_basis"), (dict, list)):
            d["lcrm_basis"] = parse_matrix(d["lcrm_basis"])
        if "rng_seed" in d:
            d["rng_seed"] = int(d["rng_seed"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SchemaError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> ExperimentConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# --------------------------------------------------------------------------
# Trials


@dataclass(frozen=True)
class TrialRecord:
    grid_value: float
    remainders: tuple  # erroneous or detected remainders fed to the CRT
    estimate: tuple | None  # real estimate m~, None when reconstruction failed
    rounded: tuple | None
    error: float  # ||f - m~||_2
    relative_error: float  # ||f - f~||_2 / ||f||_2
    detected: bool  # f~ == f
    max_remainder_error: float | None = None  # tau mode: max ||dr_i||_2 after rounding
    failure: str | None = None


def trial_rng(seed: int, grid_index: int, trial_index: int) -> np.random.Generator:
    """Counter-based generator keyed on (seed, grid index, trial index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, grid_index, trial_index])))


def _ball_uniform(rng: np.random.Generator, D: int, radius: float) -> np.ndarray:
    if radius == 0:
        return np.zeros(D)
    g = rng.standard_normal(D)
    nrm = np.linalg.norm(g)
    if nrm == 0:
        return np.zeros(D)
    return g / nrm * radius * rng.random() ** (1.0 / D)


def noisy_remainders(config: ExperimentConfig, snr_db: float, rng: np.random.Generator) -> list:
    """Detect remainders from noisy samples; noise variance per real component is sigma^2."""
    sigma = math.sqrt(10 ** (-snr_db / 10) / 2) if math.isfinite(snr_db) else 0.0
    out = []
    for plan, clean in zip(config.dft_plans, config.clean_samples):
        x = clean
        if sigma > 0:
            noise = rng.standard_normal((2, len(clean))) * sigma
            x = clean + noise[0] + 1j * noise[1]
        out.append(detect_remainder(plan.transform(x), plan.M, plan))
    return out


def perturbed_remainders(config: ExperimentConfig, tau: float, rng: np.random.Generator):
    """Exact remainders plus integer errors drawn in the tau-ball, wrapped back into N(M_i).

    Returns the wrapped remainders and the largest post-rounding error norm.
    """
    D = len(config.true_frequency)
    out, worst = [], 0.0
    for M, r in zip(config.moduli, config.remainders):
        dr = tuple(int(x) for x in np.rint(_ball_uniform(rng, D, tau)))
        worst = max(worst, math.sqrt(sum(x * x for x in dr)))
        out.append(mod_reduce(tuple(a + b for a, b in zip(r, dr)), M)[1])
    return out, worst


def run_trial(config: ExperimentConfig, grid_value: float, rng) -> TrialRecord:
    """One draw at ``grid_value``: produce remainders, reconstruct, score."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(rng)))
    f = config.true_frequency
    fnorm = math.sqrt(sum(x * x for x in f))
    worst = None
    if config.mode == "snr_db":
        rem = noisy_remainders(config, grid_value, rng)
    else:
        rem, worst = perturbed_remainders(config, grid_value, rng)
    try:
        res = robust_reconstruct(config.system, rem)
    except MDCRTError as exc:
        return TrialRecord(grid_value, tuple(rem), None, None, fnorm, 1.0 if fnorm else 0.0, False,
                           worst, exc.code)
    est = res.estimate_float
    rounded = res.rounded
    err = math.sqrt(sum(float(e - a) ** 2 for e, a in zip(res.estimate, f)))
    rel = math.sqrt(sum((a - b) ** 2 for a, b in zip(rounded, f))) / fnorm if fnorm else float(rounded != f)
    return TrialRecord(grid_value, tuple(rem), est, rounded, err, rel, rounded == f, worst)


@dataclass(frozen=True)
class SweepPoint:
    grid_value: float
    mean_error: float
    mean_relative_error: float
    detection_probability: float
    trials: int


@dataclass(frozen=True)
class SweepResult:
    mode: str
    points: tuple[SweepPoint, ...]
    records: tuple[tuple[TrialRecord, ...], ...] = field(default=(), repr=False, compare=False)

    def column(self, name: str) -> list:
        return [getattr(p, name) for p in self.points]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in self.points:
            w.writerow([f"{p.grid_value:.6f}", f"{p.mean_error:.6f}", f"{p.mean_relative_error:.6f}",
                        f"{p.detection_probability:.6f}", p.trials])
        return buf.getvalue()


def run_sweep(config: ExperimentConfig, keep_records: bool = False) -> SweepResult:
    """All grid points, ``config.trials`` trials each, seeded per (grid, trial) index."""
    points, records = [], []
    for g, value in enumerate(config.grid):
        recs = [run_trial(config, value, trial_rng(config.rng_seed, g, t)) for t in range(config.trials)]
        n = len(recs)
        # fixed trial order keeps the float sums bit-reproducible
        points.append(SweepPoint(
            value,
            math.fsum(r.error for r in recs) / n,
            math.fsum(r.relative_error for r in recs) / n,
            sum(r.detected for r in recs) / n,
            n,
        ))
        if keep_records:
            records.append(tuple(recs))
    return SweepResult(config.mode, tuple(points), tuple(records))


__all__ = [
    "CSV_HEADER",
    "DftPlan",
    "ExperimentConfig",
    "SweepPoint",
    "SweepResult",
    "TrialRecord",
    "detect_remainder",
    "md_dft",
    "md_dft_direct",
    "run_sweep",
    "run_trial",
    "trial_rng",
]
