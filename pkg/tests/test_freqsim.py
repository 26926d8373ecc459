import csv
import io
import json
import math
import random

import numpy as np
import pytest

from cases import (
    FREQ_A, FREQ_B, GAMMA_1, GAMMA_2, GCLD_SMALL, STRATEGY_DENSE, STRATEGY_LCRM, STRATEGY_SPARSE,
    SWEEP_LCRM, SWEEP_M, SWEEP_MODULI, random_point_in_range, strategy_moduli,
)
from robust_mdcrt.freqsim import (
    CSV_HEADER,
    DftPlan,
    ExperimentConfig,
    detect_remainder,
    md_dft,
    md_dft_direct,
    run_sweep,
    run_trial,
    trial_rng,
)
from robust_mdcrt.intalg import IntMatrix, determinant, mod_reduce
from robust_mdcrt.lattice import coset_representatives
from robust_mdcrt.mdcrt import range_check, robust_reconstruct
from robust_mdcrt.serialize import matrix_to_json

SMALL = [
    IntMatrix([[5, 2], [1, 3]]),
    IntMatrix([[4, 0], [0, 6]]),
    IntMatrix([[-3, 7], [2, 5]]),
    IntMatrix([[12, 5], [3, 9]]),
    IntMatrix([[2, 1, 0], [0, 3, 1], [1, 0, 4]]),
]


@pytest.fixture(scope="module")
def small_config():
    return ExperimentConfig([GCLD_SMALL @ GAMMA_1, GCLD_SMALL @ GAMMA_2], FREQ_A, [20.0],
                            trials=100, lcrm_basis="centered")


# -- MD DFT -------------------------------------------------------------------


@pytest.mark.parametrize("M", SMALL)
def test_fast_dft_matches_direct(M):
    rng = np.random.default_rng(0)
    d = abs(determinant(M))
    x = rng.normal(size=d) + 1j * rng.normal(size=d)
    assert np.allclose(md_dft(x, M), md_dft_direct(x, M), atol=1e-9)


@pytest.mark.parametrize("M", SMALL)
def test_pure_tone_peaks_at_remainder(M):
    plan = DftPlan(M)
    f = tuple(range(17, 17 + M.nrows))
    X = plan.transform(plan.exponential(f))
    r = mod_reduce(f, M)[1]
    d = abs(determinant(M))
    k = plan.bin_of(r)
    assert abs(X[k]) == pytest.approx(d, rel=1e-6)
    others = np.delete(np.abs(X), k)
    assert others.max(initial=0) < 1e-6 * d
    assert detect_remainder(X, M, plan) == r


def test_phase_matches_definition():
    M = IntMatrix([[12, 5], [3, 9]])
    plan = DftPlan(M)
    f = (31, -7)
    Minv_T = np.linalg.inv(np.array(M.tolist(), dtype=float)).T
    direct = np.exp(2j * np.pi * (np.array(f) @ Minv_T @ plan.samples.T))
    assert np.allclose(plan.exponential(f), direct, atol=1e-9)
    assert [tuple(n) for n in plan.samples] == coset_representatives(M.T)
    assert [tuple(k) for k in plan.bins] == coset_representatives(M)


def test_constant_signal():
    M = IntMatrix([[5, 2], [1, 3]])
    X = md_dft(np.ones(13), M)
    assert detect_remainder(X, M) == (0, 0)
    assert abs(X[0]) == pytest.approx(13)


@pytest.mark.parametrize("M", SMALL)
def test_parseval(M):
    rng = np.random.default_rng(1)
    d = abs(determinant(M))
    x = rng.normal(size=d) + 1j * rng.normal(size=d)
    X = md_dft(x, M)
    assert np.sum(np.abs(x) ** 2) == pytest.approx(np.sum(np.abs(X) ** 2) / d, rel=1e-6)


def test_sample_count_checked():
    with pytest.raises(ValueError):
        md_dft(np.ones(5), IntMatrix([[5, 2], [1, 3]]))


def test_detection_tiebreak_is_lexicographic():
    M = IntMatrix.diag(2, 3)
    X = np.zeros(6)
    X[[2, 4]] = 1.0
    assert detect_remainder(X, M) == coset_representatives(M)[2]


# -- configuration ----------------------------------------------------------------


def test_config_rejects_out_of_range_frequency():
    with pytest.raises(ValueError):
        ExperimentConfig([GCLD_SMALL @ GAMMA_1, GCLD_SMALL @ GAMMA_2], FREQ_A, [0.0])
    with pytest.raises(ValueError):
        ExperimentConfig(SWEEP_MODULI, SWEEP_M, [0.0], mode="bogus", lcrm_basis=SWEEP_LCRM)


def test_config_from_json(tmp_path):
    doc = {
        "moduli": [matrix_to_json(GCLD_SMALL @ GAMMA_1), matrix_to_json(GCLD_SMALL @ GAMMA_2)],
        "true_frequency": {"rows": 2, "cols": 1, "data": [["443"], ["388"]]},
        "lcrm_basis": "centered",
        "tau_grid": [0, 2],
        "trials": 3,
        "rng_seed": "18446744073709551615",
    }
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    cfg = ExperimentConfig.from_json(p)
    assert cfg.true_frequency == FREQ_A
    assert cfg.mode == "tau" and cfg.grid == (0.0, 2.0) and cfg.rng_seed == 2**64 - 1


# -- trials and sweeps --------------------------------------------------------------


def test_detected_remainders_match_oracle(small_config):
    rng = trial_rng(0, 0, 0)
    rec = run_trial(small_config, math.inf, rng)
    assert list(rec.remainders) == [mod_reduce(FREQ_A, M)[1] for M in small_config.moduli]
    assert rec.detected and rec.rounded == FREQ_A and rec.error == 0


def test_high_snr_detects_every_remainder(small_config):
    res = run_sweep(small_config, keep_records=True)
    truth = [mod_reduce(FREQ_A, M)[1] for M in small_config.moduli]
    assert all(list(r.remainders) == truth for r in res.records[0])
    assert res.points[0].detection_probability == 1.0


def test_noiseless_end_to_end(small_config):
    S = small_config.system
    rng = random.Random(6)
    for _ in range(100):
        f = random_point_in_range(rng, S)
        assert range_check(S, f)
        rem = [detect_remainder(p.transform(p.exponential(f)), p.M, p) for p in small_config.dft_plans]
        assert robust_reconstruct(S, rem).rounded == f


def test_single_trial_sweep_reproduces_trial(small_config):
    cfg = small_config.replace(grid=[-27.0], trials=1, rng_seed=99)
    res = run_sweep(cfg, keep_records=True)
    rec = run_trial(cfg, -27.0, trial_rng(99, 0, 0))
    assert res.records[0][0] == rec
    assert res.points[0].mean_error == rec.error


def test_sweep_is_deterministic(small_config):
    cfg = small_config.replace(grid=[-30.0, -26.0], trials=20, rng_seed=5)
    a, b = run_sweep(cfg), run_sweep(cfg)
    assert a == b and a.to_csv() == b.to_csv()
    assert run_sweep(cfg.replace(rng_seed=6)) != a


def test_csv_layout(small_config):
    res = run_sweep(small_config.replace(grid=[-28.0, 10.0], trials=5))
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 3 and rows[2][3] == "1.000000" and rows[2][4] == "5"
    assert all(0 <= float(r[3]) <= 1 for r in rows[1:])


def test_tau_zero_is_exact():
    cfg = ExperimentConfig(SWEEP_MODULI, SWEEP_M, [0.0], mode="tau", trials=5, lcrm_basis=SWEEP_LCRM)
    p = run_sweep(cfg).points[0]
    assert p.mean_error == 0 and p.detection_probability == 1


def test_tau_mode_error_below_radius():
    cfg = ExperimentConfig(SWEEP_MODULI, SWEEP_M, [10.0], mode="tau", trials=100, lcrm_basis=SWEEP_LCRM)
    res = run_sweep(cfg, keep_records=True)
    assert res.points[0].mean_error <= 10
    for r in res.records[0]:
        assert r.error <= r.max_remainder_error + 1e-9


def test_strategies_share_lcrm():
    for s in (STRATEGY_DENSE, STRATEGY_SPARSE):
        cfg = ExperimentConfig(strategy_moduli(s), FREQ_B, [0.0], lcrm_basis=STRATEGY_LCRM)
        assert abs(determinant(cfg.system.lcrm)) == 331200


def test_detection_improves_with_snr(small_config):
    cfg = small_config.replace(grid=[-34.0, -31.0, -28.0, -25.0], trials=500, rng_seed=3)
    p = run_sweep(cfg).column("detection_probability")
    assert all(b >= a - 0.02 for a, b in zip(p, p[1:]))
    assert p[-1] > p[0]
