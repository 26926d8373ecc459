import csv
import io
import json
from pathlib import Path

import pytest

from cases import EX_LCRM, EX_MODULI, EX_NOISY, GAMMA_1, GAMMA_2, GCLD_SMALL, FREQ_A
from robust_mdcrt.cli import main
from robust_mdcrt.intalg import IntMatrix, determinant, mod_reduce
from robust_mdcrt.serialize import matrix_to_json, parse_matrix, parse_real_vector, parse_vector, vector_to_json

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, command, doc, *extra):
    code, out, err = run(capsys, command, json.dumps(doc), *extra)
    assert code == 0, err
    return json.loads(out)


def test_smith_identity(capsys):
    out = run_json(capsys, "smith", {"matrix": matrix_to_json(IntMatrix.identity(3))})
    assert out["invariant_factors"] == ["1", "1", "1"]
    assert parse_matrix(out["S"]) == IntMatrix.identity(3)


def test_smith_round_trip(capsys):
    A = IntMatrix([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])
    out = run_json(capsys, "smith", {"matrix": matrix_to_json(A)})
    U, S, V = (parse_matrix(out[k]) for k in "USV")
    assert U @ A @ V == S
    assert out["invariant_factors"] == ["2", "6", "12"]


def test_gcld_and_lcrm(capsys):
    M, N = EX_MODULI[0], EX_MODULI[1]
    out = run_json(capsys, "gcld", {"M": matrix_to_json(M), "N": matrix_to_json(N)})
    L, P, Q = (parse_matrix(out[k]) for k in ("gcld", "P", "Q"))
    assert M @ P + N @ Q == L
    out = run_json(capsys, "lcrm", {"moduli": [matrix_to_json(m) for m in EX_MODULI]})
    assert int(out["abs_det"]) == abs(determinant(EX_LCRM))


def test_svp_and_cvp(capsys):
    basis = {"rows": 2, "cols": 2, "data": [["1", "0"], ["0", "1"]]}
    out = run_json(capsys, "svp", {"basis": basis})
    assert out["length"] == "1.000000"
    out = run_json(capsys, "cvp", {"basis": basis, "target": ["2.2", "-0.7"]})
    assert parse_real_vector(out["point"]) == (2, -1) and out["unique"] is True


def test_cvp_tie_strict_and_allowed(capsys):
    doc = json.dumps({"basis": [[1, 0], [0, 1]], "target": ["0.5", "0"]})
    code, _, err = run(capsys, "cvp", doc)
    assert code == 1 and json.loads(err)["code"] == "cvp_tie"
    code, out, _ = run(capsys, "cvp", doc, "--allow-ties")
    assert code == 0 and json.loads(out)["unique"] is False


def test_crt_round_trip(capsys):
    m = (123456, -98765)
    rs = [vector_to_json(mod_reduce(m, M)[1]) for M in EX_MODULI]
    doc = {"moduli": [matrix_to_json(M) for M in EX_MODULI], "remainders": rs, "lcrm": matrix_to_json(EX_LCRM)}
    out = run_json(capsys, "crt", doc)
    got = parse_vector(out["m"])
    assert all(mod_reduce(got, M)[1] == mod_reduce(m, M)[1] for M in EX_MODULI)


def test_robust_crt_example(capsys):
    code, out, err = run(capsys, "robust-crt", str(CONFIGS / "robust_crt_three_moduli.json"))
    assert code == 0, err
    res = json.loads(out)
    assert res["estimate"]["data"] == [["-5365339.666667"], ["-2402310.333333"]]
    assert res["reference"] == 0
    assert float(res["robustness_bound"]) == pytest.approx(88.0696, abs=1e-4)


def test_robust_crt_real_identity_scale(capsys):
    doc = {
        "Psi": [matrix_to_json(M) for M in EX_MODULI],
        "M": [["1", "0"], ["0", "1"]],
        "remainders": [vector_to_json(r) for r in EX_NOISY],
        "lcrm": matrix_to_json(EX_LCRM),
    }
    out = run_json(capsys, "robust-crt-real", doc)
    assert out["estimate"]["data"] == [["-5365339.666667"], ["-2402310.333333"]]


def test_bounds_and_redundant(capsys):
    out = run_json(capsys, "bounds", {"moduli": [matrix_to_json(M) for M in EX_MODULI]})
    assert len(out["lambda"]) == 3 and len(out["per_modulus"]) == 3
    out = run_json(capsys, "redundant", {"moduli": [[[2, 0], [0, 2]], [[4, 0], [0, 4]]]})
    assert out["redundant"] and out["redundant"][0]["index"] == 0


def _sim_config():
    return {
        "moduli": [matrix_to_json(GCLD_SMALL @ GAMMA_1), matrix_to_json(GCLD_SMALL @ GAMMA_2)],
        "true_frequency": vector_to_json(FREQ_A),
        "snr_db_grid": ["inf"],
        "lcrm_basis": "centered",
        "trials": 1,
    }


def test_simulate_noiseless(capsys):
    code, out, err = run(capsys, "simulate", json.dumps(_sim_config()))
    assert code == 0, err
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1 and rows[0]["detection_probability"] == "1.000000"


def test_simulate_is_deterministic(capsys, tmp_path):
    cfg = dict(_sim_config(), snr_db_grid=[-30, -27], trials=5)
    doc = json.dumps(cfg)
    first = run(capsys, "simulate", doc, "--seed", "3", "--format", "json")
    second = run(capsys, "simulate", doc, "--seed", "3", "--format", "json")
    assert first == second and first[0] == 0
    out = tmp_path / "r.csv"
    assert run(capsys, "simulate", doc, "--seed", "3", "-o", str(out))[0] == 0
    assert out.read_text().startswith("grid_value,")


def test_shipped_configs_load():
    from robust_mdcrt.freqsim import ExperimentConfig

    for p in CONFIGS.glob("*sweep*.json"):
        cfg = ExperimentConfig.from_json(p)
        assert cfg.trials == 200 and len(cfg.grid) >= 6


@pytest.mark.parametrize("argv", [
    ["smith", "{not json"],
    ["smith", "{}"],
    ["smith", '{"matrix": [[1, "x"], [0, 1]]}'],
    ["crt", '{"moduli": 3, "remainders": []}'],
    ["simulate", '{"moduli": [[[2, 0], [0, 3]]], "bogus": 1}'],
    ["smith", "/nonexistent/file.json"],
])
def test_malformed_input_exits_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == ""
    assert json.loads(err)["code"] == "malformed_input"


@pytest.mark.parametrize("argv, code_name", [
    (["robust-crt", '{"moduli": [[[2, 0], [0, 2]], [[2, 0], [0, 2]]], "remainders": [[0, 0], [1, 1]]}'],
     "duplicate_moduli"),
    (["gcld", '{"M": [[1, 2], [2, 4]], "N": [[1, 0], [0, 1]]}'], "singular_matrix"),
    (["crt", '{"moduli": [[[2, 0], [0, 2]], [[4, 0], [0, 2]]], "remainders": [[0, 0], [1, 1]]}'],
     "inconsistent_system"),
])
def test_domain_errors_exit_1(capsys, argv, code_name):
    code, out, err = run(capsys, *argv)
    assert code == 1 and out == ""
    assert json.loads(err)["code"] == code_name


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "robust_mdcrt", "smith", '{"matrix": [[2]]}'],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["invariant_factors"] == ["2"]
