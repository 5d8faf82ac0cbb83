import io
import json

import numpy as np
import pytest

from markov_bb import io as mio
from markov_bb.cli import main
from markov_bb.errors import NegativeInput, NotStrictlyPositive, RowSumError


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def files(tmp_path):
    return {
        "chain": _write(tmp_path, "chain.json", {"kernel": [[0.6, 0.4, 0.0], [0.2, 0.5, 0.3], [0.0, 0.6, 0.4]]}),
        "bad_rows": _write(tmp_path, "bad.json", {"kernel": [[0.6, 0.5], [0.5, 0.5]]}),
        "mu0": _write(tmp_path, "mu0.json", {"values": [1.5, 0.5, 1.0]}),
        "mu1": _write(tmp_path, "mu1.json", {"values": [0.5, 1.5, 1.2]}),
        "ones": _write(tmp_path, "ones.json", {"values": [1.0, 1.0, 1.0]}),
        "neg": _write(tmp_path, "neg.json", {"values": [1.0, -0.2, 1.0]}),
        "params": _write(tmp_path, "params.json", {"a": 1.0, "b": 2.0, "p": [1, 2, 3], "normalize_p": True}),
        "garbage": str(tmp_path / "garbage.json"),
        "tmp": tmp_path,
    }


def run(argv):
    buf = io.StringIO()
    code = main(argv, out=buf)
    return code, buf.getvalue()


def test_validate_ok(files):
    code, text = run(["validate", "--chain", files["chain"], "--params", files["params"]])
    assert code == 0
    report = json.loads(text)
    assert report["chain"]["n"] == 3
    assert report["params"]["p_mass"] == pytest.approx(1.0)


def test_validate_row_sum_error(files, capsys):
    code, _ = run(["validate", "--chain", files["bad_rows"]])
    assert code == 1
    assert "RowSumError" in capsys.readouterr().err


def test_missing_file_and_bad_json(files, capsys):
    code, _ = run(["validate", "--chain", str(files["tmp"] / "nope.json")])
    assert code == 2
    (files["tmp"] / "garbage.json").write_text("{not json")
    code, _ = run(["validate", "--chain", files["garbage"]])
    assert code == 2
    assert "InputFormatError" in capsys.readouterr().err


def test_usage_errors(files):
    assert run(["distance", "--chain", files["chain"]])[0] == 2
    assert run(["distance", "--chain", files["chain"], "--mu0", files["mu0"], "--mu1", files["mu1"],
                "--steps", "1"])[0] == 2
    assert run(["bogus"])[0] == 2
    assert run(["flow", "--chain", files["chain"], "--rho0", files["mu0"], "--dt", "-1"])[0] == 2


def test_spectrum(files):
    code, text = run(["spectrum", "--chain", files["chain"]])
    assert code == 0
    report = json.loads(text)
    assert report["spectral_gap"] > 0


def test_distance_report_and_determinism(files):
    argv = ["distance", "--chain", files["chain"], "--mu0", files["mu0"], "--mu1", files["mu1"],
            "--steps", "8", "--restarts", "2", "--seed", "3"]
    code, first = run(argv)
    assert code == 0
    assert run(argv)[1] == first
    report = json.loads(first)
    assert report["upper_bound"] >= report["lower_bound"]
    assert len(report["path"]["times"]) == 9
    assert report["l1_check"]["lower_holds"] and report["l1_check"]["upper_holds"]


def test_distance_csv(files):
    out = files["tmp"] / "path.csv"
    code, text = run(["distance", "--chain", files["chain"], "--mu0", files["mu0"], "--mu1", files["mu1"],
                      "--steps", "4", "--restarts", "1", "--format", "csv", "--out", str(out)])
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[0] == "t,mu_1,mu_2,mu_3,h"
    assert len(lines) == 6
    assert out.read_text() == text


def test_distance_negative_input(files, capsys):
    code, _ = run(["distance", "--chain", files["chain"], "--mu0", files["neg"], "--mu1", files["mu1"]])
    assert code == 1
    assert "NegativeInput" in capsys.readouterr().err


def test_bounds(files):
    code, text = run(["bounds", "--chain", files["chain"], "--mu0", files["mu0"], "--mu1", files["mu1"],
                      "--steps", "9", "--restarts", "1"])
    assert code == 0
    report = json.loads(text)
    assert report["three_phase_upper"] >= report["upper_bound"] * (1 - 1e-6)


def test_flow_equilibrium(files, capsys):
    code, text = run(["flow", "--chain", files["chain"], "--rho0", files["ones"], "--t-max", "1"])
    assert code == 0
    assert json.loads(text)["decay"] is None
    assert "equilibrium" in capsys.readouterr().err


def test_flow_negative_start(files, capsys):
    code, _ = run(["flow", "--chain", files["chain"], "--rho0", files["neg"]])
    assert code == 1
    assert "NotStrictlyPositive" in capsys.readouterr().err


def test_flow_csv(files):
    code, text = run(["flow", "--chain", files["chain"], "--rho0", files["mu0"], "--t-max", "2",
                      "--format", "csv"])
    assert code == 0
    assert text.splitlines()[0] == "t,rho_1,rho_2,rho_3,entropy,grad_norm_sq,min_state,mass"


def test_flow_with_decay(files):
    code, text = run(["flow", "--chain", files["chain"], "--rho0", files["mu0"], "--params", files["params"],
                      "--t-max", "30"])
    assert code == 0
    decay = json.loads(text)["decay"]
    assert decay["r_squared"] >= 0.99


def test_loja(files, capsys):
    code, text = run(["loja", "--chain", files["chain"], "--rho0", files["mu0"]])
    assert code == 0
    assert json.loads(text)["ratio"] > 0
    assert run(["loja", "--chain", files["chain"], "--rho0", files["ones"]])[0] == 1
    assert "AtEquilibrium" in capsys.readouterr().err


def test_json_null_for_nonfinite():
    text = mio.dumps({"x": float("inf"), "y": np.array([1.0, np.nan]), "z": np.float64(2.5)})
    assert json.loads(text) == {"x": None, "y": [1.0, None], "z": 2.5}


def test_loaders(files):
    chain = mio.load_chain(files["chain"])
    assert chain.n == 3
    with pytest.raises(RowSumError):
        mio.load_chain(files["bad_rows"])
    with pytest.raises(NegativeInput):
        mio.load_density(files["neg"], 3)
    with pytest.raises(NotStrictlyPositive):
        mio.load_density(files["neg"], 3, strict=True)
    with pytest.raises(mio.InputFormatError):
        mio.load_density(files["mu0"], 4)
    with pytest.raises(mio.InputFormatError):
        mio.chain_from_dict({"kernel": [[1, 0, 0]]})
    params = mio.load_params(files["params"], chain)
    assert params.b == 2.0
    with pytest.raises(mio.InputFormatError):
        mio.params_from_dict({"a": 1.0}, chain)
