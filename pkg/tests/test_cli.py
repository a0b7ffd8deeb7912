import numpy as np
import pytest

from fracop.cli import main
from fracop.core_types import from_csv


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_deriv_gl_example(capsys):
    code, out, _ = run(capsys, "deriv", "--method", "gl", "--alpha", "0.5", "--f", "t^2", "--t1", "1", "--n", "1001")
    assert code == 0
    sig = from_csv(out)
    assert abs(sig.regular[-1] - 1.5045055561) < 1e-2


def test_ml_example(capsys):
    code, out, _ = run(capsys, "ml", "--beta", "1", "--gamma", "1", "--z", "1")
    assert code == 0
    assert abs(float(out) - 2.718281828) < 1e-8
    assert out.strip() == "2.71828182846"


@pytest.mark.parametrize("method", ["gl", "rl", "caputo", "laplace", "conv", "kernel-power", "kernel-exp"])
def test_deriv_every_method(capsys, method):
    code, out, _ = run(capsys, "deriv", "--method", method, "--alpha", "0.5", "--f", "t", "--n", "201")
    assert code == 0
    sig = from_csv(out)
    ref = 2 * (1 - np.exp(-1.0)) if method == "kernel-exp" else 1.1283791671
    assert sig.regular[-1] == pytest.approx(ref, rel=1e-2)


def test_deriv_ell1_prints_deltas(capsys, tmp_path):
    out_file = tmp_path / "d.csv"
    code, _, _ = run(capsys, "deriv", "--method", "ell1", "--f", "exp(2*t)", "--n", "11", "--out", str(out_file))
    assert code == 0
    text = out_file.read_text()
    assert text.startswith("# delta,0,0,1\n# delta,0,1,-1\nt,value\n")
    code, out, _ = run(capsys, "deriv", "--method", "ell1", "--alpha", "2", "--f", "t", "--n", "5")
    assert out.startswith("# delta,0,0,1\n")
    code, out, _ = run(capsys, "deriv", "--method", "ell1", "--alpha", "0.5", "--f", "t", "--n", "5", "--path", "laplace")
    assert code == 0 and from_csv(out).regular[-1] == pytest.approx(1.1283791671, rel=1e-4)


def test_deriv_from_csv(capsys, tmp_path):
    t = np.linspace(0, 1, 51)
    src = tmp_path / "in.csv"
    src.write_text("t,value\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(t, t**2)))
    code, out, _ = run(capsys, "deriv", "--method", "caputo", "--alpha", "0.5", "--csv", str(src), "--n", "1001")
    assert code == 0
    assert from_csv(out).regular[-1] == pytest.approx(1.5045055561, rel=1e-2)


def test_non_monotone_csv_rejected(capsys, tmp_path):
    src = tmp_path / "bad.csv"
    src.write_text("t,value\n0,0\n0.6,1\n0.5,2\n1,3\n")
    code, out, err = run(capsys, "deriv", "--method", "gl", "--alpha", "0.5", "--csv", str(src))
    assert code == 1 and out == ""
    assert "strictly increasing" in err


def test_usage_errors(capsys):
    assert run(capsys, "deriv", "--method", "gl", "--f", "t")[0] == 2  # missing alpha
    assert run(capsys, "deriv", "--method", "gl", "--alpha", "0.5")[0] == 2  # no input
    assert run(capsys, "deriv", "--method", "gl", "--alpha", "0.5", "--f", "t", "--csv", "x")[0] == 2
    assert run(capsys, "deriv", "--method", "magic", "--alpha", "0.5", "--f", "t")[0] == 2
    assert run(capsys, "deriv", "--method", "gl", "--alpha", "0.5", "--f", "t", "--n", "1")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "validate", "nonsense")[0] == 2


def test_computation_errors(capsys):
    code, _, err = run(capsys, "deriv", "--method", "gl", "--alpha", "0.5", "--f", "t +")
    assert code == 1 and "byte offset" in err
    code, _, err = run(capsys, "deriv", "--method", "gl", "--alpha", "0.5", "--f", "(t-0.5)^0.5")
    assert code == 1 and "grid node" in err
    code, _, _ = run(capsys, "deriv", "--method", "laplace", "--alpha", "1.5", "--f", "1")
    assert code == 1


def test_invlap(capsys):
    code, out, _ = run(capsys, "invlap", "--F", "1/(s+1)", "--t", "1", "--t", "2")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,value"
    assert float(lines[1].split(",")[1]) == pytest.approx(np.exp(-1), rel=1e-10)
    code, out, _ = run(capsys, "invlap", "--F", "1/s^2", "--method", "stehfest", "--t", "2")
    assert float(out.splitlines()[1].split(",")[1]) == pytest.approx(2.0, rel=1e-8)


def test_optimize_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["optimize", "--alpha", "0.8", "--lambda", "0.1", "--dim", "2", "--iters", "20", "--seed", "7"]
    assert run(capsys, *args, "--out", str(a))[0] == 0
    assert run(capsys, *args, "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "iter,objective,x0,x1"


def test_deriv_output_is_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["deriv", "--method", "rl", "--alpha", "0.3", "--f", "sin(t)", "--n", "101"]
    run(capsys, *args, "--out", str(a))
    run(capsys, *args, "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nmethod = gl\nalpha = 0.5\nf = t^2\nn = 1001\n")
    code, out, _ = run(capsys, "deriv", "--config", str(cfg))
    assert code == 0 and from_csv(out).regular[-1] == pytest.approx(1.5045, rel=1e-2)
    code, out, _ = run(capsys, "deriv", "--config", str(cfg), "--alpha", "1")
    assert from_csv(out).regular[-1] == pytest.approx(2.0, rel=1e-2)
    bad = tmp_path / "bad.cfg"
    bad.write_text("alpha 0.5\n")
    assert run(capsys, "deriv", "--config", str(bad))[0] == 2
    bad.write_text("colour = red\n")
    assert run(capsys, "deriv", "--config", str(bad))[0] == 2
    opt = tmp_path / "opt.cfg"
    opt.write_text("lambda = 0.1\ndim = 3\niters = 2\n")
    code, out, _ = run(capsys, "optimize", "--config", str(opt))
    assert code == 0 and out.splitlines()[0] == "iter,objective,x0,x1,x2"


@pytest.mark.parametrize("suite", ["power-rule", "semigroup", "gl-vs-rl", "laplace-roundtrip"])
def test_validate_suites_pass(capsys, suite):
    code, out, _ = run(capsys, "validate", suite)
    assert code == 0
    assert out.strip().endswith(f"{suite}: PASS")
    assert "max error" in out.splitlines()[0]


def test_validate_failure_exit_code(capsys):
    # an identity check that cannot hold: semigroup on f = 1 violates its precondition
    code, out, _ = run(capsys, "validate", "semigroup", "--f", "1")
    assert code == 3
    assert "FAIL" in out


def test_validate_semigroup_parameters(capsys):
    code, out, _ = run(capsys, "validate", "semigroup", "--alpha", "0.2", "--beta", "0.5", "--f", "t^3")
    assert code == 0


def test_help(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0 and "deriv" in out
