import json
import math
import subprocess
import sys

import pytest

from goldrotor import cli
from goldrotor.experiments import read_csv_output


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestLemmas:
    def test_convergents_pass(self, capsys):
        code, out, _ = run(capsys, "lemmas", "convergents")
        assert code == 0
        meta, rows = read_csv_output(out)
        assert meta["tool"] == "goldrotor" and meta["violations"] == 0
        assert rows and all(r["passed"] == "True" for r in rows)
        assert {"check", "case", "measured", "bound", "margin", "passed"} <= set(rows[0])

    def test_decomposition_small(self, capsys):
        code, out, _ = run(capsys, "lemmas", "4.2", "--k-max", "5000")
        assert code == 0

    def test_hqn_table(self, capsys):
        code, out, _ = run(capsys, "lemmas", "4.4", "--format", "json")
        assert code == 0
        data = json.loads(out)
        assert data["metadata"]["violations"] == 0
        assert len(data["rows"]) > 0

    def test_violation_exit_code(self, capsys, monkeypatch):
        monkeypatch.setattr(cli, "run_lemma_checks", lambda sel, cfg: ([{"passed": False}], {"violations": 1}))
        code, _, _ = run(capsys, "lemmas", "4.1")
        assert code == 1


class TestClassical:
    def test_single_step_full_measure(self, capsys):
        code, out, _ = run(capsys, "classical-diffusion", "--steps", "1", "--N", "2", "--samples", "1000")
        assert code == 0
        _, rows = read_csv_output(out)
        assert float(rows[0]["exact_measure"]) == pytest.approx(2 * math.pi)
        assert float(rows[0]["montecarlo_measure"]) == pytest.approx(2 * math.pi)

    def test_fib_and_histogram(self, capsys):
        code, out, _ = run(capsys, "classical-diffusion", "--fib", "5,6", "--histogram", "--samples", "100")
        assert code == 0
        _, rows = read_csv_output(out)
        for n in {r["n"] for r in rows}:
            assert sum(float(r["exact_fraction"]) for r in rows if r["n"] == n) == pytest.approx(1.0)

    def test_no_steps_is_config_error(self, capsys):
        code, _, err = run(capsys, "classical-diffusion")
        assert code == 2 and "configuration error" in err


class TestQuantum:
    def test_free_rotation_u_constant(self, capsys):
        code, out, _ = run(capsys, "quantum-localize", "--K", "0", "--M", "32", "--steps", "25")
        assert code == 0
        meta, rows = read_csv_output(out)
        assert len({r["u"] for r in rows}) == 1
        assert len(rows) == 26

    def test_contrast_columns(self, capsys):
        code, out, _ = run(capsys, "quantum-localize", "--M", "32", "--steps", "10", "--record-every", "5",
                           "--contrast", "rational:1/1", "--format", "json")
        assert code == 0
        data = json.loads(out)
        assert {r["run"] for r in data["rows"]} == {"primary", "contrast"}
        assert "contrast_max_u" in data["metadata"] and "norm_leak" in data["metadata"]
        assert set(data["rows"][0]) == {"run", "lambda", "n", "u", "norm_leak", "region", "theta_of", "p_of"}

    def test_trace(self, capsys):
        code, out, _ = run(capsys, "trace", "--M", "32", "--steps", "6", "--initial", "mode:3")
        assert code == 0
        _, rows = read_csv_output(out)
        assert rows[0]["n"] == "0" and float(rows[0]["angle_gap"]) == 0

    def test_kick_coeffs(self, capsys):
        code, out, _ = run(capsys, "kick-coeffs", "--c", "1", "--B", "8")
        assert code == 0
        meta, rows = read_csv_output(out)
        assert len(rows) == 17
        g0 = next(r for r in rows if r["m"] == "0")
        assert float(g0["re"]) == pytest.approx(2 / math.pi)
        assert meta["tail_bound"] > 0

    def test_deterministic(self, capsys):
        argv = ("quantum-localize", "--M", "16", "--steps", "5", "--initial", "gaussian:sigma=2,center=1")
        _, a, _ = run(capsys, *argv)
        _, b, _ = run(capsys, *argv)
        assert a == b

    def test_grid_method(self, capsys):
        code, _, _ = run(capsys, "quantum-localize", "--M", "16", "--steps", "3", "--method", "grid", "--grid", "256")
        assert code == 0


class TestErrors:
    @pytest.mark.parametrize("argv", [
        ("quantum-localize", "--M", "-3", "--steps", "2"),
        ("quantum-localize", "--M", "16", "--steps", "2", "--lambda", "0.618"),
        ("quantum-localize", "--M", "16", "--steps", "2", "--initial", "triangle"),
        ("quantum-localize", "--M", "16", "--steps", "2", "--method", "grid", "--grid", "32"),
        ("quantum-localize", "--M", "16", "--steps", "2", "--hbar", "0"),
        ("classical-diffusion", "--steps", "1", "--K", "nan"),
    ])
    def test_config_errors(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 2
        assert err

    def test_bad_choice(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["lemmas", "4.9"])
        assert exc.value.code == 2

    def test_unwritable_output(self, capsys, tmp_path):
        target = tmp_path / "missing" / "out.csv"
        code, _, err = run(capsys, "lemmas", "convergents", "--output", str(target))
        assert code == 2
        assert str(target) in err

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / "out.json"
        code, out, _ = run(capsys, "kick-coeffs", "--c", "0.5", "--format", "json", "-o", str(target))
        assert code == 0 and out == ""
        assert json.loads(target.read_text())["metadata"]["c"] == 0.5


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "goldrotor.cli", "kick-coeffs", "--c", "1", "--B", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("# {")
