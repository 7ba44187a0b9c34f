import subprocess
import sys

from crimeblowup.cli import main, rng_references


def _write(tmp_path, text):
    path = tmp_path / "cfg.toml"
    path.write_text(text)
    return str(path)


SINGLE = """scenario = "single_run"
[grid]
N = 64
[control]
T_end = 0.01
[single]
initial = "constant"
"""


def test_info(capsys):
    assert main(["info"]) == 0
    out = capsys.readouterr().out
    assert "limit_blowup_sweep" in out and "crimeblowup" in out


def test_verify_w0(capsys):
    assert main(["verify-w0", "--chi", "2", "--M", "16", "--N", "1024"]) == 0
    out = capsys.readouterr().out
    assert "f_gradient_comparison: pass" in out


def test_verify_w0_unresolved_cap():
    assert main(["--quiet", "verify-w0", "--M", "1e6", "--N", "64"]) == 1
    assert main(["--quiet", "verify-w0", "--chi", "4", "--M", "64", "--N", "2048", "--min-cap-cells", "0"]) == 0


def test_run_writes_results(tmp_path, capsys):
    cfg = _write(tmp_path, SINGLE)
    assert main(["run", cfg, "--output-dir", str(tmp_path / "out"), "--seedless"]) == 0
    assert (tmp_path / "out" / "results.csv").is_file()
    assert "wrote 1 rows" in capsys.readouterr().out


def test_config_error_exit_code(tmp_path):
    cfg = _write(tmp_path, SINGLE + "[physical]\nn = 2\n")
    assert main(["--quiet", "run", cfg, "--output-dir", str(tmp_path / "out")]) == 2
    cfg = _write(tmp_path, 'scenario = "single_run"\nscenario = "x"\n')
    assert main(["--quiet", "run", cfg, "--output-dir", str(tmp_path / "out")]) == 2


def test_abort_exit_code(tmp_path):
    cfg = _write(
        tmp_path,
        'scenario = "limit_blowup_sweep"\n[grid]\nN = 64\n[control]\nT_end = 0.01\n[sweep]\nM = [4.0, 1e6]\n',
    )
    assert main(["--quiet", "run", cfg, "--output-dir", str(tmp_path / "out")]) == 3
    assert (tmp_path / "out" / "manifest.json.incomplete").is_file()


def test_package_references_no_rng():
    assert rng_references() == []


def test_rng_scan_detects_imports(tmp_path):
    (tmp_path / "a.py").write_text("import numpy as np\nx = np.random.default_rng(1)\n")
    (tmp_path / "b.py").write_text("from random import choice\n")
    hits = rng_references(tmp_path)
    assert any(h.startswith("a.py:2") for h in hits)
    assert any(h.startswith("b.py:1") for h in hits)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "crimeblowup", "info"], capture_output=True, text=True, check=True)
    assert "scenarios:" in out.stdout
