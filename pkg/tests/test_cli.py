import json
import subprocess
import sys

import numpy as np
import pytest

from bifcurrent import io
from bifcurrent.cli import main, parse_complex, parse_int_list, parse_rect


@pytest.mark.parametrize("text, value", [
    ("-2", -2), ("i", 1j), ("-i", -1j), ("1-2i", 1 - 2j), ("0.3+0.1j", 0.3 + 0.1j),
    (" 2 + i ", 2 + 1j),
])
def test_parse_complex(text, value):
    assert parse_complex(text) == value


def test_parse_helpers():
    assert parse_int_list("4, 6,8") == [4, 6, 8]
    assert parse_rect("-1,1,-2,2") == (-1, 1, -2, 2)
    import argparse
    with pytest.raises(argparse.ArgumentTypeError):
        parse_complex("two")
    with pytest.raises(argparse.ArgumentTypeError):
        parse_rect("1,2")


def run(tmp_path, *argv):
    return main(list(argv) + ["--out", str(tmp_path / "o"), "--no-figures"])


def test_tangency_row(tmp_path, capsys):
    assert run(tmp_path, "tangency", "--n", "10") == 0
    out = capsys.readouterr().out
    assert "10,5120,certified" in out.splitlines()
    cloud = io.read_cloud_csv(tmp_path / "o" / "tangency_n10.csv")
    assert len(cloud) == 5120
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["pass"] is True and "runtime_s" not in rep


def test_tangency_random_lines(tmp_path):
    assert run(tmp_path, "tangency", "--n", "5", "--random-lines", "2", "--seed", "3") == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert {"counts", "counts_line1", "counts_line2"} <= set(rep["tables"])


def test_mu_n(tmp_path, capsys):
    assert run(tmp_path, "mu-n", "--n", "8", "--alpha", "0.05", "--beta", "1", "--nx", "64") == 0
    assert "atoms=1024 mass=1.0" in capsys.readouterr().out
    cloud = io.read_cloud_csv(tmp_path / "o" / "mu_tilde.csv")
    assert len(cloud) == 1024 and cloud.total_mass == pytest.approx(1, abs=1e-12)
    assert io.read_grid(tmp_path / "o" / "potential.bfgrid").values.shape == (64, 64)


def test_green_and_render(tmp_path):
    assert run(tmp_path, "green", "--c", "0", "--rect=-2,2,-2,2", "--nx", "33") == 0
    field = io.read_grid(tmp_path / "o" / "green.bfgrid")
    pts = field.spec.points()
    np.testing.assert_allclose(field.values, np.log(np.maximum(np.abs(pts), 1)), atol=1e-11)
    src = tmp_path / "g.bfgrid"
    (tmp_path / "o" / "green.bfgrid").rename(src)
    assert main(["render", str(src), "--out", str(tmp_path / "r")]) == 0
    assert io.read_pgm(tmp_path / "r" / "g.pgm").shape == (33, 33)
    assert (tmp_path / "r" / "g.png").exists()


def test_mandel_grid(tmp_path):
    assert run(tmp_path, "mandel-grid", "--nx", "40", "--n-cap", "500") == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["metrics"]["inside"] > 0 and rep["metrics"]["outside"] > 0
    state = io.read_grid(tmp_path / "o" / "membership.bfgrid").values
    assert set(np.unique(state)) <= {0.0, 1.0, 2.0}


def test_convergence_with_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"a": [[0, 0], [1, 0]], "n-list": [4, 6, 8], "nx": 48,
                               "n_cap": 512}))
    assert main(["convergence", "--config", str(cfg), "--nx", "40", "--out",
                 str(tmp_path / "o"), "--no-figures"]) == 0
    resolved = io.load_json(tmp_path / "o" / "config.resolved")
    # flags beat the config file, config beats defaults
    assert resolved["nx"] == 40 and resolved["n_list"] == [4, 6, 8]
    assert resolved["a"] == [[0.0, 0.0], [1.0, 0.0]]
    assert (tmp_path / "o" / "distances.csv").read_text().startswith("n,l1_distance\n4,")


def test_slice_small(tmp_path):
    assert run(tmp_path, "slice", "--n-list", "6,8", "--c0", "-2", "--brolin-count",
               "4096") == 0
    assert (tmp_path / "o" / "slice_n8.csv").exists()


def test_failed_experiment_exits_2(tmp_path):
    # an empty window gives nan gaps, which fail the trend criterion
    assert run(tmp_path, "slice", "--n-list", "4,6", "--c0", "1.5+1.5i",
               "--width", "0.01", "--brolin-count", "512") == 2


@pytest.mark.parametrize("argv", [
    [], ["nope"], ["tangency", "--n", "x"], ["tangency", "--bogus"],
])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1
    assert "usage:" in capsys.readouterr().err


def test_bad_config_exit_1(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"wrong_key": 1}')
    assert main(["tangency", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "wrong_key" in capsys.readouterr().err
    assert main(["tangency", "--config", str(tmp_path / "missing.json")]) == 1


def test_tangency_range_error_leaves_nothing(tmp_path):
    assert run(tmp_path, "tangency", "--n", "25") == 1
    assert not (tmp_path / "o").exists()
    assert not any(p.name.startswith(".o.") for p in tmp_path.iterdir())


def test_render_bad_input(tmp_path):
    bad = tmp_path / "bad.bfgrid"
    bad.write_bytes(b"junk")
    assert main(["render", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bifcurrent", "tangency", "--n", "3",
                           "--out", str(tmp_path / "o"), "--no-figures"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "3,12,certified" in proc.stdout


def test_outputs_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["mu-n", "--n", "6", "--nx", "32", "--seed", "5",
                     "--out", str(tmp_path / d)]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    assert any(n.endswith(".png") for n in names)
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes(), n
