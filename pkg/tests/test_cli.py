import json
import subprocess
import sys

import numpy as np

from prescore_attn import exact_attention, load_labels, load_matrix, make_rng, save_matrix
from prescore_attn.cli import EXIT_ERROR, EXIT_OK, EXIT_THRESHOLD, main


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_subcommand_runs_and_passes(tmp_path, capsys):
    cfg = write(tmp_path, "schema: 1\nexperiment: COUNTEREXAMPLE\nseeds: [0]\n")
    assert main(["counterexample", "--config", cfg, "--out", str(tmp_path / "out")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["passed"] is True
    assert (tmp_path / "out" / "results.csv").exists()
    assert (tmp_path / "out" / "summary.json").exists()


def test_threshold_failure_exit_code(tmp_path):
    cfg = write(tmp_path, "experiment: THEOREM1\nseeds: [0]\ngrid: {n: [800], d: [8]}\nthresholds: {ratio: 1.0e9}\n")
    assert main(["theorem1", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_THRESHOLD


def test_invalid_config_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "experiment: THEOREM1\nseeds: []\n")
    assert main(["theorem1", "--config", cfg]) == EXIT_ERROR
    assert "seeds" in capsys.readouterr().err


def test_mismatched_subcommand(tmp_path, capsys):
    cfg = write(tmp_path, "experiment: THEOREM1\nseeds: [0]\n")
    assert main(["theorem2", "--config", cfg]) == EXIT_ERROR
    assert "experiment" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == EXIT_ERROR
    assert "No such file" in capsys.readouterr().err


def test_seed_override(tmp_path):
    cfg = write(tmp_path, "experiment: COUNTEREXAMPLE\nseeds: [0]\ngrid: {n: [50]}\n")
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out), "--seed-override", "4,5,6"]) == EXIT_OK
    rows = (out / "results.csv").read_text().splitlines()[2:]
    assert [r.split(",")[3] for r in rows] == ["4", "5", "6"]


def test_bad_thread_count(tmp_path):
    cfg = write(tmp_path, "experiment: COUNTEREXAMPLE\nseeds: [0]\n")
    assert main(["run", "--config", cfg, "--threads", "0"]) == EXIT_ERROR


def test_generate_and_attend(tmp_path, capsys):
    kpath = str(tmp_path / "k.pamx")
    assert main(["generate", "--n", "200", "--d", "4", "--epsilon", "0.25", "--seed", "3", "--out", kpath]) == EXIT_OK
    k = load_matrix(kpath)
    assert k.shape == (200, 4)
    assert np.bincount(load_labels(kpath + ".labels")).tolist() == [184, 4, 4, 4, 4]
    r = make_rng(0)
    qpath, vpath, opath = (str(tmp_path / f"{x}.pamx") for x in "qvo")
    save_matrix(qpath, r.standard_normal((10, 4)))
    save_matrix(vpath, r.standard_normal((200, 2)))
    argv = ["attend", "--q", qpath, "--k", kpath, "--v", vpath, "--out", opath, "--s", "200", "--block-size", "200"]
    assert main(argv) == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert info["keys_retained"] == 200
    ref = exact_attention(load_matrix(qpath), k, load_matrix(vpath)).out
    np.testing.assert_allclose(load_matrix(opath), ref, atol=1e-10)


def test_attend_rejects_corrupt_input(tmp_path):
    bad = tmp_path / "bad.pamx"
    bad.write_bytes(b"nope")
    argv = ["attend", "--q", str(bad), "--k", str(bad), "--v", str(bad), "--out", str(tmp_path / "o"), "--s", "1"]
    assert main(argv) == EXIT_ERROR


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, "experiment: COUNTEREXAMPLE\nseeds: [0]\n")
    proc = subprocess.run([sys.executable, "-m", "prescore_attn.cli", "run", "--config", cfg, "--out",
                           str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
