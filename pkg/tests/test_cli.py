import subprocess

import numpy as np
import pytest

from fmfusion import autodiff as ad
from fmfusion.cli import main
from fmfusion.fmeb import EmbeddingRecord, EmbeddingSet, read_fmeb, write_fmeb
from fmfusion.models import load_checkpoint


def run_cli(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    rc = run_cli(["synth", "--out-dir", out, "--dim-a", "10", "--dim-b", "12",
                  "--n-train", "80", "--n-dev", "40", "--n-test", "40",
                  "--s", "3.0", "--sigma", "1.0", "--ka", "2", "--kb", "2", "--seed", "9"])
    assert rc == 0
    return out


# ---------------------------------------------------------------------------
# synth


def test_synth_outputs_readable(synth_dir):
    a = read_fmeb(synth_dir / "a.fmeb")
    b = read_fmeb(synth_dir / "b.fmeb")
    assert a.dim == 10 and b.dim == 12
    assert len(a.records) == 160
    assert (synth_dir / "oracle.txt").exists()


def test_synth_seed_determinism(tmp_path):
    args = ["synth", "--dim-a", "6", "--dim-b", "7", "--ka", "2", "--kb", "2",
            "--n-train", "20", "--n-dev", "10", "--n-test", "10", "--seed", "4", "--out-dir"]
    assert run_cli(args + [tmp_path / "r1"]) == 0
    assert run_cli(args + [tmp_path / "r2"]) == 0
    for name in ("a.fmeb", "b.fmeb", "oracle.txt"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_synth_zero_separation_reports_half(tmp_path, capsys):
    rc = run_cli(["synth", "--out-dir", tmp_path, "--s", "0", "--n-train", "10",
                  "--n-dev", "5", "--n-test", "5"])
    assert rc == 0
    text = (tmp_path / "oracle.txt").read_text()
    assert text.count("EER 50.00% (raw 0.5)") == 3


def test_synth_fused_oracle_value(tmp_path):
    rc = run_cli(["synth", "--out-dir", tmp_path, "--ka", "1", "--kb", "1",
                  "--s", "2", "--sigma", "1", "--n-train", "10", "--n-dev", "5", "--n-test", "5"])
    assert rc == 0
    raw = [l for l in (tmp_path / "oracle.txt").read_text().splitlines() if l.startswith("oracle fused")]
    value = float(raw[0].split("raw ")[1].rstrip(")"))
    assert abs(value - 0.0786) < 5e-4


def test_synth_invalid_flags_usage_error(tmp_path):
    # overlapping informative dims are impossible via ka/kb, but sigma <= 0 is a flag error
    rc = run_cli(["synth", "--out-dir", tmp_path, "--sigma", "0"])
    assert rc == 2


# ---------------------------------------------------------------------------
# train


@pytest.fixture(scope="module")
def trained_fcn(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("fcn_run")
    rc = run_cli(["train", synth_dir / "a.fmeb", "--model", "fcn", "--out-dir", out,
                  "--max-epochs", "3", "--seed", "1"])
    assert rc == 0
    return out


def test_train_writes_artifacts(trained_fcn):
    assert (trained_fcn / "checkpoint.sckp").exists()
    assert (trained_fcn / "history.tsv").exists()
    assert (trained_fcn / "report.txt").exists()
    model = load_checkpoint(trained_fcn / "checkpoint.sckp")
    assert model.kind == "fcn"
    assert model.config.input_dim == 10


def test_train_history_format(trained_fcn):
    lines = (trained_fcn / "history.tsv").read_text().splitlines()
    data = [l for l in lines if not l.startswith("#")]
    assert len(data) == 3
    for i, line in enumerate(data, start=1):
        epoch, loss, eer, ms = line.split("\t")
        assert int(epoch) == i
        float(loss)
        assert 0.0 <= float(eer) <= 1.0
        assert ms == "0"
    assert any(l.startswith("# config:") for l in lines)


def test_train_rerun_bit_identical(synth_dir, tmp_path):
    args = ["train", synth_dir / "a.fmeb", "--model", "cnn", "--tokens", "4",
            "--max-epochs", "2", "--seed", "3", "--out-dir"]
    assert run_cli(args + [tmp_path / "r1"]) == 0
    assert run_cli(args + [tmp_path / "r2"]) == 0
    for name in ("checkpoint.sckp", "history.tsv", "report.txt"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_train_fusion_arity_usage_error(synth_dir, tmp_path):
    rc = run_cli(["train", synth_dir / "a.fmeb", "--model", "scar",
                  "--out-dir", tmp_path])
    assert rc == 2
    rc = run_cli(["train", synth_dir / "a.fmeb", synth_dir / "b.fmeb",
                  "--model", "fcn", "--out-dir", tmp_path])
    assert rc == 2


def test_train_missing_split_data_error(tmp_path):
    es = EmbeddingSet("only-train", 4, [
        EmbeddingRecord(f"u{i}", i % 2, 0, np.zeros(4, np.float32)) for i in range(10)])
    path = tmp_path / "t.fmeb"
    write_fmeb(es, path)
    rc = run_cli(["train", path, "--model", "fcn", "--out-dir", tmp_path / "out"])
    assert rc == 3


def test_train_unreadable_input_data_error(tmp_path):
    bad = tmp_path / "junk.fmeb"
    bad.write_bytes(b"not a real file")
    rc = run_cli(["train", bad, "--model", "fcn", "--out-dir", tmp_path / "out"])
    assert rc == 3


def test_train_config_error_exit_code(synth_dir, tmp_path):
    # tokens too large for dim 10 (conv output is 8)
    rc = run_cli(["train", synth_dir / "a.fmeb", "--model", "cnn", "--tokens", "64",
                  "--out-dir", tmp_path])
    assert rc == 4


# ---------------------------------------------------------------------------
# eval


def test_eval_reproduces_recorded_dev_eer(trained_fcn, synth_dir, capsys):
    report = (trained_fcn / "report.txt").read_text().splitlines()
    recorded = next(l for l in report if l.startswith("dev_eer_raw"))
    capsys.readouterr()
    rc = run_cli(["eval", synth_dir / "a.fmeb", "--checkpoint",
                  trained_fcn / "checkpoint.sckp", "--split", "dev"])
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    line = next(l for l in out if l.startswith("dev_eer_raw"))
    assert line.split()[1] == recorded.split()[1]  # bit-exact repr match


def test_eval_is_deterministic(trained_fcn, synth_dir, capsys):
    capsys.readouterr()
    assert run_cli(["eval", synth_dir / "a.fmeb", "--checkpoint",
                    trained_fcn / "checkpoint.sckp", "--split", "test"]) == 0
    first = capsys.readouterr().out
    assert run_cli(["eval", synth_dir / "a.fmeb", "--checkpoint",
                    trained_fcn / "checkpoint.sckp", "--split", "test"]) == 0
    assert capsys.readouterr().out == first


def test_eval_dim_mismatch_exit_code(trained_fcn, synth_dir):
    rc = run_cli(["eval", synth_dir / "b.fmeb", "--checkpoint",
                  trained_fcn / "checkpoint.sckp", "--split", "dev"])
    assert rc == 4


def test_eval_arity_mismatch_usage_error(trained_fcn, synth_dir):
    rc = run_cli(["eval", synth_dir / "a.fmeb", synth_dir / "b.fmeb",
                  "--checkpoint", trained_fcn / "checkpoint.sckp"])
    assert rc == 2


# ---------------------------------------------------------------------------
# gradcheck


def test_gradcheck_passes_with_full_coverage(capsys):
    rc = run_cli(["gradcheck"])
    assert rc == 0
    out = capsys.readouterr().out
    ops = ["dense", "conv1d", "adaptive_maxpool1d", "sdpa", "multi_head_attention",
           "dropout", "relu", "sigmoid"]
    models = ["bce+fcn", "bce+cnn", "bce+concat", "bce+scar"]
    rows = [l for l in out.splitlines() if "max_rel_err" in l]
    assert len(rows) == len(ops) + len(models)
    for name in ops + models:
        assert sum(1 for r in rows if r.split()[0] == name) == 1


def test_gradcheck_negative_control_names_conv1d(monkeypatch, capsys):
    real = ad._conv1d_backward

    def broken(xd, kd, g, needs):
        dx, dk, db = real(xd, kd, g, needs)
        return dx, (dk * 1.05 if dk is not None else None), db

    monkeypatch.setattr(ad, "_conv1d_backward", broken)
    rc = run_cli(["gradcheck"])
    assert rc == 5
    err = capsys.readouterr().err
    assert "conv1d" in err


# ---------------------------------------------------------------------------
# inspect


def test_inspect_fmeb_counts(synth_dir, capsys):
    capsys.readouterr()
    assert run_cli(["inspect", synth_dir / "a.fmeb"]) == 0
    out = capsys.readouterr().out
    assert "fm_name: synth-a" in out
    assert "dim: 10" in out
    assert "split train: 80" in out
    assert "split dev: 40" in out
    assert "split test: 40" in out


def test_inspect_checkpoint_param_count(trained_fcn, capsys):
    capsys.readouterr()
    assert run_cli(["inspect", trained_fcn / "checkpoint.sckp"]) == 0
    out = capsys.readouterr().out
    expected = 10 * 512 + 512 + 512 * 128 + 128 + 129
    assert f"parameters: {expected}" in out
    assert "kind: fcn" in out


def test_inspect_truncated_file_names_offset(synth_dir, tmp_path, capsys):
    raw = (synth_dir / "a.fmeb").read_bytes()
    bad = tmp_path / "cut.fmeb"
    bad.write_bytes(raw[:len(raw) // 2])
    capsys.readouterr()
    rc = run_cli(["inspect", bad])
    assert rc == 3
    assert "byte offset" in capsys.readouterr().err


def test_inspect_scar_param_count_full_size(tmp_path, capsys):
    from fmfusion.models import ScarConfig, ScarModel, save_checkpoint
    from fmfusion.rng import Rng

    model = ScarModel.create(ScarConfig(dim_a=768, dim_b=1024, tokens=32), Rng(0))
    save_checkpoint(model, tmp_path / "scar.sckp")
    capsys.readouterr()
    assert run_cli(["inspect", tmp_path / "scar.sckp"]) == 0
    assert "parameters: 1127425" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# packaging


def test_console_entry_point_runs():
    proc = subprocess.run(["fmfusion", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "synth" in proc.stdout and "gradcheck" in proc.stdout
