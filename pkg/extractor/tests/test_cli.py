import numpy as np
import pytest
from scipy.io import wavfile

from fmfusion.fmeb import read_fmeb

from fmextract import registry
from fmextract.cli import main
from fmextract.manifest import ManifestRow, write_manifest


@pytest.fixture
def stub_fm(tmp_path):
    registry.register("stub-fm", 24,
                      lambda: (lambda waves: [np.tile(np.arange(24.0) + float(w.mean()), (3, 1))
                                              for w in waves]),
                      notes="test stub")
    rows = []
    for i in range(4):
        p = tmp_path / f"w{i}.wav"
        t = np.arange(1600) / 16_000
        wavfile.write(p, 16_000, np.int16(0.2 * 32767 * np.sin(2 * np.pi * 300 * t + i)))
        rows.append(ManifestRow(str(p), f"clip-{i}", i % 2, i % 3))
    manifest = tmp_path / "m.tsv"
    write_manifest(rows, manifest)
    yield manifest, tmp_path
    registry._REGISTRY.pop("stub-fm", None)
    registry._CUSTOM_BUILDERS.pop("stub-fm", None)


def test_extract_then_validate_ok(stub_fm, capsys):
    manifest, tmp = stub_fm
    out = tmp / "stub.fmeb"
    assert main(["extract", "--manifest", str(manifest), "--fm", "stub-fm",
                 "--out", str(out)]) == 0
    assert "wrote 4 records" in capsys.readouterr().out
    es = read_fmeb(out)
    assert es.dim == 24 and len(es.records) == 4
    assert main(["validate", "--fmeb", str(out), "--manifest", str(manifest),
                 "--expect-dim", "24"]) == 0
    assert "ok: fmeb matches manifest" in capsys.readouterr().out


def test_validate_nonzero_exit_on_mismatch(stub_fm, capsys):
    manifest, tmp = stub_fm
    out = tmp / "stub.fmeb"
    assert main(["extract", "--manifest", str(manifest), "--fm", "stub-fm",
                 "--out", str(out)]) == 0
    rc = main(["validate", "--fmeb", str(out), "--manifest", str(manifest),
               "--expect-dim", "768"])
    assert rc == 1
    assert "dim mismatch" in capsys.readouterr().out


def test_unknown_fm_errors(stub_fm):
    manifest, tmp = stub_fm
    rc = main(["extract", "--manifest", str(manifest), "--fm", "no-such-model",
               "--out", str(tmp / "x.fmeb")])
    assert rc == 3


def test_help_documents_long_audio_handling(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["extract", "--help"])
    assert exc_info.value.code == 0
    text = capsys.readouterr().out
    assert "30 s window" in text  # whisper's upstream default
    assert "whisper-encoder" in text and "512" in text
