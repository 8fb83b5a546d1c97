import numpy as np
import pytest
from scipy.io import wavfile

from fmextract.extract import extract_representations
from fmextract.manifest import ManifestRow, write_manifest
from fmextract.validate import validate_fmeb_against_manifest


class FixedEncoder:
    def __init__(self, dim):
        self.dim = dim

    def __call__(self, waves):
        return [np.full((4, self.dim), float(w.mean()) + 1.0) for w in waves]


@pytest.fixture
def extracted(tmp_path):
    rows = []
    for i in range(6):
        p = tmp_path / f"c{i}.wav"
        t = np.arange(2000) / 16_000
        wavfile.write(p, 16_000, np.int16(0.3 * 32767 * np.sin(2 * np.pi * (100 + i * 50) * t)))
        rows.append(ManifestRow(str(p), f"u{i:02d}", i % 2, i % 3))
    manifest = tmp_path / "m.tsv"
    write_manifest(rows, manifest)
    fmeb = tmp_path / "out.fmeb"
    extract_representations(str(manifest), "whisper-encoder", fmeb, encoder=FixedEncoder(512))
    return manifest, fmeb, rows


def test_matching_pair_empty_diff(extracted):
    manifest, fmeb, _ = extracted
    report = validate_fmeb_against_manifest(fmeb, manifest, expected_dim=512)
    assert report.ok
    assert report.lines() == []


def test_flipped_label_reports_exactly_one_row(extracted, tmp_path):
    manifest, fmeb, rows = extracted
    rows[3].label = 1 - rows[3].label
    bad = tmp_path / "flipped.tsv"
    write_manifest(rows, bad)
    report = validate_fmeb_against_manifest(fmeb, bad)
    assert not report.ok
    assert len(report.mismatches) == 1
    assert report.mismatches[0][0] == rows[3].utterance_id
    assert report.mismatches[0][1] == "label"


def test_wrong_dim_names_expected_and_found(extracted):
    manifest, fmeb, _ = extracted
    report = validate_fmeb_against_manifest(fmeb, manifest, expected_dim=768)
    assert not report.ok
    line = report.lines()[0]
    assert "expected 768" in line and "found 512" in line


def test_missing_and_extra_ids_enumerated(extracted, tmp_path):
    manifest, fmeb, rows = extracted
    mutated = rows[:-1] + [ManifestRow(rows[-1].audio_path, "unseen", 0, 0)]
    bad = tmp_path / "ids.tsv"
    write_manifest(mutated, bad)
    report = validate_fmeb_against_manifest(fmeb, bad)
    assert report.missing_in_fmeb == ["unseen"]
    assert report.extra_in_fmeb == [rows[-1].utterance_id]


def test_split_disagreement_reported(extracted, tmp_path):
    manifest, fmeb, rows = extracted
    rows[1].split = (rows[1].split + 1) % 3
    bad = tmp_path / "split.tsv"
    write_manifest(rows, bad)
    report = validate_fmeb_against_manifest(fmeb, bad)
    assert [m[1] for m in report.mismatches] == ["split"]
