"""Extraction manifest: UTF-8 TSV, four columns, header row.

    audio_path <TAB> utterance_id <TAB> label <TAB> split

label is 0 (real) or 1 (fake); split is train, dev, or test. Utterance ids
must be unique and non-empty.
"""

from dataclasses import dataclass

HEADER = ("audio_path", "utterance_id", "label", "split")
SPLIT_CODES = {"train": 0, "dev": 1, "test": 2}


@dataclass
class ManifestRow:
    audio_path: str
    utterance_id: str
    label: int
    split: int


def parse_manifest(path):
    from .errors import ManifestError

    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    lines = [l for l in lines if l != ""]
    if not lines:
        raise ManifestError(f"{path}: empty manifest")
    header = tuple(lines[0].split("\t"))
    if header != HEADER:
        raise ManifestError(f"{path}: bad header {header!r}, expected {HEADER!r}")
    rows = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        cols = line.split("\t")
        if len(cols) != 4:
            raise ManifestError(f"{path}:{lineno}: expected 4 columns, got {len(cols)}")
        audio_path, utt, label_s, split_s = cols
        if not utt:
            raise ManifestError(f"{path}:{lineno}: empty utterance_id")
        if utt in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate utterance_id {utt!r}")
        seen.add(utt)
        if label_s not in ("0", "1"):
            raise ManifestError(f"{path}:{lineno}: label must be 0 or 1, got {label_s!r}")
        if split_s not in SPLIT_CODES:
            raise ManifestError(f"{path}:{lineno}: split must be train/dev/test, got {split_s!r}")
        rows.append(ManifestRow(audio_path, utt, int(label_s), SPLIT_CODES[split_s]))
    return rows


def write_manifest(rows, path):
    """Inverse of parse_manifest; handy for tests and tooling."""
    names = {v: k for k, v in SPLIT_CODES.items()}
    lines = ["\t".join(HEADER)]
    for r in rows:
        lines.append(f"{r.audio_path}\t{r.utterance_id}\t{r.label}\t{names[r.split]}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
