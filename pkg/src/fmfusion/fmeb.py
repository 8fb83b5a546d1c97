"""Bit-exact storage of pooled foundation-model embeddings (FMEB files).

Layout, little-endian throughout:

    magic   4 bytes  "FMEB"
    version u16      1
    fm_name u16 length + UTF-8 bytes
    dim     u32
    count   u64
    record* count times:
        utterance_id  u16 length + UTF-8 bytes
        label         u8   (0 real, 1 fake)
        split         u8   (0 train, 1 dev, 2 test)
        vector        dim x IEEE-754 binary32

Any deviation is a hard read error with a distinct exception kind.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConsistencyError,
    MagicError,
    NonFiniteDataError,
    PairingError,
    TruncatedFileError,
    ValidationError,
    VersionError,
)

MAGIC = b"FMEB"
VERSION = 1

SPLIT_TRAIN, SPLIT_DEV, SPLIT_TEST = 0, 1, 2
SPLIT_NAMES = {SPLIT_TRAIN: "train", SPLIT_DEV: "dev", SPLIT_TEST: "test"}
SPLIT_CODES = {v: k for k, v in SPLIT_NAMES.items()}

LABEL_REAL, LABEL_FAKE = 0, 1


@dataclass
class EmbeddingRecord:
    utterance_id: str
    label: int
    split: int
    vector: np.ndarray


@dataclass
class EmbeddingSet:
    fm_name: str
    dim: int
    records: list = field(default_factory=list)

    def validate(self):
        if self.dim < 1:
            raise ValidationError(f"dim must be positive, got {self.dim}")
        seen = set()
        for rec in self.records:
            if not rec.utterance_id:
                raise ValidationError("empty utterance_id")
            if rec.utterance_id in seen:
                raise ValidationError(f"duplicate utterance_id {rec.utterance_id!r}")
            seen.add(rec.utterance_id)
            if rec.label not in (LABEL_REAL, LABEL_FAKE):
                raise ValidationError(f"label must be 0 or 1, got {rec.label} for {rec.utterance_id!r}")
            if rec.split not in SPLIT_NAMES:
                raise ValidationError(f"split must be 0, 1 or 2, got {rec.split} for {rec.utterance_id!r}")
            if rec.vector.shape != (self.dim,):
                raise ValidationError(
                    f"vector of {rec.utterance_id!r} has shape {rec.vector.shape}, expected ({self.dim},)")
            if not np.isfinite(rec.vector).all():
                raise NonFiniteDataError(f"vector of {rec.utterance_id!r} contains NaN or Inf")

    def split_arrays(self, split):
        """(X, y) float32/int arrays for one split, in stored record order."""
        rows = [r for r in self.records if r.split == split]
        x = np.stack([r.vector for r in rows]).astype(np.float32) if rows else np.zeros((0, self.dim), np.float32)
        y = np.array([r.label for r in rows], dtype=np.int64)
        return x, y

    def counts(self):
        """{(split, label): n} occupancy table."""
        table = {}
        for r in self.records:
            table[(r.split, r.label)] = table.get((r.split, r.label), 0) + 1
        return table


def write_fmeb(es, path):
    """Serialize a validated EmbeddingSet; byte-deterministic for equal input."""
    es.validate()
    name_b = es.fm_name.encode("utf-8")
    if len(name_b) > 0xFFFF:
        raise ValidationError("fm_name longer than 65535 bytes")
    chunks = [MAGIC, struct.pack("<H", VERSION), struct.pack("<H", len(name_b)), name_b,
              struct.pack("<IQ", es.dim, len(es.records))]
    for rec in es.records:
        id_b = rec.utterance_id.encode("utf-8")
        if len(id_b) > 0xFFFF:
            raise ValidationError(f"utterance_id {rec.utterance_id!r} longer than 65535 bytes")
        chunks.append(struct.pack("<H", len(id_b)))
        chunks.append(id_b)
        chunks.append(struct.pack("<BB", rec.label, rec.split))
        chunks.append(np.ascontiguousarray(rec.vector, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


class _Cursor:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(f"file ends inside {what}", self.pos)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u16(self, what):
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what):
        return struct.unpack("<Q", self.take(8, what))[0]


def read_fmeb(path):
    """Parse and fully validate an FMEB file."""
    with open(path, "rb") as fh:
        buf = fh.read()
    cur = _Cursor(buf)
    magic = bytes(cur.take(4, "magic"))
    if magic != MAGIC:
        raise MagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = cur.u16("version")
    if version != VERSION:
        raise VersionError(f"unsupported FMEB version {version}, expected {VERSION}")
    name_len = cur.u16("fm_name length")
    try:
        fm_name = bytes(cur.take(name_len, "fm_name")).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValidationError(f"fm_name is not valid UTF-8: {exc}") from exc
    dim = cur.u32("dim")
    if dim < 1:
        raise ValidationError(f"dim must be positive, got {dim}")
    count = cur.u64("record count")
    records = []
    seen = set()
    vec_bytes = 4 * dim
    for i in range(count):
        id_len = cur.u16(f"record {i} id length")
        try:
            utt = bytes(cur.take(id_len, f"record {i} id")).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ValidationError(f"record {i} id is not valid UTF-8: {exc}") from exc
        if not utt:
            raise ValidationError(f"record {i} has empty utterance_id")
        if utt in seen:
            raise ValidationError(f"duplicate utterance_id {utt!r}")
        seen.add(utt)
        label, split = struct.unpack("<BB", cur.take(2, f"record {i} label/split"))
        if label not in (LABEL_REAL, LABEL_FAKE):
            raise ValidationError(f"record {utt!r} has label {label}, expected 0 or 1")
        if split not in SPLIT_NAMES:
            raise ValidationError(f"record {utt!r} has split {split}, expected 0, 1 or 2")
        vec = np.frombuffer(cur.take(vec_bytes, f"record {i} vector"), dtype="<f4").astype(np.float32)
        if not np.isfinite(vec).all():
            raise NonFiniteDataError(f"vector of {utt!r} contains NaN or Inf")
        records.append(EmbeddingRecord(utt, label, split, vec))
    if cur.pos != len(buf):
        raise ValidationError(f"{len(buf) - cur.pos} trailing bytes after the last record")
    return EmbeddingSet(fm_name=fm_name, dim=dim, records=records)


@dataclass
class PairedDataset:
    """Rows of two embedding sets joined on utterance_id, id-ascending."""

    dim_a: int
    dim_b: int
    ids: list
    xa: np.ndarray
    xb: np.ndarray
    labels: np.ndarray
    splits: np.ndarray

    def split_arrays(self, split):
        m = self.splits == split
        return self.xa[m], self.xb[m], self.labels[m]


def pair_by_utterance(a, b, policy="intersect"):
    """Join two embedding sets on utterance_id.

    intersect: keep shared ids. strict: error when the id sets differ, listing
    the first 10 missing ids. Rows come out in ascending id order (UTF-8 byte
    order == codepoint order), so downstream shuffling is purely the trainer's
    seeded responsibility.
    """
    if policy not in ("intersect", "strict"):
        raise ValueError(f"unknown pairing policy {policy!r}")
    amap = {r.utterance_id: r for r in a.records}
    bmap = {r.utterance_id: r for r in b.records}
    if policy == "strict" and set(amap) != set(bmap):
        missing = sorted(set(amap) ^ set(bmap))
        raise PairingError(
            f"id sets differ in {len(missing)} utterances; first missing: {missing[:10]}")
    shared = sorted(set(amap) & set(bmap))
    xa = np.zeros((len(shared), a.dim), np.float32)
    xb = np.zeros((len(shared), b.dim), np.float32)
    labels = np.zeros(len(shared), np.int64)
    splits = np.zeros(len(shared), np.int64)
    for i, utt in enumerate(shared):
        ra, rb = amap[utt], bmap[utt]
        if ra.label != rb.label:
            raise ConsistencyError(f"label disagreement for {utt!r}: {ra.label} vs {rb.label}")
        if ra.split != rb.split:
            raise ConsistencyError(f"split disagreement for {utt!r}: {ra.split} vs {rb.split}")
        xa[i] = ra.vector
        xb[i] = rb.vector
        labels[i] = ra.label
        splits[i] = ra.split
    return PairedDataset(a.dim, b.dim, shared, xa, xb, labels, splits)
