"""Pooled representation extraction: audio -> frozen encoder -> FMEB file."""

import logging

import numpy as np
from fmfusion.fmeb import EmbeddingRecord, EmbeddingSet, write_fmeb

from .audio import load_waveform
from .errors import AudioError, DimMismatchError, EncoderError
from .manifest import parse_manifest
from .registry import build_encoder, expected_dim

log = logging.getLogger("fmextract")


def pool_frames(frames):
    """Exact arithmetic mean over the frame axis, accumulated in float64."""
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise EncoderError(f"encoder must return [n_frames, dim], got shape {frames.shape}")
    return (frames.astype(np.float64).sum(axis=0) / frames.shape[0]).astype(np.float32)


def extract_representations(manifest, fm_name, out_path, encoder=None,
                            on_error="strict", batch_size=8):
    """Pool the frozen encoder's last hidden state per utterance, write FMEB.

    `manifest` is a path or a list of ManifestRow. `on_error` is "strict"
    (re-raise on undecodable audio) or "skip" (log and drop the row). Returns
    the number of records written.
    """
    if on_error not in ("strict", "skip"):
        raise ValueError(f"on_error must be 'strict' or 'skip', got {on_error!r}")
    rows = parse_manifest(manifest) if isinstance(manifest, (str, bytes)) or hasattr(manifest, "read_text") \
        else list(manifest)
    dim = expected_dim(fm_name)
    if encoder is None:
        encoder = build_encoder(fm_name)

    records = []
    pending = []  # (row, waveform) kept in manifest order
    for row in rows:
        try:
            pending.append((row, load_waveform(row.audio_path)))
        except AudioError:
            if on_error == "strict":
                raise
            log.warning("skipping undecodable audio %s (%s)", row.audio_path, row.utterance_id)
            continue
        if len(pending) == batch_size:
            _flush(pending, encoder, dim, fm_name, records)
            pending = []
    if pending:
        _flush(pending, encoder, dim, fm_name, records)

    out = EmbeddingSet(fm_name.lower(), dim, records)
    write_fmeb(out, out_path)
    return len(records)


def _flush(pending, encoder, dim, fm_name, records):
    frames_list = encoder([wave for _, wave in pending])
    if len(frames_list) != len(pending):
        raise EncoderError(
            f"encoder returned {len(frames_list)} outputs for {len(pending)} waveforms")
    for (row, _), frames in zip(pending, frames_list):
        vec = pool_frames(frames)
        if vec.shape[0] != dim:
            raise DimMismatchError(
                f"{fm_name} produced dim {vec.shape[0]} for {row.utterance_id!r}, expected {dim}")
        records.append(EmbeddingRecord(row.utterance_id, row.label, row.split, vec))
