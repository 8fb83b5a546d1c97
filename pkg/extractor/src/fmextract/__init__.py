"""Export pooled frozen foundation-model representations of audio as FMEB files."""

from .audio import load_waveform
from .extract import extract_representations, pool_frames
from .manifest import ManifestRow, parse_manifest, write_manifest
from .registry import build_encoder, entries, expected_dim, lookup, register
from .validate import validate_fmeb_against_manifest

__version__ = "0.1.0"
