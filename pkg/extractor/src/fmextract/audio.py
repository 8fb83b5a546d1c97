"""WAV loading and resampling to the 16 kHz rate the encoders expect."""

import math

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import AudioError

TARGET_SR = 16_000

_INT_SCALE = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0,
              np.dtype(np.uint8): 128.0}


def load_waveform(path, target_sr=TARGET_SR):
    """Mono float32 waveform at target_sr (polyphase resampling when needed)."""
    try:
        sr, data = wavfile.read(path)
    except Exception as exc:
        raise AudioError(f"cannot decode {path}: {exc}") from exc
    if data.size == 0:
        raise AudioError(f"{path}: empty audio stream")
    if data.dtype == np.dtype(np.uint8):
        wave = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in _INT_SCALE:
        wave = data.astype(np.float64) / _INT_SCALE[data.dtype]
    else:
        wave = data.astype(np.float64)
    if wave.ndim == 2:
        wave = wave.mean(axis=1)
    if sr != target_sr:
        g = math.gcd(int(sr), int(target_sr))
        wave = resample_poly(wave, target_sr // g, sr // g)
    return wave.astype(np.float32)
