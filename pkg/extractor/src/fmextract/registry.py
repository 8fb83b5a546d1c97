"""Foundation-model registry: expected dims and encoder builders.

An encoder is a callable taking a list of mono 16 kHz float32 waveforms and
returning one [n_frames, dim] float array per waveform (the last hidden state
of the frozen model). The bundled Hugging Face adapters run one waveform per
forward pass, so results do not depend on batch grouping; the batch size only
controls how many files are handed to the encoder per call.

ImageBind and LanguageBind have no Hugging Face checkpoint; register a custom
encoder (register(...)) backed by their upstream repos to use them.
"""

from dataclasses import dataclass

from .errors import EncoderError


@dataclass
class FmEntry:
    name: str
    dim: int
    hf_id: str | None
    family: str  # "wav2vec2-like", "whisper-encoder", "external"
    notes: str


_REGISTRY = {}
_CUSTOM_BUILDERS = {}


def _add(name, dim, hf_id, family, notes):
    _REGISTRY[name] = FmEntry(name, dim, hf_id, family, notes)


_add("unispeech-sat", 768, "microsoft/unispeech-sat-base", "wav2vec2-like",
     "full waveform per forward pass")
_add("wav2vec2", 768, "facebook/wav2vec2-base", "wav2vec2-like",
     "full waveform per forward pass")
_add("wavlm", 768, "microsoft/wavlm-base", "wav2vec2-like",
     "full waveform per forward pass")
_add("hubert", 768, "facebook/hubert-base-ls960", "wav2vec2-like",
     "full waveform per forward pass")
_add("whisper-encoder", 512, "openai/whisper-base", "whisper-encoder",
     "decoder discarded; upstream preprocessing pads/trims audio to a fixed 30 s window")
_add("imagebind-audio", 1024, None, "external",
     "needs a registered upstream encoder; upstream default clip handling applies")
_add("languagebind-audio", 768, None, "external",
     "needs a registered upstream encoder; upstream default clip handling applies")


def entries():
    return dict(_REGISTRY)


def lookup(name):
    key = name.lower()
    if key not in _REGISTRY:
        raise EncoderError(f"unknown foundation model {name!r}; known: {sorted(_REGISTRY)}")
    return _REGISTRY[key]


def expected_dim(name):
    return lookup(name).dim


def register(name, dim, builder, notes="custom encoder"):
    """Add or override an FM with a user-supplied encoder builder.

    `builder()` must return an encoder callable (list of waveforms -> list of
    [n_frames, dim] arrays). This is the integration point for ImageBind and
    LanguageBind audio encoders.
    """
    _add(name.lower(), dim, None, "custom", notes)
    _CUSTOM_BUILDERS[name.lower()] = builder


def build_encoder(name):
    """Instantiate the frozen encoder for `name` (imports torch lazily)."""
    entry = lookup(name)
    if entry.name in _CUSTOM_BUILDERS:
        return _CUSTOM_BUILDERS[entry.name]()
    if entry.family == "external":
        raise EncoderError(
            f"{entry.name} has no bundled loader; call fmextract.registry.register() "
            f"with an encoder built from its upstream repository")
    try:
        import torch
        from transformers import AutoFeatureExtractor, AutoModel, WhisperModel
    except ImportError as exc:
        raise EncoderError(
            f"loading {entry.name} needs the 'hf' extra (pip install fmextract[hf]): {exc}"
        ) from exc

    fe = AutoFeatureExtractor.from_pretrained(entry.hf_id)
    if entry.family == "whisper-encoder":
        model = WhisperModel.from_pretrained(entry.hf_id).encoder
    else:
        model = AutoModel.from_pretrained(entry.hf_id)
    model.eval()

    def encode(waves):
        outs = []
        with torch.no_grad():
            for wave in waves:
                inputs = fe(wave, sampling_rate=16_000, return_tensors="pt")
                key = "input_features" if "input_features" in inputs else "input_values"
                frames = model(inputs[key]).last_hidden_state
                outs.append(frames[0].cpu().numpy())
        return outs

    return encode
