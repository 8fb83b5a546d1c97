"""The four embedding-level classifiers: FCN, CNN, concat fusion, SCAR.

Shared building blocks:
  - conv block: 1D conv (32 kernels, size 3) -> relu -> adaptive max pool to a
    fixed token count T, viewed as a sequence of T tokens with 32 channels.
  - FCN stack: dense 512 -> relu -> dropout -> dense 128 -> relu -> dropout ->
    dense 1 -> sigmoid. The two hidden widths are architecture constants.

SCAR runs two cross-attention exchanges between the branch token sequences
(each branch queries the other, the second stage consuming the first stage's
outputs), then a projection-free self-attention refinement per branch, flattens
and concatenates, and classifies with the FCN stack. Concat fusion is SCAR with
both attention blocks removed. Attention heads split the 32 channels; there is
no output projection and no residual/normalization anywhere.
"""

import json
import math
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import (
    ConfigError,
    MagicError,
    ShapeError,
    TruncatedFileError,
    ValidationError,
    VersionError,
)

HIDDEN1, HIDDEN2 = 512, 128

CKPT_MAGIC = b"SCKP"
CKPT_VERSION = 1


@dataclass
class FcnConfig:
    input_dim: int
    dropout_p: float = 0.2

    def validate(self):
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be positive, got {self.input_dim}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")


@dataclass
class CnnConfig:
    input_dim: int
    tokens: int = 32
    channels: int = 32
    kernel: int = 3
    dropout_p: float = 0.2

    def validate(self):
        if self.input_dim < self.kernel:
            raise ConfigError(f"input_dim {self.input_dim} shorter than kernel {self.kernel}")
        if self.tokens < 1 or self.channels < 1 or self.kernel < 1:
            raise ConfigError("tokens, channels and kernel must be positive")
        if self.input_dim - self.kernel + 1 < self.tokens:
            raise ConfigError(
                f"conv output of {self.input_dim - self.kernel + 1} cannot be pooled into {self.tokens} tokens")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")


@dataclass
class ConcatConfig:
    dim_a: int
    dim_b: int
    tokens: int = 32
    channels: int = 32
    kernel: int = 3
    dropout_p: float = 0.2

    def validate(self):
        for d, name in ((self.dim_a, "dim_a"), (self.dim_b, "dim_b")):
            if d - self.kernel + 1 < self.tokens:
                raise ConfigError(f"{name}={d} too small for kernel {self.kernel} and {self.tokens} tokens")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")


@dataclass
class ScarConfig:
    dim_a: int
    dim_b: int
    tokens: int = 32
    channels: int = 32
    kernel: int = 3
    heads_cross: int = 2
    heads_refine: int = 2
    dropout_p: float = 0.2

    def validate(self):
        ConcatConfig(self.dim_a, self.dim_b, self.tokens, self.channels,
                     self.kernel, self.dropout_p).validate()
        if self.heads_cross < 1 or self.heads_refine < 1:
            raise ConfigError("head counts must be positive")
        if self.channels % self.heads_cross or self.channels % self.heads_refine:
            raise ConfigError(
                f"channels={self.channels} must be divisible by head counts "
                f"({self.heads_cross}, {self.heads_refine})")

    @property
    def head_dim(self):
        return self.channels // self.heads_cross


# ---------------------------------------------------------------------------
# parameter specs and initialization


def _fcn_spec(prefix, in_dim):
    return [
        (f"{prefix}fc1.weight", (in_dim, HIDDEN1), (in_dim, HIDDEN1)),
        (f"{prefix}fc1.bias", (HIDDEN1,), None),
        (f"{prefix}fc2.weight", (HIDDEN1, HIDDEN2), (HIDDEN1, HIDDEN2)),
        (f"{prefix}fc2.bias", (HIDDEN2,), None),
        (f"{prefix}out.weight", (HIDDEN2, 1), (HIDDEN2, 1)),
        (f"{prefix}out.bias", (1,), None),
    ]


def _conv_spec(prefix, channels, kernel):
    fan = (kernel, channels * kernel)  # single input channel
    return [
        (f"{prefix}.kernels", (channels, 1, kernel), fan),
        (f"{prefix}.bias", (channels,), None),
    ]


def _attn_spec(channels):
    spec = []
    for stage in (1, 2):
        for branch in ("a", "b"):
            for role in ("q", "k", "v"):
                spec.append((f"xattn.w{role}{stage}_{branch}", (channels, channels),
                             (channels, channels)))
    return spec


def init_params(spec, rng):
    """Glorot-uniform weights (variance 2/(fan_in+fan_out)), zero biases."""
    params = {}
    for name, shape, fan in spec:
        size = int(np.prod(shape))
        if fan is None:
            data = np.zeros(shape, dtype=np.float32)
        else:
            limit = math.sqrt(6.0 / (fan[0] + fan[1]))
            u = rng.uniform(size)
            data = ((u * 2.0 - 1.0) * limit).reshape(shape).astype(np.float32)
        params[name] = Tensor(data, requires_grad=True, dtype=None)
    return params


# ---------------------------------------------------------------------------
# forward building blocks


def _fcn_stack(params, prefix, x, p_drop, tape, rng, training):
    h = ad.relu(ad.dense(x, params[f"{prefix}fc1.weight"], params[f"{prefix}fc1.bias"], tape), tape)
    h = ad.dropout(h, p_drop, rng, training, tape)
    h = ad.relu(ad.dense(h, params[f"{prefix}fc2.weight"], params[f"{prefix}fc2.bias"], tape), tape)
    h = ad.dropout(h, p_drop, rng, training, tape)
    return ad.sigmoid(ad.dense(h, params[f"{prefix}out.weight"], params[f"{prefix}out.bias"], tape), tape)


def _conv_tokens(params, prefix, x, tokens, tape):
    """x[n,d] -> token sequence [n, T, channels]."""
    n, d = x.data.shape
    h = ad.reshape(x, (n, 1, d), tape)
    h = ad.conv1d(h, params[f"{prefix}.kernels"], params[f"{prefix}.bias"], tape)
    h = ad.relu(h, tape)
    h = ad.adaptive_maxpool1d(h, tokens, tape)
    return ad.transpose_last2(h, tape)


def nested_cross_attention(za, zb, weights, heads, tape=None):
    """Two sequential cross-attention exchanges between branch token sequences.

    Stage 1 lets each branch attend to the other's tokens; stage 2 repeats the
    exchange on the stage-1 outputs with its own projections.
    """
    za1 = ad.multi_head_attention(za, zb, weights["xattn.wq1_a"], weights["xattn.wk1_b"],
                                  weights["xattn.wv1_b"], heads, tape)
    zb1 = ad.multi_head_attention(zb, za, weights["xattn.wq1_b"], weights["xattn.wk1_a"],
                                  weights["xattn.wv1_a"], heads, tape)
    za2 = ad.multi_head_attention(za1, zb1, weights["xattn.wq2_a"], weights["xattn.wk2_b"],
                                  weights["xattn.wv2_b"], heads, tape)
    zb2 = ad.multi_head_attention(zb1, za1, weights["xattn.wq2_b"], weights["xattn.wk2_a"],
                                  weights["xattn.wv2_a"], heads, tape)
    return za2, zb2


def self_attention_refine(z, heads, tape=None):
    """Projection-free per-head refinement: softmax(Z Z^T / sqrt(d_k)) Z."""
    d = z.data.shape[-1]
    if d % heads:
        raise ConfigError(f"refinement: width {d} not divisible by {heads} heads")
    if heads == 1:
        return ad.sdpa(z, z, z, tape)
    dk = d // heads
    outs = []
    for h in range(heads):
        zh = ad.slice_last(z, h * dk, (h + 1) * dk, tape)
        outs.append(ad.sdpa(zh, zh, zh, tape))
    return ad.concat_last(outs, tape)


# ---------------------------------------------------------------------------
# models


class _Model:
    kind = None
    config_cls = None

    def __init__(self, config, params):
        self.config = config
        self.params = params

    @classmethod
    def param_spec(cls, config):
        raise NotImplementedError

    @classmethod
    def create(cls, config, rng):
        config.validate()
        return cls(config, init_params(cls.param_spec(config), rng))

    def parameters(self):
        return list(self.params.values())

    def named_parameters(self):
        return list(self.params.items())

    def param_count(self):
        return int(sum(p.data.size for p in self.params.values()))

    def n_inputs(self):
        return 2 if self.kind in ("concat", "scar") else 1


class FcnModel(_Model):
    kind = "fcn"
    config_cls = FcnConfig

    @classmethod
    def param_spec(cls, config):
        return _fcn_spec("", config.input_dim)

    def forward(self, x, tape=None, rng=None, training=False):
        if x.data.ndim != 2 or x.data.shape[1] != self.config.input_dim:
            raise ShapeError(f"fcn expects [n, {self.config.input_dim}], got {x.data.shape}")
        return _fcn_stack(self.params, "", x, self.config.dropout_p, tape, rng, training)


class CnnModel(_Model):
    kind = "cnn"
    config_cls = CnnConfig

    @classmethod
    def param_spec(cls, config):
        return (_conv_spec("conv", config.channels, config.kernel)
                + _fcn_spec("", config.channels * config.tokens))

    def forward(self, x, tape=None, rng=None, training=False):
        cfg = self.config
        if x.data.ndim != 2 or x.data.shape[1] != cfg.input_dim:
            raise ShapeError(f"cnn expects [n, {cfg.input_dim}], got {x.data.shape}")
        tok = _conv_tokens(self.params, "conv", x, cfg.tokens, tape)
        flat = ad.reshape(tok, (x.data.shape[0], cfg.channels * cfg.tokens), tape)
        return _fcn_stack(self.params, "", flat, cfg.dropout_p, tape, rng, training)


class _FusionModel(_Model):
    def _check_inputs(self, xa, xb):
        cfg = self.config
        if xa.data.ndim != 2 or xa.data.shape[1] != cfg.dim_a:
            raise ShapeError(f"{self.kind} branch a expects [n, {cfg.dim_a}], got {xa.data.shape}")
        if xb.data.ndim != 2 or xb.data.shape[1] != cfg.dim_b:
            raise ShapeError(f"{self.kind} branch b expects [n, {cfg.dim_b}], got {xb.data.shape}")
        if xa.data.shape[0] != xb.data.shape[0]:
            raise ShapeError(f"branch batches disagree: {xa.data.shape[0]} vs {xb.data.shape[0]}")


class ConcatModel(_FusionModel):
    kind = "concat"
    config_cls = ConcatConfig

    @classmethod
    def param_spec(cls, config):
        return (_conv_spec("conv_a", config.channels, config.kernel)
                + _conv_spec("conv_b", config.channels, config.kernel)
                + _fcn_spec("", 2 * config.channels * config.tokens))

    def forward(self, xa, xb, tape=None, rng=None, training=False):
        self._check_inputs(xa, xb)
        cfg = self.config
        n = xa.data.shape[0]
        za = _conv_tokens(self.params, "conv_a", xa, cfg.tokens, tape)
        zb = _conv_tokens(self.params, "conv_b", xb, cfg.tokens, tape)
        fa = ad.reshape(za, (n, cfg.channels * cfg.tokens), tape)
        fb = ad.reshape(zb, (n, cfg.channels * cfg.tokens), tape)
        fused = ad.concat_last([fa, fb], tape)
        return _fcn_stack(self.params, "", fused, cfg.dropout_p, tape, rng, training)


class ScarModel(_FusionModel):
    kind = "scar"
    config_cls = ScarConfig

    @classmethod
    def param_spec(cls, config):
        return (_conv_spec("conv_a", config.channels, config.kernel)
                + _conv_spec("conv_b", config.channels, config.kernel)
                + _attn_spec(config.channels)
                + _fcn_spec("", 2 * config.channels * config.tokens))

    def fuse_tokens(self, xa, xb, tape=None):
        """Refined per-branch token sequences (Za, Zb), each [n, T, channels]."""
        self._check_inputs(xa, xb)
        cfg = self.config
        za = _conv_tokens(self.params, "conv_a", xa, cfg.tokens, tape)
        zb = _conv_tokens(self.params, "conv_b", xb, cfg.tokens, tape)
        za2, zb2 = nested_cross_attention(za, zb, self.params, cfg.heads_cross, tape)
        za3 = self_attention_refine(za2, cfg.heads_refine, tape)
        zb3 = self_attention_refine(zb2, cfg.heads_refine, tape)
        return za3, zb3

    def forward(self, xa, xb, tape=None, rng=None, training=False):
        cfg = self.config
        n = xa.data.shape[0]
        za3, zb3 = self.fuse_tokens(xa, xb, tape)
        fa = ad.reshape(za3, (n, cfg.channels * cfg.tokens), tape)
        fb = ad.reshape(zb3, (n, cfg.channels * cfg.tokens), tape)
        fused = ad.concat_last([fa, fb], tape)
        return _fcn_stack(self.params, "", fused, cfg.dropout_p, tape, rng, training)


MODEL_CLASSES = {cls.kind: cls for cls in (FcnModel, CnnModel, ConcatModel, ScarModel)}


def build_model(kind, config, rng):
    if kind not in MODEL_CLASSES:
        raise ConfigError(f"unknown model kind {kind!r}")
    return MODEL_CLASSES[kind].create(config, rng)


# ---------------------------------------------------------------------------
# checkpoint container ("SCKP"): magic, version u16, JSON config block,
# then named tensors as u16-name + u8-rank + u32-dims + fp32 payload, LE.


def save_checkpoint(model, path):
    cfg = {"kind": model.kind, **asdict(model.config)}
    cfg_bytes = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks = [CKPT_MAGIC, struct.pack("<H", CKPT_VERSION),
              struct.pack("<I", len(cfg_bytes)), cfg_bytes]
    for name, p in model.params.items():
        name_b = name.encode("utf-8")
        arr = p.data
        chunks.append(struct.pack("<H", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(buf):
            raise TruncatedFileError(f"checkpoint ends inside {what}", pos)
        out = buf[pos:pos + n]
        pos += n
        return out

    magic = take(4, "magic")
    if magic != CKPT_MAGIC:
        raise MagicError(f"bad checkpoint magic {magic!r}, expected {CKPT_MAGIC!r}")
    (version,) = struct.unpack("<H", take(2, "version"))
    if version != CKPT_VERSION:
        raise VersionError(f"unsupported checkpoint version {version}")
    (cfg_len,) = struct.unpack("<I", take(4, "config length"))
    try:
        cfg = json.loads(take(cfg_len, "config block").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"checkpoint config block is not valid JSON: {exc}") from exc
    kind = cfg.pop("kind", None)
    if kind not in MODEL_CLASSES:
        raise ValidationError(f"checkpoint names unknown model kind {kind!r}")
    cls = MODEL_CLASSES[kind]
    try:
        config = cls.config_cls(**cfg)
    except TypeError as exc:
        raise ValidationError(f"checkpoint config does not match {kind}: {exc}") from exc
    config.validate()

    tensors = {}
    while pos < len(buf):
        (name_len,) = struct.unpack("<H", take(2, "tensor name length"))
        name = take(name_len, "tensor name").decode("utf-8")
        (rank,) = struct.unpack("<B", take(1, f"rank of {name}"))
        shape = struct.unpack(f"<{rank}I", take(4 * rank, f"dims of {name}"))
        n_items = int(np.prod(shape)) if rank else 1
        payload = take(4 * n_items, f"payload of {name}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(shape)

    expected = cls.param_spec(config)
    if [name for name, _, _ in expected] != list(tensors):
        raise ValidationError("checkpoint tensor names do not match the declared config")
    params = {}
    for name, shape, _ in expected:
        if tensors[name].shape != shape:
            raise ValidationError(
                f"checkpoint tensor {name} has shape {tensors[name].shape}, expected {shape}")
        params[name] = Tensor(tensors[name], requires_grad=True, dtype=None)
    return cls(config, params)
