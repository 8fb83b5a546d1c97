"""Adam/BCE training with early stopping on dev EER, plus deterministic scoring.

Scoring always runs the forward pass on fixed-size chunks of SCORE_CHUNK rows,
zero-padding the final chunk. BLAS kernels pick different reduction orders for
different matrix shapes, so this is what makes batched scoring and one-by-one
scoring bit-identical, and what lets a later eval reproduce a recorded dev EER
exactly.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Tensor, backward
from .errors import ConfigError, NumericError, ShapeError, ValidationError
from .metrics import eer_from_scores
from .rng import Rng

BCE_CLAMP = 1e-7
SCORE_CHUNK = 128
IMPROVEMENT_TOL = 1e-4  # dev-EER drop that counts as progress for early stopping


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    dropout: float = 0.2
    max_epochs: int = 50
    patience: int = 5
    monitor: str = "dev_eer"
    seed: int = 0

    def validate(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ConfigError(f"betas must lie in [0, 1), got ({self.beta1}, {self.beta2})")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not 0 <= self.dropout < 1:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.eps_adam <= 0:
            raise ConfigError(f"eps_adam must be positive, got {self.eps_adam}")
        if self.monitor != "dev_eer":
            raise ConfigError(f"only dev_eer monitoring is supported, got {self.monitor!r}")


@dataclass
class SplitData:
    """One split's features (one array per model input) and labels."""
    xs: tuple
    y: np.ndarray

    def __len__(self):
        return len(self.y)


class AdamState:
    """Per-parameter first/second moment accumulators and a step counter."""

    def __init__(self, params):
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.t = 0


def bce_loss(p, y, tape=None):
    """Binary cross-entropy, mean over the batch; p clamped to [1e-7, 1 - 1e-7]."""
    pd = p.data
    y_arr = np.asarray(y)
    if y_arr.size != pd.size:
        raise ShapeError(f"bce_loss: {pd.size} predictions but {y_arr.size} labels")
    yd = y_arr.reshape(pd.shape).astype(pd.dtype)
    lo = pd.dtype.type(BCE_CLAMP)
    hi = pd.dtype.type(1.0) - lo
    pc = np.clip(pd, lo, hi)
    val = -(yd * np.log(pc) + (1.0 - yd) * np.log1p(-pc)).mean(dtype=pd.dtype)
    out = Tensor(np.asarray(val).reshape(()), dtype=None)

    def bw(g, needs):
        if not needs[0]:
            return (None,)
        inside = (pd > lo) & (pd < hi)  # clamped predictions get no gradient
        dp = np.where(inside, (pc - yd) / (pc * (1.0 - pc)), 0.0).astype(pd.dtype)
        return (g * dp / pd.dtype.type(pd.size),)

    if tape is not None:
        tape.record("bce_loss", (p,), out, bw)
    return out


def adam_step(params, grads, state, cfg):
    """Bias-corrected Adam update, in place; aborts on non-finite gradients."""
    for name in params:
        if not np.isfinite(grads[name]).all():
            raise NumericError(f"non-finite gradient for parameter {name!r} at step {state.t + 1}")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= cfg.lr * (m / corr1) / (np.sqrt(v / corr2) + cfg.eps_adam)


def train_epoch(model, data, cfg, state, rng):
    """One pass: seeded shuffle, fixed batch order, last partial batch kept."""
    n = len(data)
    if n == 0:
        raise ValidationError("cannot train on an empty split")
    perm = rng.permutation(n)
    losses = []
    for start in range(0, n, cfg.batch_size):
        idx = perm[start:start + cfg.batch_size]
        xs = [Tensor(x[idx]) for x in data.xs]
        tape = Tape()
        p = model.forward(*xs, tape=tape, rng=rng, training=True)
        loss = bce_loss(p, data.y[idx], tape)
        backward(loss, tape, params=model.parameters())
        grads = {name: t.grad for name, t in model.params.items()}
        adam_step(model.params, grads, state, cfg)
        losses.append(float(loss.data))
    return float(np.mean(losses))


def score_dataset(model, xs):
    """P(fake) per row, inference mode, order preserved.

    Every chunk is padded to SCORE_CHUNK rows so the result is independent of
    how callers batch their requests.
    """
    xs = [np.asarray(x, dtype=np.float32) for x in xs]
    n = xs[0].shape[0]
    out = np.empty(n, dtype=np.float32)
    for start in range(0, n, SCORE_CHUNK):
        end = min(start + SCORE_CHUNK, n)
        m = end - start
        batch = []
        for x in xs:
            if m < SCORE_CHUNK:
                padded = np.zeros((SCORE_CHUNK, x.shape[1]), dtype=x.dtype)
                padded[:m] = x[start:end]
            else:
                padded = x[start:end]
            batch.append(Tensor(padded, dtype=None))
        p = model.forward(*batch, tape=None, training=False)
        out[start:end] = p.data[:m, 0]
    return out


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_eer: float
    elapsed_ms: int


@dataclass
class FitResult:
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_dev_eer: float = float("inf")
    best_dev_threshold: float = float("nan")
    stopped_early: bool = False


def fit(model, train_data, dev_data, cfg):
    """Train with early stopping; the model ends up holding the best checkpoint.

    The checkpoint tracks the running argmin of dev EER (earliest epoch on
    ties); the patience counter only resets on improvements larger than
    IMPROVEMENT_TOL, so a plateau of `patience` epochs stops the run.
    """
    cfg.validate()
    if len(train_data) == 0 or len(dev_data) == 0:
        raise ValidationError("fit needs non-empty train and dev splits")
    rng = Rng(cfg.seed)
    state = AdamState(model.params)
    result = FitResult()
    best_snapshot = None
    best_eer = float("inf")
    bad_epochs = 0
    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        train_loss = train_epoch(model, train_data, cfg, state, rng)
        scores = score_dataset(model, dev_data.xs)
        eer, thr = eer_from_scores(scores, dev_data.y)
        elapsed_ms = int((time.perf_counter() - t0) * 1000)
        result.history.append(EpochStats(epoch, train_loss, eer, elapsed_ms))
        if eer < best_eer - IMPROVEMENT_TOL:
            bad_epochs = 0
        else:
            bad_epochs += 1
        if eer < best_eer:
            best_eer = eer
            best_snapshot = {name: p.data.copy() for name, p in model.params.items()}
            result.best_epoch = epoch
            result.best_dev_eer = eer
            result.best_dev_threshold = thr
        if bad_epochs >= cfg.patience:
            result.stopped_early = True
            break
    for name, p in model.params.items():
        p.data = best_snapshot[name]
    return result
