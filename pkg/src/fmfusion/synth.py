"""Synthetic two-FM Gaussian datasets with a closed-form Bayes EER oracle.

Each pseudo-FM vector is Gaussian noise N(0, sigma^2) in every coordinate; the
configured informative coordinates get a label-dependent mean of +s/2 (fake)
or -s/2 (real). The informative index sets of the two FMs are disjoint and all
draws are independent, so fusing the FMs is strictly more informative than
either one alone, and the optimal detector has a known EER:

    sum of k informative coords ~ Normal(+-k*s/2, k*sigma^2)
    EER = Phi(-sqrt(k)*s / (2*sigma)),    fused: k = k_a + k_b
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .fmeb import (
    SPLIT_DEV,
    SPLIT_NAMES,
    SPLIT_TEST,
    SPLIT_TRAIN,
    EmbeddingRecord,
    EmbeddingSet,
)
from .rng import Rng


@dataclass
class SynthConfig:
    dim_a: int = 64
    dim_b: int = 96
    n_train: int = 2000
    n_dev: int = 500
    n_test: int = 1000
    separation: float = 2.0
    sigma: float = 1.0
    informative_dims_a: list = field(default_factory=lambda: [0, 1, 2, 3])
    informative_dims_b: list = field(default_factory=lambda: [4, 5, 6, 7])
    seed: int = 0

    def validate(self):
        if self.dim_a < 1 or self.dim_b < 1:
            raise ConfigError(f"dims must be positive, got ({self.dim_a}, {self.dim_b})")
        for n, name in ((self.n_train, "n_train"), (self.n_dev, "n_dev"), (self.n_test, "n_test")):
            if n < 0:
                raise ConfigError(f"{name} must be non-negative, got {n}")
        if self.separation < 0:
            raise ConfigError(f"separation must be non-negative, got {self.separation}")
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        da = list(self.informative_dims_a)
        db = list(self.informative_dims_b)
        if len(set(da)) != len(da) or len(set(db)) != len(db):
            raise ConfigError("informative dim lists contain duplicates")
        if any(not 0 <= i < self.dim_a for i in da):
            raise ConfigError(f"informative_dims_a out of range for dim_a={self.dim_a}")
        if any(not 0 <= i < self.dim_b for i in db):
            raise ConfigError(f"informative_dims_b out of range for dim_b={self.dim_b}")
        if set(da) & set(db):
            raise ConfigError(f"informative dim sets must be disjoint, shared: {sorted(set(da) & set(db))}")


def synth_generate(cfg):
    """Two aligned EmbeddingSets (same ids, labels, splits), seed-deterministic."""
    cfg.validate()
    rng = Rng(cfg.seed)
    recs_a, recs_b = [], []
    half = cfg.separation / 2.0
    for split, n in ((SPLIT_TRAIN, cfg.n_train), (SPLIT_DEV, cfg.n_dev), (SPLIT_TEST, cfg.n_test)):
        labels = (rng.uniform(n) <= 0.5).astype(np.int64)  # P(fake) = 1/2 exactly
        signs = np.where(labels == 1, half, -half)
        va = (rng.normal(n * cfg.dim_a).reshape(n, cfg.dim_a) * cfg.sigma)
        vb = (rng.normal(n * cfg.dim_b).reshape(n, cfg.dim_b) * cfg.sigma)
        va[:, cfg.informative_dims_a] += signs[:, None]
        vb[:, cfg.informative_dims_b] += signs[:, None]
        va = va.astype(np.float32)
        vb = vb.astype(np.float32)
        prefix = SPLIT_NAMES[split]
        for i in range(n):
            utt = f"{prefix}-{i:06d}"
            recs_a.append(EmbeddingRecord(utt, int(labels[i]), split, va[i]))
            recs_b.append(EmbeddingRecord(utt, int(labels[i]), split, vb[i]))
    return (EmbeddingSet("synth-a", cfg.dim_a, recs_a),
            EmbeddingSet("synth-b", cfg.dim_b, recs_b))


def bayes_oracle_eer(cfg, which):
    """EER of the Bayes-optimal detector for one pseudo-FM or their fusion."""
    cfg.validate()
    if which == "a":
        k = len(cfg.informative_dims_a)
    elif which == "b":
        k = len(cfg.informative_dims_b)
    elif which == "fused":
        k = len(cfg.informative_dims_a) + len(cfg.informative_dims_b)
    else:
        raise ConfigError(f"which must be 'a', 'b' or 'fused', got {which!r}")
    if k == 0 or cfg.separation == 0:
        return 0.5
    z = -math.sqrt(k) * cfg.separation / (2.0 * cfg.sigma)
    return 0.5 * math.erfc(-z / math.sqrt(2.0))
