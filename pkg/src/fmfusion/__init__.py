"""Training and evaluation engine for embedding-level deepfake classifiers.

Works on FMEB files of pooled foundation-model representations. Ships a
deterministic numpy tensor engine with reverse-mode autodiff, four downstream
models (fcn, cnn, concat fusion, scar nested cross-attention fusion), an
Adam/BCE trainer with early stopping, exact EER scoring, and a synthetic
dataset generator with a closed-form optimal-EER oracle.
"""

from .autodiff import Tape, Tensor, backward, gradcheck
from .fmeb import (
    EmbeddingRecord,
    EmbeddingSet,
    PairedDataset,
    pair_by_utterance,
    read_fmeb,
    write_fmeb,
)
from .metrics import EvalReport, RocCurve, compute_eer, eer_from_scores, roc_points
from .models import (
    CnnConfig,
    CnnModel,
    ConcatConfig,
    ConcatModel,
    FcnConfig,
    FcnModel,
    ScarConfig,
    ScarModel,
    build_model,
    load_checkpoint,
    nested_cross_attention,
    save_checkpoint,
    self_attention_refine,
)
from .rng import Rng
from .synth import SynthConfig, bayes_oracle_eer, synth_generate
from .training import (
    AdamState,
    SplitData,
    TrainConfig,
    adam_step,
    bce_loss,
    fit,
    score_dataset,
    train_epoch,
)

__version__ = "0.1.0"
