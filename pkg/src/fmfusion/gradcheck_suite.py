"""Finite-difference verification for every differentiable op and every model.

All checks run in float64 with central differences. Whole-model checks probe a
seeded subset of coordinates per parameter tensor (a full sweep over ~1M
parameters would take hours); op-level checks sweep every coordinate.

Check points are kept away from relu/maxpool kinks and the BCE clamp:
`verify_margins` walks the recorded tape and rejects a base point whose
nondifferentiable ops sit closer to a kink than any +-eps perturbation could
reach. The fixed seeds below were chosen to satisfy those margins.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor, gradcheck
from .errors import NumericError
from .models import CnnConfig, CnnModel, ConcatConfig, ConcatModel, FcnConfig, FcnModel, ScarConfig, ScarModel
from .rng import Rng
from .training import BCE_CLAMP, bce_loss

TOLERANCE = 1e-4
EPS = 1e-5
KINK_MARGIN = 1e-4  # safe: eps * max activation magnitude stays below this
MODEL_COORDS_PER_TENSOR = 20


@dataclass
class CheckRow:
    name: str
    max_rel_err: float
    tolerance: float = TOLERANCE

    @property
    def passed(self):
        return self.max_rel_err < self.tolerance


def verify_margins(tape, margin=KINK_MARGIN):
    """Reject base points that sit within `margin` of a nondifferentiable edge."""
    for node in tape.nodes:
        if node.op == "relu":
            closest = float(np.abs(node.inputs[0].data).min())
            if closest < margin:
                raise NumericError(f"relu input within {closest:.2e} of a kink; reseed the check")
        elif node.op == "adaptive_maxpool1d":
            xd = node.inputs[0].data
            t_out = node.output.data.shape[-1]
            length = xd.shape[-1]
            for i in range(t_out):
                a, b = (i * length) // t_out, ((i + 1) * length) // t_out
                seg = np.sort(xd[:, :, a:b], axis=-1)
                if seg.shape[-1] >= 2:
                    top, runner = seg[:, :, -1], seg[:, :, -2]
                    # ties between exact relu zeros are inert: the relu margin
                    # already guarantees their preactivations cannot flip
                    hazard = (top - runner < margin) & ~((top == 0.0) & (runner == 0.0))
                    if hazard.any():
                        gap = float((top - runner)[hazard].min())
                        raise NumericError(f"maxpool tie within {gap:.2e}; reseed the check")
        elif node.op == "bce_loss":
            pd = node.inputs[0].data
            if pd.min() < 10 * BCE_CLAMP or pd.max() > 1 - 10 * BCE_CLAMP:
                raise NumericError("bce input too close to the clamp; reseed the check")


def _randn(rng, shape, scale=1.0):
    return Tensor((rng.normal(int(np.prod(shape))).reshape(shape) * scale),
                  requires_grad=True, dtype=np.float64)


def _checked(name, f, points):
    tape = Tape()
    f(points, tape)
    verify_margins(tape)
    return CheckRow(name, gradcheck(f, points, eps=EPS))


def _sum(x, tape):
    return ad.reduce_sum(x, tape)


def op_checks():
    rows = []
    rng = Rng(101)

    x, w, b = _randn(rng, (3, 4)), _randn(rng, (4, 5), 0.5), _randn(rng, (5,))
    rows.append(_checked("dense", lambda p, t: _sum(ad.dense(p[0], p[1], p[2], t), t), [x, w, b]))

    x = _randn(rng, (2, 1, 9))
    k = _randn(rng, (4, 1, 3), 0.5)
    b = _randn(rng, (4,))
    rows.append(_checked("conv1d", lambda p, t: _sum(ad.conv1d(p[0], p[1], p[2], t), t), [x, k, b]))

    x = _randn(rng, (2, 3, 7))
    rows.append(_checked("adaptive_maxpool1d",
                         lambda p, t: _sum(ad.adaptive_maxpool1d(p[0], 3, t), t), [x]))

    q, kk, v = _randn(rng, (2, 3, 4)), _randn(rng, (2, 5, 4)), _randn(rng, (2, 5, 6))
    rows.append(_checked("sdpa", lambda p, t: _sum(ad.sdpa(p[0], p[1], p[2], t), t), [q, kk, v]))

    xq, xkv = _randn(rng, (1, 3, 8)), _randn(rng, (1, 4, 8))
    wq, wk, wv = (_randn(rng, (8, 8), 0.4) for _ in range(3))
    rows.append(_checked(
        "multi_head_attention",
        lambda p, t: _sum(ad.multi_head_attention(p[0], p[1], p[2], p[3], p[4], 2, t), t),
        [xq, xkv, wq, wk, wv]))

    x = _randn(rng, (4, 6))
    rows.append(_checked(
        "dropout",
        lambda p, t: _sum(ad.dropout(p[0], 0.3, Rng(7), True, t), t), [x]))

    x = Tensor(rng.normal(24).reshape(4, 6) + np.where(rng.normal(24).reshape(4, 6) >= 0, 0.5, -0.5),
               requires_grad=True, dtype=np.float64)
    rows.append(_checked("relu", lambda p, t: _sum(ad.relu(p[0], t), t), [x]))

    x = _randn(rng, (4, 6))
    rows.append(_checked("sigmoid", lambda p, t: _sum(ad.sigmoid(p[0], t), t), [x]))
    return rows


def _model_row(name, model, inputs, labels, dropout_seed):
    points = list(model.parameters()) + list(inputs)
    for p in points:
        p.data = p.data.astype(np.float64)
        p.requires_grad = True

    def f(pts, tape):
        out = model.forward(*inputs, tape=tape, rng=Rng(dropout_seed), training=True)
        return bce_loss(out, labels, tape)

    tape = Tape()
    f(points, tape)
    verify_margins(tape)
    err = gradcheck(f, points, eps=EPS, max_coords_per_tensor=MODEL_COORDS_PER_TENSOR)
    return CheckRow(f"bce+{name}", err)


def model_checks():
    rows = []
    labels = np.array([0.0, 1.0])

    rng = Rng(3000)
    model = FcnModel.create(FcnConfig(input_dim=6, dropout_p=0.2), rng)
    x = _randn(rng, (2, 6))
    rows.append(_model_row("fcn", model, [x], labels, dropout_seed=11))

    rng = Rng(3006)
    model = CnnModel.create(CnnConfig(input_dim=10, tokens=3), rng)
    x = _randn(rng, (2, 10))
    rows.append(_model_row("cnn", model, [x], labels, dropout_seed=13))

    rng = Rng(3000)
    model = ConcatModel.create(ConcatConfig(dim_a=9, dim_b=11, tokens=3), rng)
    xa, xb = _randn(rng, (2, 9)), _randn(rng, (2, 11))
    rows.append(_model_row("concat", model, [xa, xb], labels, dropout_seed=17))

    rng = Rng(3000)
    model = ScarModel.create(ScarConfig(dim_a=9, dim_b=11, tokens=3), rng)
    xa, xb = _randn(rng, (2, 9)), _randn(rng, (2, 11))
    rows.append(_model_row("scar", model, [xa, xb], labels, dropout_seed=19))
    return rows


def run_suite():
    """One row per differentiable op, then one per model."""
    return op_checks() + model_checks()
