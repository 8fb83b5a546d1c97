"""Exact ROC operating points and equal error rate.

Convention: fake is the positive class and scores are P(fake). At a threshold t,
FAR is the fraction of real utterances scored >= t and FRR the fraction of fake
utterances scored < t. Thresholds are the midpoints between consecutive distinct
scores plus -inf/+inf sentinels, so no score ever ties a threshold and FAR/FRR
are exact counts at every operating point. All metric arithmetic is float64.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MetricError


@dataclass
class RocCurve:
    thresholds: np.ndarray  # ascending, with -inf / +inf sentinels
    far: np.ndarray         # non-increasing
    frr: np.ndarray         # non-decreasing
    n_real: int
    n_fake: int
    score_min: float
    score_max: float


@dataclass
class EvalReport:
    split_name: str
    eer: float
    threshold: float
    n_real: int
    n_fake: int


def roc_points(scores, labels):
    """Operating points at every distinct-score midpoint, by exact counting."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise MetricError(f"scores and labels disagree in length: {scores.size} vs {labels.size}")
    fake = np.sort(scores[labels == 1])
    real = np.sort(scores[labels == 0])
    if fake.size == 0 or real.size == 0:
        raise MetricError("EER is undefined with a single class present")
    distinct = np.unique(scores)
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    thresholds = np.concatenate(([-np.inf], mids, [np.inf]))
    far = (real.size - np.searchsorted(real, thresholds, side="left")) / real.size
    frr = np.searchsorted(fake, thresholds, side="left") / fake.size
    return RocCurve(thresholds, far, frr, real.size, fake.size,
                    float(distinct[0]), float(distinct[-1]))


def compute_eer(curve):
    """(eer, threshold) at the FAR = FRR crossing.

    An exact FAR == FRR operating point wins (lowest threshold on ties);
    otherwise both rates are linearly interpolated between the bracketing
    points and the common crossing value is returned.
    """
    far, frr, thr = curve.far, curve.frr, curve.thresholds
    exact = np.nonzero(far == frr)[0]
    if exact.size:
        i = exact[0]
        return float(far[i]), float(thr[i])
    d = far - frr  # non-increasing; starts at +1, ends at -1
    i = int(np.nonzero(d < 0)[0][0]) - 1
    lam = d[i] / (d[i] - d[i + 1])
    # symmetric closed form for the common value of both interpolants at the
    # crossing; exactly invariant under the real<->fake + negation symmetry
    eer = (d[i] * (far[i + 1] + frr[i + 1]) - d[i + 1] * (far[i] + frr[i])) / (2.0 * (d[i] - d[i + 1]))
    t1, t2 = thr[i], thr[i + 1]
    if np.isfinite(t1) and np.isfinite(t2):
        threshold = t1 + lam * (t2 - t1)
    elif np.isfinite(t2):
        threshold = t2
    elif np.isfinite(t1):
        threshold = t1
    else:
        threshold = 0.5 * (curve.score_min + curve.score_max)  # all scores identical
    return float(eer), float(threshold)


def eer_from_scores(scores, labels):
    return compute_eer(roc_points(scores, labels))
