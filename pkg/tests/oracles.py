"""Independent reference implementations used by unit and acceptance tests.

Everything here is deliberately written with plain python / plain numpy,
separate from the engine's code paths, so tests compare two independent
computations.
"""

import numpy as np


def brute_force_eer(scores, labels):
    """EER by recounting FAR/FRR over every threshold interval with python loops."""
    scores = [float(s) for s in scores]
    real = [s for s, l in zip(scores, labels) if l == 0]
    fake = [s for s, l in zip(scores, labels) if l == 1]
    distinct = sorted(set(scores))
    cands = [distinct[0] - 1.0]
    cands += [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]
    cands += [distinct[-1] + 1.0]
    pts = []
    for t in cands:
        k_far = sum(1 for s in real if s >= t)
        k_frr = sum(1 for s in fake if s < t)
        pts.append((k_far, k_frr))
    nr, nf = len(real), len(fake)
    for k_far, k_frr in pts:  # exact rational tie, lowest threshold first
        if k_far * nf == k_frr * nr:
            return k_far / nr
    for (kf1, kr1), (kf2, kr2) in zip(pts, pts[1:]):
        f1, r1 = kf1 / nr, kr1 / nf
        f2, r2 = kf2 / nr, kr2 / nf
        d1, d2 = f1 - r1, f2 - r2
        if d1 > 0 > d2:
            lam = d1 / (d1 - d2)
            return 0.5 * ((f1 + lam * (f2 - f1)) + (r1 + lam * (r2 - r1)))
    raise AssertionError("no crossing found")


def random_score_set(rng, max_n=100):
    """Random (scores, labels) with both classes present; mixes tie-heavy cases."""
    n = int(rng.integers(2, max_n + 1))
    labels = rng.integers(0, 2, size=n)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    kind = rng.integers(0, 3)
    if kind == 0:
        scores = rng.uniform(0, 1, size=n)
    elif kind == 1:  # heavy ties
        scores = np.round(rng.uniform(0, 1, size=n), 1)
    else:  # informative sigmoid-like scores
        scores = 1.0 / (1.0 + np.exp(-(labels * 2.0 - 1.0 + rng.standard_normal(n))))
    return scores, labels


def straight_line_scar_attention(za, zb, w, heads):
    """Direct float64 evaluation of the six attention equations, head by head.

    Returns (Za_stage2, Zb_stage2, Za_refined, Zb_refined).
    """
    d = za.shape[-1]
    dk = d // heads

    def softmax(s):
        e = np.exp(s)
        return e / e.sum(axis=-1, keepdims=True)

    def cross(q_in, kv_in, wq, wk, wv):
        q, k, v = q_in @ wq, kv_in @ wk, kv_in @ wv
        outs = []
        for h in range(heads):
            sl = slice(h * dk, (h + 1) * dk)
            s = q[..., sl] @ np.swapaxes(k[..., sl], -1, -2) / np.sqrt(dk)
            outs.append(softmax(s) @ v[..., sl])
        return np.concatenate(outs, axis=-1)

    za1 = cross(za, zb, w["xattn.wq1_a"], w["xattn.wk1_b"], w["xattn.wv1_b"])
    zb1 = cross(zb, za, w["xattn.wq1_b"], w["xattn.wk1_a"], w["xattn.wv1_a"])
    za2 = cross(za1, zb1, w["xattn.wq2_a"], w["xattn.wk2_b"], w["xattn.wv2_b"])
    zb2 = cross(zb1, za1, w["xattn.wq2_b"], w["xattn.wk2_a"], w["xattn.wv2_a"])

    def refine(z):
        outs = []
        for h in range(heads):
            sl = slice(h * dk, (h + 1) * dk)
            zh = z[..., sl]
            s = zh @ np.swapaxes(zh, -1, -2) / np.sqrt(dk)
            outs.append(softmax(s) @ zh)
        return np.concatenate(outs, axis=-1)

    return za2, zb2, refine(za2), refine(zb2)
