"""Command-line surface: synth, train, eval, gradcheck, inspect.

Exit codes are a stable contract: 0 success, 2 usage, 3 data, 4 shape/config,
5 numeric. Every subcommand is deterministic given (flags, seed, input bytes);
wall-clock timing therefore goes to stderr and the persisted history log keeps
a zero elapsed_ms column.
"""

import argparse
import json
import sys
from dataclasses import asdict

from .errors import ConfigError, DataError, NumericError, ShapeError, ValidationError
from .fmeb import SPLIT_CODES, SPLIT_NAMES, pair_by_utterance, read_fmeb, write_fmeb
from .gradcheck_suite import run_suite
from .metrics import EvalReport, eer_from_scores
from .models import (
    CnnConfig,
    ConcatConfig,
    FcnConfig,
    MODEL_CLASSES,
    ScarConfig,
    load_checkpoint,
    save_checkpoint,
)
from .rng import Rng
from .synth import SynthConfig, bayes_oracle_eer, synth_generate
from .training import SplitData, TrainConfig, fit, score_dataset

FUSION_KINDS = ("concat", "scar")


class UsageError(Exception):
    pass


def _report_lines(report):
    s = report.split_name
    return [
        f"{s} EER: {report.eer * 100:.2f}% (threshold {report.threshold:.6f}, "
        f"{report.n_real} real / {report.n_fake} fake)",
        f"{s}_eer_raw {report.eer!r} {s}_threshold_raw {report.threshold!r}",
    ]


def _evaluate_split(model, data, split_name):
    scores = score_dataset(model, data.xs)
    eer, thr = eer_from_scores(scores, data.y)
    n_fake = int((data.y == 1).sum())
    return EvalReport(split_name, eer, thr, len(data.y) - n_fake, n_fake)


def _load_split_data(kind, paths, pairing):
    """{split_code: SplitData} for the given model kind and FMEB inputs."""
    if kind in FUSION_KINDS:
        a = read_fmeb(paths[0])
        b = read_fmeb(paths[1])
        paired = pair_by_utterance(a, b, pairing)
        dims = (a.dim, b.dim)
        out = {}
        for split in SPLIT_NAMES:
            xa, xb, y = paired.split_arrays(split)
            out[split] = SplitData((xa, xb), y)
        return dims, out
    es = read_fmeb(paths[0])
    out = {}
    for split in SPLIT_NAMES:
        x, y = es.split_arrays(split)
        out[split] = SplitData((x,), y)
    return (es.dim,), out


def _check_arity(kind, paths):
    want = 2 if kind in FUSION_KINDS else 1
    if len(paths) != want:
        raise UsageError(f"model {kind!r} takes exactly {want} FMEB input(s), got {len(paths)}")


def _build_model_config(kind, dims, tokens, dropout):
    if kind == "fcn":
        return FcnConfig(input_dim=dims[0], dropout_p=dropout)
    if kind == "cnn":
        return CnnConfig(input_dim=dims[0], tokens=tokens, dropout_p=dropout)
    if kind == "concat":
        return ConcatConfig(dim_a=dims[0], dim_b=dims[1], tokens=tokens, dropout_p=dropout)
    return ScarConfig(dim_a=dims[0], dim_b=dims[1], tokens=tokens, dropout_p=dropout)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    try:
        cfg = SynthConfig(
            dim_a=args.dim_a, dim_b=args.dim_b,
            n_train=args.n_train, n_dev=args.n_dev, n_test=args.n_test,
            separation=args.s, sigma=args.sigma,
            informative_dims_a=list(range(args.ka)),
            informative_dims_b=list(range(args.ka, args.ka + args.kb)),
            seed=args.seed)
        cfg.validate()
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    set_a, set_b = synth_generate(cfg)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_fmeb(set_a, out / "a.fmeb")
    write_fmeb(set_b, out / "b.fmeb")
    lines = []
    for which in ("a", "b", "fused"):
        eer = bayes_oracle_eer(cfg, which)
        lines.append(f"oracle {which}: EER {eer * 100:.2f}% (raw {eer!r})")
    (out / "oracle.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out / 'a.fmeb'} ({set_a.dim} dims) and {out / 'b.fmeb'} ({set_b.dim} dims)")
    for line in lines:
        print(line)
    return 0


def cmd_train(args):
    _check_arity(args.model, args.inputs)
    cfg = TrainConfig(lr=args.lr, batch_size=args.batch_size, beta1=args.beta1,
                      beta2=args.beta2, eps_adam=args.eps_adam, dropout=args.dropout,
                      max_epochs=args.max_epochs, patience=args.patience, seed=args.seed)
    cfg.validate()
    dims, splits = _load_split_data(args.model, args.inputs, args.pairing)
    for code, name in SPLIT_NAMES.items():
        if len(splits[code]) == 0:
            raise ValidationError(f"input has no {name} records")
    model_cfg = _build_model_config(args.model, dims, args.tokens, args.dropout)
    model = MODEL_CLASSES[args.model].create(model_cfg, Rng(args.seed))
    print(f"training {args.model} ({model.param_count()} parameters) "
          f"on dims {dims}", file=sys.stderr)

    result = fit(model, splits[SPLIT_CODES["train"]], splits[SPLIT_CODES["dev"]], cfg)
    for st in result.history:
        print(f"epoch {st.epoch}: train_loss {st.train_loss:.6f} "
              f"dev_eer {st.dev_eer:.6f} ({st.elapsed_ms} ms)", file=sys.stderr)

    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    ckpt_path = out / "checkpoint.sckp"
    save_checkpoint(model, ckpt_path)

    resolved = {
        "command": "train", "model": args.model,
        "inputs": [str(p) for p in args.inputs],
        "model_config": asdict(model_cfg),
        "train_config": asdict(cfg),
        "pairing": args.pairing,
    }
    hist_lines = ["# fmfusion training history",
                  f"# config: {json.dumps(resolved, sort_keys=True)}",
                  "# columns: epoch\ttrain_loss\tdev_eer\telapsed_ms"]
    # elapsed_ms is zeroed in the file so reruns with equal flags are bit-identical
    for st in result.history:
        hist_lines.append(f"{st.epoch}\t{st.train_loss:.6f}\t{st.dev_eer:.6f}\t0")
    (out / "history.tsv").write_text("\n".join(hist_lines) + "\n", encoding="utf-8")

    report_lines = [f"best_epoch {result.best_epoch}",
                    f"best_dev_eer_raw {result.best_dev_eer!r}"]
    for split_name in ("dev", "test"):
        rep = _evaluate_split(model, splits[SPLIT_CODES[split_name]], split_name)
        report_lines.extend(_report_lines(rep))
    (out / "report.txt").write_text("\n".join(report_lines) + "\n", encoding="utf-8")
    for line in report_lines:
        print(line)
    print(f"checkpoint: {ckpt_path}")
    return 0


def cmd_eval(args):
    model = load_checkpoint(args.checkpoint)
    _check_arity(model.kind, args.inputs)
    _, splits = _load_split_data(model.kind, args.inputs, args.pairing)
    split = SPLIT_CODES[args.split]
    data = splits[split]
    if len(data) == 0:
        raise ValidationError(f"input has no {args.split} records")
    rep = _evaluate_split(model, data, args.split)
    for line in _report_lines(rep):
        print(line)
    return 0


def cmd_gradcheck(args):
    rows = run_suite()
    width = max(len(r.name) for r in rows)
    failed = []
    for r in rows:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  max_rel_err {r.max_rel_err:.3e}  tol {r.tolerance:.0e}  {status}")
        if not r.passed:
            failed.append(r)
    if failed:
        names = ", ".join(r.name for r in failed)
        raise NumericError(f"gradient check failed for: {names}")
    print(f"all {len(rows)} gradient checks passed")
    return 0


def cmd_inspect(args):
    with open(args.path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"SCKP":
        model = load_checkpoint(args.path)
        print(f"SCKP checkpoint: {args.path}")
        print(f"kind: {model.kind}")
        print(f"config: {json.dumps(asdict(model.config), sort_keys=True)}")
        print(f"parameters: {model.param_count()}")
        print(f"tensors: {len(model.params)}")
        return 0
    es = read_fmeb(args.path)
    print(f"FMEB file: {args.path}")
    print(f"fm_name: {es.fm_name}")
    print(f"dim: {es.dim}")
    print(f"records: {len(es.records)}")
    table = es.counts()
    for split in sorted(SPLIT_NAMES):
        n_real = table.get((split, 0), 0)
        n_fake = table.get((split, 1), 0)
        if n_real or n_fake:
            print(f"split {SPLIT_NAMES[split]}: {n_real + n_fake} records "
                  f"(real {n_real}, fake {n_fake})")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    from pathlib import Path

    parser = argparse.ArgumentParser(prog="fmfusion",
                                     description="Train and evaluate embedding-level "
                                                 "deepfake classifiers on FMEB files.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a paired synthetic dataset with a known optimal EER")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--dim-a", type=int, default=64)
    p.add_argument("--dim-b", type=int, default=96)
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--n-dev", type=int, default=500)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--s", type=float, default=2.0, help="class mean separation")
    p.add_argument("--sigma", type=float, default=1.0, help="per-coordinate noise")
    p.add_argument("--ka", type=int, default=4, help="informative dims in FM a")
    p.add_argument("--kb", type=int, default=4, help="informative dims in FM b")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and write checkpoint, history and report")
    p.add_argument("inputs", type=Path, nargs="+", help="one FMEB file (fcn/cnn) or two (concat/scar)")
    p.add_argument("--model", choices=sorted(MODEL_CLASSES), required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--tokens", type=int, default=32, help="pooled token count for conv models")
    p.add_argument("--pairing", choices=("intersect", "strict"), default="intersect")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--beta1", type=float, default=0.9)
    p.add_argument("--beta2", type=float, default=0.999)
    p.add_argument("--eps-adam", type=float, default=1e-8)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split of FMEB inputs")
    p.add_argument("inputs", type=Path, nargs="+")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--split", choices=sorted(SPLIT_CODES), default="test")
    p.add_argument("--pairing", choices=("intersect", "strict"), default="intersect")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op and model")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("inspect", help="summarize an FMEB file or SCKP checkpoint")
    p.add_argument("path", type=Path)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"{exc}", file=sys.stderr)
        return 3
    except (ShapeError, ConfigError) as exc:
        print(f"{exc}", file=sys.stderr)
        return 4
    except NumericError as exc:
        print(f"{exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
