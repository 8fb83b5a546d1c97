"""fmextract: export pooled FM representations of audio as FMEB files."""

import argparse
import logging
import sys

from .errors import ExtractError
from .extract import extract_representations
from .registry import entries, expected_dim
from .validate import validate_fmeb_against_manifest


def _epilog():
    lines = ["foundation models (dim, long-audio handling):"]
    for name, e in sorted(entries().items()):
        lines.append(f"  {name:18s} {e.dim:5d}  {e.notes}")
    return "\n".join(lines)


def cmd_extract(args):
    n = extract_representations(args.manifest, args.fm, args.out,
                                on_error="skip" if args.skip_errors else "strict",
                                batch_size=args.batch_size)
    print(f"wrote {n} records ({expected_dim(args.fm)} dims) to {args.out}")
    return 0


def cmd_validate(args):
    report = validate_fmeb_against_manifest(args.fmeb, args.manifest,
                                            expected_dim=args.expect_dim)
    for line in report.lines():
        print(line)
    if report.ok:
        print("ok: fmeb matches manifest")
        return 0
    return 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fmextract",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Extract pooled last-hidden-state representations from frozen "
                    "foundation models and export FMEB files.",
        epilog=_epilog())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run a frozen FM over a manifest of audio files",
                       formatter_class=argparse.RawDescriptionHelpFormatter,
                       epilog=_epilog())
    p.add_argument("--manifest", required=True, help="TSV: audio_path, utterance_id, label, split")
    p.add_argument("--fm", required=True, help="foundation model name (see epilog)")
    p.add_argument("--out", required=True, help="output FMEB path")
    p.add_argument("--batch-size", type=int, default=8,
                   help="waveforms handed to the encoder per call (bundled adapters "
                        "run one forward pass per waveform regardless)")
    p.add_argument("--skip-errors", action="store_true",
                   help="log and skip undecodable audio instead of failing")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("validate", help="check an FMEB file against its manifest")
    p.add_argument("--fmeb", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--expect-dim", type=int, default=None)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExtractError as exc:
        print(f"{exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"{exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
