"""Entry point: ``pybackend serve`` runs the protocol loop on stdio."""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .server import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pybackend",
        description="Inference backend speaking line-delimited JSON on stdin/stdout "
        "(pyannote diarization, Whisper transcription, optional DEMUCS).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("serve", help="serve requests until stdin closes")
    p.add_argument("--config", help="JSON or TOML config file")
    p.add_argument("--diarization-model", help="diarization model id override")
    p.add_argument("--asr-model", help="ASR model id override")
    p.add_argument("--device", help="torch device (default: cpu)")
    p.add_argument("--denoise", action="store_true", default=None,
                   help="run DEMUCS vocals isolation before diarization")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = load_config(
        args.config,
        diarization_model_id=args.diarization_model,
        asr_model_id=args.asr_model,
        device=args.device,
        enable_denoise=args.denoise,
    )
    return serve(config, sys.stdin, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
