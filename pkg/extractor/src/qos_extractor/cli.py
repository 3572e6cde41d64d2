"""Command line entry points: one-shot extraction and the HTTP service."""

import argparse
import sys

from .errors import ExtractorError
from .extract import POOLINGS, ExtractorJob, run_extract
from .manifest import ENTITY_KINDS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qos-extract",
        description="sentence embeddings from pretrained language models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="embed a prompt manifest into a QFV1 file")
    ex.add_argument("--model", required=True, help="model alias or hub id")
    ex.add_argument("--pooling", required=True, choices=POOLINGS)
    ex.add_argument("--prompts", required=True, help="prompt manifest path")
    ex.add_argument("--out", required=True, help="output QFV1 path")
    ex.add_argument(
        "--kind", required=True, choices=ENTITY_KINDS,
        help="which entity kind to take from the manifest",
    )
    ex.add_argument("--batch-size", type=int, default=32)
    ex.add_argument("--device", default="cpu")

    sv = sub.add_parser("serve", help="serve POST /v1/embed for one model")
    sv.add_argument("--model", required=True)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8100)
    sv.add_argument("--device", default="cpu")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            out = run_extract(
                ExtractorJob(
                    model=args.model,
                    pooling=args.pooling,
                    manifest_path=args.prompts,
                    out_path=args.out,
                    entity_kind=args.kind,
                    batch_size=args.batch_size,
                    device=args.device,
                )
            )
            print(out)
        else:
            import uvicorn

            from .models import load_model
            from .server import make_app

            app = make_app(load_model(args.model, device=args.device))
            uvicorn.run(app, host=args.host, port=args.port)
    except (ExtractorError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
