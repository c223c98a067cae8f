"""Command line for producing corpusmix ingestion files from models."""

from __future__ import annotations

import argparse
import sys

from .embed import AdapterJob, embed_corpus
from .score import (
    DEFAULT_TEMPLATE,
    HttpResponder,
    MockResponder,
    score_corpus,
    score_corpus_ordinal,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corpusmix-adapters",
        description="Produce embedding and quality files for the corpusmix toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="write the embedding matrix + id sidecar")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--model",
        default="hash",
        help="'hash' for deterministic pseudo-embeddings, else a sentence-transformers model id/path",
    )
    p.add_argument("--dim", type=int, help="declared output dim (default 768 for hash)")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-length", type=int, default=4096)

    p = sub.add_parser("score", help="write the quality JSONL")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=["prompt", "ordinal"], default="prompt")
    p.add_argument("--responses", help="prompt backend: JSONL ledger of canned responses")
    p.add_argument("--endpoint", help="prompt backend: OpenAI-compatible base URL")
    p.add_argument("--model", help="chat model name, or ordinal checkpoint directory")
    p.add_argument("--api-key", default="")
    p.add_argument("--template", help="prompt template file with a {document} placeholder")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--max-length", type=int, default=4096)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "embed":
            job = AdapterJob(
                corpus_path=args.corpus,
                output_path=args.out,
                model=args.model,
                batch_size=args.batch_size,
                max_length=args.max_length,
                dim=args.dim,
            )
            report = embed_corpus(job)
            print(f"embed: {report.rows} rows, dim {report.dim} ({report.model})")
        else:
            job = AdapterJob(
                corpus_path=args.corpus,
                output_path=args.out,
                model=args.model or "",
                batch_size=args.batch_size,
                max_length=args.max_length,
            )
            if args.backend == "ordinal":
                if not args.model:
                    raise ValueError("ordinal backend needs --model <checkpoint dir>")
                report = score_corpus_ordinal(job)
            else:
                if args.responses:
                    responder = MockResponder(args.responses)
                elif args.endpoint:
                    if not args.model:
                        raise ValueError("--endpoint needs --model")
                    responder = HttpResponder(args.endpoint, args.model, args.api_key)
                else:
                    raise ValueError("prompt backend needs --responses or --endpoint")
                template = DEFAULT_TEMPLATE
                if args.template:
                    with open(args.template, "r", encoding="utf-8") as fh:
                        template = fh.read()
                report = score_corpus(job, responder, template)
            print(
                f"score: {report.scored} scored, {len(report.skipped)} skipped, "
                f"{len(report.clamped)} clamped"
            )
    except (ValueError, OSError, KeyError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
