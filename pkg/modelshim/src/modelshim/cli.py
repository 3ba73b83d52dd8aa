"""Command line entry point: ``modelshim serve``."""

from __future__ import annotations

import argparse
import sys

from .config import ShimConfig
from .server import serve


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="modelshim", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    p = sub.add_parser("serve", help="serve the configured backends")
    p.add_argument("--bind", default="127.0.0.1:8707")
    p.add_argument("--embed", default="hash",
                   help="'hash', 'st:<model_id>', or '' to disable")
    p.add_argument("--generate", default="toy",
                   help="'toy', 'hf:<model_id>', or '' to disable")
    p.add_argument("--paraphrase", default="toy",
                   help="'toy', 'identity', 'hf:<model_id>', or '' to disable")
    p.add_argument("--device", default="cpu")
    p.add_argument("--embed-dim", type=int, default=768)
    p.add_argument("--max-batch", type=int, default=32)
    p.add_argument("--max-concurrent", type=int, default=4)

    args = parser.parse_args(argv)
    if args.command != "serve":
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = ShimConfig(
            embed_model_id=args.embed,
            gen_model_id=args.generate,
            para_model_id=args.paraphrase,
            device=args.device,
            bind_addr=args.bind,
            max_batch=args.max_batch,
            max_concurrent=args.max_concurrent,
            embed_dim=args.embed_dim,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"modelshim serving on {cfg.bind_addr}", file=sys.stderr)
    serve(cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
