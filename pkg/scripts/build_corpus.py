#!/usr/bin/env python3
"""Build a synthetic fixture corpus on disk.

The defaults reproduce the full-size corpus used by the acceptance suite:
200 collections, one 711-seed human-rights group, and one art-site seed
with 1418 captures.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from webarc.fixtures import HRWA_SEED_COUNT, build_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("corpus_dir", type=Path, help="output directory")
    parser.add_argument("--collections", type=int, default=200)
    parser.add_argument("--hrwa-seeds", type=int, default=HRWA_SEED_COUNT)
    parser.add_argument("--seed", type=int, default=42, help="RNG seed")
    args = parser.parse_args()
    build_corpus(args.corpus_dir, n_collections=args.collections,
                 hrwa_seeds=args.hrwa_seeds, seed=args.seed)
    files = sum(1 for _ in args.corpus_dir.rglob("*") if _.is_file())
    print(f"wrote {args.collections} collections ({files} files) "
          f"under {args.corpus_dir}")


if __name__ == "__main__":
    main()
