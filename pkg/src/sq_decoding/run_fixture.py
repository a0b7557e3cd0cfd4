from __future__ import annotations

import argparse

import numpy as np

from .core import InputError
from .corpus import write_corpus
from .model_io import save_model
from .model_tabular import random_tabular_model


def random_corpus(words: list[str], *, lines: int, min_len: int, max_len: int, seed: int) -> list[list[str]]:
    if lines < 1:
        raise InputError(f"--lines must be >= 1, got {lines}")
    if not (1 <= min_len <= max_len):
        raise InputError(f"Need 1 <= --min-len <= --max-len, got {min_len}..{max_len}")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(lines):
        n = int(rng.integers(min_len, max_len + 1))
        out.append([words[int(i)] for i in rng.integers(0, len(words), size=n)])
    return out


def run_make_fixture(args: argparse.Namespace) -> int:
    model = random_tabular_model(args.seed, vocab_size=args.vocab_size, n_states=args.states, eos_weight=args.eos_weight)
    save_model(args.out, model)
    print(f"Wrote tabular fixture (V={model.vocab.size}, states={len(model.rows)}, seed={args.seed}): {args.out}")
    if args.corpus is not None:
        words = [t for i, t in enumerate(model.vocab.tokens) if i not in (model.vocab.bos_id, model.vocab.eos_id)]
        lines = random_corpus(words, lines=args.lines, min_len=args.min_len, max_len=args.max_len, seed=args.seed)
        write_corpus(args.corpus, lines, targets=lines if args.parallel else None)
        kind = "parallel corpus (target = source)" if args.parallel else "corpus"
        print(f"Wrote {len(lines)}-line {kind}: {args.corpus}")
    return 0
