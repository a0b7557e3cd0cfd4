from __future__ import annotations

import itertools
import logging
import math

from .core import Hypothesis, InputError, SourceSentence, hypothesis_sort_key, normalized_logprob
from .model_base import SequenceModel
from .search_beam import BEAM_MODES

logger = logging.getLogger(__name__)

MAX_ENUMERATION = 10**7


def exhaustive_best(
    model: SequenceModel,
    source: SourceSentence,
    max_len: int,
    scorer: str = "vanilla",
    lam: float = 1.0,
) -> Hypothesis:
    """Scorer-argmax over every EOS-terminated sequence of at most `max_len` tokens.

    Sequences with zero probability are skipped. Ties resolve like the queue does:
    seq_no follows depth-first enumeration order.
    """
    if scorer not in BEAM_MODES:
        raise InputError(f"Unknown scorer: {scorer!r} (expected one of {', '.join(BEAM_MODES)})")
    if max_len < 1:
        raise InputError(f"max_len must be >= 1, got {max_len}")
    vocab = model.vocab
    if vocab.size**max_len > MAX_ENUMERATION:
        raise InputError(f"Refusing to enumerate {vocab.size}^{max_len} sequences (limit {MAX_ENUMERATION:.0e})")

    counter = itertools.count(1)
    best: Hypothesis | None = None
    visited = 0
    _, initial = model.encode(source)

    def walk(state, last: int, tokens: tuple[int, ...], cum: float) -> None:
        nonlocal best, visited
        out = model.step(state, last)
        for tok in range(vocab.size):
            lp = float(out.logprobs[tok])
            if not math.isfinite(lp):
                continue
            path = tokens + (tok,)
            if tok == vocab.eos_id:
                h = Hypothesis(tokens=path, cum_logprob=cum + lp, finished=True, seq_no=next(counter))
                h = h.with_score(h.cum_logprob if scorer == "vanilla" else normalized_logprob(h, lam))
                visited += 1
                if best is None or hypothesis_sort_key(h) < hypothesis_sort_key(best):
                    best = h
            elif len(path) < max_len:
                walk(out.next_state, tok, path, cum + lp)

    walk(initial, vocab.bos_id, (), 0.0)
    logger.debug("exhaustive search scored %d finished sequences", visited)
    if best is None:
        raise InputError(f"No EOS-terminated sequence of length <= {max_len} has nonzero probability")
    return best
