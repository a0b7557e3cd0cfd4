from __future__ import annotations

import argparse
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Sequence

from .config import DecodeSettings, resolve_config, resolve_decode_settings
from .core import DecodeResult, InputError, SourceSentence
from .corpus import read_corpus
from .lengthpred import LengthPredictor
from .model_base import SequenceModel
from .model_io import load_model
from .results_io import ResultRecord, file_header, write_results
from .search_sqd import decode

logger = logging.getLogger(__name__)


def format_run_header(*, command: str, steps: Sequence[str], notes: Sequence[str] = ()) -> str:
    lines = [
        "┌──────────────────────────────────────────────────────────────┐",
        f"│{('sq-decoding ' + command).center(62)}│",
        "└──────────────────────────────────────────────────────────────┘",
        "",
        "Run plan:",
    ]
    lines.extend(f"{i}) {s}" for i, s in enumerate(steps, start=1))
    lines.append("")
    if notes:
        lines.append("Notes:")
        lines.extend(f"- {n}" for n in notes)
        lines.append("")
    return "\n".join(lines)


def describe_settings(settings: DecodeSettings) -> str:
    parts = [
        f"strategy={settings.strategy}",
        f"beam_size={settings.beam_size}",
        f"max_steps={settings.max_steps}",
    ]
    if settings.strategy == "sqd":
        parts.append(f"retain_size={settings.search_config().retain_size}")
        parts.append(f"lambda={settings.lam:g}")
        parts.append(f"pg={'on' if settings.pg_enabled else 'off'} (alpha={settings.alpha:g}, beta={settings.beta:g})")
        lmp = f"on (gamma={settings.gamma:g}, tau={settings.tau:g}, lms={settings.lms_mode})" if settings.lmp_enabled else "off"
        parts.append(f"lmp={lmp}")
    elif settings.strategy == "beam-lnorm":
        parts.append(f"lambda={settings.lam:g}")
    return ", ".join(parts)


def decode_corpus(
    model: SequenceModel,
    sources: Sequence[SourceSentence],
    settings: DecodeSettings,
    predictor: LengthPredictor | None = None,
    *,
    progress: bool = False,
) -> list[DecodeResult]:
    """Decodes every source on a bounded thread pool; results keep input order."""
    search_cfg = settings.search_config()
    score_cfg = settings.score_config()
    if settings.strategy == "sqd" and score_cfg.lmp_enabled and predictor is None:
        raise InputError("--lmp needs a model file with a length_predictor section (run train-lmp first)")
    results: list[DecodeResult | None] = [None] * len(sources)
    with ThreadPoolExecutor(max_workers=settings.jobs) as ex:
        futs = {
            ex.submit(decode, model, src, settings.strategy, search_cfg, score_cfg, predictor): i for i, src in enumerate(sources)
        }
        for done, fut in enumerate(as_completed(futs), start=1):
            results[futs[fut]] = fut.result()
            if progress and (done % 10 == 0 or done == len(futs)):
                print(f"Decoded {done}/{len(futs)} sentences...")
    return [r for r in results if r is not None]


def to_record(line: int, source: SourceSentence, result: DecodeResult, model: SequenceModel, settings: DecodeSettings) -> ResultRecord:
    vocab = model.vocab
    best = result.best
    return ResultRecord(
        line=line,
        source=vocab.render(source.tokens),
        output=vocab.render(best.tokens),
        score=float(best.cached_score if best.cached_score is not None else best.cum_logprob),
        cum_logprob=float(best.cum_logprob),
        steps=result.steps_taken,
        fallback=result.fallback,
        rank_score_trace=result.rank_score_trace if settings.trace else None,
        elapsed_ms=result.elapsed_ms if settings.timing else None,
    )


def run_decode(args: argparse.Namespace) -> int:
    config_path, config = resolve_config(args.config)
    settings = resolve_decode_settings(args, config)
    print(
        format_run_header(
            command="decode",
            steps=[
                f"Config: {config_path if config_path else 'none (flags and defaults only)'}",
                f"Load model: {args.model}",
                f"Decode corpus: {args.corpus} ({describe_settings(settings)}, jobs={settings.jobs})",
                f"Write results: {args.out}",
            ],
            notes=[n for n in ("rank-score traces on" if settings.trace else "", "wall-clock timing on" if settings.timing else "") if n],
        )
    )
    model, predictor = load_model(args.model)
    sources = read_corpus(args.corpus, model.vocab)
    results = decode_corpus(model, sources, settings, predictor, progress=True)
    records = [to_record(i, src, res, model, settings) for i, (src, res) in enumerate(zip(sources, results), start=1)]
    header = file_header(
        "decode",
        model=str(args.model),
        corpus=str(args.corpus),
        config=str(config_path) if config_path else None,
        settings=settings.to_dict(),
    )
    write_results(args.out, header, records)
    fallbacks = sum(1 for r in records if r.fallback)
    if fallbacks:
        print(f"Warning: {fallbacks} sentence(s) reached max_steps without a finished hypothesis.")
    print(f"Done. Results in: {args.out}")
    return 0
