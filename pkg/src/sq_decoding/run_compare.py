from __future__ import annotations

import argparse
import dataclasses
import logging
from typing import Sequence

from .config import DecodeSettings, resolve_config, resolve_decode_settings
from .core import DecodeResult, InputError, SourceSentence
from .corpus import read_corpus
from .lengthpred import LengthPredictor
from .model_base import SequenceModel
from .model_io import load_model
from .results_io import write_table_csv
from .run_decode import decode_corpus, format_run_header
from .search_oracle import exhaustive_best
from .search_stats import mean_output_score, output_score

logger = logging.getLogger(__name__)


def ablation_ladder(base: DecodeSettings, *, with_lmp: bool) -> list[tuple[str, DecodeSettings]]:
    """Decoder variants from vanilla beam search up to SQD with both penalties."""
    ladder = [
        ("beam", dataclasses.replace(base, strategy="beam")),
        ("beam+lnorm", dataclasses.replace(base, strategy="beam-lnorm")),
        ("sqd", dataclasses.replace(base, strategy="sqd", pg_enabled=False, lmp_enabled=False)),
        ("sqd+pg", dataclasses.replace(base, strategy="sqd", pg_enabled=True, lmp_enabled=False)),
    ]
    if with_lmp:
        ladder.append(("sqd+pg+lmp", dataclasses.replace(base, strategy="sqd", pg_enabled=True, lmp_enabled=True)))
    return ladder


def oracle_scores(model: SequenceModel, sources: Sequence[SourceSentence], max_len: int, lam: float) -> list[float] | None:
    try:
        return [float(exhaustive_best(model, src, max_len, "length_norm", lam).cached_score) for src in sources]
    except InputError as e:
        print(f"Note: oracle gap skipped ({e}).")
        return None


def compare_rows(
    model: SequenceModel,
    sources: Sequence[SourceSentence],
    base: DecodeSettings,
    beam_sizes: Sequence[int],
    predictor: LengthPredictor | None = None,
    oracle: Sequence[float] | None = None,
) -> list[dict]:
    rows = []
    for beam_size in beam_sizes:
        sized = dataclasses.replace(base, beam_size=int(beam_size), retain_size=None)
        for variant, settings in ablation_ladder(sized, with_lmp=predictor is not None):
            results: list[DecodeResult] = decode_corpus(model, sources, settings, predictor)
            n = len(results)
            row = {
                "beam_size": settings.beam_size,
                "variant": variant,
                "mean_steps": sum(r.steps_taken for r in results) / n,
                "mean_normalized_score": mean_output_score(results, 1.0),
                "fallbacks": sum(1 for r in results if r.fallback),
            }
            if base.timing:
                row["mean_time_ms"] = sum(r.elapsed_ms for r in results) / n
            if oracle is not None:
                row["mean_oracle_gap"] = sum(o - output_score(r, base.lam) for o, r in zip(oracle, results)) / n
            logger.info("compare B=%d %s: %s", settings.beam_size, variant, row)
            rows.append(row)
    return rows


def format_table(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0].keys())
    cells = [[f"{r[c]:.4f}" if isinstance(r[c], float) else str(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.extend("  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells)
    return "\n".join(lines)


def run_compare(args: argparse.Namespace) -> int:
    config_path, config = resolve_config(args.config)
    base = resolve_decode_settings(args, config)
    beam_sizes = list(args.beam_sizes or [base.beam_size])
    if any(b < 1 for b in beam_sizes):
        raise InputError(f"--beam-sizes must all be >= 1, got {beam_sizes}")
    model, predictor = load_model(args.model)
    sources = read_corpus(args.corpus, model.vocab)
    print(
        format_run_header(
            command="compare",
            steps=[
                f"Config: {config_path if config_path else 'none (flags and defaults only)'}",
                f"Load model: {args.model} (length predictor: {'yes' if predictor else 'no'})",
                f"Decode {len(sources)} sentences per variant for beam sizes {', '.join(str(b) for b in beam_sizes)}",
                f"Oracle gap: {'max_len=' + str(args.oracle_max_len) if args.oracle_max_len else 'off'}",
                f"Write table: {args.out}",
            ],
        )
    )
    oracle = oracle_scores(model, sources, args.oracle_max_len, base.lam) if args.oracle_max_len else None
    rows = compare_rows(model, sources, base, beam_sizes, predictor, oracle)
    write_table_csv(args.out, rows)
    print(format_table(rows))
    print(f"Done. Table in: {args.out}")
    return 0
