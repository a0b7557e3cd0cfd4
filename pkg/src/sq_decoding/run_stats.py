from __future__ import annotations

import argparse

from .core import InputError
from .results_io import read_results, write_rank_stats_csv
from .search_stats import rank_stats_from_traces


def run_rankstats(args: argparse.Namespace) -> int:
    traces = []
    beam_sizes = []
    for path in args.results:
        results = read_results(path)
        beam_sizes.append(int((results.header.get("settings") or {}).get("beam_size") or 0))
        for rec in results.records:
            if rec.rank_score_trace is None:
                raise InputError(f"{path}: line {rec.line} has no rank_score_trace; decode again with --trace")
            traces.append(rec.rank_score_trace)
    if not traces:
        raise InputError("Results files contain no records")
    beam_size = args.beam_size or max(beam_sizes)
    if beam_size < 1:
        raise InputError("Cannot infer the beam size from the results headers; pass --beam-size")
    stats = rank_stats_from_traces(traces, beam_size)
    write_rank_stats_csv(args.out, stats)
    print(f"Aggregated {len(traces)} decodes into {len(stats)} (step, rank) rows (beam_size={beam_size}).")
    print(f"Done. Rank statistics in: {args.out}")
    return 0
