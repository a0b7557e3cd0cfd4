from __future__ import annotations

import argparse
import logging
import sys
import traceback
from pathlib import Path
from typing import Callable

from .config import CONFIG_ENV, DEFAULT_CONFIG_NAME, resolve_config, resolve_log_level
from .core import InputError
from .search_sqd import STRATEGIES

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

COMMANDS = {
    "decode": "Decode a corpus with beam, beam-lnorm or sqd; write a JSONL results file.",
    "train-lmp": "Train the Gaussian length predictor for a fixed base model.",
    "train-model": "Train the toy neural model on a parallel corpus.",
    "sweep": "Rank hyperparameter configurations (grid or seeded random) on a validation corpus.",
    "compare": "Decode one corpus under the whole ablation ladder for one or more beam sizes.",
    "rankstats": "Aggregate rank-score traces into a per-step, per-rank CSV.",
    "make-fixture": "Write a seeded random tabular model (and optionally a corpus).",
}


class CliParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise InputError(f"{self.prog}: {message}")


def _parser(command: str) -> CliParser:
    p = CliParser(prog=f"sq-decoding {command}", description=COMMANDS[command])
    p.add_argument(
        "--config",
        type=Path,
        default=None,
        help=f"JSON config file (default: ${CONFIG_ENV}, else ./{DEFAULT_CONFIG_NAME} when present).",
    )
    p.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS, default=None, help="Logging level (default: WARNING).")
    return p


def _add_decode_flags(p: argparse.ArgumentParser) -> None:
    # Every default is None so config-file values can fill the gaps.
    p.add_argument("--strategy", choices=STRATEGIES, default=None, help="Decoder (default: sqd).")
    p.add_argument("--beam-size", type=int, default=None, help="Beam size B (default: 5).")
    p.add_argument("--max-steps", type=int, default=None, help="Step limit T (default: 150).")
    p.add_argument("--retain-size", type=int, default=None, help="Candidates merged into the queue per step (default: 2 x beam size).")
    p.add_argument("--queue-capacity", type=int, default=None, help="Bound the sqd queue; evicts the worst unfinished hypothesis.")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="Length-normalization exponent (default: 1.0).")
    p.add_argument("--alpha", type=float, default=None, help="Progress-penalty weight (default: 0).")
    p.add_argument("--beta", type=float, default=None, help="Progress-penalty exponent (default: 1).")
    p.add_argument("--gamma", type=float, default=None, help="Length-matching penalty weight; negative values penalize (default: 0).")
    p.add_argument("--tau", type=float, default=None, help="Length-matching score threshold (default: 0).")
    p.add_argument("--lms-mode", choices=["expectation", "as-printed"], default=None, help="Cross-entropy form (default: expectation).")
    p.add_argument("--pg", dest="pg_enabled", action=argparse.BooleanOptionalAction, default=None, help="Progress penalty (default: on).")
    p.add_argument("--lmp", dest="lmp_enabled", action=argparse.BooleanOptionalAction, default=None, help="Length-matching penalty (default: off).")
    p.add_argument("--seed", type=int, default=None, help="Seed (default: 0).")
    p.add_argument("--trace", action=argparse.BooleanOptionalAction, default=None, help="Record rank-score traces (default: off).")
    p.add_argument("--timing", action=argparse.BooleanOptionalAction, default=None, help="Record wall-clock times (default: off).")
    p.add_argument("--jobs", type=int, default=None, help="Worker threads (default: 1).")


def _add_train_flags(p: argparse.ArgumentParser, *, hidden_flag: str, hidden_help: str) -> None:
    p.add_argument("--epochs", type=int, default=None, help="Training epochs.")
    p.add_argument("--lr", type=float, default=None, help="Adam learning rate.")
    p.add_argument("--beta1", type=float, default=None, help="Adam beta1 (default: 0.9).")
    p.add_argument("--beta2", type=float, default=None, help="Adam beta2 (default: 0.999).")
    p.add_argument("--eps", type=float, default=None, help="Adam epsilon (default: 1e-8).")
    p.add_argument(hidden_flag, dest="hidden_size", type=int, default=None, help=hidden_help)
    p.add_argument("--seed", type=int, default=None, help="Seed for initialization and shuffling (default: 0).")


def build_parser(command: str) -> CliParser:
    p = _parser(command)
    if command == "decode":
        p.add_argument("--model", type=Path, required=True, help="Model file (JSON).")
        p.add_argument("--corpus", type=Path, required=True, help="One source sentence per line.")
        p.add_argument("--out", type=Path, required=True, help="Results file (JSONL).")
        _add_decode_flags(p)
    elif command == "train-lmp":
        p.add_argument("--model", type=Path, required=True, help="Base model file; its parameters stay fixed.")
        p.add_argument("--corpus", type=Path, required=True, help="Parallel corpus: source<TAB>target per line.")
        p.add_argument("--out", type=Path, required=True, help="Output model file with a length_predictor section.")
        p.add_argument("--loss-out", type=Path, required=True, help="Per-epoch loss file (JSONL).")
        p.add_argument("--max-steps", type=int, default=None, help="Greedy-decoding step limit (default: 150).")
        _add_train_flags(p, hidden_flag="--hidden-size", hidden_help="Hidden units of the predictor (default: 16).")
    elif command == "train-model":
        p.add_argument("--corpus", type=Path, required=True, help="Parallel corpus: source<TAB>target per line.")
        p.add_argument("--out", type=Path, required=True, help="Output model file.")
        p.add_argument("--loss-out", type=Path, required=True, help="Per-epoch loss file (JSONL).")
        _add_train_flags(p, hidden_flag="--d-model", hidden_help="Hidden and embedding size (default: 16).")
    elif command == "sweep":
        p.add_argument("--model", type=Path, required=True, help="Model file (JSON).")
        p.add_argument("--corpus", type=Path, required=True, help="Validation corpus; tab-separated references enable exact_match.")
        p.add_argument("--grid", type=Path, required=True, help='Sweep spec: {"grid": {...}} or {"random": {...}}.')
        p.add_argument("--out", type=Path, required=True, help="Ranked configurations (JSONL).")
        p.add_argument("--objective", choices=["mean_normalized_score", "exact_match"], default=None, help="Ranking objective.")
        _add_decode_flags(p)
    elif command == "compare":
        p.add_argument("--model", type=Path, required=True, help="Model file (JSON).")
        p.add_argument("--corpus", type=Path, required=True, help="One source sentence per line.")
        p.add_argument("--out", type=Path, required=True, help="Comparison table (CSV).")
        p.add_argument("--beam-sizes", type=int, nargs="+", default=None, help="Beam sizes to compare (default: --beam-size).")
        p.add_argument("--oracle-max-len", type=int, default=0, help="Report the gap to the exhaustive optimum up to this length (0 = off).")
        _add_decode_flags(p)
    elif command == "rankstats":
        p.add_argument("results", type=Path, nargs="+", help="Results files written with --trace.")
        p.add_argument("--out", type=Path, required=True, help="Output CSV (step, rank, mean_score, count).")
        p.add_argument("--beam-size", type=int, default=None, help="Ranks to report (default: from the results headers).")
    elif command == "make-fixture":
        p.add_argument("--out", type=Path, required=True, help="Output model file.")
        p.add_argument("--seed", type=int, default=0, help="Fixture seed.")
        p.add_argument("--vocab-size", type=int, default=5, help="Vocabulary size including BOS and EOS.")
        p.add_argument("--states", type=int, default=4, help="Number of states.")
        p.add_argument("--eos-weight", type=float, default=1.0, help="Dirichlet concentration of EOS (higher = shorter outputs).")
        p.add_argument("--corpus", type=Path, default=None, help="Also write a random corpus here.")
        p.add_argument("--lines", type=int, default=100, help="Corpus lines.")
        p.add_argument("--min-len", type=int, default=1, help="Shortest corpus sentence.")
        p.add_argument("--max-len", type=int, default=5, help="Longest corpus sentence.")
        p.add_argument("--parallel", action="store_true", help="Write source<TAB>source lines (target length = source length).")
    return p


def _handler(command: str) -> Callable[[argparse.Namespace], int]:
    if command == "decode":
        from .run_decode import run_decode

        return run_decode
    if command == "train-lmp":
        from .run_train import run_train_lmp

        return run_train_lmp
    if command == "train-model":
        from .run_train import run_train_model

        return run_train_model
    if command == "sweep":
        from .run_sweep import run_sweep

        return run_sweep
    if command == "compare":
        from .run_compare import run_compare

        return run_compare
    if command == "rankstats":
        from .run_stats import run_rankstats

        return run_rankstats
    from .run_fixture import run_make_fixture

    return run_make_fixture


def print_root_help() -> None:
    print("usage: sq-decoding <command> [options]")
    print("")
    print("Single-queue decoding, beam-search baselines and a Gaussian length predictor on toy models.")
    print("")
    print("commands:")
    for name, text in COMMANDS.items():
        print(f"  {name:<13} {text}")
    print("")
    print("Run `sq-decoding <command> --help` for command-specific options.")


def _configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]

    if not argv or argv[0] in ("-h", "--help"):
        print_root_help()
        return 0
    command = argv[0]
    debug = False
    try:
        if command not in COMMANDS:
            raise InputError(f"Unknown command: {command!r} (run `sq-decoding --help`)")
        try:
            args = build_parser(command).parse_args(argv[1:])
        except SystemExit as e:
            # --help exits through argparse.
            return int(e.code or 0)
        if getattr(args, "lms_mode", None):
            args.lms_mode = args.lms_mode.replace("-", "_")
        _, config = resolve_config(args.config)
        level = resolve_log_level(args, config)
        if level not in LOG_LEVELS:
            raise InputError(f"log_level must be one of {', '.join(LOG_LEVELS)}; got {level!r}")
        debug = level == "DEBUG"
        _configure_logging(level)
        return _handler(command)(args)
    except InputError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        if debug:
            traceback.print_exc()
        print(f"Internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
