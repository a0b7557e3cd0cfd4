from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
from pathlib import Path
from typing import Any

import numpy as np

from .config import DecodeSettings, resolve_config, resolve_decode_settings
from .core import InputError
from .corpus import read_any_corpus
from .model_io import load_model
from .results_io import file_header, write_jsonl
from .run_decode import decode_corpus, describe_settings, format_run_header
from .search_sqd import STRATEGIES
from .search_stats import exact_match_rate, mean_output_score

OBJECTIVES = ("mean_normalized_score", "exact_match")

# sweep parameter -> (DecodeSettings field, cast)
SWEEP_PARAMS: dict[str, tuple[str, type]] = {
    "lambda": ("lam", float),
    "alpha": ("alpha", float),
    "beta": ("beta", float),
    "gamma": ("gamma", float),
    "tau": ("tau", float),
    "beam_size": ("beam_size", int),
    "retain_size": ("retain_size", int),
    "max_steps": ("max_steps", int),
    "strategy": ("strategy", str),
}


def _check_param(name: str) -> None:
    if name not in SWEEP_PARAMS:
        raise InputError(f"Unknown sweep parameter {name!r} (expected one of {', '.join(SWEEP_PARAMS)})")


def expand_sweep_spec(spec: Any, *, seed: int = 0) -> list[dict[str, Any]]:
    """Configurations of a `grid` (cartesian product, in file order) or a seeded `random` spec."""
    if not isinstance(spec, dict) or not ({"grid", "random"} & set(spec)):
        raise InputError('Sweep spec must be {"grid": {...}} or {"random": {"samples": n, "ranges": {...}}}')
    if "grid" in spec:
        grid = spec["grid"]
        if not isinstance(grid, dict) or not grid or any(not isinstance(v, list) or not v for v in grid.values()):
            raise InputError("Sweep grid is empty: every parameter needs a non-empty list of values")
        for name in grid:
            _check_param(name)
        names = list(grid)
        return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]

    rand = spec["random"]
    samples = int(rand.get("samples", 0)) if isinstance(rand, dict) else 0
    ranges = rand.get("ranges") if isinstance(rand, dict) else None
    if samples < 1 or not isinstance(ranges, dict) or not ranges:
        raise InputError("Random sweep needs samples >= 1 and a non-empty ranges object")
    for name, bounds in ranges.items():
        _check_param(name)
        if SWEEP_PARAMS[name][1] is str or not isinstance(bounds, list) or len(bounds) != 2:
            raise InputError(f"Random range for {name!r} must be [low, high] over a numeric parameter")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(samples):
        cfg: dict[str, Any] = {}
        for name, (lo, hi) in ranges.items():
            if SWEEP_PARAMS[name][1] is int:
                cfg[name] = int(rng.integers(int(lo), int(hi) + 1))
            else:
                cfg[name] = float(rng.uniform(float(lo), float(hi)))
        out.append(cfg)
    return out


def apply_params(base: DecodeSettings, params: dict[str, Any]) -> DecodeSettings:
    changes = {}
    for name, value in params.items():
        field, cast = SWEEP_PARAMS[name]
        try:
            changes[field] = cast(value)
        except (TypeError, ValueError) as e:
            raise InputError(f"Invalid sweep value for {name!r}: {value!r}") from e
    settings = dataclasses.replace(base, **changes)
    if settings.strategy not in STRATEGIES:
        raise InputError(f"Unknown strategy in sweep: {settings.strategy!r}")
    if "beam_size" in changes and "retain_size" not in changes:
        # A retain size inherited from the base config may be smaller than the new beam.
        settings = dataclasses.replace(settings, retain_size=None)
    settings.search_config()
    settings.score_config()
    return settings


def run_sweep(args: argparse.Namespace) -> int:
    config_path, config = resolve_config(args.config)
    base = resolve_decode_settings(args, config)
    try:
        spec = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"Sweep spec not found: {args.grid}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"Sweep spec {args.grid} is not valid JSON: {e}") from e
    except UnicodeDecodeError as e:
        raise InputError(f"Sweep spec {args.grid} is not valid UTF-8: {e.reason} at byte {e.start}") from None
    configs = expand_sweep_spec(spec, seed=base.seed)

    model, predictor = load_model(args.model)
    sources, references = read_any_corpus(args.corpus, model.vocab)
    objective = args.objective or ("exact_match" if references is not None else "mean_normalized_score")
    if objective == "exact_match" and references is None:
        raise InputError("exact_match needs a parallel corpus (source<TAB>reference per line)")

    print(
        format_run_header(
            command="sweep",
            steps=[
                f"Config: {config_path if config_path else 'none (flags and defaults only)'}",
                f"Load model: {args.model}; corpus: {args.corpus} ({len(sources)} sentences)",
                f"Evaluate {len(configs)} configuration(s) over base settings: {describe_settings(base)}",
                f"Rank by {objective}; write: {args.out}",
            ],
        )
    )

    scored = []
    for i, params in enumerate(configs, start=1):
        settings = apply_params(base, params)
        results = decode_corpus(model, sources, settings, predictor)
        if objective == "exact_match":
            value = exact_match_rate(results, references or [], model.vocab.eos_id)
        else:
            value = mean_output_score(results, 1.0)
        mean_steps = sum(r.steps_taken for r in results) / len(results)
        scored.append((value, i, params, mean_steps))
        print(f"Evaluated {i}/{len(configs)}: {json.dumps(params, sort_keys=True)} -> {objective}={value:.6f}")

    # Ties keep configuration order.
    scored.sort(key=lambda row: (-row[0], row[1]))
    header = file_header(
        "sweep",
        model=str(args.model),
        corpus=str(args.corpus),
        config=str(config_path) if config_path else None,
        objective=objective,
        spec=spec,
        settings=base.to_dict(),
    )
    rows = [
        {"type": "config", "rank": rank, "objective": value, "params": params, "mean_steps": mean_steps}
        for rank, (value, _i, params, mean_steps) in enumerate(scored, start=1)
    ]
    write_jsonl(args.out, [header, *rows])
    best_value, _, best_params, _ = scored[0]
    print(f"Best: {json.dumps(best_params, sort_keys=True)} ({objective}={best_value:.6f})")
    print(f"Done. Ranking in: {args.out}")
    return 0
