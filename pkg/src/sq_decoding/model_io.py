from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .core import InputError, Vocab
from .lengthpred import LengthPredictor, predictor_from_dict, predictor_to_dict
from .model_base import SequenceModel
from .model_neural import NeuralModel
from .model_tabular import TabularModel
from .results_io import ensure_dir

MODEL_FORMAT = "sq-decoding-model"
MODEL_VERSION = 1
MODEL_KINDS = ("tabular", "neural")


def model_to_dict(model: SequenceModel, predictor: LengthPredictor | None = None) -> dict[str, Any]:
    if isinstance(model, TabularModel):
        data: dict[str, Any] = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": "tabular", "tabular": model.to_description()}
    elif isinstance(model, NeuralModel):
        data = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": "neural",
            "neural": {
                "tokens": list(model.vocab.tokens),
                "bos": model.vocab.tokens[model.vocab.bos_id],
                "eos": model.vocab.tokens[model.vocab.eos_id],
                "d_model": model.summary_dim,
                "embed_dim": model.embed_dim,
                "params": {k: np.asarray(v).tolist() for k, v in sorted(model.params.items())},
            },
        }
    else:
        raise InputError(f"Cannot serialize model of type {type(model).__name__}")
    if predictor is not None:
        data["length_predictor"] = predictor_to_dict(predictor.params)
    return data


def model_from_dict(data: Any) -> tuple[SequenceModel, LengthPredictor | None]:
    if not isinstance(data, dict):
        raise InputError("Model file must contain a JSON object")
    if "format" not in data:
        # A bare tabular description is accepted for hand-written fixtures.
        return TabularModel.from_description(data), None
    if data.get("format") != MODEL_FORMAT:
        raise InputError(f"Unsupported model format: {data.get('format')!r}")
    if data.get("version") != MODEL_VERSION:
        raise InputError(f"Unsupported model file version: {data.get('version')!r} (expected {MODEL_VERSION})")
    kind = data.get("kind")
    if kind == "tabular":
        model: SequenceModel = TabularModel.from_description(dict(data.get("tabular") or {}))
    elif kind == "neural":
        section = dict(data.get("neural") or {})
        try:
            tokens = [str(t) for t in section["tokens"]]
            vocab = Vocab(tuple(tokens), eos_id=tokens.index(str(section["eos"])), bos_id=tokens.index(str(section["bos"])))
            params = {str(k): np.asarray(v, dtype=np.float64) for k, v in dict(section["params"]).items()}
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, InputError):
                raise
            raise InputError(f"Invalid neural model section: {e}") from e
        model = NeuralModel(vocab=vocab, params=params)
    else:
        raise InputError(f"Unknown model kind: {kind!r} (expected one of {', '.join(MODEL_KINDS)})")

    predictor = None
    if data.get("length_predictor") is not None:
        predictor = LengthPredictor(predictor_from_dict(dict(data["length_predictor"])))
        if predictor.summary_dim != model.summary_dim or predictor.embed_dim != model.embed_dim:
            raise InputError(
                f"Length predictor dimensions (summary={predictor.summary_dim}, embed={predictor.embed_dim}) "
                f"do not match the model (summary={model.summary_dim}, embed={model.embed_dim})"
            )
    return model, predictor


def save_model(path: Path, model: SequenceModel, predictor: LengthPredictor | None = None) -> None:
    ensure_dir(path.parent)
    path.write_text(json.dumps(model_to_dict(model, predictor), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: Path) -> tuple[SequenceModel, LengthPredictor | None]:
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"Model file not found: {path}") from None
    except UnicodeDecodeError as e:
        raise InputError(f"Model file {path} is not valid UTF-8: {e.reason} at byte {e.start}") from None
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise InputError(f"Model file {path} is not valid JSON: {e}") from e
    return model_from_dict(data)
