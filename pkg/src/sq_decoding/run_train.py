from __future__ import annotations

import argparse

from .config import TrainSettings, resolve_config, resolve_train_settings
from .corpus import read_parallel_corpus, vocab_from_parallel_corpus
from .lengthpred import LengthPredictor, build_training_examples, init_predictor_params, train
from .model_io import load_model, save_model
from .model_neural import NeuralModel, train_neural_model
from .results_io import file_header, write_jsonl
from .run_decode import format_run_header


def _loss_rows(kind: str, settings: TrainSettings, curve: list[float], **fields) -> list[dict]:
    header = file_header(kind, settings=settings.to_dict(), **fields)
    return [header, *({"type": "epoch", "epoch": i, "mean_loss": loss} for i, loss in enumerate(curve, start=1))]


def run_train_lmp(args: argparse.Namespace) -> int:
    config_path, config = resolve_config(args.config)
    settings = resolve_train_settings(args, config, "train_lmp")
    print(
        format_run_header(
            command="train-lmp",
            steps=[
                f"Config: {config_path if config_path else 'none (flags and defaults only)'}",
                f"Load base model: {args.model} (parameters stay fixed)",
                f"Greedy-decode sources of: {args.corpus} (max_steps={settings.max_steps})",
                f"Train length predictor: epochs={settings.epochs}, lr={settings.lr:g}, hidden={settings.hidden_size}, seed={settings.seed}",
                f"Write model + predictor: {args.out}; loss curve: {args.loss_out}",
            ],
        )
    )
    model, previous = load_model(args.model)
    if previous is not None:
        print("Note: replacing the existing length_predictor section.")
    pairs = read_parallel_corpus(args.corpus, model.vocab)
    examples = build_training_examples(model, pairs, max_steps=settings.max_steps)
    params = init_predictor_params(model.summary_dim, model.embed_dim, hidden_size=settings.hidden_size, seed=settings.seed)
    trained, curve = train(params, examples, epochs=settings.epochs, adam=settings.adam(), model=model, seed=settings.seed)
    for i, loss in enumerate(curve, start=1):
        print(f"Epoch {i}/{settings.epochs}: mean J = {loss:.6f}")
    save_model(args.out, model, LengthPredictor(trained))
    write_jsonl(args.loss_out, _loss_rows("train-lmp", settings, curve, model=str(args.model), corpus=str(args.corpus)))
    print(f"Done. Model with length predictor in: {args.out}")
    return 0


def run_train_model(args: argparse.Namespace) -> int:
    config_path, config = resolve_config(args.config)
    settings = resolve_train_settings(args, config, "train_model")
    print(
        format_run_header(
            command="train-model",
            steps=[
                f"Config: {config_path if config_path else 'none (flags and defaults only)'}",
                f"Read parallel corpus: {args.corpus} (vocabulary = <s>, </s> + corpus tokens)",
                f"Train neural model: d_model={settings.hidden_size}, epochs={settings.epochs}, lr={settings.lr:g}, seed={settings.seed}",
                f"Write model: {args.out}; loss curve: {args.loss_out}",
            ],
        )
    )
    vocab = vocab_from_parallel_corpus(args.corpus)
    pairs = read_parallel_corpus(args.corpus, vocab)
    model = NeuralModel.initialize(vocab, d_model=settings.hidden_size, seed=settings.seed)
    trained, curve = train_neural_model(model, pairs, epochs=settings.epochs, adam=settings.adam(), seed=settings.seed)
    for i, loss in enumerate(curve, start=1):
        print(f"Epoch {i}/{settings.epochs}: mean loss = {loss:.6f}")
    save_model(args.out, trained)
    write_jsonl(args.loss_out, _loss_rows("train-model", settings, curve, corpus=str(args.corpus)))
    print(f"Done. Model in: {args.out}")
    return 0
