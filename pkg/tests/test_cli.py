from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

import sq_decoding.run_decode as run_decode_module
from fixture_models import chain_model, dominant_eos_description, long_output_description
from sq_decoding.cli import main
from sq_decoding.config import CONFIG_ENV
from sq_decoding.core import InputError
from sq_decoding.model_io import load_model, save_model
from sq_decoding.results_io import read_jsonl, read_results
from sq_decoding.run_sweep import expand_sweep_spec
from sq_decoding.search_stats import rank_stats_from_traces


@pytest.fixture(autouse=True)
def _isolated(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(CONFIG_ENV, raising=False)


def _run(capsys: pytest.CaptureFixture[str], *argv: object) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _chain_files(tmp_path: Path) -> tuple[Path, Path]:
    model = tmp_path / "chain.json"
    save_model(model, chain_model())
    return model, _write(tmp_path / "src.txt", "a\nb a\na b b\n")


def test_make_fixture_then_decode(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model, corpus, out = tmp_path / "fx.json", tmp_path / "fx.txt", tmp_path / "out" / "results.jsonl"
    code, stdout, _ = _run(capsys, "make-fixture", "--out", model, "--seed", 3, "--corpus", corpus, "--lines", 12)
    assert code == 0
    assert "Wrote 12-line corpus" in stdout

    code, stdout, stderr = _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", out, "--beam-size", 2, "--trace")
    assert code == 0, stderr
    assert "Run plan:" in stdout
    assert "Decoded 10/12 sentences..." in stdout
    assert "Decoded 12/12 sentences..." in stdout
    assert f"Done. Results in: {out}" in stdout

    results = read_results(out)
    assert len(results.records) == 12
    assert [r.line for r in results.records] == list(range(1, 13))
    assert results.header["settings"]["beam_size"] == 2
    assert results.header["settings"]["strategy"] == "sqd"
    assert all(r.rank_score_trace is not None and r.elapsed_ms is None for r in results.records)
    assert results.footer["sentences"] == 12
    assert "mean_time_ms" not in results.footer


def test_decode_is_byte_identical_across_runs(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model, corpus = _chain_files(tmp_path)
    for name in ("a.jsonl", "b.jsonl"):
        code, _, stderr = _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", tmp_path / name, "--jobs", 2, "--trace")
        assert code == 0, stderr
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_decode_dominant_eos_outputs_only_eos(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model = _write(tmp_path / "m.json", json.dumps(dominant_eos_description()))
    corpus = _write(tmp_path / "c.txt", "a\n")
    out = tmp_path / "r.jsonl"
    code, _, stderr = _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", out, "--beam-size", 1)
    assert code == 0, stderr
    record = read_results(out).records[0]
    assert record.output == ["</s>"]
    assert record.steps == 1
    assert not record.fallback


def test_decode_reports_fallbacks(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model, corpus = _chain_files(tmp_path)
    code, stdout, _ = _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", tmp_path / "r.jsonl", "--beam-size", 1, "--max-steps", 1)
    assert code == 0
    assert "Warning: 3 sentence(s) reached max_steps" in stdout
    assert read_results(tmp_path / "r.jsonl").footer["fallbacks"] == 3


def test_input_errors_exit_with_code_1(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model, _ = _chain_files(tmp_path)
    bad = _write(tmp_path / "bad.txt", "a\na zz\n")
    out = tmp_path / "r.jsonl"

    code, _, stderr = _run(capsys, "decode", "--model", model, "--corpus", bad, "--out", out)
    assert code == 1
    assert "Error:" in stderr and "bad.txt:2: unknown token 'zz'" in stderr

    code, _, stderr = _run(capsys, "decode", "--model", tmp_path / "missing.json", "--corpus", bad, "--out", out)
    assert code == 1 and "Model file not found" in stderr

    code, _, stderr = _run(capsys, "decode", "--model", model, "--corpus", bad, "--out", out, "--beam-size", "wide")
    assert code == 1 and "invalid int value" in stderr

    code, _, stderr = _run(capsys, "decode", "--model", model, "--corpus", bad, "--out", out, "--beam-size", 0)
    assert code == 1 and "beam_size" in stderr

    corpus = _write(tmp_path / "ok.txt", "a\n")
    code, _, stderr = _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", out, "--lmp")
    assert code == 1 and "length_predictor" in stderr

    code, _, stderr = _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", out, "--config", tmp_path / "none.json")
    assert code == 1 and "Config file not found" in stderr
    assert not out.exists()


def test_malformed_input_files_exit_with_code_1(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model, _ = _chain_files(tmp_path)
    out = tmp_path / "r.jsonl"
    latin1 = tmp_path / "latin1.txt"
    latin1.write_bytes(b"a\nb \xe9\n")
    code, _, stderr = _run(capsys, "decode", "--model", model, "--corpus", latin1, "--out", out)
    assert code == 1
    assert "latin1.txt:2: not valid UTF-8" in stderr

    corpus = _write(tmp_path / "ok.txt", "a\n")
    list_state = dominant_eos_description()
    list_state["states"]["q"] = [["</s>", 1.0]]
    bad_summary = dominant_eos_description()
    bad_summary["default_summary"] = ["x", 1.0]
    for name, desc, message in (("list_state", list_state, "must be an object"), ("bad_summary", bad_summary, "Invalid summaries")):
        path = _write(tmp_path / f"{name}.json", json.dumps(desc))
        code, _, stderr = _run(capsys, "decode", "--model", path, "--corpus", corpus, "--out", out)
        assert code == 1, stderr
        assert stderr.startswith("Error:") and message in stderr

    binary = tmp_path / "binary.json"
    binary.write_bytes(b"\xff\xfe{}")
    code, _, stderr = _run(capsys, "decode", "--model", binary, "--corpus", corpus, "--out", out)
    assert code == 1 and "not valid UTF-8" in stderr
    assert not out.exists()


def test_internal_errors_exit_with_code_2(tmp_path: Path, capsys: pytest.CaptureFixture[str], monkeypatch: pytest.MonkeyPatch) -> None:
    model, corpus = _chain_files(tmp_path)

    def boom(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(run_decode_module, "decode_corpus", boom)
    code, _, stderr = _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", tmp_path / "r.jsonl")
    assert code == 2
    assert "Internal error: RuntimeError: boom" in stderr


def test_help_and_unknown_commands(capsys: pytest.CaptureFixture[str]) -> None:
    code, stdout, _ = _run(capsys)
    assert code == 0 and "usage: sq-decoding <command>" in stdout
    code, stdout, _ = _run(capsys, "rankstats", "--help")
    assert code == 0 and "--beam-size" in stdout
    code, _, stderr = _run(capsys, "plot")
    assert code == 1 and "Unknown command" in stderr


def test_config_file_fills_unset_flags(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model, corpus = _chain_files(tmp_path)
    _write(tmp_path / "sqd-config.json", json.dumps({"decode": {"beam_size": 1, "strategy": "beam"}, "log_level": "warning"}))
    out = tmp_path / "r.jsonl"
    assert _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", out)[0] == 0
    header = read_results(out).header
    assert header["settings"]["beam_size"] == 1
    assert header["settings"]["strategy"] == "beam"
    assert header["config"] == "sqd-config.json"

    assert _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", out, "--beam-size", 3)[0] == 0
    assert read_results(out).header["settings"]["beam_size"] == 3


def test_rankstats_aggregates_traces(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model, corpus = _chain_files(tmp_path)
    results = tmp_path / "r.jsonl"
    assert _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", results, "--beam-size", 2, "--trace")[0] == 0
    stats_path = tmp_path / "stats.csv"
    code, stdout, stderr = _run(capsys, "rankstats", results, "--out", stats_path)
    assert code == 0, stderr
    assert "beam_size=2" in stdout

    rows = list(csv.reader(stats_path.open(encoding="utf-8")))
    assert rows[0] == ["step", "rank", "mean_score", "count"]
    expected = rank_stats_from_traces([r.rank_score_trace for r in read_results(results).records], 2)
    assert [(int(r[0]), int(r[1]), int(r[3])) for r in rows[1:]] == [(s.step, s.rank, s.count) for s in expected]
    assert all(int(r[1]) < 2 for r in rows[1:])

    code, _, _ = _run(capsys, "rankstats", results, "--out", stats_path, "--beam-size", 1)
    assert code == 0
    assert {r[1] for r in list(csv.reader(stats_path.open(encoding="utf-8")))[1:]} == {"0"}


def test_rankstats_requires_traces(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model, corpus = _chain_files(tmp_path)
    results = tmp_path / "r.jsonl"
    assert _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", results)[0] == 0
    code, _, stderr = _run(capsys, "rankstats", results, "--out", tmp_path / "s.csv")
    assert code == 1
    assert "decode again with --trace" in stderr


def test_train_lmp_then_decode_with_length_penalty(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model, _ = _chain_files(tmp_path)
    pairs = _write(tmp_path / "pairs.tsv", "a\ta b\nb a\tb\na a\ta\n")
    outs = []
    for tag in ("1", "2"):
        out, loss = tmp_path / f"lmp{tag}.json", tmp_path / f"loss{tag}.jsonl"
        args = ["train-lmp", "--model", model, "--corpus", pairs, "--out", out, "--loss-out", loss]
        code, stdout, stderr = _run(capsys, *args, "--epochs", 2, "--hidden-size", 4, "--lr", 0.01)
        assert code == 0, stderr
        assert "Epoch 2/2: mean J" in stdout
        outs.append((out, loss))

    (out1, loss1), (out2, loss2) = outs
    assert out1.read_bytes() == out2.read_bytes()
    assert loss1.read_bytes() == loss2.read_bytes()
    rows = read_jsonl(loss1)
    assert rows[0]["type"] == "header" and rows[0]["kind"] == "train-lmp"
    assert [r["epoch"] for r in rows[1:]] == [1, 2]
    _, predictor = load_model(out1)
    assert predictor is not None and predictor.params.hidden_size == 4

    corpus = _write(tmp_path / "c.txt", "a b\n")
    results = tmp_path / "r.jsonl"
    code, _, stderr = _run(capsys, "decode", "--model", out1, "--corpus", corpus, "--out", results, "--lmp", "--gamma", -1.0, "--tau", 0.0)
    assert code == 0, stderr
    assert read_results(results).header["settings"]["lmp_enabled"] is True


def test_train_lmp_with_zero_epochs_keeps_initial_predictor(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model, _ = _chain_files(tmp_path)
    pairs = _write(tmp_path / "pairs.tsv", "a\ta\n")
    out, loss = tmp_path / "lmp.json", tmp_path / "loss.jsonl"
    code, _, stderr = _run(capsys, "train-lmp", "--model", model, "--corpus", pairs, "--out", out, "--loss-out", loss, "--epochs", 0)
    assert code == 0, stderr
    assert [r["type"] for r in read_jsonl(loss)] == ["header"]
    assert load_model(out)[1] is not None


def test_train_model_then_decode(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    pairs = _write(tmp_path / "pairs.tsv", "x y\ty x\ny\ty\nx\tx x\n")
    out, loss = tmp_path / "neural.json", tmp_path / "loss.jsonl"
    code, _, stderr = _run(capsys, "train-model", "--corpus", pairs, "--out", out, "--loss-out", loss, "--epochs", 2, "--d-model", 4)
    assert code == 0, stderr
    assert json.loads(out.read_text(encoding="utf-8"))["kind"] == "neural"
    assert [r["epoch"] for r in read_jsonl(loss)[1:]] == [1, 2]

    corpus = _write(tmp_path / "c.txt", "x y\ny\n")
    results = tmp_path / "r.jsonl"
    code, _, stderr = _run(capsys, "decode", "--model", out, "--corpus", corpus, "--out", results, "--max-steps", 20, "--beam-size", 2)
    assert code == 0, stderr
    assert len(read_results(results).records) == 2


def test_sweep_ranks_lambda_values(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model = _write(tmp_path / "m.json", json.dumps(long_output_description()))
    corpus = _write(tmp_path / "c.txt", "a\n")
    grid = _write(tmp_path / "grid.json", json.dumps({"grid": {"lambda": [0.0, 1.0]}}))
    out = tmp_path / "sweep.jsonl"
    code, stdout, stderr = _run(
        capsys, "sweep", "--model", model, "--corpus", corpus, "--grid", grid, "--out", out, "--strategy", "beam-lnorm", "--beam-size", 2
    )
    assert code == 0, stderr
    rows = read_jsonl(out)
    assert rows[0]["objective"] == "mean_normalized_score"
    assert [r["params"] for r in rows[1:]] == [{"lambda": 1.0}, {"lambda": 0.0}]
    assert [r["rank"] for r in rows[1:]] == [1, 2]
    assert 'Best: {"lambda": 1.0}' in stdout


@pytest.mark.parametrize(("strategy", "lam"), [("beam-lnorm", 1.0), ("beam", 0.5), ("sqd", 0.5)])
def test_single_point_sweep_matches_decode_footer(tmp_path: Path, capsys: pytest.CaptureFixture[str], strategy: str, lam: float) -> None:
    model, corpus = _chain_files(tmp_path)
    grid = _write(tmp_path / "single.json", json.dumps({"grid": {"lambda": [lam]}}))
    out, decoded = tmp_path / "sweep.jsonl", tmp_path / "r.jsonl"
    flags = ["--strategy", strategy, "--beam-size", 2]
    code, _, stderr = _run(capsys, "sweep", "--model", model, "--corpus", corpus, "--grid", grid, "--out", out, *flags)
    assert code == 0, stderr
    code, _, stderr = _run(capsys, "decode", "--model", model, "--corpus", corpus, "--out", decoded, *flags, "--lambda", lam)
    assert code == 0, stderr
    assert read_jsonl(out)[1]["objective"] == read_results(decoded).footer["mean_normalized_score"]


def test_sweep_defaults_to_exact_match_on_parallel_corpus(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model = _write(tmp_path / "m.json", json.dumps(long_output_description()))
    corpus = _write(tmp_path / "c.tsv", "a\ta\n")
    grid = _write(tmp_path / "grid.json", json.dumps({"grid": {"lambda": [0.0, 1.0]}}))
    out = tmp_path / "sweep.jsonl"
    code, _, stderr = _run(
        capsys, "sweep", "--model", model, "--corpus", corpus, "--grid", grid, "--out", out, "--strategy", "beam-lnorm", "--beam-size", 2
    )
    assert code == 0, stderr
    rows = read_jsonl(out)
    assert rows[0]["objective"] == "exact_match"
    assert [(r["params"]["lambda"], r["objective"]) for r in rows[1:]] == [(1.0, 1.0), (0.0, 0.0)]


def test_expand_sweep_spec() -> None:
    grid = expand_sweep_spec({"grid": {"beam_size": [1, 2], "lambda": [0.0, 1.0]}})
    assert grid == [
        {"beam_size": 1, "lambda": 0.0},
        {"beam_size": 1, "lambda": 1.0},
        {"beam_size": 2, "lambda": 0.0},
        {"beam_size": 2, "lambda": 1.0},
    ]
    spec = {"random": {"samples": 4, "ranges": {"alpha": [0, 1], "beam_size": [1, 3]}}}
    sampled = expand_sweep_spec(spec, seed=7)
    assert sampled == expand_sweep_spec(spec, seed=7)
    assert len(sampled) == 4
    assert all(0 <= c["alpha"] <= 1 and c["beam_size"] in (1, 2, 3) for c in sampled)
    with pytest.raises(InputError):
        expand_sweep_spec({"grid": {}})
    with pytest.raises(InputError, match="Unknown sweep parameter"):
        expand_sweep_spec({"grid": {"temperature": [1.0]}})
    with pytest.raises(InputError):
        expand_sweep_spec({"random": {"samples": 0, "ranges": {"alpha": [0, 1]}}})


def test_compare_writes_ablation_table(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    model, corpus = _chain_files(tmp_path)
    out = tmp_path / "compare.csv"
    code, stdout, stderr = _run(capsys, "compare", "--model", model, "--corpus", corpus, "--out", out, "--oracle-max-len", 4, "--beam-sizes", 1, 2)
    assert code == 0, stderr
    rows = list(csv.DictReader(out.open(encoding="utf-8")))
    assert [(r["beam_size"], r["variant"]) for r in rows] == [
        (b, v) for b in ("1", "2") for v in ("beam", "beam+lnorm", "sqd", "sqd+pg")
    ]
    assert "mean_oracle_gap" in rows[0]
    assert "mean_time_ms" not in rows[0]
    assert "variant" in stdout

    code, _, _ = _run(capsys, "compare", "--model", model, "--corpus", corpus, "--out", out, "--timing")
    assert code == 0
    rows = list(csv.DictReader(out.open(encoding="utf-8")))
    assert len(rows) == 4
    assert "mean_time_ms" in rows[0]
