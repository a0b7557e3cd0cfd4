from __future__ import annotations

import numpy as np
import pytest

from fixture_models import chain_model, dominant_eos_model, recovery_model, src
from sq_decoding import search_sqd
from sq_decoding.core import InputError, ScoreConfig, SearchConfig
from sq_decoding.lengthpred import LengthPredictor, init_predictor_params
from sq_decoding.model_tabular import random_tabular_model
from sq_decoding.search_beam import beam_search
from sq_decoding.search_oracle import exhaustive_best
from sq_decoding.search_queue import HypothesisQueue
from sq_decoding.search_sqd import decode, single_queue_decode
from sq_decoding.search_stats import collect_rank_stats


def test_sqd_recovers_the_runner_up_prefix() -> None:
    model = recovery_model()
    score_cfg = ScoreConfig(lam=0.0, alpha=0.0)
    result = single_queue_decode(model, src(), SearchConfig(beam_size=1, retain_size=2), score_cfg)
    oracle = exhaustive_best(model, src(), 4, "vanilla")
    beam = beam_search(model, src(), SearchConfig(beam_size=1))
    assert result.best.tokens == (3, 1)
    assert result.steps_taken == 3
    assert oracle.tokens == result.best.tokens
    assert beam.best.tokens != oracle.tokens


def test_dominant_eos_stops_after_one_step() -> None:
    result = single_queue_decode(dominant_eos_model(), src(), SearchConfig(beam_size=1), ScoreConfig())
    assert result.best.tokens == (1,)
    assert result.steps_taken == 1
    assert not result.fallback
    assert result.rank_score_trace == [[]]


def test_retain_size_equal_to_beam_size_reproduces_length_normalized_beam() -> None:
    rng = np.random.default_rng(123)
    for seed in range(100):
        vocab_size = int(rng.integers(3, 9))
        n_states = int(rng.integers(2, 6))
        beam_size = int(rng.integers(1, 5))
        lam = float(rng.choice([0.0, 0.5, 1.0]))
        model = random_tabular_model(seed, vocab_size=vocab_size, n_states=n_states)
        cfg = SearchConfig(beam_size=beam_size, retain_size=beam_size, max_steps=12)
        sqd = single_queue_decode(model, src(), cfg, ScoreConfig(lam=lam, alpha=0.0, gamma=0.0))
        beam = beam_search(model, src(), cfg, mode="length_norm", lam=lam)
        assert sqd.best.tokens == beam.best.tokens, f"seed={seed}"
        assert sqd.steps_taken == beam.steps_taken, f"seed={seed}"
        assert sqd.rank_score_trace == beam.rank_score_trace, f"seed={seed}"
        assert sqd.fallback == beam.fallback


def _fixture_runs(n: int = 100):
    cfg = SearchConfig(beam_size=5, max_steps=12)
    sqd, beam = [], []
    for seed in range(n):
        model = random_tabular_model(seed, vocab_size=6, n_states=4, eos_weight=0.5)
        sqd.append(single_queue_decode(model, src(2, 3), cfg, ScoreConfig(lam=1.0, alpha=0.0)))
        beam.append(beam_search(model, src(2, 3), cfg, mode="length_norm", lam=1.0))
    return sqd, beam


def test_selected_set_scores_dominate_beam_at_lower_ranks() -> None:
    sqd, beam = _fixture_runs()
    sqd_cells = {(s.step, s.rank): s for s in collect_rank_stats(sqd, 5)}
    beam_cells = {(s.step, s.rank): s for s in collect_rank_stats(beam, 5)}
    shared = [
        key
        for key in sqd_cells
        if key in beam_cells and 1 <= key[1] <= 4 and sqd_cells[key].count >= 30 and beam_cells[key].count >= 30
    ]
    assert shared
    wins = sum(1 for key in shared if sqd_cells[key].mean_score >= beam_cells[key].mean_score - 1e-12)
    assert wins / len(shared) > 0.6


def test_step_count_stays_close_to_beam_search() -> None:
    sqd, beam = _fixture_runs()
    assert all(r.steps_taken <= 12 for r in sqd)
    mean_sqd = sum(r.steps_taken for r in sqd) / len(sqd)
    mean_beam = sum(r.steps_taken for r in beam) / len(beam)
    assert mean_sqd <= 1.5 * mean_beam


def test_max_steps_falls_back_to_best_unfinished() -> None:
    result = single_queue_decode(chain_model(), src(), SearchConfig(beam_size=1, max_steps=1), ScoreConfig())
    assert result.fallback
    assert result.best.tokens == (2,)
    assert result.all_finished == []


def test_queue_capacity_bounds_unfinished_members() -> None:
    model = random_tabular_model(4, vocab_size=7, n_states=3, eos_weight=0.3)
    cfg = SearchConfig(beam_size=2, retain_size=6, queue_capacity=4, max_steps=12)
    result = single_queue_decode(model, src(), cfg, ScoreConfig())
    assert result.queue_sizes
    assert all(size <= 4 + len(result.all_finished) for size in result.queue_sizes)
    assert result.steps_taken <= 12


class _RecordingQueue(HypothesisQueue):
    instances: list[_RecordingQueue] = []

    def __init__(self, capacity: int | None = None) -> None:
        super().__init__(capacity)
        self.steps: list[tuple[int, int, int]] = []  # (finished before, finished pushed, finished after)
        _RecordingQueue.instances.append(self)

    def extend(self, hyps) -> None:
        hyps = list(hyps)
        before = self.n_finished
        super().extend(hyps)
        self.steps.append((before, sum(1 for h in hyps if h.finished), self.n_finished))


def test_queue_growth_bound_and_finished_members_are_kept(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(search_sqd, "HypothesisQueue", _RecordingQueue)
    rng = np.random.default_rng(31)
    for seed in range(40):
        beam_size = int(rng.integers(1, 5))
        cfg = SearchConfig(
            beam_size=beam_size,
            retain_size=int(rng.integers(beam_size, 3 * beam_size + 1)),
            queue_capacity=None if seed % 2 == 0 else beam_size + 1,
            max_steps=10,
        )
        model = random_tabular_model(
            seed, vocab_size=int(rng.integers(3, 8)), n_states=int(rng.integers(2, 5)), eos_weight=float(rng.uniform(0.2, 1.5))
        )
        _RecordingQueue.instances.clear()
        result = single_queue_decode(model, src(), cfg, ScoreConfig(alpha=float(rng.uniform(0.0, 1.0))))
        (queue,) = _RecordingQueue.instances

        assert len(queue.steps) == result.steps_taken == len(result.queue_sizes)
        for before, pushed, after in queue.steps:
            assert after == before + pushed
        assert len(result.all_finished) == sum(pushed for _, pushed, _ in queue.steps)
        if cfg.queue_capacity is None:
            for t, size in enumerate(result.queue_sizes, start=1):
                assert size <= 1 + t * cfg.retain_size


def test_decoding_is_deterministic() -> None:
    model = random_tabular_model(17, vocab_size=6, n_states=3)
    cfg = SearchConfig(beam_size=3, max_steps=12)
    first = single_queue_decode(model, src(2, 4), cfg, ScoreConfig(alpha=0.2))
    second = single_queue_decode(model, src(2, 4), cfg, ScoreConfig(alpha=0.2))
    assert first.best.tokens == second.best.tokens
    assert first.rank_score_trace == second.rank_score_trace
    assert [h.tokens for h in first.all_finished] == [h.tokens for h in second.all_finished]


def test_length_matching_penalty_requires_a_predictor() -> None:
    with pytest.raises(InputError):
        single_queue_decode(chain_model(), src(), SearchConfig(beam_size=2), ScoreConfig(lmp_enabled=True))


def test_zero_weight_length_penalty_leaves_search_unchanged() -> None:
    model = random_tabular_model(2, vocab_size=6, n_states=3)
    predictor = LengthPredictor(init_predictor_params(model.summary_dim, model.embed_dim, hidden_size=4, seed=1))
    cfg = SearchConfig(beam_size=3, max_steps=12)
    plain = single_queue_decode(model, src(), cfg, ScoreConfig())
    with_lmp = single_queue_decode(model, src(), cfg, ScoreConfig(lmp_enabled=True, gamma=0.0), predictor)
    assert with_lmp.best.tokens == plain.best.tokens
    assert with_lmp.rank_score_trace == plain.rank_score_trace
    ignored = single_queue_decode(model, src(), cfg, ScoreConfig(), predictor)
    assert ignored.best.tokens == plain.best.tokens


def test_decode_dispatches_by_strategy() -> None:
    model = recovery_model()
    cfg = SearchConfig(beam_size=1, retain_size=2)
    score_cfg = ScoreConfig(lam=0.0, alpha=0.0)
    assert decode(model, src(), "beam", cfg, score_cfg).strategy == "beam"
    assert decode(model, src(), "beam-lnorm", cfg, score_cfg).strategy == "beam-lnorm"
    assert decode(model, src(), "sqd", cfg, score_cfg).best.tokens == (3, 1)
    with pytest.raises(InputError):
        decode(model, src(), "astar", cfg, score_cfg)
