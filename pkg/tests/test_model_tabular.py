from __future__ import annotations

import math

import numpy as np
import pytest

from fixture_models import TOKENS, chain_model, src, tabular
from sq_decoding.core import ContractError, InputError, SourceSentence
from sq_decoding.model_base import sequence_logprob
from sq_decoding.model_tabular import TabularHandle, TabularModel, random_tabular_model


def _declared() -> TabularModel:
    return tabular(
        {
            "q": {"probs": {"a": 0.7, "b": 0.2, "</s>": 0.1}, "next": {"a": "q", "b": "u"}},
            "u": {"probs": {"<s>": 0.25, "</s>": 0.25, "a": 0.25, "b": 0.25}, "next": {"<s>": "u", "a": "u", "b": "q"}},
        },
        summaries={"a b": [1.0, -2.0, 0.5]},
        start_states={"b": "u"},
    )


def test_step_returns_declared_log_distribution() -> None:
    model = _declared()
    _, state = model.encode(src(2))
    out = model.step(state, model.vocab.bos_id)
    lp = dict(zip(TOKENS, out.logprobs))
    assert lp["a"] == pytest.approx(math.log(0.7))
    assert lp["b"] == pytest.approx(math.log(0.2))
    assert lp["</s>"] == pytest.approx(math.log(0.1))
    assert lp["<s>"] == -math.inf


def test_uniform_state_and_per_source_start_state() -> None:
    model = _declared()
    _, state = model.encode(src(3))
    out = model.step(state, model.vocab.bos_id)
    assert np.allclose(out.logprobs, math.log(0.25))
    assert float(np.logaddexp.reduce(out.logprobs)) == pytest.approx(0.0, abs=1e-12)


def test_chained_logprob_equals_path_product() -> None:
    model = _declared()
    a, b, eos = 2, 3, 1
    expected = math.log(0.7) + math.log(0.2) + math.log(0.25)
    assert sequence_logprob(model, src(2), [a, b, eos]) == pytest.approx(expected, abs=1e-9)
    assert model.path_logprob(src(2), [a, b, eos]) == pytest.approx(expected, abs=1e-9)


def test_chained_logprob_matches_path_logprob_on_random_models() -> None:
    rng = np.random.default_rng(11)
    for seed in range(20):
        model = random_tabular_model(seed, vocab_size=6, n_states=3)
        tokens = [int(t) for t in rng.integers(2, 6, size=int(rng.integers(0, 5)))] + [model.vocab.eos_id]
        assert sequence_logprob(model, src(2), tokens) == pytest.approx(model.path_logprob(src(2), tokens), abs=1e-9)


def test_encode_returns_declared_summary_deterministically() -> None:
    model = _declared()
    s1, h1 = model.encode(SourceSentence((2, 3)))
    s2, h2 = model.encode(SourceSentence((2, 3)))
    assert s1.vector.tolist() == [1.0, -2.0, 0.5]
    assert np.array_equal(s1.vector, s2.vector) and h1 == h2
    other, _ = model.encode(SourceSentence((3, 3)))
    assert other.vector.tolist() == [0.0, 0.0, 0.0]


def test_embed_is_one_hot() -> None:
    model = _declared()
    assert model.embed(2).tolist() == [0.0, 0.0, 1.0, 0.0]
    assert np.array_equal(model.embed(3), model.embed(3))
    with pytest.raises(InputError):
        model.embed(9)


def test_invalid_inputs_and_state_handles() -> None:
    model = chain_model()
    with pytest.raises(InputError):
        model.encode(SourceSentence((17,)))
    with pytest.raises(ContractError):
        model.step("not-a-handle", 0)
    _, state = model.encode(src(2))
    with pytest.raises(ContractError):
        model.step(state, 2)  # first step must consume BOS
    with pytest.raises(ContractError):
        model.step(TabularHandle(state="q1", started=True), 2)  # q1 has no transition on "a"


def test_description_validation() -> None:
    with pytest.raises(InputError, match="sum"):
        tabular({"q": {"probs": {"a": 0.5, "</s>": 0.4}, "next": {"a": "q"}}})
    with pytest.raises(InputError, match="no transition"):
        tabular({"q": {"probs": {"a": 0.5, "</s>": 0.5}}})
    with pytest.raises(InputError, match="unknown state"):
        tabular({"q": {"probs": {"a": 0.5, "</s>": 0.5}, "next": {"a": "zz"}}})
    with pytest.raises(InputError, match="Unknown token"):
        tabular({"q": {"probs": {"c": 0.5, "</s>": 0.5}, "next": {}}})
    with pytest.raises(InputError):
        TabularModel.from_description({"tokens": TOKENS})


def test_malformed_description_values_are_input_errors() -> None:
    ok = {"probs": {"</s>": 1.0}}
    with pytest.raises(InputError, match="must be an object"):
        tabular({"q": [["</s>", 1.0]]})
    with pytest.raises(InputError, match="invalid probs"):
        tabular({"q": {"probs": {"</s>": "certain"}}})
    with pytest.raises(InputError, match="invalid probs"):
        tabular({"q": {"probs": [1.0]}})
    with pytest.raises(InputError, match="Invalid summaries"):
        tabular({"q": ok}, summaries={"a": ["x", 1.0]})
    with pytest.raises(InputError, match="flat list"):
        tabular({"q": ok}, default_summary=2.0)
    with pytest.raises(InputError, match="start_states"):
        tabular({"q": ok}, start_states=["q"])


def test_description_round_trip_preserves_behavior() -> None:
    model = _declared()
    again = TabularModel.from_description(model.to_description())
    for source, tokens in ((src(2), [2, 3, 1]), (src(3), [0, 3, 2, 1])):
        assert again.path_logprob(source, tokens) == model.path_logprob(source, tokens)
    assert again.encode(SourceSentence((2, 3)))[0].vector.tolist() == [1.0, -2.0, 0.5]


def test_random_model_rows_are_distributions_without_bos() -> None:
    model = random_tabular_model(5, vocab_size=7, n_states=4, eos_weight=2.0)
    assert model.vocab.size == 7
    for row in model.rows.values():
        assert float(np.sum(row.probs)) == pytest.approx(1.0, abs=1e-9)
        assert row.probs[model.vocab.bos_id] == 0.0
    again = random_tabular_model(5, vocab_size=7, n_states=4, eos_weight=2.0)
    assert again.to_description() == model.to_description()
