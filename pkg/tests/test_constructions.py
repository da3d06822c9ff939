import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lindyn.constructions import (
    PrependedSequence,
    WordEmbeddingSequence,
    build_star_recurrent,
    build_word_embedding_sequence,
    build_z_from_y,
    phi_length,
    phi_length_sum,
    replay_star_log,
)
from lindyn.densities import gen_star_family
from lindyn.errors import LengthBudgetExceeded, StarFamilyExhausted
from lindyn.operators import BackwardShift, apply
from lindyn.spaces import vector

from oracles import word_embedding_literal, word_lengths_literal


def test_phi_examples():
    assert [phi_length(n) for n in (1, 2, 3)] == [2, 7, 16]
    with pytest.raises(OverflowError):
        phi_length(10 ** 7)
    with pytest.raises(ValueError):
        phi_length(0)


@given(st.integers(1, 400))
def test_phi_closed_form_matches_sum_and_word_list(n):
    assert phi_length(n) == phi_length_sum(n)
    if n <= 60:
        assert phi_length(n) == word_lengths_literal(n)


def test_single_round_example():
    res = build_word_embedding_sequence([1.0], 1)
    assert res.vector.valid.tolist() == [1, 1, 1]
    assert res.lengths == (1, 3)
    assert [(w.M, w.i, w.start, w.length) for w in res.words] == [(1, 1, 1, 2)]
    assert json.loads(res.provenance_json())[0]["M"] == 1


@given(st.lists(st.floats(0.1, 9.0), min_size=1, max_size=4), st.integers(1, 2))
def test_matches_literal_construction(seed, rounds):
    res = build_word_embedding_sequence(seed, rounds)
    lit = word_embedding_literal(seed, rounds)
    assert res.vector.valid.tolist() == lit
    for r in range(rounds):
        L = res.lengths[r]
        assert res.lengths[r + 1] == L + phi_length(L)


def test_word_records_point_at_their_words():
    res = build_word_embedding_sequence([2.0, 3.0, 5.0], 2)
    y = res.vector.valid
    for w in res.words:
        word = y[w.start : w.start + w.length]
        assert word[-1] == w.M and word[:-1].tolist() == y[: w.i].tolist()


def test_every_short_word_appears_in_round_one():
    seed = [1.5, 2.5, 0.5, 4.0]
    y = build_word_embedding_sequence(seed, 1).vector.valid.tolist()
    N = len(seed)
    for k in range(1, N + 1):
        for M in range(k, N + 1):
            word = seed[:k] + [M]
            assert any(y[s : s + k + 1] == word for s in range(len(y) - k))


def test_lazy_last_round_agrees_with_materialized():
    lazy = WordEmbeddingSequence([1.0, 2.0, 1.0, 3.0], 2)
    full = word_embedding_literal([1.0, 2.0, 1.0, 3.0], 2)
    assert lazy.window(0, lazy.valid_len).tolist() == full
    three = WordEmbeddingSequence(rounds=3)
    assert three.lengths == (4, 34, 7769, 78213094539)
    M = 7769
    for i in (1, 2, 63, M):
        s = three.word_start(3, M, i)
        word = three.window(s, i + 1)
        assert word[-1] == M and word[:-1].tolist() == three.window(0, i).tolist()


def test_budget_and_validation():
    with pytest.raises(LengthBudgetExceeded):
        build_word_embedding_sequence(rounds=3)
    with pytest.raises(ValueError):
        WordEmbeddingSequence([1.0, -1.0], 1)


def test_z_from_y():
    z = build_z_from_y(vector([1, 2]))
    assert z.valid.tolist() == [-1, 1, 2]
    y = build_word_embedding_sequence(rounds=2).vector
    assert np.array_equal(apply(BackwardShift(), build_z_from_y(y)).valid, y.valid)
    lazy = build_z_from_y(WordEmbeddingSequence(rounds=3))
    assert isinstance(lazy, PrependedSequence) and lazy.window(0, 3).tolist() == [-1, 1, 1]
    with pytest.raises(ValueError):
        build_z_from_y(vector([1, 0]))


def test_star_recurrent_examples():
    star = gen_star_family(9, horizon=2 ** 14)
    res = build_star_recurrent(star, 2 ** 14)
    x = res.vector.valid
    for k in range(5):
        l = 2 * k + 1
        for n in star[l]:
            if n + l <= len(x):
                assert np.max(np.abs(x[n : n + l] - x[:l])) == 0
    assert np.max(np.abs(x)) >= 8
    assert x[0] == 1


def test_star_log_replay_and_sparsity():
    star = gen_star_family(6, horizon=3000)
    res = build_star_recurrent(star, 3000)
    assert np.array_equal(replay_star_log(res.log, 3000), res.vector.valid)
    written = np.zeros(3000, dtype=bool)
    written[0] = True
    for m, l, _ in res.log:
        written[m : m + l] = True
    assert np.all(res.vector.valid[~written[:3000]] == 0)
    kinds = {int(l): int(k) for _, l, k in res.log}
    assert all(kinds[l] == (1 if l % 2 else 2) for l in kinds)


def test_star_family_exhausted():
    star = gen_star_family(3, horizon=100)
    with pytest.raises(StarFamilyExhausted):
        build_star_recurrent(star, 10_000)
