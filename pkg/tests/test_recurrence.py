import cmath

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lindyn.constructions import WordEmbeddingSequence, build_star_recurrent, build_z_from_y
from lindyn.densities import ReturnSet, gen_star_family
from lindyn.errors import EmptyReturnSet, NoConvergentSubsequence, NotInvertible, ValidityExhausted
from lindyn.operators import BackwardShift, Birkhoff, Diagonal, apply
from lindyn.recurrence import (
    Thresholds,
    classify,
    consistent_thresholds,
    coverage_of,
    lbo_falsify,
    lbo_search,
    pushforward_certificate,
    return_set,
    transfer_block_recurrence,
    urec_coverage,
    verify_certificate,
)
from lindyn.spaces import NeighborhoodSpec, SpaceSpec, TruncatedVector, polynomial, unit_vector, vector

from oracles import max_gap_with_zero, shift_orbit_literal

OMEGA = SpaceSpec.omega()
B = BackwardShift()


def periodic(pattern, length):
    return vector(np.resize(np.asarray(pattern, dtype=float), length))


def test_return_set_fixed_point_and_rotation():
    H = 40
    A = return_set(OMEGA, Diagonal([1.0]), unit_vector(1, 1), NeighborhoodSpec(unit_vector(1, 1), 1, 0.1), H)
    assert A.elems.tolist() == list(range(1, H + 1))
    rot = Diagonal([cmath.exp(2j * cmath.pi / 5)])
    x = unit_vector(1, 1)
    A = return_set(OMEGA, rot, x, NeighborhoodSpec(x, 1, 0.1), H)
    assert A.elems.tolist() == list(range(5, H + 1, 5))


def test_return_set_of_periodic_shift_against_simulation():
    x = periodic([1, 2], 60)
    A = return_set(OMEGA, B, x, NeighborhoodSpec(x, 2, 0.5), 20)
    assert A.elems.tolist() == list(range(2, 21, 2))
    lit = shift_orbit_literal(x.valid.tolist(), 20)
    expected = [n for n in range(1, 21) if max(abs(a - b) for a, b in zip(lit[n][:2], lit[0][:2])) < 0.5]
    assert A.elems.tolist() == expected
    # the generic path agrees with the sliding-window fast path
    weighted = BackwardShift(np.ones(59))
    assert return_set(OMEGA, weighted, x, NeighborhoodSpec(x, 2, 0.5), 20).elems.tolist() == expected


def test_return_set_reports_partial_result():
    x = periodic([1, 2], 10)
    with pytest.raises(ValidityExhausted) as info:
        return_set(OMEGA, B, x, NeighborhoodSpec(x, 2, 0.5), 50)
    assert info.value.achieved == 8
    assert info.value.partial.elems.tolist() == [2, 4, 6, 8]


def test_classify_periodic_and_nonrecurrent():
    p = 3
    x = periodic([1, 5, -2], 3000)
    rep = classify(OMEGA, B, x, 2000, [(1, 0.5), (3, 0.1)])
    assert rep.verdicts["uniformly_recurrent"]
    assert all(c.max_gap == p for c in rep.cells)
    rep = classify(OMEGA, B, unit_vector(1, 200), 100, [(1, 0.5)])
    assert not rep.verdicts["recurrent"]


def test_classify_star_vector_reiteratively_recurrent():
    star = gen_star_family(9, horizon=2 ** 14)
    x = build_star_recurrent(star, 2 ** 14).vector
    rep = classify(OMEGA, B, x, 2 ** 13, [(2 * k + 1, 0.3) for k in range(5)])
    assert rep.verdicts["reiteratively_recurrent"]
    assert all(c.bd_est >= 1 / star.period for c in rep.cells)


def test_consistent_thresholds_caps_gap():
    th = consistent_thresholds(Thresholds(), 100)
    assert th.urec_max_gap == 33
    assert consistent_thresholds(Thresholds(), 2 ** 16).urec_max_gap == 50
    with pytest.raises(ValueError):
        consistent_thresholds(Thresholds(frec=0.9), 2)


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=6), st.sampled_from([0.1, 0.5, 1.5]))
def test_verdicts_are_nested(pattern, eps):
    x = periodic(pattern, 700)
    rep = classify(OMEGA, B, x, 600, [(1, eps), (2, eps)])
    v = rep.verdicts
    order = ["uniformly_recurrent", "frequently_recurrent", "reiteratively_recurrent", "recurrent"]
    for stronger, weaker in zip(order, order[1:]):
        assert not v[stronger] or v[weaker]


def test_lbo_search_bounded_orbit():
    lambdas = np.exp(2j * np.pi * np.arange(1, 9) / 7)
    x = vector([1, -2, 3, 0.5, 0, 0, 1, 2], "omega")
    res = lbo_search(OMEGA, Diagonal(lambdas), x, 50, (1, 2), (0.5,), 8, 8)
    cert = res.certificate
    assert (cert.k0, cert.eps) == (1, 0.5)
    assert np.allclose(cert.w, np.maximum(np.abs(x.valid), 1e-12))
    assert verify_certificate(OMEGA, Diagonal(lambdas), x, cert) == []


def test_lbo_for_word_embedding_pair():
    y = WordEmbeddingSequence(rounds=2).materialize()
    z = build_z_from_y(y)
    H = 2000
    res = lbo_search(OMEGA, B, z, H, (1,), (0.5,), 64, 64, growth_bound=lambda j: 1.0)
    assert res.certificate.vacuous
    M_max = 34
    res = lbo_search(OMEGA, B, y, y.valid_len - 65, (1, 2, 3), (0.5, 0.25), 64, 64, growth_bound=M_max - 0.5)
    assert res.certificate is None
    assert all(row["max_w"] >= M_max for row in res.cells)


def test_lbo_falsify_empty_cases():
    H = 100
    assert lbo_falsify(OMEGA, B, vector(np.zeros(300)), H, 1, 0.5, lambda j: 0.0, J=8) == []
    x = periodic([1, -1, 2], 300)
    assert lbo_falsify(OMEGA, B, x, H, 1, 0.5, 2.5, J=8) == []
    wit = lbo_falsify(OMEGA, B, x, H, 1, 0.5, 1.5, J=8)
    assert wit and all(w.magnitude == 2 for w in wit)


def test_pushforward_examples():
    lambdas = np.exp(1j * np.arange(1, 7))
    op = Diagonal(lambdas)
    x = vector([1, 2, -1, 0.5, 3, 1], "omega")
    cert = lbo_search(OMEGA, op, x, 60, (2,), (0.5,), 6, 6).certificate
    x1, pushed = pushforward_certificate(OMEGA, op, x, cert)
    assert np.allclose(pushed.w, cert.w)
    assert verify_certificate(OMEGA, op, x1, pushed) == []
    with pytest.raises(NotInvertible):
        pushforward_certificate(OMEGA, B, x, cert)


def test_pushforward_birkhoff_against_direct_search():
    space = SpaceSpec.entire(64)
    op = Birkhoff(0.25)
    x = polynomial([0.0, 1.0, 0.0, 0.0])
    cert = lbo_search(space, op, x, 12, (1,), (1.0,), 3, 3).certificate
    x1, pushed = pushforward_certificate(space, op, x, cert)
    assert np.allclose(x1.valid, apply(op, x).valid)
    assert verify_certificate(space, op, x1, pushed) == []
    direct = lbo_search(space, op, x1, 12, (pushed.k0,), (pushed.eps,), 3, 3).certificate
    assert pushed.return_count == direct.return_count == 3
    assert np.allclose(direct.w, pushed.w, rtol=1e-12)


def test_coverage_examples():
    H = 100
    mult = ReturnSet(np.arange(4, H + 1, 4), H)
    cov = coverage_of(mult)
    assert cov.covered and cov.N_used == 4
    cov = coverage_of(ReturnSet.naturals(H))
    assert cov.covered and cov.N_used == 1
    gap = ReturnSet(np.array([2, 3, 10, 11, 12, 19, 20]), 22)
    cov = coverage_of(gap)
    assert cov.covered and cov.N_used == 7
    with pytest.raises(EmptyReturnSet):
        coverage_of(ReturnSet(np.array([], dtype=np.int64), 5))


def indicator_vector(A: ReturnSet, extra=64):
    x = np.zeros(A.horizon + extra)
    x[0] = 1.0
    x[A.elems] = 1.0
    return vector(x)


@given(st.lists(st.integers(1, 9), min_size=1, max_size=80))
def test_urec_coverage_decomposes_syndetic_sets(steps):
    elems = np.cumsum(steps)
    A = ReturnSet(elems, int(elems[-1]))
    x = indicator_vector(A)
    cov = urec_coverage(OMEGA, B, x, NeighborhoodSpec(x, 1, 0.5), A.horizon)
    assert cov.covered and cov.N_used == max_gap_with_zero(elems.tolist())


def test_transfer_trivial_case():
    x = periodic([1, 2, 3], 400)
    nb = NeighborhoodSpec(x, 3, 0.5)
    W = ReturnSet(np.arange(3, 301, 3), 300)
    res = transfer_block_recurrence(OMEGA, B, x, nb, W, 300, depth=32)
    assert np.array_equal(res.x_U.valid, x.valid[: res.x_U.valid_len])
    expected = [t for t in (W.elems - 3) if 1 <= t <= res.transferred.horizon]
    assert res.transferred.elems.tolist() == expected


def test_transfer_star_construction():
    star = gen_star_family(9, horizon=2 ** 13)
    x = build_star_recurrent(star, 2 ** 13).vector
    l = 3
    nb = NeighborhoodSpec(x, 1, 0.5)
    W = star.as_return_set(l).restrict(2 ** 12)
    res = transfer_block_recurrence(OMEGA, B, x, nb, W, 2 ** 12, depth=256)
    r0 = int(W.elems[0])
    expected = set(int(t) for t in W.elems - r0 if 1 <= t <= res.transferred.horizon)
    assert expected and set(res.transferred.elems.tolist()) == expected


def test_transfer_degenerate():
    x = unit_vector(1, 100)
    with pytest.raises(NoConvergentSubsequence):
        transfer_block_recurrence(OMEGA, B, x, NeighborhoodSpec(x, 1, 0.5), ReturnSet(np.array([3, 5]), 50), 50)
    empty = ReturnSet(np.array([], dtype=np.int64), 50)
    with pytest.raises(NoConvergentSubsequence):
        transfer_block_recurrence(OMEGA, B, x, NeighborhoodSpec(x, 1, 0.5), empty, 50)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=5), st.sampled_from([0.25, 0.5, 1.0]), st.integers(1, 3))
def test_certificates_reverify(pattern, eps, k0):
    x = periodic(pattern, 400)
    op = BackwardShift(np.ones(399))
    res = lbo_search(OMEGA, op, x, 200, (k0,), (eps,), 8, 8)
    assert verify_certificate(OMEGA, op, x, res.certificate) == []
    tv = TruncatedVector(x.valid, None, "omega")
    assert verify_certificate(OMEGA, B, tv, lbo_search(OMEGA, B, tv, 200, (k0,), (eps,), 8, 8).certificate) == []
