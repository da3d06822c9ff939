import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lindyn.errors import SpaceMismatch, ValidityExhausted, WeightLengthMismatch
from lindyn.operators import (
    BackwardShift,
    Birkhoff,
    Diagonal,
    DiffOp,
    MacLane,
    apply,
    birkhoff_valid_prefix,
    eigencheck_diffop,
    exp_coeffs,
    orbit,
)
from lindyn.spaces import TruncatedVector, polynomial, unit_vector, vector

from oracles import binomial_translate, derivative_literal, shift_orbit_literal

small = st.floats(-10, 10, allow_nan=False)


def test_backward_shift_example():
    out = apply(BackwardShift(), vector([1, 2, 3, 4]))
    assert list(out.valid) == [2, 3, 4] and out.valid_len == 3


def test_weighted_shift_needs_enough_weights():
    out = apply(BackwardShift([2.0, 2.0, 2.0]), vector([1, 2, 3, 4]))
    assert list(out.valid) == [4, 6, 8]
    with pytest.raises(WeightLengthMismatch):
        apply(BackwardShift([2.0]), vector([1, 2, 3, 4]))


def test_birkhoff_example_against_binomial_oracle():
    out = apply(Birkhoff(1), polynomial([0, 0, 1]))
    assert list(out.valid) == [1, 2, 1]
    coeffs = [3, -1, 0, 2, 5]
    expected = [float(c) for c in binomial_translate(coeffs, -2)]
    assert np.allclose(apply(Birkhoff(-2), polynomial(coeffs)).valid, expected, rtol=0, atol=1e-12)


def test_maclane_example():
    out = apply(MacLane(), polynomial([5, 1, 3]))
    assert list(out.valid) == [1, 6] and out.valid_len == 2


def test_domain_checks():
    with pytest.raises(SpaceMismatch):
        apply(BackwardShift(), polynomial([1, 2]))
    with pytest.raises(SpaceMismatch):
        apply(MacLane(), vector([1, 2]))
    assert apply(Diagonal([2.0, 3.0]), polynomial([1, 1])).valid.tolist() == [2, 3]


def test_birkhoff_tail_estimate_truncates_unknown_tails():
    # without the exact-support flag, an undecaying tail leaves no trustworthy index
    with pytest.raises(ValidityExhausted):
        apply(Birkhoff(1), TruncatedVector([1.0] * 8, None, "entire"))
    geometric = 0.5 ** np.arange(60)
    keep = birkhoff_valid_prefix(1.0, geometric, 1e-12)
    assert 0 < keep < 60
    assert birkhoff_valid_prefix(1.0, np.r_[geometric[:10], np.zeros(10)], 1e-12) == 20


def test_large_birkhoff_matrix_stays_finite():
    # 120 coefficients take the log-space binomial path
    e = exp_coeffs(0.5, 119).real
    out = apply(Birkhoff(0.5), TruncatedVector(e, None, "entire"))
    assert 0 < out.valid_len and np.all(np.isfinite(out.valid))
    # exp(z/2) translated by 1/2 is exp(1/4) exp(z/2)
    ref = apply(Birkhoff(0.5), polynomial(e))
    assert np.allclose(ref.valid[:40], math.exp(0.25) * e[:40], rtol=1e-12)


def test_diffop_degree_and_scalar_case():
    op = DiffOp([2.0, 0.0, 1.0, 0.0, 0.0])
    assert op.degree == 2 and op.validity_cost == 2
    assert eigencheck_diffop([3.0], 1.7, 10) == 0.0
    with pytest.raises(ValueError):
        eigencheck_diffop([0, 0, 1], 2.0, 3)


@pytest.mark.parametrize("phi, lam, degree", [([0, 1], 1, 30), ([0, 0, 1], 2, 40), ([1, 1], 1j, 40)])
def test_eigencheck_examples(phi, lam, degree):
    assert eigencheck_diffop(phi, lam, degree) < 1e-10


def test_orbit_examples():
    orb = orbit(Diagonal([1j, 1j]), unit_vector(1, 2), 8)
    first = [complex(p.valid[0]) for p in orb.points]
    assert first[:5] == [1, 1j, -1, -1j, 1] and first[4:] == first[:5]
    ones = orbit(BackwardShift(), vector([1.0] * 10), 9)
    assert all(np.all(p.valid == 1) for p in ones.points)
    per = [1, 2] * 6
    orb = orbit(BackwardShift(), vector(per), 5)
    lit = shift_orbit_literal(per, 5)
    assert all(list(p.valid) == q for p, q in zip(orb.points, lit))
    assert list(orb[0].valid[:4]) == list(orb[2].valid[:4])


def test_orbit_validity_budget():
    with pytest.raises(ValidityExhausted) as info:
        orbit(BackwardShift(), vector([1, 2, 3]), 5)
    assert info.value.achieved == 3


def test_orbit_csv(tmp_path):
    orb = orbit(BackwardShift(), vector(range(10)), 3)
    orb.to_csv(tmp_path / "o.csv", 4)
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0].startswith("n,re_1") and len(lines) == 5


@given(st.lists(small, min_size=4, max_size=10), st.lists(small, min_size=4, max_size=10), small, small)
def test_linearity(xs, ys, alpha, beta):
    n = min(len(xs), len(ys))
    x, y = np.array(xs[:n]), np.array(ys[:n])
    ops = [(BackwardShift(), "omega"), (Diagonal(np.linspace(-2, 2, n)), "omega"), (MacLane(), "entire"),
           (DiffOp([1.0, -2.0, 0.5]), "entire"), (Birkhoff(0.7), "entire")]
    for op, tag in ops:
        mk = (lambda v: polynomial(v)) if tag == "entire" else (lambda v: vector(v))
        lhs = apply(op, mk(alpha * x + beta * y)).valid
        rhs = alpha * apply(op, mk(x)).valid + beta * apply(op, mk(y)).valid
        scale = 1 + np.max(np.abs(rhs)) + np.max(np.abs(lhs))
        assert np.allclose(lhs, rhs, rtol=0, atol=1e-9 * scale)


@given(st.lists(small, min_size=5, max_size=12))
def test_semigroup_and_derivative_oracle(xs):
    for op, v in [(BackwardShift(), vector(xs)), (MacLane(), polynomial(xs)), (DiffOp([0, 1]), polynomial(xs))]:
        two = orbit(op, v, 2)[2]
        assert np.array_equal(apply(op, apply(op, v)).valid, two.valid)
    assert np.allclose(apply(MacLane(), polynomial(xs)).valid, derivative_literal(xs))
    assert np.array_equal(apply(DiffOp([0, 1]), polynomial(xs)).valid, apply(MacLane(), polynomial(xs)).valid)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=12), st.floats(-2, 2).filter(lambda a: abs(a) > 1e-3))
def test_birkhoff_inverse_round_trip(us, a):
    coeffs = [u / math.factorial(m) for m, u in enumerate(us)]
    f = polynomial(coeffs)
    back = apply(Birkhoff(a).inverse(), apply(Birkhoff(a), f))
    assert np.max(np.abs(back.valid - f.valid)) < 1e-12


@given(st.lists(st.integers(-5, 5), min_size=2, max_size=8), st.integers(-3, 3).filter(bool))
def test_birkhoff_matches_exact_expansion(coeffs, a):
    exact = [float(c) for c in binomial_translate(coeffs, a)]
    got = apply(Birkhoff(a), polynomial(coeffs)).valid
    assert np.allclose(got, exact, rtol=1e-13, atol=1e-9)
