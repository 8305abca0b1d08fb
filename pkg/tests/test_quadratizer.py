import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molunfold.encoder import AngleGrid, build_hubo
from molunfold.polynomial import BinaryPolynomial
from molunfold.quadratizer import chop_qubo, default_penalty_scale, lift_assignment, quadratize
from molunfold.topology import build_torsion_model


@st.composite
def hubos(draw, max_vars=7):
    n = draw(st.integers(3, max_vars))
    keys = st.lists(st.integers(0, n - 1), min_size=1, max_size=4, unique=True)
    coefs = st.floats(-10, 10, allow_nan=False)
    terms = draw(st.lists(st.tuples(keys, coefs), min_size=1, max_size=10))
    return BinaryPolynomial({tuple(k): c for k, c in terms}), n


def _all_bits(n):
    return np.array(list(itertools.product([0, 1], repeat=n)))


@settings(max_examples=60, deadline=None)
@given(hubos())
def test_lift_preserves_value_and_minimum(data):
    poly, n = data
    q = quadratize(poly, n_vars=n)
    bits = _all_bits(n)
    hubo_values = poly.evaluate_many(bits)
    lifted = np.array([lift_assignment(q, b) for b in bits])
    np.testing.assert_allclose(q.evaluate_many(lifted), hubo_values, atol=1e-9)
    assert q.evaluate_many(_all_bits(q.n_vars)).min() == pytest.approx(hubo_values.min(), abs=1e-9)
    assert q.to_polynomial().degree <= 2


def test_greedy_picks_most_shared_pair():
    poly = BinaryPolynomial({(0, 1, 2): 1.0, (0, 1, 3): 1.0, (2, 3, 4): 1.0})
    q = quadratize(poly)
    assert q.ancillas[0] == (5, (0, 1))
    assert q.n_original == 5


def test_ties_go_to_smallest_pair():
    q = quadratize(BinaryPolynomial({(2, 3, 4): 1.0}))
    assert q.ancillas == [(5, (2, 3))]


def test_quadratic_input_untouched():
    poly = BinaryPolynomial({(0,): 1.0, (0, 1): -2.0}, constant=3.0)
    q = quadratize(poly)
    assert q.ancillas == [] and q.penalty_scale == 0.0
    assert q.to_polynomial() == poly


def test_default_penalty_scale():
    poly = BinaryPolynomial({(0, 1, 2): -3.0, (0, 1): 100.0, (1, 2, 3, 4): 0.5})
    assert default_penalty_scale(poly) == pytest.approx(2 * (1 + 3.5))
    with pytest.raises(ValueError):
        quadratize(poly, penalty_scale=0)


def test_lift_rejects_wrong_length():
    q = quadratize(BinaryPolynomial({(0, 1, 2): 1.0}))
    with pytest.raises(ValueError):
        lift_assignment(q, [1, 1])


def test_chop_monotone_and_protects_constraints(test_ligand):
    tm = build_torsion_model(test_ligand, 3)
    hubo = build_hubo(tm, AngleGrid(8), 100.0)
    q = quadratize(hubo)
    counts = [chop_qubo(q, t).n_entries for t in (0, 30, 60, 100, 200)]
    assert counts == sorted(counts, reverse=True)
    chopped = chop_qubo(q, 1e9)
    for i in chopped.linear:
        assert (i,) in q.protected
    for key in hubo.constraint_terms:
        assert (key[0] in chopped.linear) if len(key) == 1 else (key in chopped.quadratic)
    with pytest.raises(ValueError):
        chop_qubo(q, -1)


def test_text_exports(test_ligand):
    import json

    tm = build_torsion_model(test_ligand, 2)
    q = quadratize(build_hubo(tm, AngleGrid(8), 5.0))
    lines = q.to_text().splitlines()
    assert lines[0] == f"# vars {q.n_vars}"
    body = [l.split() for l in lines[3:]]
    assert len(body) == q.n_entries
    assert json.loads(q.ancillas_json())["n_original"] == 16
