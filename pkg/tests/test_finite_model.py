import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastborn.finite_model import TOY_A, TOY_X, FiniteBornModel


def test_forward_terms_explicit():
    model = FiniteBornModel.toy()
    a, x = TOY_A, TOY_X
    y = model.forward_terms(x, 3)
    np.testing.assert_allclose(y[0], a @ x)
    np.testing.assert_allclose(y[1], -a @ np.diag(x) @ a @ x)
    np.testing.assert_allclose(y[2], a @ np.diag(x) @ a @ np.diag(x) @ a @ x)
    np.testing.assert_allclose(model.forward_map(x), sum(model.forward_terms(x, 5)))


def test_apply_kj_on_equal_arguments_gives_terms():
    model = FiniteBornModel.toy()
    terms = model.forward_terms(TOY_X, 4)
    for j in range(1, 5):
        np.testing.assert_allclose(model.apply_kj([TOY_X] * j), terms[j - 1], rtol=1e-15)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4), st.integers(1, 5))
@settings(max_examples=60, deadline=None)
def test_multilinear_in_each_slot(seed, n, j):
    rng = np.random.default_rng(seed)
    model = FiniteBornModel(rng.standard_normal((n, n)))
    xs = list(rng.standard_normal((j, n)))
    slot = int(rng.integers(j))
    z, c = rng.standard_normal(n), float(rng.standard_normal())
    mixed = xs.copy()
    mixed[slot] = c * xs[slot] + z
    other = xs.copy()
    other[slot] = z
    lhs = model.apply_kj(mixed)
    rhs = c * model.apply_kj(xs) + model.apply_kj(other)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * (1 + np.abs(rhs).max()))


def test_k2_matrix(rng):
    model = FiniteBornModel(rng.standard_normal((3, 3)))
    d, s = rng.standard_normal((2, 3))
    np.testing.assert_allclose(model.k2_matrix(s) @ d, model.apply_kj([d, s]), rtol=1e-13)


def test_validation():
    with pytest.raises(ValueError):
        FiniteBornModel(np.ones((2, 3)))
    with pytest.raises(ValueError):
        FiniteBornModel(TOY_A, forward_count=0)
    with pytest.raises(ValueError):
        FiniteBornModel.toy().apply_kj([np.ones(3)])


def test_toy_data_matches_printed_digits():
    np.testing.assert_allclose(FiniteBornModel.toy().forward_map(TOY_X), [0.022031, 0.050908],
                               rtol=0, atol=5e-7)
