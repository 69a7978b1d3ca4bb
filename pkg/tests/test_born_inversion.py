import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastborn.born_inversion import (
    DivergenceWarning,
    InverseBornSeries,
    InversionConfig,
    Method,
    a_posteriori_check,
    compositions,
    contraction_factor,
    diagnostics,
    fast_iterate,
    fast_matrix,
    ibs_iterate,
    ibs_terms,
    invert,
    newton_iterate,
    reduced_ibs_terms,
    reduced_iterate,
    truncated_forward,
)
from fastborn.finite_model import TOY_X, FiniteBornModel
from fastborn.linalg import truncated_pinv
from fastborn.radial_model import ModelParams, assemble_model

from oracles import hand_expanded_ibs4


def _toy():
    model = FiniteBornModel.toy()
    return model, truncated_pinv(model.k1_matrix, rank=2), model.forward_map(TOY_X)


@given(st.integers(1, 9), st.data())
def test_compositions_enumeration(total, data):
    parts = data.draw(st.integers(1, total))
    comps = list(compositions(total, parts))
    assert len(comps) == math.comb(total - 1, parts - 1)
    assert len(set(comps)) == len(comps)
    assert all(sum(c) == total and min(c) >= 1 and len(c) == parts for c in comps)


def test_ibs_fourth_term_matches_hand_expansion():
    p = ModelParams(modes=8, grid_n=8)
    model = assemble_model(p)
    pinv = truncated_pinv(model.k1_matrix, rank=5)
    phi = model.forward_map(np.where(model.grid.nodes <= p.radius_a, 0.2, 0.0))
    got = ibs_terms(model, pinv, phi, 4)[3]
    ref = hand_expanded_ibs4(model, pinv, phi)
    assert np.max(np.abs(got - ref)) <= 1e-11 * np.max(np.abs(ref))


def test_inverse_operator_is_multilinear(rng):
    model = FiniteBornModel(rng.standard_normal((3, 3)))
    pinv = truncated_pinv(model.k1_matrix, rank=3)
    series = InverseBornSeries(model, pinv)
    a, b, c, d = rng.standard_normal((4, 3))
    lhs = series.apply([2 * a + c, b, d])
    rhs = 2 * series.apply([a, b, d]) + series.apply([c, b, d])
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


@pytest.mark.parametrize("j", range(1, 7))
def test_ibs_composition_counter(j):
    model, pinv, y = _toy()
    series = InverseBornSeries(model, pinv)
    series.term(y, j)
    assert series.top_level_compositions == 2 ** (j - 1) - 1
    assert series.top_level_compositions == sum(
        len(list(compositions(j, parts))) for parts in range(1, j))


def test_ibs_order_guard():
    model, pinv, y = _toy()
    with pytest.raises(ValueError, match="max_order"):
        ibs_terms(model, pinv, y, 9)
    with pytest.raises(ValueError, match="max_order"):
        ibs_terms(model, pinv, y, 3, allow_order=2)
    assert len(ibs_terms(model, pinv, y, 3, allow_order=3)) == 3


def test_fast_counter_and_matrix(disk_model, disk_pinv, disk_phi, rng):
    trace = fast_iterate(disk_model, disk_pinv, disk_phi, 6)
    assert trace.kernel_applications == [0, 1, 2, 3, 4, 5]
    # a modest rank keeps the pseudoinverse from amplifying summation-order rounding
    pinv = truncated_pinv(disk_model.k1_matrix, rank=8)
    eta1 = pinv(disk_phi)
    b = fast_matrix(disk_model, pinv, eta1)
    for _ in range(3):
        d = rng.standard_normal(disk_model.grid.n)
        ref = -pinv(disk_model.apply_kj([d, eta1]))
        assert np.max(np.abs(b @ d - ref)) <= 1e-11 * np.max(np.abs(ref))


def test_order_one_shared_by_all_methods(disk_model, disk_pinv, disk_phi):
    first = [invert(disk_model, disk_pinv, disk_phi, InversionConfig(method=m, order=1)).final
             for m in Method]
    for eta in first[1:]:
        assert np.array_equal(eta, first[0])


def test_toy_schemes_coincide():
    model, pinv, y = _toy()
    fast = fast_iterate(model, pinv, y, 5).iterates
    for other in (ibs_iterate(model, pinv, y, 5).iterates,
                  reduced_iterate(model, pinv, y, 5, variant="hoskins").iterates,
                  reduced_iterate(model, pinv, y, 5, variant="reduced").iterates):
        np.testing.assert_allclose(np.array(other), np.array(fast), rtol=0, atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_equivalence_on_random_invertible(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    a /= np.linalg.norm(a, 2)
    if np.linalg.cond(a) > 50:
        a += 2 * np.eye(n)
    model = FiniteBornModel(a)
    pinv = truncated_pinv(a, rank=n)
    y = model.forward_map(rng.uniform(-0.1, 0.1, n))
    fast = np.array(fast_iterate(model, pinv, y, 5).iterates)
    for variant in ("reduced", "hoskins"):
        red = np.array(reduced_iterate(model, pinv, y, 5, variant=variant).iterates)
        np.testing.assert_allclose(red, fast, rtol=0, atol=1e-12 * (1 + np.abs(fast).max()))
    ibs = np.array(ibs_iterate(model, pinv, y, 5).iterates)
    np.testing.assert_allclose(ibs, fast, rtol=0, atol=1e-12 * (1 + np.abs(fast).max()))


def test_reduced_close_to_fast_on_disk(disk_model, disk_pinv, disk_phi):
    fast = fast_iterate(disk_model, disk_pinv, disk_phi, 5).final
    hoskins = reduced_iterate(disk_model, disk_pinv, disk_phi, 5, variant="hoskins").final
    reduced = reduced_iterate(disk_model, disk_pinv, disk_phi, 5, variant="reduced").final
    assert np.max(np.abs(hoskins - fast)) <= 1e-12 * np.max(np.abs(fast))
    # the reduced series uses K1 K1^+ != I, a small but nonzero difference
    assert np.max(np.abs(reduced - fast)) <= 1e-5 * np.max(np.abs(fast))
    terms = reduced_ibs_terms(disk_model, disk_pinv, disk_phi, 3)
    assert len(terms) == 3


def test_newton_converges_on_toy():
    model, pinv, y = _toy()
    for forward in ("exact", 5):
        trace = newton_iterate(model, pinv, y, 30, forward=forward)
        np.testing.assert_allclose(trace.final, TOY_X, rtol=1e-14)
        assert trace.kernel_applications[:3] == [0, 1, 2]


def test_newton_on_disk_reduces_residual(disk_model, disk_pinv, disk_phi):
    trace = newton_iterate(disk_model, disk_pinv, disk_phi, 5, residuals=True)
    assert trace.residual_norms[-1] < trace.residual_norms[0]


def test_truncated_forward_matches_finite_model():
    model, _, _ = _toy()
    np.testing.assert_allclose(truncated_forward(model, TOY_X, 5), model.forward_map(TOY_X), rtol=1e-15)


def test_tolerance_stops_early():
    model, pinv, y = _toy()
    trace = fast_iterate(model, pinv, y, 50, tolerance=1e-10)
    assert trace.order < 50
    assert trace.update_norms[-1] < 1e-10


def test_divergence_warning():
    model = FiniteBornModel.toy()
    pinv = truncated_pinv(model.k1_matrix, rank=2)
    y = model.forward_map(np.array([3.0, 3.0]))
    with pytest.warns(DivergenceWarning):
        trace = fast_iterate(model, pinv, y, 8)
    assert trace.warnings and "three consecutive" in trace.warnings[0]


def test_trace_json_schema(disk_model, disk_pinv, disk_phi):
    trace = fast_iterate(disk_model, disk_pinv, disk_phi, 3, residuals=True)
    doc = trace.to_json()
    assert set(doc) == {"method", "order", "update_norms", "residual_norms",
                        "kernel_applications", "wall_ms", "warnings"}
    assert doc["order"] == 3 and len(doc["wall_ms"]) == 3
    assert all(b >= a for a, b in zip(doc["wall_ms"], doc["wall_ms"][1:]))


def test_config_validation():
    with pytest.raises(ValueError):
        InversionConfig(order=0)
    with pytest.raises(ValueError):
        InversionConfig(method="bogus")
    with pytest.raises(ValueError):
        InversionConfig(newton_forward=0)
    assert InversionConfig(method="ibs").method is Method.IBS


def test_diagnostics_finite(disk_model, disk_pinv, disk_phi):
    d = diagnostics(disk_model, disk_pinv, disk_phi)
    assert all(np.isfinite(v) and v >= 0 for v in d.as_dict().values())
    assert d.h == pytest.approx(np.max(np.abs(disk_pinv(disk_phi))))
    # the fast scheme converges here, consistent with a criterion below one
    assert d.fast_criterion < 1


def test_a_posteriori_bound_on_toy():
    model, pinv, y = _toy()
    trace = newton_iterate(model, pinv, y, 61)
    q = contraction_factor(trace.update_norms)
    assert q < 1
    b = 1 / (1 - q)
    for lhs, rhs in a_posteriori_check(trace, trace.iterates[60], b)[:31]:
        assert lhs <= rhs


def test_contraction_factor():
    assert contraction_factor([1.0, 0.5, 0.1, 0.0]) == 0.5
    assert contraction_factor([1.0, 1e-20, 1e-19], floor=1e-16) == 1e-20
    assert contraction_factor([1.0]) == 0.0


def test_diagnostics_match_golden(disk_model, disk_pinv, disk_phi):
    import json
    from pathlib import Path
    ref = json.loads((Path(__file__).parent / "golden" / "diagnostics.json").read_text())
    got = diagnostics(disk_model, disk_pinv, disk_phi).as_dict()
    for key in ("h", "mu", "nu", "kk2_norm", "fast_criterion", "reduced_criterion",
                "fast_matrix_norm"):
        assert got[key] == pytest.approx(ref[key], rel=1e-6), key
    # 1/s_23 and the projection defect are dominated by rounding in the tail
    assert got["pinv_norm"] == pytest.approx(ref["pinv_norm"], rel=1e-2)
    assert got["projection_defect"] < 0.05
