import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from cycsync.models import (ConditionViolation, GeneralLV3Params, LVParams,
                            NonPositiveComponent, Region, classify_region,
                            coexistence_jacobian_eigenvalues, coexistence_point,
                            conditions_hold, heteroclinic_constant, hopf_alpha,
                            hopf_coefficients, hopf_residual, lv3_general, lv3_specific,
                            may_leonard_manifold_relation, specific_as_general)

alphas = st.floats(1.05, 3.0)
gammas = st.floats(0.2, 1.5)
states = st.lists(st.floats(0.01, 1.5), min_size=3, max_size=3).map(np.array)


@settings(max_examples=60)
@given(alphas, gammas)
def test_coexistence_point_is_equilibrium(a, g):
    p = LVParams(a, g)
    y = coexistence_point(p, strict=False)
    np.testing.assert_allclose(lv3_specific(p).rhs(y), 0.0, atol=1e-13)


def test_coexistence_point_rejects_nonpositive():
    with pytest.raises(NonPositiveComponent):
        coexistence_point(LVParams(3.0, 0.1))


@settings(max_examples=40)
@given(alphas, gammas, states)
def test_jacobian_matches_finite_differences(a, g, y):
    m = lv3_specific(LVParams(a, g))
    J = m.jacobian(y)
    h = 1e-6
    fd = np.column_stack([(m.rhs(y + h * e) - m.rhs(y - h * e)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(J, fd, atol=1e-7)


@given(alphas, gammas, states)
def test_batched_rhs_matches_scalar(a, g, y):
    m = lv3_specific(LVParams(a, g))
    Y = np.stack((y, 2 * y))
    np.testing.assert_allclose(m.rhs(Y)[0], m.rhs(y), rtol=1e-14)
    np.testing.assert_allclose(m.jacobian(Y)[1], m.jacobian(2 * y), rtol=1e-14)


@settings(max_examples=40)
@given(alphas, gammas, states)
def test_specific_system_maps_onto_general(a, g, y):
    p = LVParams(a, g)
    gen, scale = specific_as_general(p)
    x = y / scale
    lhs = lv3_specific(p).rhs(y)
    rhs = scale * lv3_general(gen).rhs(x)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


@given(states, st.lists(st.floats(1.1, 3), min_size=3, max_size=3),
       st.lists(st.floats(0, 0.9), min_size=3, max_size=3))
def test_general_system_is_equivariant_under_rotation(y, alpha, beta):
    p = GeneralLV3Params(tuple(alpha), tuple(beta), (1.0, 1.5, 0.5))
    f = lv3_general(p).rhs(y)
    fr = lv3_general(p.rotated()).rhs(np.roll(y, -1))
    np.testing.assert_allclose(fr, np.roll(f, -1), rtol=1e-13, atol=1e-15)


def test_hopf_root_matches_eigenvalue_crossing():
    a_h = hopf_alpha(0.5, 2.0, 2.3)
    assert a_h == pytest.approx(2.2408612582, abs=1e-9)
    for da, sign in ((-1e-6, -1), (1e-6, 1)):
        re = coexistence_jacobian_eigenvalues(LVParams(a_h + da, 0.5)).real.max()
        assert np.sign(re) == sign


@settings(max_examples=40)
@given(alphas, gammas)
def test_hopf_residual_is_cubic_in_gamma(a, g):
    c = hopf_coefficients(a)
    assert hopf_residual(LVParams(a, g)) == pytest.approx(np.polyval(c, g), rel=1e-10, abs=1e-10)


def test_heteroclinic_constant_example():
    # (a-1)(a-g)(ag-1)/g at a=2, g=0.5 is 1*1.5*0/0.5
    assert heteroclinic_constant(LVParams(2.0, 0.5)) == 0.0
    assert heteroclinic_constant(LVParams(3.0, 2.0)) == pytest.approx(2 * 1 * 5 / 2)


@pytest.mark.parametrize("alpha,region", [(2.0, Region.A), (2.3, Region.B),
                                          (2.3427, Region.B), (2.38, Region.B),
                                          (2.385, Region.C), (2.5, Region.C)])
def test_region_classification(alpha, region):
    assert classify_region(LVParams(alpha, 0.5)).region is region


def test_conditions_violation_raises():
    assert not conditions_hold(LVParams(0.9, 0.5))
    with pytest.raises(ConditionViolation):
        classify_region(LVParams(0.9, 0.5))


def test_verdict_fields_are_consistent():
    v = classify_region(LVParams(2.3427, 0.5))
    assert v.max_real_eigenvalue > 0
    assert v.heteroclinic_c < 1
    assert v.hopf_residual == hopf_residual(LVParams(2.3427, 0.5))


def test_may_leonard_relation():
    a = (1.5, 1.5, 1.5)
    b = (0.5, 0.5, 0.5)  # (1-b)^3 == (a-1)^3
    assert may_leonard_manifold_relation(GeneralLV3Params(a, b))
    assert not may_leonard_manifold_relation(GeneralLV3Params(a, (0.4, 0.5, 0.5)))


def test_params_validation():
    with pytest.raises(ValueError):
        LVParams(-1.0, 0.5)
    with pytest.raises(ValueError):
        GeneralLV3Params(alpha=(1.0, 2.0))


def test_hopf_residual_changes_sign_across_the_hopf_curve():
    r_a = hopf_residual(LVParams(2.0, 0.5))
    r_b = hopf_residual(LVParams(2.3, 0.5))
    assert np.sign(r_a) != np.sign(r_b)
    assert 2.0 < hopf_alpha(0.5, 2.0, 2.3) < 2.3


@settings(max_examples=30)
@given(alphas)
def test_hopf_constant_term(a):
    c0 = (1 - a) ** 2 * (-2 + a - 3 * a ** 2 - a ** 3 - a ** 4)
    assert hopf_coefficients(a)[-1] == pytest.approx(c0, rel=1e-12)
