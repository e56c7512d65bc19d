import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collardeform.curvature import covariant_derivative, second_fundamental_form, tensor_norm
from collardeform.deformation import (
    CutoffBeta,
    CutoffChi,
    DeformationData,
    DeformedField,
    StructuralError,
    branch_jet,
    build_S,
    deformation_norms,
    hat_metric_jet,
    interface_residual,
    smooth_step,
    zeta,
)
from collardeform.metric_fields import (
    MetricJet,
    ShiftedField,
    builtin_spherical_cap,
    collar_point,
    warped_collar,
)

R0 = math.pi / 3
CHI = CutoffChi()
BETA = CutoffBeta()


@pytest.fixture(scope="module")
def pair():
    g = builtin_spherical_cap(4, R0, 1.0)
    return g, warped_collar(g, 1.0)


def fd(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


# ------------------------------------------------------------------ cutoffs

def test_smooth_step_flats():
    s0, s1, s2 = smooth_step(np.array([-1.0, 0.0, 1.0, 2.0]))
    assert np.array_equal(s0, [0, 0, 1, 1])
    assert np.all(s1 == 0) and np.all(s2 == 0)
    assert smooth_step(0.5)[0] == pytest.approx(0.5)


@given(st.floats(0.01, 0.99))
def test_smooth_step_derivatives(t):
    h = 1e-6
    assert smooth_step(t)[1] == pytest.approx(fd(lambda u: smooth_step(u)[0], t, h), rel=1e-5, abs=1e-8)
    assert smooth_step(t)[2] == pytest.approx(fd(lambda u: smooth_step(u)[1], t, h), rel=1e-5, abs=1e-7)


def test_chi_quadratic_regime_and_values():
    assert CHI(0.0) == (0.0, 1.0, -1.0)
    assert CHI(0.5)[0] == 0.375
    s = np.linspace(0, 0.5, 101)
    assert np.array_equal(CHI(s)[0], s - 0.5 * s**2)


def test_chi_certificates():
    s = np.linspace(0.0, 1.0 - 1e-3, 10**4)
    c0, c1, c2 = CHI(s)
    assert np.all(c2 < 0)
    assert np.all(c1 > 0)
    one = CHI(1.0)
    assert abs(one[1]) <= 1e-10
    assert 3 / 8 < one[0] < 5 / 8


def test_chi_constant_beyond_one():
    v = CHI(np.array([1.0, 1.3, 5.0]))
    assert np.all(v[0] == v[0][0]) and np.all(v[1] == 0) and np.all(v[2] == 0)


@settings(max_examples=40)
@given(st.floats(0.0, 1.2))
def test_chi_derivative_consistency(s):
    h = 1e-5
    lo = max(s, h)
    assert CHI(lo)[1] == pytest.approx(fd(lambda u: CHI(u)[0], lo, h), abs=1e-8)
    assert CHI(lo)[2] == pytest.approx(fd(lambda u: CHI(u)[1], lo, h), abs=1e-6)


def test_chi_rejects_negative():
    with pytest.raises(ValueError):
        CHI(-0.1)


def test_beta_values_and_flats():
    assert BETA(-0.5)[0] == 0.5
    assert BETA(-2.5) == (0.0, 0.0, 0.0)
    assert 0.0 < BETA(-1.5)[0] < 0.5
    t = np.linspace(-1.0, 0.0, 50)
    assert np.all(BETA(t)[0] == 0.5) and np.all(BETA(t)[1] == 0)
    t = np.linspace(-10.0, -2.0, 50)
    assert np.all(BETA(t)[0] == 0.0)
    t = np.linspace(-2.0, -1.0, 500)
    b = BETA(t)[0]
    assert np.all(np.diff(b) >= 0) and b.min() >= 0 and b.max() <= 0.5


def test_beta_rejects_positive():
    with pytest.raises(ValueError):
        BETA(0.1)


def test_zeta_flats():
    assert zeta(0.2) == (1.0, 0.0, 0.0)
    assert zeta(0.7) == (0.0, 0.0, 0.0)
    assert 0 < zeta(0.5)[0] < 1


# ------------------------------------------------------------------ S tensor

def test_S_vanishes_for_equal_metrics(pair):
    g, _ = pair
    S = build_S(g, g, 0.6)
    assert np.all(S.jet(collar_point(np.zeros(3), 0.2)).g == 0)


def test_S_for_linear_shift():
    g = builtin_spherical_cap(4, R0, 0.6)
    T = np.zeros((4, 4))
    T[0, 0] = 0.3
    S = build_S(g, ShiftedField(g, T), 0.6)
    for s in (0.0, 0.1, 0.25, 0.35):
        z = zeta(s / 0.6)[0]
        assert np.allclose(S.jet(collar_point(np.array([0.2, 0.1, 0.0]), s)).g, z * T, atol=1e-14)


def test_S_boundary_value_is_twice_A(pair):
    g, gt = pair
    S = build_S(g, gt, 1.0)
    xb = np.array([0.4, -0.3, 0.2])
    Sb = S.jet(collar_point(xb, 0.0)).g[:3, :3]
    gb = g.boundary_metric(xb)
    assert np.allclose(Sb, 2 / math.tan(R0) * gb, atol=1e-12)


@pytest.mark.parametrize("xb", [np.zeros(3), np.array([0.5, -0.5, 0.1]), np.array([-0.8, 0.2, 0.6])])
def test_boundary_identity(pair, xb):
    g, gt = pair
    S = build_S(g, gt, 1.0)
    lhs = 0.5 * S.jet(collar_point(xb, 0.0)).g[:3, :3]
    rhs = second_fundamental_form(g, xb).A - second_fundamental_form(gt, xb).A
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_S_jets_match_finite_differences(pair):
    g, gt = pair
    S = build_S(g, gt, 1.0)
    x = np.array([0.1, -0.2, 0.3, 0.45])
    jet = S.jet(x)
    h = 1e-5
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        d1 = (S.jet(x + e).g - S.jet(x - e).g) / (2 * h)
        d2 = (S.jet(x + e).dg - S.jet(x - e).dg) / (2 * h)
        assert np.allclose(d1, jet.dg[k], atol=1e-7)
        assert np.allclose(d2, jet.ddg[k], atol=1e-5)


def test_S_support(pair):
    g, gt = pair
    S = build_S(g, gt, 0.9)
    assert np.all(S.jet(collar_point(np.zeros(3), 0.61)).g == 0)


def test_build_S_rejects_boundary_mismatch():
    g = builtin_spherical_cap(4, R0, 0.5)
    other = builtin_spherical_cap(4, 1.2, 0.5)
    with pytest.raises(ValueError, match="boundary"):
        build_S(g, other, 0.5)


# ------------------------------------------------------------------ deformed metric

def test_structural_threshold(pair):
    g, gt = pair
    with pytest.raises(StructuralError):
        DeformationData.build(g, gt, 0.5)
    with pytest.raises(StructuralError):
        DeformationData.build(g, gt, 0.9, delta=0.3)


def test_far_from_boundary_equals_g(pair):
    g, gt = pair
    data = DeformationData.build(g, gt, 8.0)
    x = collar_point(np.array([0.1, 0.2, 0.3]), 0.8)
    jet, ref = hat_metric_jet(data, x), g.jet(x)
    assert np.array_equal(jet.g, ref.g) and np.array_equal(jet.ddg, ref.ddg)


@pytest.mark.parametrize("lam", [3.0, 8.0, 40.0])
def test_deep_layer_equals_g_tilde(pair, lam):
    g, gt = pair
    data = DeformationData.build(g, gt, lam)
    xb = np.array([0.1, 0.2, 0.3])
    for log_s in (-2.0 * lam**2, -2.5 * lam**2, -math.inf):
        jet = hat_metric_jet(data, collar_point(xb, 0.0), log_s)
        ref = gt.jet(collar_point(xb, math.exp(log_s)))
        assert np.array_equal(jet.g, ref.g) and np.array_equal(jet.dg, ref.dg)


@pytest.mark.parametrize("lam", [3.0, 5.0, 8.0])
def test_interface_algebraic_agreement(pair, lam):
    # Both formulas reduce to g + rho S - lam rho^2 S / 2 at the interface.
    g, gt = pair
    data = DeformationData.build(g, gt, lam)
    rho = math.exp(-lam**2)
    x = collar_point(np.array([0.2, 0.0, -0.1]), rho)
    S = data.S.jet(x).g
    expected = g.jet(x).g + rho * S - 0.5 * lam * rho**2 * S
    for branch in ("chi", "beta"):
        got = branch_jet(data, x, -lam**2, branch).g
        assert np.max(np.abs(got - expected)) < 1e-13
    assert CHI(lam * rho)[0] == pytest.approx(lam * rho - 0.5 * (lam * rho) ** 2, rel=1e-15)
    assert BETA(-1.0)[0] == 0.5


@pytest.mark.parametrize("lam", [3.0, 5.0, 8.0])
def test_interface_residual_small(pair, lam):
    g, gt = pair
    res = interface_residual(DeformationData.build(g, gt, lam))
    assert res["value"] <= 1e-10 and res["first"] <= 1e-10 and res["second"] <= 1e-10


def test_interface_residual_zero_for_equal_metrics(pair):
    g, _ = pair
    res = interface_residual(DeformationData.build(g, g, 3.0))
    assert res == {"value": 0.0, "first": 0.0, "second": 0.0}


@pytest.mark.parametrize("lam,s", [(3.0, 0.2), (3.0, 0.02), (1.6, 0.03), (1.6, 0.06)])
def test_hat_jets_match_finite_differences(pair, lam, s):
    g, gt = pair
    data = DeformationData.build(g, gt, lam)
    x = collar_point(np.array([0.1, 0.2, -0.1]), s)
    jet = hat_metric_jet(data, x)
    h = 1e-6
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        up, dn = hat_metric_jet(data, x + e), hat_metric_jet(data, x - e)
        assert np.allclose((up.g - dn.g) / (2 * h), jet.dg[k], atol=1e-7)
        assert np.allclose((up.dg - dn.dg) / (2 * h), jet.ddg[k], atol=1e-5)


def test_chi_branch_covariant_derivative_structure(pair):
    # D h = chi(lam rho) / lam * D S + chi'(lam rho) d rho (x) S on the chi branch.
    g, gt = pair
    lam = 4.0
    data = DeformationData.build(g, gt, lam)
    x = collar_point(np.array([0.3, -0.1, 0.2]), 0.12)
    gj = g.jet(x)
    hat = branch_jet(data, x, branch="chi")
    h = MetricJet(hat.g - gj.g, hat.dg - gj.dg, hat.ddg - gj.ddg)
    Dh, _ = covariant_derivative(h, gj)
    DS, _ = covariant_derivative(data.S.jet(x), gj)
    c0, c1, _ = CHI(lam * x[-1])
    drho = np.zeros(4)
    drho[-1] = 1.0
    expected = c0 / lam * DS + c1 * np.einsum("m,ij->mij", drho, data.S.jet(x).g)
    assert np.allclose(Dh, expected, atol=1e-12)


def test_beta_branch_leading_normal_term(pair):
    # The normal-normal second derivative of the correction is 2 lam beta S + O(1/lam).
    g, gt = pair
    errs = []
    for lam in (4.0, 8.0, 16.0):
        data = DeformationData.build(g, gt, lam)
        log_s = -1.5 * lam**2
        x = collar_point(np.array([0.1, 0.1, 0.1]), 0.0)
        hat = branch_jet(data, x, log_s, "beta")
        xs = x.copy()
        xs[-1] = math.exp(log_s)
        corr = gt.jet(xs).ddg[3, 3] - hat.ddg[3, 3]
        b = BETA(-1.5)[0]
        errs.append(np.max(np.abs(corr - 2 * lam * b * data.S.jet(xs).g)) * lam)
    assert max(errs) < 2 * min(errs) + 1e-12


def test_deformed_field_wrapper(pair):
    g, gt = pair
    field = DeformedField(DeformationData.build(g, gt, 4.0))
    x = collar_point(np.zeros(3), 0.1)
    assert np.array_equal(field.jet(x).g, hat_metric_jet(field.data, x).g)
    with pytest.raises(ValueError):
        field.derivatives(x, 3)
    with pytest.raises(ValueError, match="outside chart"):
        field.jet(collar_point(np.zeros(3), 1.5))


def test_deformed_boundary_totally_geodesic(pair):
    g, gt = pair
    for lam in (4.0, 64.0):
        field = DeformedField(DeformationData.build(g, gt, lam))
        shape = second_fundamental_form(field, np.array([0.3, 0.3, -0.2]), fermi_tol=1e-9)
        assert np.max(np.abs(shape.A)) <= 1e-9


# ------------------------------------------------------------------ norms

def test_sup_norm_bounds_by_region(pair):
    g, gt = pair
    lam = 6.0
    data = DeformationData.build(g, gt, lam)
    xb = np.array([0.2, -0.3, 0.1])
    chi_one = CHI(1.0)[0]
    for s in np.linspace(math.exp(-lam**2), 0.99, 40):
        x = collar_point(xb, s)
        gj = g.jet(x).g
        S = data.S.jet(x).g
        diff = tensor_norm(hat_metric_jet(data, x).g - gj, gj)
        assert diff <= chi_one / lam * tensor_norm(S, gj) + 1e-14
    for log_s in np.linspace(-2 * lam**2, -lam**2 - 1e-9, 10):
        s = math.exp(log_s)
        x = collar_point(xb, s)
        gj = g.jet(x).g
        diff = tensor_norm(hat_metric_jet(data, x, log_s).g - gj, gj)
        assert diff <= (s + lam * s**2 / 2) * tensor_norm(data.S.jet(x).g, gj) + 1e-14


def test_norms_shrink_with_lambda(pair):
    g, gt = pair
    pts = [np.zeros(3), np.array([0.4, 0.1, -0.3])]
    norms = [deformation_norms(DeformationData.build(g, gt, lam), pts, 150)
             for lam in (4.0, 8.0, 16.0)]
    for a, b in zip(norms, norms[1:]):
        assert 0.4 <= b["sup"] / a["sup"] <= 0.6
        assert b["hoelder"] < a["hoelder"]
