import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpforms.builtins import make_map
from lpforms.certify import (
    Scenario,
    certify,
    conjugate_exponent,
    density_factors,
    factor_points,
    kform_factors,
    pullback_factors,
    pullback_factors_alpha,
    scalar_factors,
)
from lpforms.errors import ArgumentError, DegenerateMapError, EmptySupportError
from lpforms.fields import FormField
from lpforms.geometry import ChartDomain
from oracles import shear_singular_values

EXPONENTS = [1, 1.5, 2, 3, math.inf]
SQ = ChartDomain([0.0, 0.0], [1.0, 1.0])
WIDE = ChartDomain([0.0, 0.0], [2.0, 1.0])
TORUS = ChartDomain([0.0, 0.0], [1.0, 1.0], (True, True))


def stretch():
    return make_map({"kind": "linear", "matrix": [[2.0, 0.0], [0.0, 1.0]]}, SQ, WIDE)


def shear():
    return make_map({"kind": "shear", "s": 1.0}, TORUS, TORUS)


def rotation():
    return make_map({"kind": "rotation", "theta": 0.6}, TORUS, TORUS)


def const_form(chart, k, values, name):
    values = np.asarray(values, dtype=float)
    return FormField(chart, k, lambda x: np.broadcast_to(values, (len(x), values.size)).copy(), name=name)


def two_sided(phi, forms_src, forms_dst=None):
    return Scenario("test", phi, forms_src, forms_dst or {}, order=8, samples=512)


# ---------------------------------------------------------------- exponents

def test_conjugate_exponent():
    assert conjugate_exponent(2) == 2
    assert conjugate_exponent(1) == math.inf
    assert conjugate_exponent(3) == pytest.approx(1.5)
    assert conjugate_exponent("inf") == 1


@given(st.floats(1.0, 1e6))
def test_conjugate_is_involution(p):
    q = conjugate_exponent(p)
    if math.isfinite(q):
        assert conjugate_exponent(q) == pytest.approx(p, rel=1e-9)


# ---------------------------------------------------------------- factors

@pytest.mark.parametrize("p", EXPONENTS)
def test_isometry_factors_are_one(p):
    phi = shear().__class__(TORUS, TORUS, lambda x: x, lambda x: x)
    for k in range(3):
        f = kform_factors(phi, None, k, p, 256)
        assert f.lower == pytest.approx(1.0) and f.upper == pytest.approx(1.0)
        g = pullback_factors(phi, None, k, p, 256)
        assert g.lower == pytest.approx(1.0) and g.upper == pytest.approx(1.0)


@pytest.mark.parametrize("p", EXPONENTS)
def test_rotation_factors_are_one(p):
    f = kform_factors(rotation(), None, 1, p, 256)
    assert f.lower == pytest.approx(1.0, abs=1e-9) and f.upper == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("p", EXPONENTS)
def test_degree_extremes_reduce_to_scalar_and_density(p):
    phi = make_map({"kind": "sinusoidal", "a": 0.3}, TORUS, TORUS)
    pts = factor_points(TORUS, 512, 8)
    from lpforms.diffeo import jacobian_determinant, singular_spectrum

    spec = singular_spectrum(phi, pts)
    J = jacobian_determinant(phi, pts)
    for k, special in ((0, scalar_factors), (2, density_factors)):
        a = kform_factors(phi, None, k, p, spectrum=spec)
        b = special(phi, None, p, points=pts, jacobian=J)
        assert a.lower == pytest.approx(b.lower, rel=1e-12)
        assert a.upper == pytest.approx(b.upper, rel=1e-12)


def test_scalar_factor_examples():
    for p in EXPONENTS:
        f = scalar_factors(shear(), None, p, 256)
        assert (f.lower, f.upper) == pytest.approx((1.0, 1.0))
    inf = scalar_factors(make_map({"kind": "sinusoidal", "a": 0.4}, TORUS, TORUS), None, math.inf, 256)
    assert (inf.lower, inf.upper) == (1.0, 1.0)
    # constant J = 2: ||u o phi^-1||_1 = 2 ||u||_1, both factors equal 2
    one = scalar_factors(stretch(), None, 1, 256)
    assert (one.lower, one.upper) == pytest.approx((2.0, 2.0))


def test_density_factor_examples():
    wavy = make_map({"kind": "sinusoidal", "a": 0.4}, TORUS, TORUS)
    f = density_factors(wavy, None, 1, 256)
    assert (f.lower, f.upper) == (1.0, 1.0)
    g = density_factors(stretch(), None, math.inf, 256)
    assert (g.lower, g.upper) == pytest.approx((0.5, 0.5))
    h = density_factors(shear(), None, 2, 256)
    assert (h.lower, h.upper) == pytest.approx((1.0, 1.0))


def test_kform_factor_examples():
    f = kform_factors(stretch(), None, 1, 2, 256)
    assert (f.lower, f.upper) == pytest.approx((1 / math.sqrt(2), math.sqrt(2)))
    a1, a2 = shear_singular_values(1.0)
    g = kform_factors(shear(), None, 1, 2, 256)
    assert g.upper == pytest.approx(math.sqrt(a1 / a2)) == pytest.approx(a1)


def test_pullback_factor_examples():
    f = pullback_factors(stretch(), None, 0, 1, 256)
    assert (f.lower, f.upper) == pytest.approx((0.5, 0.5))


@pytest.mark.parametrize("p", EXPONENTS)
@pytest.mark.parametrize("k", [0, 1, 2])
def test_beta_and_alpha_routes_agree(p, k):
    phi = make_map({"kind": "sinusoidal", "a": 0.35}, TORUS, TORUS)
    sc = two_sided(phi, {})
    from lpforms.diffeo import singular_spectrum

    xs, ys = sc.paired_points(1024, 8)
    beta = pullback_factors(phi, None, k, p, spectrum=singular_spectrum(phi.inverted(), ys))
    alpha = pullback_factors_alpha(phi, None, k, p, spectrum=singular_spectrum(phi, xs))
    assert beta.lower == pytest.approx(alpha.lower, rel=1e-10)
    assert beta.upper == pytest.approx(alpha.upper, rel=1e-10)


def test_masked_supremum_only_sees_support():
    phi = make_map({"kind": "sinusoidal", "a": 0.4}, TORUS, TORUS)
    full = kform_factors(phi, None, 1, 2, 2048)
    near = kform_factors(phi, lambda x: np.hypot(x[:, 0] - 0.5, x[:, 1] - 0.5) < 0.1, 1, 2, 2048)
    assert near.masked and not full.masked
    assert near.upper <= full.upper and near.lower >= full.lower
    assert near.upper < full.upper


def test_empty_support_is_an_error():
    with pytest.raises(EmptySupportError):
        kform_factors(stretch(), lambda x: np.zeros(len(x), dtype=bool), 1, 2, 64)


# ---------------------------------------------------------------- certificates

@pytest.mark.parametrize("p", EXPONENTS)
def test_stretch_certificates_are_tight(p):
    forms = {1: [const_form(SQ, 1, [1.0, 0.0], "dx1"), const_form(SQ, 1, [0.0, 1.0], "dx2")]}
    sc = two_sided(stretch(), forms)
    low = certify(sc, "push", 1, p, form="dx1")
    up = certify(sc, "push", 1, p, form="dx2")
    assert low.passed and up.passed
    assert low.r_low == pytest.approx(1.0, abs=1e-12)
    assert up.r_up == pytest.approx(1.0, abs=1e-12)
    if math.isinf(p):
        assert low.norm_pushed == pytest.approx(0.5)


def test_shear_two_norm_has_strict_slack():
    sc = two_sided(shear(), {1: [const_form(TORUS, 1, [1.0, 0.0], "dx1")]})
    cert = certify(sc, "push", 1, 2)
    assert cert.passed
    assert cert.norm_source == pytest.approx(1.0)
    assert cert.norm_pushed == pytest.approx(math.sqrt(2))
    # frozen from the closed-form spectrum: sqrt(2) / golden ratio
    assert cert.r_up == pytest.approx(0.8740320488976422, rel=1e-9)


def test_certificate_dict_is_consistent():
    sc = two_sided(shear(), {1: [const_form(TORUS, 1, [1.0, 2.0], "w")]}, {1: [const_form(TORUS, 1, [2.0, 1.0], "v")]})
    for direction in ("push", "pull"):
        for p in EXPONENTS:
            d = certify(sc, direction, 1, p).as_dict()
            ok = d["r_low"] >= 1 - d["eps"] and d["r_up"] <= 1 + d["eps"]
            assert (d["verdict"] == "pass") == ok
            assert d["eps"] == max(d["eps_sup"], d["eps_quad"])
            assert ("duality_gap" in d) == (direction == "pull")


def test_certify_argument_errors():
    sc = two_sided(shear(), {1: [const_form(TORUS, 1, [1.0, 0.0], "dx1")]})
    with pytest.raises(ArgumentError):
        certify(sc, "sideways", 1, 2)
    with pytest.raises(ArgumentError) as info:
        certify(sc, "push", 2, 2)
    assert info.value.scenario == "test"
    assert str(info.value).startswith("[test]")


def test_degenerate_scenario_errors_for_every_degree():
    A = [[1.0, 0.0], [0.0, 1e-13]]
    phi = make_map({"kind": "linear", "matrix": A}, SQ, ChartDomain([0.0, 0.0], [1.0, 1e-13]))
    forms = {k: [const_form(SQ, k, np.ones(math.comb(2, k)), f"ones{k}")] for k in range(3)}
    sc = two_sided(phi, forms)
    for k in range(3):
        with pytest.raises(DegenerateMapError):
            certify(sc, "push", k, 2)


def test_bump_support_restricts_factors():
    from lpforms.builtins import bump_profile

    profile, mask = bump_profile(TORUS, [0.5, 0.5], 0.2, 8)
    omega = FormField(TORUS, 1, lambda x: profile(x)[:, None] * np.array([[1.0, 0.5]]), mask, "bump")
    phi = make_map({"kind": "sinusoidal", "a": 0.3}, TORUS, TORUS)
    sc = Scenario("bump", phi, {1: [omega]}, {}, order=32, samples=2048)
    cert = certify(sc, "push", 1, 2)
    assert cert.factors.masked
    assert cert.passed
