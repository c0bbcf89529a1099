import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from colombeau_lab.geometry import ChartDomain, scalar_field
from colombeau_lab.kernels import (build_kernel, bump_profile, cos2_profile, derivative_sup_slopes,
                                   evaluate_kernel, verify_moment_order)
from colombeau_lab.quadrature import QuadratureSpec, integrate_box
from colombeau_lab.rates import geometric_grid

EPS = geometric_grid(3, 10)


def _moment(ker, k):
    val, _ = quad(lambda s: s ** k * float(ker.rho_m(np.array([s]))[0]), -1, 1, epsabs=1e-14, epsrel=1e-13,
                  limit=200)
    return val


def test_symmetric_profile_order_one_keeps_polynomial_one():
    k1 = build_kernel(bump_profile(), 1)
    assert k1.poly[0] == pytest.approx(1.0) and k1.poly[1] == 0.0
    assert build_kernel(bump_profile(), 0).poly == (1.0,)


@pytest.mark.parametrize("m", [0, 1, 2, 3])
@pytest.mark.parametrize("profile", [bump_profile(), cos2_profile()], ids=["bump", "cos2"])
def test_vanishing_moments(m, profile):
    ker = build_kernel(profile, m)
    assert _moment(ker, 0) == pytest.approx(1.0, abs=1e-8)
    for k in range(1, m + 1):
        assert abs(_moment(ker, k)) <= 1e-8


def test_second_moment_of_order_three_bump():
    assert abs(_moment(build_kernel(bump_profile(), 3), 2)) <= 1e-8


def test_support_and_normalization():
    ker = build_kernel(bump_profile(), 2, C=1.5)
    om = evaluate_kernel(ker, 1.0, [0.0])
    assert om.lo == (-1.5,) and om.hi == (1.5,)
    for eps in (1.0, 0.1, 0.01):
        om = evaluate_kernel(ker, eps, [0.2])
        assert integrate_box(om, om.lo, om.hi, QuadratureSpec(4, 24), [(0.2,)]) == pytest.approx(1.0, abs=1e-8)


@given(st.floats(0.01, 1.0), st.floats(0.5, 2.0), st.integers(0, 3))
def test_density_scaling_at_centre(eps, C, m):
    ker = build_kernel(bump_profile(), m, C)
    dom = ChartDomain(2)
    om = evaluate_kernel(ker, eps, [0.1, -0.3], dom)
    want = (float(ker.rho_m(np.array([0.0]))[0]) / (eps * C)) ** 2
    assert float(om(np.array([[0.1], [-0.3]]))[0]) == pytest.approx(want, rel=1e-12)


@given(st.floats(0.01, 1.0), st.floats(-1, 1), st.floats(-1, 1), st.integers(0, 3))
def test_translation_covariance(eps, p, s, m):
    ker = build_kernel(bump_profile(), m)
    q = np.array([[p + s * eps]])
    a = evaluate_kernel(ker, eps, [p])(q)
    b = evaluate_kernel(ker, eps, [0.0])(q - p)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_moment_defect_examples(dom1):
    K = ([-1.0], [1.0])
    one = scalar_field(dom1, lambda x: 1.0 + 0.0 * x[0])
    rep = verify_moment_order(build_kernel(bump_profile(), 1), one, K, EPS)
    assert max(rep.values) <= 1e-8

    ker = build_kernel(bump_profile(), 1, C=1.3)
    x2 = scalar_field(dom1, lambda x: x[0] ** 2)
    rep = verify_moment_order(ker, x2, K, EPS)
    m2 = _moment(ker, 2)
    for e, v in zip(rep.eps, rep.values):
        assert v == pytest.approx((e * ker.C) ** 2 * abs(m2), rel=1e-8)
    assert rep.slope == pytest.approx(2.0, abs=0.05) and rep.verdict == "pass"

    x1 = scalar_field(dom1, lambda x: x[0])
    rep = verify_moment_order(build_kernel(bump_profile(), 0), x1, K, EPS)
    assert rep.identically_zero and "superconvergent" in rep.flags


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_moment_correction_idempotence(m, dom1):
    ker = build_kernel(cos2_profile(), m)
    coeffs = [0.3, -1.0, 0.5, 2.0][: m + 1]
    f = scalar_field(dom1, lambda x: sum(c * x[0] ** k for k, c in enumerate(coeffs)))
    rep = verify_moment_order(ker, f, ([-1.0], [1.0]), EPS)
    assert rep.identically_zero or rep.slope >= m + 1 - 0.05


@pytest.mark.parametrize("n,beta", [(1, (0,)), (1, (1,)), (1, (2,)), (2, (0, 0)), (2, (1, 0)), (2, (1, 1)),
                                    (2, (0, 2))])
def test_derivative_scaling(n, beta):
    ker = build_kernel(bump_profile(), 2)
    rep = derivative_sup_slopes(ker, n, EPS, beta)
    assert rep.slope == pytest.approx(-n - sum(beta), abs=0.1)


def test_invalid_kernels():
    with pytest.raises(ValueError):
        build_kernel(bump_profile(), -1)
    with pytest.raises(ValueError):
        build_kernel(bump_profile(), 1, C=0.0)
    with pytest.raises(ValueError):
        evaluate_kernel(build_kernel(bump_profile(), 0), 0.0, [0.0])
