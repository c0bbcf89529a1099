import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from colombeau_lab import distributions as D
from colombeau_lab.basic_space import (Representative, Synthetic, combine, contract, difference, fiber_norm,
                                       full_pairing, hat_lie, hat_pullback, iota, sigma, spreading_theta,
                                       tensor_product)
from colombeau_lab.experiments import diagonal_vanishing_example, standard_setup, twisted_example
from colombeau_lab.geometry import (ChartDomain, Diffeomorphism, SmoothTensorField, constant_field,
                                    identity_diffeo, lie_derivative_tensor, pullback_tensor, scalar_field,
                                    tensor_product_fields, vector_field)
from colombeau_lab.kernels import build_kernel, bump_profile, evaluate_kernel
from colombeau_lab.transport import plateau_cutoff, twisted_cutoff_transport

S = standard_setup()
DOM, A_ID, KER = S["domain"], S["A"], S["kernel"]
A_TW = twisted_example(DOM)
ONE = constant_field(DOM, 1.0, label="1")
DX = vector_field(DOM, lambda x: [1.0 + 0.0 * x[0]], "d/dx")
FORM = SmoothTensorField(DOM, 0, 1, lambda x: [1.0 + 0.5 * x[0] ** 2], label="(1+x^2/2)dx")
X1 = vector_field(DOM, lambda x: [0.4 + x[0] + 0.5 * x[0] ** 2], "X")
MU = Diffeomorphism(DOM, lambda x: x + 0.3 * x ** 3, label="mu")

GRID = [(e, p) for e in (2.0 ** -3, 2.0 ** -5, 2.0 ** -7) for p in (-0.4, -0.01, 0.0, 0.003, 0.02, 0.3)]


def _phi(eps, p, ker=KER):
    return evaluate_kernel(ker, eps, [p], DOM)


def _ev(u, eps, p, A=A_ID, ker=KER):
    return np.asarray(u.evaluate(_phi(eps, p, ker), np.array([p]), A), dtype=float)


def _max_dev(u1, u2, A=A_ID, grid=GRID):
    dev = 0.0
    for e, p in grid:
        a, b = _ev(u1, e, p, A), _ev(u2, e, p, A)
        dev = max(dev, fiber_norm(a - b, u1.r, u1.s) / max(1.0, fiber_norm(b, u1.r, u1.s)))
    return dev


def test_sigma_examples():
    for e, p in GRID[:4]:
        assert _ev(sigma(ONE), e, p) == 1.0
    t1 = vector_field(DOM, lambda x: [np.sin(x[0])])
    t2 = FORM
    assert _max_dev(tensor_product(sigma(t1), sigma(t2)), sigma(tensor_product_fields(t1, t2))) == 0.0
    u = sigma(t1)
    om = _phi(0.1, 0.2)
    assert np.all(u.d3(om, np.array([0.2]), A_ID, diagonal_vanishing_example(DOM)) == 0.0)


def test_spreading_theta_examples():
    p = np.array([0.3])
    th = spreading_theta(A_ID, DX, p)
    assert np.allclose(th(p[:, None])[..., 0], DX(p[:, None])[..., 0])
    zero = A_ID.scale(0.0)
    assert np.all(spreading_theta(zero, DX, p)(np.linspace(-1, 1, 9)[None, :]) == 0.0)
    pl, sp = ((-2.0,), (2.0,)), ((-2.5,), (2.5,))
    two = twisted_cutoff_transport(DOM, pl, sp, lambda p, q: [[2.0 + 0.0 * q[0]]])
    tt = vector_field(DOM, lambda x: [1.0 + x[0] ** 2])
    q = np.linspace(-2.4, 2.4, 13)[None, :]
    chi = plateau_cutoff(p[:, None], pl, sp) * plateau_cutoff(q, pl, sp)
    assert np.allclose(spreading_theta(two, tt, p)(q)[0], 2 * chi * (1 + 0.09), atol=1e-14)


def test_iota_of_delta_is_density_at_zero():
    u = iota(D.delta(DOM))
    for e, p in GRID:
        om = _phi(e, p)
        for A in (A_ID, A_TW):
            assert float(u.evaluate(om, np.array([p]), A)) == float(om(np.array([[0.0]]))[0])


@pytest.mark.parametrize("m", [0, 1, 2])
def test_iota_of_delta_prime_closed_form(m):
    ker = build_kernel(bump_profile(), m, C=1.3)
    u = iota(D.delta(DOM, 0.0, 1))
    for e, p in GRID:
        h = e * ker.C
        closed = -float(ker.rho_m_deriv(np.array([-p / h]))[0]) / h ** 2
        om = _phi(e, p, ker)
        # oracle 2: Richardson central differences of the form density at 0
        f = lambda x: float(om(np.array([[x]]))[0])
        d = lambda s: (f(s) - f(-s)) / (2 * s)
        fd = -(4 * d(h * 5e-4) - d(h * 1e-3)) / 3
        val = float(u.evaluate(om, np.array([p]), A_ID))
        assert val == pytest.approx(closed, rel=1e-9, abs=1e-9 / h ** 2)
        assert val == pytest.approx(fd, rel=1e-7, abs=1e-7 / h ** 2)


def test_tensor_product_examples():
    u = iota(D.tensor(DOM, D.Delta((0.0,), (1,)), DX))
    assert _max_dev(tensor_product(u, sigma(ONE)), u, A_TW) == 0.0
    sq = tensor_product(iota(D.delta(DOM)), iota(D.delta(DOM)))
    for e in (0.1, 0.01):
        want = (float(KER.rho_m(np.array([0.0]))[0]) / (e * KER.C)) ** 2
        assert float(_ev(sq, e, 0.0)) == pytest.approx(want, rel=1e-13)


def test_contraction_examples():
    dxdx = tensor_product_fields(DX, SmoothTensorField(DOM, 0, 1, lambda x: [1.0 + 0.0 * x[0]]))
    assert _max_dev(contract(sigma(dxdx)), sigma(ONE)) == 0.0
    u1 = iota(D.tensor(DOM, D.Heaviside(0.0), vector_field(DOM, lambda x: [np.cos(x[0])])))
    full = contract(tensor_product(u1, sigma(FORM)), 0, 0)
    assert _max_dev(full, full_pairing(u1, FORM), A_TW) <= 1e-15
    u2 = iota(D.tensor(DOM, D.Delta((0.0,)), vector_field(DOM, lambda x: [x[0] + 2.0])))
    w = tensor_product(u1, sigma(FORM))
    z = tensor_product(u2, sigma(FORM))
    lhs = contract(combine((2.0, w), (-0.5, z)))
    rhs = combine((2.0, contract(w)), (-0.5, contract(z)))
    assert _max_dev(lhs, rhs, A_TW) <= 1e-15


def test_hat_pullback_examples():
    u = iota(D.tensor(DOM, D.Delta((0.0,), (1,)), DX))
    idd = identity_diffeo(DOM)
    assert _max_dev(hat_pullback(idd, u), u, A_TW) <= 1e-13
    t = SmoothTensorField(DOM, 1, 1, lambda x: [[np.sin(x[0]) + 2.0]])
    assert _max_dev(hat_pullback(MU, sigma(t)), sigma(pullback_tensor(MU, t))) <= 1e-9
    v = D.delta(DOM)
    assert _max_dev(hat_pullback(MU, iota(v)), iota(D.pullback_distribution(MU, v))) <= 1e-6


def test_hat_lie_examples():
    t = SmoothTensorField(DOM, 1, 1, lambda x: [[np.sin(x[0]) + x[0] ** 2]])
    assert _max_dev(hat_lie(X1, sigma(t)), sigma(lie_derivative_tensor(X1, t)), A_TW) <= 1e-7
    v = D.delta(DOM)
    lhs = hat_lie(DX, iota(v))
    # adjoint convention: the Lie derivative of delta along d/dx is delta'
    assert _max_dev(lhs, iota(D.delta(DOM, 0.0, 1))) <= 1e-6
    assert _max_dev(lhs, iota(D.lie_derivative_distribution(DX, v))) <= 1e-6


LEIBNIZ_PAIRS = {
    "sigma-sigma": (sigma(vector_field(DOM, lambda x: [np.sin(x[0])])), sigma(FORM)),
    "sigma-iota": (sigma(FORM), iota(D.tensor(DOM, D.Delta((0.0,), (1,)), DX))),
    "iota-iota": (iota(D.tensor(DOM, D.Heaviside(0.0), vector_field(DOM, lambda x: [1.0 + x[0]]))),
                  iota(D.tensor(DOM, D.Delta((0.05,)), FORM))),
}


@pytest.mark.parametrize("name", sorted(LEIBNIZ_PAIRS))
def test_hat_lie_leibniz(name):
    u1, u2 = LEIBNIZ_PAIRS[name]
    lhs = hat_lie(X1, tensor_product(u1, u2))
    rhs = combine((1.0, tensor_product(hat_lie(X1, u1), u2)), (1.0, tensor_product(u1, hat_lie(X1, u2))))
    assert _max_dev(lhs, rhs, A_TW, GRID[::2]) <= 1e-5


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(2.0 ** -8, 0.25), st.floats(-0.5, 0.5))
def test_iota_is_linear(a, b, eps, p):
    v = D.tensor(DOM, D.Delta((0.0,), (1,)), DX)
    w = D.tensor(DOM, D.PrincipalValue(0.0), vector_field(DOM, lambda x: [np.exp(x[0])]))
    lin = iota(v.scale(a) + w.scale(b))
    parts = combine((a, iota(v)), (b, iota(w)))
    x, y = _ev(lin, eps, p, A_TW), _ev(parts, eps, p, A_TW)
    assert np.allclose(x, y, rtol=1e-12, atol=1e-12 * max(1.0, np.max(np.abs(y))))


@given(st.floats(2.0 ** -10, 0.25), st.floats(-1, 1))
def test_iota_support(eps, p):
    val = float(_ev(iota(D.delta(DOM)), eps, p))
    if abs(p) > eps * KER.C:
        assert val == 0.0
    elif abs(p) < 0.9 * eps * KER.C:
        assert val > 0.0


@pytest.mark.parametrize("v", [D.delta(DOM, 0.0, 1), D.heaviside(DOM),
                               D.tensor(DOM, D.PrincipalValue(0.0), vector_field(DOM, lambda x: [1 + x[0]]))],
                         ids=["delta'", "H", "vp d/dx"])
def test_d1_fast_path_matches_generic(v):
    u = iota(v)
    om = _phi(0.125, 0.05)
    eta = _phi(0.25, -0.1)
    p = np.array([0.05])
    fast = u.d1(om, p, A_TW, eta)
    generic = Representative.d1(u, om, p, A_TW, eta)
    assert np.allclose(fast, generic, rtol=1e-8, atol=1e-8 * max(1.0, np.max(np.abs(fast))))


def test_d3_product_rule_matches_generic():
    u = iota(D.tensor(DOM, D.Delta((0.0,), (1,)), tensor_product_fields(DX, FORM)))
    B = diagonal_vanishing_example(DOM)
    om, p = _phi(0.125, 0.05), np.array([0.05])
    fast = u.d3(om, p, A_TW, B)
    generic = Representative.d3(u, om, p, A_TW, B)
    assert np.allclose(fast, generic, rtol=1e-7, atol=1e-7 * max(1.0, np.max(np.abs(fast))))


def test_d3_commutes_with_point_lie_part():
    u = iota(D.tensor(DOM, D.Delta((0.0,), (1,)), DX))
    B = diagonal_vanishing_example(DOM)
    om, p = _phi(0.25, 0.05), np.array([0.05])
    point_part = Synthetic(fn=lambda o, q, A: hat_lie(X1, u).part_point(o, q, A), dom=DOM, valence=(1, 0))
    d_then_lie = hat_lie(X1, Synthetic(fn=lambda o, q, A: u.d3(o, q, A, B), dom=DOM, valence=(1, 0)))
    lhs = point_part.d3(om, p, A_TW, B)
    rhs = d_then_lie.part_point(om, p, A_TW)
    assert np.allclose(lhs, rhs, atol=1e-5 * max(1.0, np.max(np.abs(rhs))))


def test_difference_and_valence_guard():
    u = iota(D.delta(DOM))
    assert float(_ev(difference(u, u), 0.1, 0.0)) == 0.0
    with pytest.raises(ValueError):
        combine((1.0, u), (1.0, sigma(DX)))
