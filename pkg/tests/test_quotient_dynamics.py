import math

import numpy as np
import pytest

from colombeau_lab import distributions as D
from colombeau_lab.basic_space import Synthetic, difference, full_pairing, hat_lie, iota, sigma, tensor_product
from colombeau_lab.experiments import diagonal_vanishing_example, standard_setup, twisted_example
from colombeau_lab.geometry import (ChartDomain, SmoothTensorField, constant_field, euclidean_metric, scalar_field,
                                    vector_field)
from colombeau_lab.kernels import build_kernel, bump_profile, evaluate_kernel
from colombeau_lab.quotient_dynamics import (SweepConfig, is_moderate, is_negligible, localization_compare,
                                             reduction_view, saturation_check, sweep, sweep_values)
from colombeau_lab.rates import geometric_grid
from colombeau_lab.transport import plateau_cutoff

S = standard_setup()
DOM, A_ID = S["domain"], S["A"]
A_TW = twisted_example(DOM)
B = diagonal_vanishing_example(DOM)
DX = vector_field(DOM, lambda x: [1.0 + 0.0 * x[0]], "d/dx")
XDX = vector_field(DOM, lambda x: [x[0]], "x d/dx")
K = ((-1.0,), (1.0,))
ONE = constant_field(DOM, 1.0, label="1")
X2 = scalar_field(DOM, lambda x: x[0] ** 2, "x^2")


def kernel(m=0, C=1.0):
    return build_kernel(bump_profile(), m, C)


def cfg(m=0, A=A_ID, Bs=(), Xs=(), k_max=10, ppa=11, **kw):
    return SweepConfig(K, A, kernel(m), tuple(Bs), tuple(Xs), tuple(geometric_grid(3, k_max)), ppa, **kw)


def _report(v, j=0, l=0):
    return next(r for r in v.reports if r.meta["j"] == j and len(r.meta["word"]) == l)


# -- sweep ------------------------------------------------------------------------------------

def test_sweep_sigma_one_is_flat():
    rep = sweep(sigma(ONE), cfg(A=A_TW, Xs=(XDX,)))
    assert rep.values == [1.0] * len(rep.values)
    assert rep.slope == pytest.approx(0.0, abs=1e-12)


def test_sweep_iota_delta_closed_form():
    ker = kernel(0, C=1.3)
    c = SweepConfig(K, A_ID, ker, eps_grid=tuple(geometric_grid(3, 10)), points_per_axis=11)
    rep = sweep(iota(D.delta(DOM)), c)
    # translated symmetric bump: the sup is attained at p = 0, which the zoom lattice contains
    peak = float(ker.rho_m(np.array([0.0]))[0])
    for e, v in rep.samples:
        assert v == pytest.approx(peak / (e * ker.C), rel=1e-10)
    assert rep.slope == pytest.approx(-1.0, abs=1e-9)


def test_sweep_embed_difference_x_squared():
    u = difference(iota(D.rho_embed(X2)), sigma(X2))
    rep = sweep(u, cfg(m=1))
    assert rep.slope == pytest.approx(2.0, abs=0.25)


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        cfg(k_max=5).__class__(K, A_ID, kernel(), eps_grid=(0.1, 0.2, 0.05, 0.01)).validate()
    with pytest.raises(ValueError):
        SweepConfig(((-2.4,), (2.4,)), A_ID, kernel()).validate()
    with pytest.raises(ValueError):
        SweepConfig(K, A_ID, kernel(), B_list=(A_TW,)).validate()
    cfg(Bs=(B,)).validate()


def test_sweep_drops_eps_escaping_domain():
    small = standard_setup(ChartDomain.box([-1.2], [1.2]))
    c = SweepConfig(K, small["A"], kernel(), eps_grid=tuple(geometric_grid(1, 8)), points_per_axis=5)
    eps, sups, notes = sweep_values(sigma(constant_field(small["domain"], 2.0)), c)
    assert eps[0] < 0.5 and len(eps) >= 4 and notes
    assert sups == [2.0] * len(sups)


def test_sweep_threads_identical():
    u = iota(D.delta(DOM, 0.0, 1))
    a = sweep_values(u, cfg(k_max=7))
    b = sweep_values(u, cfg(k_max=7, threads=3))
    assert a == b


# -- moderateness -----------------------------------------------------------------------------

def test_moderate_delta_third_derivative():
    v = is_moderate(iota(D.delta(DOM, 0.0, 3)), cfg(), j_max=0, l_max=0)
    assert v.passed
    assert v.N[_report(v).test_id] == pytest.approx(4.0, abs=0.1)


def test_moderate_sigma_has_N_zero():
    t = scalar_field(DOM, lambda x: np.sin(x[0]) + 2.0, "sin+2")
    v = is_moderate(sigma(t), cfg(A=A_TW, Bs=(B,), Xs=(DX,)), j_max=1, l_max=1)
    assert v.passed
    # N is a fitted slope: finite differences in the Lie word leave ~1e-11 of noise
    assert all(n <= 1e-9 for n in v.N.values())


def test_exponential_witness_is_not_moderate():
    # eval grows like exp(1 / support diameter of omega)
    fn = lambda om, p, A: np.exp(1.0 / float(np.max(np.array(om.hi) - np.array(om.lo))))
    u = Synthetic(fn=fn, dom=DOM, name="exp(1/eps)")
    v = is_moderate(u, cfg(k_max=8), j_max=0, l_max=0)
    assert not v.passed
    assert "super-polynomial" in v.reports[0].flags


def test_moderate_reports_every_battery_entry():
    v = is_moderate(iota(D.delta(DOM)), cfg(Bs=(B,), Xs=(DX, XDX), k_max=6, ppa=5), j_max=1, l_max=1)
    assert len(v.reports) == 2 * (1 + 2)


# -- negligibility ----------------------------------------------------------------------------

def test_negligible_embedding_difference():
    t = scalar_field(DOM, lambda x: np.sin(x[0]), "sin")
    v = is_negligible(difference(iota(D.rho_embed(t)), sigma(t)), cfg(), m_list=(1, 2), j_max=0)
    assert v.passed
    for r in v.reports:
        assert r.identically_zero or r.slope >= r.meta["target_m"] + 1 - 0.25


def test_delta_is_not_negligible():
    v = is_negligible(iota(D.delta(DOM)), cfg(), m_list=(1,), j_max=0)
    assert not v.passed
    assert v.reports[0].slope == pytest.approx(-1.0, abs=0.05)


def test_zero_is_negligible_identically():
    v = is_negligible(sigma(constant_field(DOM, 0.0)), cfg(Bs=(B,)), m_list=(1, 2, 3), j_max=1)
    assert v.passed
    assert all(r.identically_zero for r in v.reports)


ZOO = [D.delta(DOM), D.delta(DOM, 0.0, 1), D.heaviside(DOM), D.principal_value(DOM),
       D.rho_embed(scalar_field(DOM, lambda x: np.cos(x[0]), "cos"))]


@pytest.mark.parametrize("v", ZOO, ids=lambda v: v.label)
def test_nonzero_embeddings_are_not_negligible(v):
    assert not is_negligible(iota(v), cfg(k_max=9), m_list=(1,), j_max=0, check_moderate=False).passed


# -- saturation -------------------------------------------------------------------------------

PL, SP = ((-2.0,), (2.0,)), ((-2.5,), (2.5,))
CHI_DX = SmoothTensorField(DOM, 0, 1, lambda x: [plateau_cutoff(x, PL, SP)], label="chi dx")


def test_saturation_delta_prime_vector():
    u = iota(D.tensor(DOM, D.Delta((0.0,), (1,)), DX))
    v = saturation_check(u, [CHI_DX], cfg(), "moderate", j_max=0, l_max=0)
    assert v.passed and v.details["direct"]
    assert abs(v.details["N_direct"] - v.details["N_saturates"]) <= 0.5
    assert v.details["N_direct"] == pytest.approx(2.0, abs=0.1)


def test_saturation_sigma():
    v = saturation_check(sigma(XDX), [CHI_DX], cfg(A=A_TW), "moderate", j_max=0, l_max=1)
    assert v.passed and v.details["direct"]
    assert v.details["N_direct"] == 0.0 and v.details["N_saturates"] == 0.0


def test_saturation_negligible_embedding_difference():
    t = vector_field(DOM, lambda x: [np.sin(x[0]) + x[0] ** 2], "vf")
    u = difference(iota(D.rho_embed(t)), sigma(t))
    v = saturation_check(u, [CHI_DX], cfg(), "negligible", m_list=(1, 2), j_max=0)
    assert v.passed
    assert v.details["direct"] and all(v.details["saturates"])


# -- reduction, localization, metric ---------------------------------------------------------

def test_reduction_view_sigma():
    f = scalar_field(DOM, lambda x: 1.0 + x[0] ** 3, "1+x^3")
    for e, p in ((0.25, -0.3), (0.01, 0.7)):
        om = evaluate_kernel(kernel(), e, [p], DOM)
        assert reduction_view(sigma(f), A_TW)(om, p) == 1.0 + p ** 3
        assert reduction_view(sigma(f), A_TW, [B])(om, p) == 0.0
    with pytest.raises(ValueError):
        reduction_view(sigma(DX), A_ID)


def test_reduction_view_d3_dual_path():
    u = full_pairing(iota(D.tensor(DOM, D.Delta((0.0,), (1,)), DX)), CHI_DX)
    R = reduction_view(u, A_TW, [B])
    for e, p in ((0.125, 0.05), (0.0625, -0.02)):
        om = evaluate_kernel(kernel(), e, [p], DOM)
        fast = R(om, p)
        # independent route: central differences in the transport slot, one Richardson level
        f = lambda c: float(u.evaluate(om, np.array([p]), A_TW + B.scale(c)))
        d = lambda h: (f(h) - f(-h)) / (2 * h)
        fd = (4 * d(1e-4) - d(2e-4)) / 3
        assert fast == pytest.approx(fd, rel=1e-7, abs=1e-7 * max(1.0, abs(fast)))


def test_localization_sub_box():
    for u in (iota(D.delta(DOM, 0.0, 1)), difference(iota(D.rho_embed(X2)), sigma(X2))):
        assert localization_compare(u, cfg(m=1), (-1.6,), (1.6,)) <= 1e-10


def test_metric_scaling_leaves_slopes():
    u = iota(D.tensor(DOM, D.Delta((0.0,), (1,)), DX))
    a = sweep(u, cfg(k_max=9))
    b = sweep(u, cfg(k_max=9, metric=euclidean_metric(DOM, 3.0)))
    assert abs(a.slope - b.slope) <= 1e-9
    assert b.values[0] == pytest.approx(math.sqrt(3.0) * a.values[0], rel=1e-12)


def test_stability_under_hat_lie():
    u = iota(D.delta(DOM, 0.0, 1))
    c = cfg(k_max=8, ppa=7)
    assert is_moderate(u, c, j_max=0, l_max=0).passed
    for X in (DX, XDX):
        assert is_moderate(hat_lie(X, u), c, j_max=0, l_max=0).passed


def test_tensor_product_of_moderate_is_moderate():
    u = tensor_product(iota(D.delta(DOM)), sigma(DX))
    assert is_moderate(u, cfg(k_max=8, Xs=(XDX,)), j_max=0, l_max=1).passed
