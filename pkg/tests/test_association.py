import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from colombeau_lab import distributions as D
from colombeau_lab.association import (ASSOC_TOL, AssociationProbe, associated_zero, c0_associated,
                                       default_suite_cases, divergence_slope, product_association_suite,
                                       shadow_matches, weak_functional)
from colombeau_lab.basic_space import combine, difference, iota, sigma, tensor_product
from colombeau_lab.experiments import schwartz_pieces, standard_setup, twisted_example
from colombeau_lab.geometry import NForm, constant_field, scalar_field, vector_field
from colombeau_lab.kernels import build_kernel, bump_profile
from colombeau_lab.quotient_dynamics import SweepConfig, is_negligible
from colombeau_lab.rates import geometric_grid

S = standard_setup(kernel_order=0)
DOM, A_ID, KER, OMEGAS = S["domain"], S["A"], S["kernel"], S["omegas"]
A_TW = twisted_example(DOM)
ONE = constant_field(DOM, 1.0, label="1")
X = scalar_field(DOM, lambda x: x[0], "x")
DELTA = D.delta(DOM)
GRID = tuple(geometric_grid(3, 12))


def probe(tts=(ONE,), A=A_ID, ker=KER, grid=GRID, omegas=OMEGAS):
    return AssociationProbe(list(omegas), A, list(tts), ker, grid)


def _w(om, p):
    return float(om(np.array([[p]]))[0])


def _rho(ker, s):
    return float(ker.rho_m(np.array([s]))[0])


# -- associated with zero ---------------------------------------------------------------------

def test_sigma_zero_identically_zero():
    v = associated_zero(sigma(constant_field(DOM, 0.0)), probe(A=A_TW))
    assert v.passed and all(r.identically_zero for r in v.reports)


def test_x_times_delta_functional_oracle():
    u = tensor_product(iota(D.rho_embed(X)), iota(DELTA))
    om = OMEGAS[0]
    for e in (2.0 ** -3, 2.0 ** -6):
        h = e * KER.C
        # iota(x) at a symmetric translation kernel is exactly p
        f = lambda p: p * _rho(KER, -p / h) / h * _w(om, p)
        ref = integrate.quad(f, -h, h, points=[0.0], epsabs=1e-15, epsrel=1e-12)[0]
        got = weak_functional(u, om, ONE, A_ID, KER, e)
        assert got == pytest.approx(ref, rel=1e-8, abs=1e-14)
    assert associated_zero(u, probe()).passed


def test_delta_squared_diverges_like_inverse_eps():
    u = tensor_product(iota(DELTA), iota(DELTA))
    pr = probe()
    v = associated_zero(u, pr)
    assert not v.passed
    om = OMEGAS[0]
    l2 = integrate.quad(lambda s: _rho(KER, s) ** 2, -1.0, 1.0, epsabs=1e-14)[0]
    e = GRID[-1]
    got = weak_functional(u, om, ONE, A_ID, KER, e)
    assert got * e * KER.C == pytest.approx(_w(om, 0.0) * l2, rel=1e-4)
    assert divergence_slope(u, pr) == pytest.approx(-1.0, abs=0.05)


# -- shadows ----------------------------------------------------------------------------------

def test_shadow_of_delta():
    v = shadow_matches(iota(DELTA), DELTA, probe(A=A_TW))
    assert v.passed
    for r in v.reports:
        # symmetric kernel: the first moment vanishes, rate at least 2
        assert r.identically_zero or r.slope >= 2 - 0.25


def test_shadow_of_delta_with_order_one_kernel():
    ker = build_kernel(bump_profile(), 1, 1.0)
    assert shadow_matches(iota(DELTA), DELTA, probe(ker=ker)).passed


def test_shadow_valence_mismatch():
    with pytest.raises(ValueError):
        shadow_matches(iota(DELTA), D.tensor(DOM, D.Delta((0.0,)), vector_field(DOM, lambda x: [1.0 + 0 * x[0]])),
                       probe())


def test_delta_squared_has_no_shadow_in_zoo():
    u = tensor_product(iota(DELTA), iota(DELTA))
    pr = probe(grid=tuple(geometric_grid(3, 10)))
    zoo = [DELTA, D.delta(DOM, 0.0, 1), D.heaviside(DOM), D.principal_value(DOM), D.zero_distribution(DOM)]
    for cand in zoo:
        assert not shadow_matches(u, cand, pr).passed


def test_probe_validation():
    with pytest.raises(ValueError):
        AssociationProbe([], A_ID, [ONE], KER)
    with pytest.raises(ValueError):
        AssociationProbe(OMEGAS, A_ID, [], KER)
    open_form = NForm(DOM, lambda x: np.exp(-x[0] ** 2), (-np.inf,), (np.inf,))
    with pytest.raises(ValueError):
        AssociationProbe([open_form], A_ID, [ONE], KER)


def test_product_suite_matrix():
    rep = product_association_suite(DOM, 0)
    assert rep["passed"]
    assert all(row["tail_dev"] < ASSOC_TOL for row in rep["rows"])
    degenerate = [row for row in rep["rows"] if row["case"].startswith("degenerate")]
    assert degenerate and all(s == float("inf") for s in degenerate[0]["slopes"])
    assert len(default_suite_cases(DOM)) == len(rep["rows"])


# -- C0 association ---------------------------------------------------------------------------

K = ((-1.0,), (1.0,))
C0_GRID = tuple(geometric_grid(3, 11))


@pytest.mark.parametrize("m", [0, 1])
def test_c0_smooth_field(m):
    ker = build_kernel(bump_profile(), m, 1.0)
    t = scalar_field(DOM, lambda x: np.sin(2 * x[0]) + x[0] ** 2, "t")
    v = c0_associated(iota(D.rho_embed(t)), t, [ONE], A_ID, ker, [K], C0_GRID, 21)
    assert v.passed
    # symmetric kernels kill odd moments, so order 0 already gains a second power
    assert v.reports[0].slope >= max(m + 1, 2) - 0.25


def test_c0_abs_is_continuous_only():
    r_abs = D.TensorDistribution(DOM, 0, 0, ((D.Regular(lambda x: np.abs(x[0]), 1, ((0.0,),), False, "|x|"),
                                              ONE),), "|x|")
    t = scalar_field(DOM, lambda x: np.abs(x[0]), "|x|")
    v = c0_associated(iota(r_abs), t, [ONE], A_ID, KER, [K], C0_GRID, 21)
    assert v.passed
    rep = v.reports[0]
    assert rep.slope == pytest.approx(1.0, abs=0.05)
    # sup attained at the kink: h * int |s| rho(s) ds
    m1 = integrate.quad(lambda s: abs(s) * _rho(KER, s), -1.0, 1.0, points=[0.0], epsabs=1e-14)[0]
    assert rep.values[-1] == pytest.approx(C0_GRID[-1] * KER.C * m1, rel=1e-6)


def test_c0_delta_fails():
    v = c0_associated(iota(DELTA), constant_field(DOM, 0.0), [ONE], A_ID, KER, [K], C0_GRID, 11)
    assert not v.passed


def test_c1_variant_adds_lie_words():
    t = scalar_field(DOM, lambda x: np.cos(x[0]), "cos")
    dx = vector_field(DOM, lambda x: [1.0 + 0.0 * x[0]], "d/dx")
    v = c0_associated(iota(D.rho_embed(t)), t, [ONE], A_ID, KER, [K], tuple(geometric_grid(3, 9)), 11,
                      lie_words=[(dx,)])
    assert v.passed and len(v.reports) == 2


# -- invariants -------------------------------------------------------------------------------

SMALL = tuple(geometric_grid(3, 11))
U1 = tensor_product(iota(D.rho_embed(X)), iota(DELTA))
U2 = schwartz_pieces(DOM)["x_vp_minus_one"]


def test_summands_associated_zero():
    pr = probe(grid=SMALL)
    assert associated_zero(U1, pr).passed and associated_zero(U2, pr).passed


@settings(max_examples=5)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_association_is_additive(a, b):
    assert associated_zero(combine((a, U1), (b, U2)), probe(grid=SMALL)).passed


def test_shadow_uniqueness_over_zoo():
    pr = probe(grid=SMALL)
    zoo = [DELTA, D.delta(DOM, 0.0, 1), D.heaviside(DOM), D.principal_value(DOM), D.zero_distribution(DOM),
           D.scalar(DOM, D.SmoothCoefficient(constant_field(DOM, 1.0), D.Delta((0.0,))), "1 delta")]
    for u in (iota(DELTA), iota(D.heaviside(DOM))):
        hits = [v for v in zoo if shadow_matches(u, v, pr).passed]
        assert hits
        for v1 in hits:
            for v2 in hits:
                for om in pr.omega_list:
                    assert abs(v1.pair(ONE, om) - v2.pair(ONE, om)) <= ASSOC_TOL


def test_negligible_implies_associated_zero():
    t = scalar_field(DOM, lambda x: np.exp(-x[0] ** 2), "gauss")
    u = difference(iota(D.rho_embed(t)), sigma(t))
    cfg = SweepConfig(K, A_ID, build_kernel(bump_profile(), 1, 1.0), eps_grid=SMALL, points_per_axis=11)
    assert is_negligible(u, cfg, m_list=(1, 2), j_max=0).passed
    assert associated_zero(u, probe(grid=SMALL)).passed
