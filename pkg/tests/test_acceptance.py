"""Acceptance battery: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from colombeau_lab import distributions as D
from colombeau_lab.basic_space import combine, difference, fiber_norm, hat_lie, iota, sigma, tensor_product
from colombeau_lab.experiments import registry_config, run_config, standard_setup, twisted_example, write_outputs
from colombeau_lab.geometry import ChartDomain, SmoothTensorField, scalar_field, vector_field
from colombeau_lab.kernels import build_kernel, bump_profile, derivative_sup_slopes, evaluate_kernel
from colombeau_lab.quotient_dynamics import SweepConfig, localization_compare, saturation_check, sweep
from colombeau_lab.rates import geometric_grid
from colombeau_lab.transport import plateau_cutoff

S = standard_setup()
DOM, A_ID = S["domain"], S["A"]
K = ((-1.0,), (1.0,))
PL, SP = ((-2.0,), (2.0,)), ((-2.5,), (2.5,))


def _kernel(m, C=1.0):
    return build_kernel(bump_profile(), m, C)


def embedding_difference_rate():
    fields = {"x^2": lambda x: x[0] ** 2, "sin x": lambda x: np.sin(x[0]),
              "x exp(-x^2)": lambda x: x[0] * np.exp(-x[0] ** 2)}
    ok, worst, slowest = True, np.inf, 0.0
    for name, f in fields.items():
        t = scalar_field(DOM, f, name)
        u = difference(iota(D.rho_embed(t)), sigma(t))
        for m in (0, 1, 2):
            t0 = time.perf_counter()
            rep = sweep(u, SweepConfig(K, A_ID, _kernel(m)))
            dt = time.perf_counter() - t0
            slowest = max(slowest, dt)
            margin = np.inf if rep.identically_zero else rep.slope - (m + 1)
            worst = min(worst, margin)
            ok = ok and margin >= -0.25 and dt < 30.0
    return ok, f"min(slope - (m+1)) = {worst:.3f}, slowest case {slowest:.1f}s"


def lie_commutation():
    t0 = time.perf_counter()
    res = run_config(registry_config("lie-commute"))
    dt = time.perf_counter() - t0
    dev = max(res.summary["max_deviation"].values())
    return res.passed and dev <= 1e-5 and dt < 60.0, f"max relative deviation {dev:.2e} over 8 pairs, {dt:.1f}s"


def diffeo_commutation():
    res = run_config(registry_config("diffeo-commute"))
    dev = max(res.summary["max_deviation"].values())
    return res.passed and dev <= 1e-5, f"max relative deviation {dev:.2e}"


def leibniz():
    A = twisted_example(DOM)
    X = vector_field(DOM, lambda x: [0.4 + x[0] + 0.5 * x[0] ** 2], "X")
    dx = vector_field(DOM, lambda x: [1.0 + 0.0 * x[0]], "d/dx")
    form = SmoothTensorField(DOM, 0, 1, lambda x: [1.0 + 0.5 * x[0] ** 2], label="form")
    pairs = {"sigma(x)sigma": (sigma(vector_field(DOM, lambda x: [np.sin(x[0])])), sigma(form)),
             "sigma(x)iota": (sigma(form), iota(D.tensor(DOM, D.Delta((0.0,), (1,)), dx))),
             "iota(x)iota": (iota(D.tensor(DOM, D.Heaviside(0.0), vector_field(DOM, lambda x: [1.0 + x[0]]))),
                             iota(D.tensor(DOM, D.Delta((0.05,)), form)))}
    ker = _kernel(1)
    worst = 0.0
    for u1, u2 in pairs.values():
        lhs = hat_lie(X, tensor_product(u1, u2))
        rhs = combine((1.0, tensor_product(hat_lie(X, u1), u2)), (1.0, tensor_product(u1, hat_lie(X, u2))))
        r, s = lhs.r, lhs.s
        for e in (2.0 ** -3, 2.0 ** -6):
            for p in (-0.4, -0.01, 0.0, 0.02, 0.3):
                om, q = evaluate_kernel(ker, e, [p], DOM), np.array([p])
                a, b = np.asarray(lhs.evaluate(om, q, A)), np.asarray(rhs.evaluate(om, q, A))
                worst = max(worst, fiber_norm(a - b, r, s) / max(1.0, fiber_norm(b, r, s)))
    return worst <= 1e-5, f"max relative deviation {worst:.2e} over {len(pairs)} pairs"


def nogo_witness():
    res = run_config(registry_config("nogo-vector"))
    parts = [f"{k}: C_rho={v['C_rho']:.5f} tail={v['tail'][-1]:.5f}" for k, v in res.summary.items()]
    return res.passed, "; ".join(parts)


def schwartz_chain():
    res = run_config(registry_config("schwartz"))
    s = res.summary
    ok = s["assoc0[iota(x vp) - sigma(1)]"] and s["shadow[iota(delta), delta]"] and not s["assoc0[iota(delta)]"]
    return ok and res.passed, ", ".join(f"{k}={v}" for k, v in s.items())


def product_association():
    res = run_config(registry_config("shadow-suite"))
    s = res.summary
    dev = max(row["tail_dev"] for row in s["rows"])
    ok = s["passed"] and dev < 1e-5 and s["delta_squared_slope"] <= -0.75
    return ok, f"max tail deviation {dev:.2e}, delta^2 slope {s['delta_squared_slope']:.3f}"


def saturation_coherence():
    dom2 = ChartDomain.box([-3.0, -3.0], [3.0, 3.0])
    A2 = standard_setup(dom2)["A"]
    chi = lambda x: plateau_cutoff(x, PL, SP)
    chi2 = lambda x: plateau_cutoff(x, ((-2.0, -2.0), (2.0, 2.0)), ((-2.5, -2.5), (2.5, 2.5)))
    dx = vector_field(DOM, lambda x: [1.0 + 0.0 * x[0]], "d/dx")
    b10 = [SmoothTensorField(DOM, 0, 1, lambda x: [chi(x)], label="chi dx")]
    b01 = [SmoothTensorField(DOM, 1, 0, lambda x: [chi(x)], label="chi d/dx")]
    b11 = [SmoothTensorField(DOM, 1, 1, lambda x: [[chi(x)]], label="chi d/dx(x)dx")]
    b2 = [SmoothTensorField(dom2, 0, 1, lambda x: [chi2(x), 0.0 * x[0]], label="chi dx"),
          SmoothTensorField(dom2, 0, 1, lambda x: [0.0 * x[0], chi2(x)], label="chi dy")]
    vf = vector_field(DOM, lambda x: [np.sin(x[0]) + x[0] ** 2], "vf")
    form = SmoothTensorField(DOM, 0, 1, lambda x: [np.cos(x[0])], label="cos dx")
    e1 = vector_field(dom2, lambda x: [1.0 + 0.0 * x[0], 0.5 * x[1]], "d/dx + y/2 d/dy")
    grid1, grid2 = tuple(geometric_grid(3, 10)), tuple(geometric_grid(3, 8))
    cfg1 = SweepConfig(K, A_ID, _kernel(0), eps_grid=grid1, points_per_axis=11)
    cfg2 = SweepConfig(((-1.0, -1.0), (1.0, 1.0)), A2, _kernel(0), eps_grid=grid2, points_per_axis=5)
    cases = [
        ("iota(delta' d/dx)", iota(D.tensor(DOM, D.Delta((0.0,), (1,)), dx)), b10, cfg1),
        ("sigma(x d/dx)", sigma(vector_field(DOM, lambda x: [x[0]], "x d/dx")), b10, cfg1),
        ("(iota-sigma)(vf)", difference(iota(D.rho_embed(vf)), sigma(vf)), b10, cfg1),
        ("iota(delta cos dx)", iota(D.tensor(DOM, D.Delta((0.0,)), form)), b01, cfg1),
        ("iota(H) (x) sigma(d/dx (x) dx)", tensor_product(iota(D.heaviside(DOM)),
                                                          sigma(SmoothTensorField(DOM, 1, 1, lambda x: [[1.0 + x[0]]]))),
         b11, cfg1),
        ("2-D iota(delta e1)", iota(D.tensor(dom2, D.Delta((0.0, 0.0)), e1)), b2, cfg2),
    ]
    ok, rows = True, []
    for name, u, basis, cfg in cases:
        mod = saturation_check(u, basis, cfg, "moderate", j_max=0, l_max=0)
        neg = saturation_check(u, basis, cfg, "negligible", m_list=(1,), j_max=0)
        ok = ok and mod.passed and neg.passed
        rows.append(f"{name}: mod={mod.details['direct']} neg={neg.details['direct']} "
                    f"agree={mod.passed and neg.passed}")
    return ok, "; ".join(rows)


def moment_construction():
    worst = 0.0
    for m in range(4):
        ker = _kernel(m)
        rho = lambda s: float(ker.rho_m(np.array([s]))[0])
        for k in range(m + 1):
            val = integrate.quad(lambda s: s ** k * rho(s), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
            worst = max(worst, abs(val - (1.0 if k == 0 else 0.0)))
    slopes = []
    ker = _kernel(1)
    eps = geometric_grid(3, 10)
    for n, beta in ((1, (0,)), (1, (1,)), (1, (2,)), (2, (0, 0)), (2, (1, 0)), (2, (1, 1)), (2, (0, 2))):
        rep = derivative_sup_slopes(ker, n, eps, beta)
        slopes.append(abs(rep.slope - (-n - sum(beta))))
    return worst <= 1e-8 and max(slopes) <= 0.1, \
        f"max moment error {worst:.1e} (m<=3), max slope error {max(slopes):.3f} (|beta|<=2)"


def determinism_localization():
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for k in range(2):
            cfg = registry_config("embed-diff")
            res = run_config(cfg)
            _, csv = write_outputs(cfg, res, Path(tmp) / str(k), 0.0)
            blobs.append(Path(csv).read_bytes())
    same = blobs[0] == blobs[1]
    cfg = SweepConfig(K, A_ID, _kernel(1), eps_grid=tuple(geometric_grid(3, 10)), points_per_axis=11)
    x2 = scalar_field(DOM, lambda x: x[0] ** 2, "x^2")
    devs = [localization_compare(u, cfg, (-1.5,), (1.5,))
            for u in (iota(D.delta(DOM, 0.0, 1)), difference(iota(D.rho_embed(x2)), sigma(x2)),
                      iota(D.principal_value(DOM)))]
    return same and max(devs) <= 1e-10, f"CSV byte-identical={same}, max localization deviation {max(devs):.1e}"


CRITERIA = [
    (1, "embedding-difference rate", embedding_difference_rate),
    (2, "Lie derivative commutes with the embedding", lie_commutation),
    (3, "diffeomorphism commutation", diffeo_commutation),
    (4, "Leibniz rule", leibniz),
    (5, "no-go witness", nogo_witness),
    (6, "Schwartz chain", schwartz_chain),
    (7, "product association", product_association),
    (8, "saturation coherence", saturation_coherence),
    (9, "moment construction", moment_construction),
    (10, "determinism and localization", determinism_localization),
]


def _line(num, title, ok, detail):
    return f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"


@pytest.mark.parametrize("num,title,fn", CRITERIA, ids=[f"c{n}" for n, _, _ in CRITERIA])
def test_criterion(num, title, fn, capsys):
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(num, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    for num, title, fn in CRITERIA:
        print(_line(num, title, *fn()), flush=True)
