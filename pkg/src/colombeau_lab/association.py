"""Association: weak limits of representatives along smoothing kernels.

For a probe (omega, t~) the weak functional is

    I(eps) = int u(Phi(eps, p), p, A) . t~(p) omega(p) dp

and u is associated with 0 (resp. has shadow v) when I(eps) -> 0
(resp. -> <v, t~ (x) omega>) for every probe of the battery.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .basic_space import Representative, difference, full_pairing, iota, sigma, tensor_product
from .distributions import TensorDistribution, dual_contract, rho_embed
from .geometry import ChartDomain, NForm, SmoothTensorField, constant_field
from .kernels import SmoothingKernel, build_kernel, evaluate_kernel
from .quadrature import QuadratureSpec, box_rule
from .quotient_dynamics import Verdict
from .rates import OrderReport, estimate_order, geometric_grid
from .transport import TransportOperator

ASSOC_TOL = 1e-5
C0_TOL = 1e-3
TAIL = 3
OUTER_QUAD = QuadratureSpec(panels=4, nodes=16)


@dataclass
class AssociationProbe:
    omega_list: list
    A: TransportOperator
    t_tilde_list: list
    kernel: SmoothingKernel
    eps_grid: tuple = tuple(geometric_grid())
    quad: QuadratureSpec = OUTER_QUAD

    def __post_init__(self):
        if not self.omega_list or not self.t_tilde_list:
            raise ValueError("probe lists must be non-empty")
        for om in self.omega_list:
            if not all(np.isfinite(om.lo)) or not all(np.isfinite(om.hi)):
                raise ValueError("probe forms must be compactly supported")

    def pairs(self):
        for i, om in enumerate(self.omega_list):
            for k, t in enumerate(self.t_tilde_list):
                yield (i, k), om, t


def _outer_breaks(omega: NForm, sing, eps: float, C: float):
    n = len(omega.lo)
    bps = [list(omega.breakpoints[i]) if omega.breakpoints else [] for i in range(n)]
    for a in sing:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        for i in range(n):
            for sfrac in (-1.0, -0.5, 0.0, 0.5, 1.0):
                bps[i].append(float(a[i] + sfrac * eps * C))
    return [tuple(sorted(set(b))) for b in bps]


def weak_functional(u: Representative, omega: NForm, t_tilde: SmoothTensorField, A: TransportOperator,
                    kernel: SmoothingKernel, eps: float, quad: QuadratureSpec = OUTER_QUAD) -> float:
    """I(eps) by Gauss-Legendre over supp omega, refined around the singular points of u."""
    if (t_tilde.r, t_tilde.s) != (u.s, u.r):
        raise ValueError("t~ must have the dual valence of u")
    bps = _outer_breaks(omega, u.singular_points(), eps, kernel.C)
    pts, w = box_rule(omega.lo, omega.hi, quad, bps)
    wv = w * omega(pts)
    live = np.nonzero(wv != 0.0)[0]
    tt = t_tilde(pts[:, live])
    total = 0.0
    for c, k in enumerate(live):
        p = pts[:, k]
        val = u.evaluate(evaluate_kernel(kernel, eps, p, u.domain), p, A)
        total += float(dual_contract(val, tt[..., c], u.r, u.s)) * wv[k]
    return total


def _tail_max(values, tail: int = TAIL) -> float:
    return float(np.max(np.abs(values[-tail:])))


def _functional_series(u, probe, om, t):
    return [weak_functional(u, om, t, probe.A, probe.kernel, e, probe.quad) for e in probe.eps_grid]


def associated_zero(u: Representative, probe: AssociationProbe, tol: float = ASSOC_TOL) -> Verdict:
    """PASS iff for every probe pair I(eps) has tail max below tol and decays (or vanishes)."""
    reports, ok = [], True
    for key, om, t in probe.pairs():
        vals = _functional_series(u, probe, om, t)
        rep = estimate_order(probe.eps_grid, vals, test_id=f"assoc0:{u.label}:{key}")
        tail = _tail_max(vals)
        good = rep.identically_zero or (tail < tol and rep.slope > 0)
        rep.verdict = "pass" if good else "fail"
        rep.meta = {"tail_max": tail, "I": [float(v) for v in vals]}
        ok = ok and good
        reports.append(rep)
    return Verdict(ok, "associated-zero", reports)


def shadow_matches(u: Representative, v, probe: AssociationProbe, tol: float = ASSOC_TOL) -> Verdict:
    """PASS iff I(eps) -> <v, t~ (x) omega> on every probe pair (tail deviation below tol)."""
    if (v.r, v.s) != (u.r, u.s):
        raise ValueError("valence mismatch between representative and candidate shadow")
    reports, ok = [], True
    for key, om, t in probe.pairs():
        target = v.pair(t, om)
        vals = _functional_series(u, probe, om, t)
        dev = [abs(x - target) for x in vals]
        rep = estimate_order(probe.eps_grid, dev, test_id=f"shadow:{u.label}:{key}")
        tail = _tail_max(dev)
        good = tail < tol
        rep.verdict = "pass" if good else "fail"
        rep.meta = {"target": float(target), "tail_dev": tail, "I": [float(x) for x in vals]}
        ok = ok and good
        reports.append(rep)
    return Verdict(ok, "shadow", reports)


def divergence_slope(u: Representative, probe: AssociationProbe) -> float:
    """Fitted log-log slope of |I(eps)| for the first probe pair (negative means blow-up)."""
    _, om, t = next(probe.pairs())
    vals = _functional_series(u, probe, om, t)
    return estimate_order(probe.eps_grid, vals).slope


def c0_associated(u: Representative, t: SmoothTensorField, t_tilde_list, A: TransportOperator,
                  kernel: SmoothingKernel, K_list, eps_grid=tuple(geometric_grid()), points_per_axis: int = 41,
                  tol: float = C0_TOL, lie_words: Sequence = ()) -> Verdict:
    """sup_{p in K} |u(Phi(eps,p),p,A).t~(p) - t(p).t~(p)| -> 0 on each box K.

    ``lie_words`` adds the C^k variant: words of vector fields applied in p to
    both the swept map and to t.
    """
    from .quotient_dynamics import SweepConfig, sweep
    reports, ok = [], True
    for K in K_list:
        for k, tt in enumerate(t_tilde_list):
            diff = difference(full_pairing(u, tt), full_pairing(sigma(t), tt))
            cfg = SweepConfig(K, A, kernel, eps_grid=eps_grid, points_per_axis=points_per_axis)
            for word in [()] + list(lie_words):
                rep = sweep(diff, cfg, 0, tuple(word), test_id=f"c0:{u.label}:{k}:{len(word)}")
                tail = _tail_max(rep.values)
                good = rep.identically_zero or (rep.slope > 0 and tail < tol)
                rep.verdict = "pass" if good else "fail"
                rep.meta["tail_max"] = tail
                ok = ok and good
                reports.append(rep)
    return Verdict(ok, "c0-associated", reports)


@dataclass
class SuiteCase:
    name: str
    u: Representative
    v: TensorDistribution
    probe: AssociationProbe


def product_association_suite(domain: Optional[ChartDomain] = None, kernel_order: int = 0,
                              eps_grid=tuple(geometric_grid()), cases: Optional[Sequence[SuiteCase]] = None) -> dict:
    """Shadow matrix for products of embedded tensors against the classical products."""
    cases = list(cases) if cases is not None else default_suite_cases(domain, kernel_order, eps_grid)
    rows, ok = [], True
    for case in cases:
        ver = shadow_matches(case.u, case.v, case.probe)
        rows.append({"case": case.name, "passed": ver.passed,
                     "tail_dev": max(r.meta["tail_dev"] for r in ver.reports),
                     "slopes": [r.slope for r in ver.reports]})
        ok = ok and ver.passed
    return {"passed": ok, "rows": rows}


def default_suite_cases(domain: Optional[ChartDomain] = None, kernel_order: int = 0,
                        eps_grid=tuple(geometric_grid())) -> list:
    from .experiments import standard_setup
    S = standard_setup(domain, kernel_order)
    dom, A, ker = S["domain"], S["A"], S["kernel"]
    from . import distributions as D
    from .geometry import SmoothTensorField, tensor_product_fields, vector_field

    dx = vector_field(dom, lambda x: [1.0 + 0.0 * x[0]], "d/dx")
    form = SmoothTensorField(dom, 0, 1, lambda x: [1.0 + 0.0 * x[0]], label="dx")
    t1 = vector_field(dom, lambda x: [1.0 / (1.0 + x[0] ** 2)], "(1+x^2)^-1 d/dx")
    zero_v = vector_field(dom, lambda x: [0.0 * x[0]], "0")

    omegas = S["omegas"]
    t11 = [SmoothTensorField(dom, 1, 1, lambda x: [[np.cos(x[0])]], label="cos e(x)e"),
           SmoothTensorField(dom, 1, 1, lambda x: [[1.0 + x[0]]], label="(1+x) e(x)e")]
    t02 = [SmoothTensorField(dom, 0, 2, lambda x: [[np.cos(x[0])]], label="cos dx dx"),
           SmoothTensorField(dom, 0, 2, lambda x: [[1.0 + x[0]]], label="(1+x) dx dx")]
    t00 = [constant_field(dom, 1.0, label="1"), SmoothTensorField(dom, 0, 0, lambda x: np.cos(x[0]), label="cos")]

    def probe(tts):
        return AssociationProbe(omegas, A, tts, ker, eps_grid)

    sqrt_abs = lambda x: np.sqrt(np.abs(x[0]))
    r_sqrt = D.TensorDistribution(dom, 0, 0, ((D.Regular(sqrt_abs, 1, ((0.0,),), False, "|x|^1/2"),
                                              constant_field(dom, 1.0)),), "|x|^1/2")
    r_abs = D.TensorDistribution(dom, 0, 0, ((D.Regular(lambda x: np.abs(x[0]), 1, ((0.0,),), False, "|x|"),
                                             constant_field(dom, 1.0)),), "|x|")
    delta_dx = D.tensor(dom, D.Delta((0.0,)), form, "delta dx")
    cases = [
        SuiteCase("smooth(x)distribution: d/dx (x) delta dx", tensor_product(iota(rho_embed(dx)), iota(delta_dx)),
                  D.tensor(dom, D.Delta((0.0,)), tensor_product_fields(dx, form), "delta d/dx(x)dx"), probe(t11)),
        SuiteCase("continuous(x)continuous: t1 (x) t1", tensor_product(iota(rho_embed(t1)), iota(rho_embed(t1))),
                  rho_embed(tensor_product_fields(t1, t1)), probe(t02)),
        SuiteCase("continuous(x)continuous: |x|^1/2 * |x|^1/2", tensor_product(iota(r_sqrt), iota(r_sqrt)), r_abs,
                  probe(t00)),
        SuiteCase("degenerate: 0 (x) delta dx", tensor_product(iota(rho_embed(zero_v)), iota(delta_dx)),
                  D.tensor(dom, D.Zero(1), tensor_product_fields(dx, form), "0"), probe(t11)),
    ]
    return cases
