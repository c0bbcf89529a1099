"""Asymptotic tests along smoothing kernels: sweeps, moderateness, negligibility.

A sweep fixes a compact box K, a transport operator A with K inside core(A),
directions B_1..B_j vanishing on the diagonal over core(A), a Lie word
X_1..X_l and a smoothing kernel, and records for each eps

    sup_{p in K} | L_{X_1} ... L_{X_l} ( p -> d3^j u(Phi(eps, p), p, A)(B_1..B_j) ) |_h .

Verdicts are relative to the configured battery.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .basic_space import Representative, Restriction, full_pairing, fiber_norm
from .geometry import ChartDomain, DomainError, RiemannianMetric, SmoothTensorField, lie_derivative_tensor
from .kernels import SmoothingKernel, build_kernel, evaluate_kernel
from .rates import ABS_FLOOR, WINDOW, OrderReport, estimate_order, geometric_grid
from .transport import TransportOperator, core_contains, diagonal_vanishes

N_MAX = 20
SLOPE_TOL = 0.25
P_REL_STEP = 1e-3


@dataclass
class SweepConfig:
    K: tuple
    A: TransportOperator
    kernel: SmoothingKernel
    B_list: tuple = ()
    X_list: tuple = ()
    eps_grid: tuple = tuple(geometric_grid())
    points_per_axis: int = 31
    zoom_points: Optional[int] = None
    metric: Optional[RiemannianMetric] = None
    threads: int = 1
    window: int = WINDOW
    abs_floor: float = ABS_FLOOR
    p_rel_step: float = P_REL_STEP

    def __post_init__(self):
        lo, hi = self.K
        self.K = (tuple(np.atleast_1d(lo).astype(float)), tuple(np.atleast_1d(hi).astype(float)))
        self.eps_grid = tuple(float(e) for e in self.eps_grid)
        self.B_list = tuple(self.B_list)
        self.X_list = tuple(self.X_list)

    @property
    def n(self) -> int:
        return len(self.K[0])

    def validate(self) -> None:
        e = np.array(self.eps_grid)
        if len(e) < 4 or np.any(np.diff(e) >= 0) or e[0] > 1 or e[-1] <= 0:
            raise ValueError("eps_grid must be strictly decreasing in (0, 1] with at least 4 values")
        if not core_contains(self.A, self.K):
            raise ValueError("K must lie inside core(A)")
        for i, B in enumerate(self.B_list):
            if not diagonal_vanishes(B, self.A.core):
                raise ValueError(f"B_list[{i}] does not vanish on the diagonal over core(A)")

    def base_points(self) -> np.ndarray:
        axes = [np.linspace(a, b, self.points_per_axis) for a, b in zip(*self.K)]
        return np.array([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])

    def zoom(self, eps: float, singular: Sequence) -> np.ndarray:
        """Points within the kernel reach of each singular point inside K (resolves eps-scale peaks)."""
        if not singular:
            return np.zeros((self.n, 0))
        m = self.zoom_points or (201 if self.n == 1 else 15)
        h = eps * self.kernel.C
        u = np.linspace(-1.0, 1.0, m)
        lo, hi = np.array(self.K[0]), np.array(self.K[1])
        blocks = []
        for a in singular:
            a = np.asarray(a, dtype=float)
            axes = [a[i] + h * u for i in range(self.n)]
            pts = np.array([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])
            keep = np.all((pts >= lo[:, None]) & (pts <= hi[:, None]), axis=0)
            blocks.append(pts[:, keep])
        return np.concatenate(blocks, axis=1)

    def with_kernel(self, kernel: SmoothingKernel) -> "SweepConfig":
        return replace(self, kernel=kernel)

    def to_dict(self) -> dict:
        return {"K": [list(self.K[0]), list(self.K[1])], "A": self.A.label, "kernel_order": self.kernel.order,
                "profile": self.kernel.profile.name, "C": self.kernel.C,
                "B_list": [B.label for B in self.B_list], "X_list": [X.label for X in self.X_list],
                "eps_grid": list(self.eps_grid), "points_per_axis": self.points_per_axis,
                "metric": self.metric.label if self.metric else "euclidean"}


def _point_values(u: Representative, cfg: SweepConfig, eps: float, Bs, word, pts: np.ndarray):
    """Tensor values of the (Lie word of the) swept map at each column of ``pts``."""
    A, ker, dom = cfg.A, cfg.kernel, u.domain

    def base(p):
        om = evaluate_kernel(ker, eps, p, dom)
        return u.d3(om, p, A, *Bs) if Bs else u.evaluate(om, p, A)

    if not word:
        return [np.asarray(base(pts[:, k]), dtype=float) for k in range(pts.shape[1])]

    step = cfg.p_rel_step * eps * ker.C

    def fn(x):
        x = np.asarray(x, dtype=float)
        batch = x.shape[1:]
        flat = x.reshape(u.n, -1)
        vals = np.array([base(flat[:, k]) for k in range(flat.shape[1])])
        return np.moveaxis(vals, 0, -1).reshape(u.fiber_shape + batch)

    f = SmoothTensorField(dom, u.r, u.s, fn, analytic=False, fd_step=step / dom.scale, fd_growth=10.0,
                          label="swept")
    for X in reversed(word):
        f = lie_derivative_tensor(X, f)
    return [np.asarray(f(pts[:, k:k + 1]), dtype=float)[..., 0] for k in range(pts.shape[1])]


def _norms(u, cfg, pts, vals):
    out = np.empty(len(vals))
    for k, T in enumerate(vals):
        L = cfg.metric.norm_factor(pts[:, k:k + 1])[:, :, 0] if cfg.metric is not None else None
        out[k] = fiber_norm(T, u.r, u.s, L)
    return out


def sweep_values(u: Representative, cfg: SweepConfig, j: int = 0, word: Sequence = ()):
    """(eps list actually used, sup values, notes)."""
    Bs = cfg.B_list[:j]
    if len(Bs) < j:
        raise ValueError("not enough directions in B_list")
    notes = []
    base = cfg.base_points()
    sing = [s for s in u.singular_points()]
    eps_used, sups = [], []
    for eps in cfg.eps_grid:
        pts = np.concatenate([base, cfg.zoom(eps, sing)], axis=1)
        try:
            if cfg.threads > 1 and pts.shape[1] > 1:
                chunks = np.array_split(np.arange(pts.shape[1]), cfg.threads)
                with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
                    parts = list(ex.map(lambda c: _point_values(u, cfg, eps, Bs, word, pts[:, c]), chunks))
                vals = [v for part in parts for v in part]
            else:
                vals = _point_values(u, cfg, eps, Bs, word, pts)
        except DomainError:
            if not sups:
                notes.append(f"eps={eps:g} dropped: kernel support escapes the domain")
                continue
            raise
        sups.append(float(np.max(_norms(u, cfg, pts, vals))))
        eps_used.append(eps)
    return eps_used, sups, notes


def sweep(u: Representative, cfg: SweepConfig, j: int = 0, word: Sequence = (), test_id: str = "") -> OrderReport:
    eps, sups, notes = sweep_values(u, cfg, j, word)
    tid = test_id or f"{u.label}|j={j}|word={','.join(X.label for X in word)}"
    rep = estimate_order(eps, sups, window=cfg.window, abs_floor=cfg.abs_floor, test_id=tid)
    rep.meta = {"j": j, "word": [X.label for X in word], "kernel_order": cfg.kernel.order}
    if notes:
        rep.meta["notes"] = notes
    return rep


# -- verdicts --------------------------------------------------------------------------

@dataclass
class Verdict:
    passed: bool
    kind: str
    reports: list = field(default_factory=list)
    N: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        return {"kind": self.kind, "passed": self.passed, "N": self.N, "details": self.details,
                "reports": [r.to_dict() for r in self.reports]}


def _words(X_list, l: int):
    return list(itertools.product(X_list, repeat=l))


def _order0(cfg: SweepConfig) -> SweepConfig:
    if cfg.kernel.order == 0:
        return cfg
    return cfg.with_kernel(build_kernel(cfg.kernel.profile, 0, cfg.kernel.C, cfg.kernel.modulation))


def is_moderate(u: Representative, cfg: SweepConfig, j_max: int = 2, l_max: int = 2,
                N_max: float = N_MAX) -> Verdict:
    """Every (j, Lie word) sweep grows at most polynomially (slope >= -N_max, no blow-up flags)."""
    c0 = _order0(cfg)
    reports, N = [], {}
    ok = True
    for j in range(min(j_max, len(cfg.B_list)) + 1):
        for l in range(l_max + 1):
            for word in _words(cfg.X_list, l):
                rep = sweep(u, c0, j, word)
                bad = (not math.isfinite(rep.slope) and rep.slope < 0) or rep.slope < -N_max \
                    or "super-polynomial" in rep.flags or "non-finite" in rep.flags
                rep.verdict = "fail" if bad else "pass"
                ok = ok and not bad
                N[rep.test_id] = 0.0 if rep.slope == math.inf else max(0.0, -rep.slope)
                reports.append(rep)
    return Verdict(ok, "moderate", reports, N)


def is_negligible(u: Representative, cfg: SweepConfig, m_list=(1, 2, 3), j_max: int = 2,
                  slope_tol: float = SLOPE_TOL, k_of: Callable = lambda m: m,
                  check_moderate: bool = True, moderate_kw: Optional[dict] = None) -> Verdict:
    """For each m: sweeps with order-k_of(m) kernels decay like eps^m (or vanish identically)."""
    details = {}
    if check_moderate:
        mod = is_moderate(u, cfg, **(moderate_kw or {"j_max": j_max, "l_max": 0}))
        details["moderate"] = mod.passed
        if not mod.passed:
            return Verdict(False, "negligible", mod.reports, mod.N, {"moderate": False, "reason": "not moderate"})
    reports = []
    ok = True
    for m in m_list:
        k = k_of(m)
        cm = cfg.with_kernel(build_kernel(cfg.kernel.profile, k, cfg.kernel.C, cfg.kernel.modulation))
        for j in range(min(j_max, len(cfg.B_list)) + 1):
            rep = sweep(u, cm, j, (), test_id=f"{u.label}|m={m}|k={k}|j={j}")
            good = rep.identically_zero or rep.slope >= m - slope_tol
            rep.verdict = "pass" if good else "fail"
            rep.meta["target_m"] = m
            ok = ok and good
            reports.append(rep)
    return Verdict(ok, "negligible", reports, {}, details)


def saturation_check(u: Representative, basis: Sequence[SmoothTensorField], cfg: SweepConfig,
                     mode: str = "moderate", **kw) -> Verdict:
    """Compare the verdict on u with the verdicts on its scalar saturates u . (chi t~_i)."""
    test = is_moderate if mode == "moderate" else is_negligible
    direct = test(u, cfg, **kw)
    sats = [test(full_pairing(u, t), cfg, **kw) for t in basis]
    agree = direct.passed == all(v.passed for v in sats)
    details = {"direct": direct.passed, "saturates": [v.passed for v in sats]}
    if mode == "moderate":
        details["N_direct"] = max(direct.N.values()) if direct.N else 0.0
        details["N_saturates"] = max((max(v.N.values()) for v in sats if v.N), default=0.0)
    reps = direct.reports + [r for v in sats for r in v.reports]
    return Verdict(agree, f"saturation-{mode}", reps, {}, details)


@dataclass(frozen=True, eq=False)
class ReducedMap:
    """(omega, p) -> d3^j u(omega, p, A)(B_1..B_j) for a scalar representative."""

    u: Representative
    A: TransportOperator
    B_list: tuple = ()

    def __call__(self, omega, p) -> float:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        val = self.u.d3(omega, p, self.A, *self.B_list) if self.B_list else self.u.evaluate(omega, p, self.A)
        return float(np.asarray(val))


def reduction_view(u: Representative, A: TransportOperator, B_list=()) -> ReducedMap:
    if u.r or u.s:
        raise ValueError("reduction applies to scalar representatives")
    return ReducedMap(u, A, tuple(B_list))


def localization_compare(u: Representative, cfg: SweepConfig, sub_lo, sub_hi, j: int = 0) -> float:
    """Max |difference| between sweeps on the full chart and on a sub-box containing K."""
    full = sweep_values(u, cfg, j)[1]
    part = sweep_values(Restriction(u=u, lo=tuple(np.atleast_1d(sub_lo).astype(float)),
                                    hi=tuple(np.atleast_1d(sub_hi).astype(float))), cfg, j)[1]
    return float(np.max(np.abs(np.array(full) - np.array(part))))
