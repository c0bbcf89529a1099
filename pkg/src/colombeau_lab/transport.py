"""Compactly supported transport operators (p, q) -> A(p, q): T_pM -> T_qM,
their induced fiber maps, pullbacks, Lie derivatives and two-point tensors.

``A(p, q)`` is stored in chart components: row index on the q side, column
index on the p side.  Adjoints are matrix transposes.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import jets as J
from .expr import compile_expression
from .geometry import (ChartDomain, Diffeomorphism, RiemannianMetric, SmoothTensorField, act_on_fiber,
                       flow, geodesic_parallel_transport, mat_inv, mat_mul, pullback_tensor,
                       transpose_matrix, _is_jet_point)

TAU_LIE = 1e-3


def _box(b):
    if b is None:
        return None
    lo, hi = b
    return (tuple(np.atleast_1d(lo).astype(float)), tuple(np.atleast_1d(hi).astype(float)))


def _eye_like(n, batch, jet=False):
    if jet:
        out = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                out[i, j] = 1.0 if i == j else 0.0
        return out
    return np.broadcast_to(np.eye(n).reshape((n, n) + (1,) * len(batch)), (n, n) + batch).copy()


@dataclass(frozen=True, eq=False)
class TransportOperator:
    """A(p, q) given by ``fn(p, q)`` returning an (n, n) component array (+ batch).

    ``support`` is a pair of boxes (p-box, q-box) outside of which A vanishes;
    ``core`` an open box on which A(p, p) is the identity; ``kernel_region`` an
    open box on which A(p, p) = 0.
    """

    domain: ChartDomain
    fn: Callable
    support: Optional[tuple] = None
    core: Optional[tuple] = None
    kernel_region: Optional[tuple] = None
    analytic: bool = True
    fd_step: float = 1e-3
    label: str = ""

    @property
    def n(self) -> int:
        return self.domain.dim

    def __call__(self, p, q):
        pj, qj = _is_jet_point(p), _is_jet_point(q)
        n = self.n
        if not pj and not qj:
            p = np.asarray(p, dtype=float)
            q = np.asarray(q, dtype=float)
            batch = np.broadcast_shapes(p.shape[1:], q.shape[1:])
            raw = self.fn(p, q)
            return _stack_matrix(raw, n, batch)
        if self.analytic:
            xj = q if qj else p
            nv, order, _ = J.jet_info(xj)
            raw = self.fn(p, q)
            return _stack_matrix_jets(raw, n, nv, order)
        if pj and qj:
            raise ValueError("finite-difference transport operators take jets in one slot only")
        h = self.fd_step * self.domain.scale
        if qj:
            p0 = np.asarray(p, dtype=float)
            f = lambda y: self(p0.reshape((n,) + (1,) * (y.ndim - 1)), y)
            return J.fd_jet(f, q, h, (n, n), vectorized=True)
        q0 = np.asarray(q, dtype=float)
        f = lambda y: self(y, q0.reshape((n,) + (1,) * (y.ndim - 1)))
        return J.fd_jet(f, p, h, (n, n), vectorized=True)

    # -- algebra ------------------------------------------------------------------
    def __add__(self, other: "TransportOperator") -> "TransportOperator":
        return TransportOperator(self.domain, lambda p, q: self(p, q) + other(p, q),
                                 _union(self.support, other.support), None, None,
                                 self.analytic and other.analytic, label=f"({self.label}+{other.label})")

    def scale(self, c: float) -> "TransportOperator":
        kern = self.domain_box() if c == 0.0 else self.kernel_region
        core = self.core if c == 1.0 else None
        return TransportOperator(self.domain, lambda p, q: self(p, q) * c, self.support, core,
                                 kern, self.analytic, self.fd_step, f"{c}*{self.label}")

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def domain_box(self):
        if self.domain.bounded:
            return (self.domain.lo, self.domain.hi)
        return ((-np.inf,) * self.n, (np.inf,) * self.n)

    def with_meta(self, **kw) -> "TransportOperator":
        return replace(self, **kw)


def _union(a, b):
    if a is None or b is None:
        return None
    return tuple((tuple(np.minimum(a[i][0], b[i][0])), tuple(np.maximum(a[i][1], b[i][1]))) for i in range(2))


def _stack_matrix(raw, n, batch):
    if isinstance(raw, np.ndarray) and raw.dtype != object:
        if raw.shape == (n, n) + batch:
            return raw.astype(float, copy=False)
        return np.broadcast_to(raw.reshape((n, n) + (1,) * (len(batch) - (raw.ndim - 2))), (n, n) + batch).astype(float)
    out = np.empty((n, n) + batch)
    for i in range(n):
        for j in range(n):
            out[i, j] = np.broadcast_to(np.asarray(raw[i][j], dtype=float), batch)
    return out


def _stack_matrix_jets(raw, n, nv, order):
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            e = raw[i][j] if not (isinstance(raw, np.ndarray) and raw.dtype == object) else raw[i, j]
            out[i, j] = J.to_jet_array(e, (), nv, order)[()]
    return out


def zero_operator(domain: ChartDomain) -> TransportOperator:
    n = domain.dim

    def fn(p, q):
        if _is_jet_point(p) or _is_jet_point(q):
            return np.zeros((n, n))
        batch = np.broadcast_shapes(np.shape(p)[1:], np.shape(q)[1:])
        return np.zeros((n, n) + batch)

    return TransportOperator(domain, fn, core=None, kernel_region=_whole(domain), label="0")


def _whole(domain):
    if domain.bounded:
        return (domain.lo, domain.hi)
    return ((-np.inf,) * domain.dim, (np.inf,) * domain.dim)


def constant_operator(domain: ChartDomain, matrix, label: str = "") -> TransportOperator:
    """A(p, q) = M for all p, q (not compactly supported; for algebraic tests)."""
    M = np.asarray(matrix, dtype=float)
    n = domain.dim

    def fn(p, q):
        if _is_jet_point(p) or _is_jet_point(q):
            return M
        batch = np.broadcast_shapes(np.shape(p)[1:], np.shape(q)[1:])
        return np.broadcast_to(M.reshape((n, n) + (1,) * len(batch)), (n, n) + batch)

    core = _whole(domain) if np.allclose(M, np.eye(n), atol=0) else None
    kern = _whole(domain) if not np.any(M) else None
    return TransportOperator(domain, fn, None, core, kern, label=label or f"const{M.tolist()}")


# -- cutoffs ------------------------------------------------------------------------

def _smoothstep(t):
    """0 for t <= 0, 1 for t >= 1, smooth in between (works on jets)."""
    tv = np.asarray(J.value(t), dtype=float)
    inside = (tv > 0) & (tv < 1)
    sel = J.where if isinstance(t, J.Jet) else np.where
    ts = sel(inside, t, 0.5)
    a = np.exp(-1.0 / ts)
    b = np.exp(-1.0 / (1.0 - ts))
    val = a / (a + b)
    val = sel(inside, val, 0.0)
    return sel(tv >= 1, val + 1.0, val) if isinstance(val, J.Jet) else np.where(tv >= 1, 1.0, val)


def plateau_cutoff(x, plateau, support):
    """Product over axes of smooth cutoffs equal to 1 on the plateau box and 0 off the support box."""
    (plo, phi), (slo, shi) = plateau, support
    acc = None
    for i in range(len(plo)):
        xi = x[i]
        left = _smoothstep((xi - slo[i]) / (plo[i] - slo[i]))
        right = _smoothstep((shi[i] - xi) / (shi[i] - phi[i]))
        f = left * right
        acc = f if acc is None else acc * f
    return acc


def identity_cutoff_transport(domain: ChartDomain, plateau, support, label: str = "") -> TransportOperator:
    """A(p, q) = b(p) b(q) id with b = 1 on the plateau box and b = 0 off the support box."""
    plateau, support = _box(plateau), _box(support)
    n = domain.dim

    def fn(p, q):
        bp = plateau_cutoff(p, plateau, support)
        bq = plateau_cutoff(q, plateau, support)
        c = bp * bq
        if _is_jet_point(p) or _is_jet_point(q):
            out = np.empty((n, n), dtype=object)
            for i in range(n):
                for j in range(n):
                    out[i, j] = c if i == j else 0.0
            return out
        batch = np.shape(c)
        return np.eye(n).reshape((n, n) + (1,) * len(batch)) * c

    return TransportOperator(domain, fn, (support, support), plateau, None,
                             label=label or f"idcut{plateau}")


def twisted_cutoff_transport(domain: ChartDomain, plateau, support, twist: Callable,
                             label: str = "") -> TransportOperator:
    """A(p, q) = b(p) b(q) M(p, q) for a smooth matrix field M with M(p, p) = id.

    ``twist(p, q)`` returns nested (n, n) components and must accept jets.
    """
    plateau, support = _box(plateau), _box(support)
    n = domain.dim

    def fn(p, q):
        c = plateau_cutoff(p, plateau, support) * plateau_cutoff(q, plateau, support)
        M = twist(p, q)
        if _is_jet_point(p) or _is_jet_point(q):
            out = np.empty((n, n), dtype=object)
            for i in range(n):
                for j in range(n):
                    out[i, j] = M[i][j] * c
            return out
        batch = np.shape(c)
        return _stack_matrix(M, n, batch) * c

    return TransportOperator(domain, fn, (support, support), plateau, None, label=label or "twisted")


def expression_transport(domain: ChartDomain, entries, support=None, core=None, kernel_region=None,
                         label: str = "") -> TransportOperator:
    """Raw expression matrix over variables p1..pn, q1..qn (written x1..x2n)."""
    n = domain.dim
    exprs = [[compile_expression(e, 2 * n) for e in row] for row in entries]

    def fn(p, q):
        if _is_jet_point(p) or _is_jet_point(q):
            x = np.empty(2 * n, dtype=object)
            for i in range(n):
                x[i] = p[i]
                x[n + i] = q[i]
        else:
            p = np.asarray(p, dtype=float)
            q = np.asarray(q, dtype=float)
            batch = np.broadcast_shapes(p.shape[1:], q.shape[1:])
            x = np.concatenate([np.broadcast_to(p, (n,) + batch), np.broadcast_to(q, (n,) + batch)])
        return [[e(x) for e in row] for row in exprs]

    return TransportOperator(domain, fn, _box2(support), _box(core), _box(kernel_region), label=label or "expr")


def _box2(s):
    if s is None:
        return None
    return (_box(s[0]), _box(s[1]))


def build_geodesic_transport(g: RiemannianMetric, chi: Callable, K=None, core=None, support=None,
                             label: str = "") -> TransportOperator:
    """A(p, q) = chi(p, q) * (parallel transport p -> q along the geodesic)."""
    n = g.domain.dim

    def fn(p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        batch = np.broadcast_shapes(p.shape[1:], q.shape[1:])
        P = np.broadcast_to(p, (n,) + batch).reshape(n, -1)
        Q = np.broadcast_to(q, (n,) + batch).reshape(n, -1)
        c = np.broadcast_to(np.asarray(chi(P, Q), dtype=float), (P.shape[1],))
        out = np.zeros((n, n, P.shape[1]))
        live = np.nonzero(c != 0.0)[0]
        # group by base point so shooting is batched over targets
        for key in {tuple(P[:, k]) for k in live}:
            idx = [k for k in live if tuple(P[:, k]) == key]
            T = geodesic_parallel_transport(g, np.array(key), Q[:, idx])
            out[:, :, idx] = T * c[idx]
        return out.reshape((n, n) + batch)

    op = TransportOperator(g.domain, fn, _box2(support), _box(core), None, analytic=False,
                           label=label or f"geo[{g.label}]")
    if K is not None and core is not None and not core_contains(op, K):
        raise ValueError("K is not inside the core of the constructed operator")
    return op


# -- core / kernel checks ---------------------------------------------------------------

def _grid(box, m: int = 9):
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    axes = [np.linspace(a, b, m) for a, b in zip(lo, hi)]
    return np.array([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])


def core_contains(A: TransportOperator, K, margin: float = 1e-9, tol: float = 1e-12) -> bool:
    if A.core is None:
        return False
    lo, hi = np.asarray(K[0], float), np.asarray(K[1], float)
    clo, chi_ = np.asarray(A.core[0], float), np.asarray(A.core[1], float)
    if not (np.all(lo > clo + margin) and np.all(hi < chi_ - margin)):
        return False
    pts = _grid((lo, hi))
    M = A(pts, pts)
    err = np.max(np.abs(M - np.eye(A.n)[:, :, None]))
    return bool(err <= tol)


def diagonal_vanishes(B: TransportOperator, K, tol: float = 1e-12) -> bool:
    """Sampled check that B(p, p) = 0 for p on a grid over K."""
    pts = _grid(K)
    return bool(np.max(np.abs(B(pts, pts))) <= tol)


# -- induced fiber maps ---------------------------------------------------------------------

def induced_factors(ops: Sequence[TransportOperator], p, q, s: int, r: int):
    """Per-slot matrices for the (s, r) fiber: ops[a](p, q) on upper slots, ops[s+b](q, p)^T on lower."""
    upper = [ops[a](p, q) for a in range(s)]
    lower = [transpose_matrix(ops[s + b](q, p)) for b in range(r)]
    return upper, lower


def induced_apply(ops, p, q, fiber, s: int, r: int):
    upper, lower = induced_factors(ops, p, q, s, r)
    return act_on_fiber(fiber, upper, lower)


def induced_map_asr(A: TransportOperator, p, q, r: int, s: int) -> np.ndarray:
    """Matrix of A^s_r(p, q) on the flattened (s, r) fiber (s upper slots first)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    Apq = A(p, q)
    Aqp = A(q, p)
    mats = [Apq] * s + [Aqp.T] * r
    out = np.ones((1, 1))
    for M in mats:
        out = np.kron(out, M)
    return out


# -- pullback and Lie derivative ----------------------------------------------------------

def pullback_transport(mu: Diffeomorphism, nu: Diffeomorphism, A: TransportOperator) -> TransportOperator:
    """((mu, nu)* A)(p, q) = Dnu(q)^{-1} A(mu p, nu q) Dmu(p)."""

    def fn(p, q):
        Dmu = mu.jacobian(p)
        Dnu_inv = mat_inv(nu.jacobian(q))
        M = A(mu(p), nu(q))
        return mat_mul(mat_mul(Dnu_inv, M), Dmu)

    support = None
    if A.support is not None:
        support = (_inverse_box(mu, A.support[0]), _inverse_box(nu, A.support[1]))
    core = kern = None
    if mu is nu:
        core = _inverse_box(mu, A.core) if A.core is not None else None
        kern = _inverse_box(mu, A.kernel_region) if A.kernel_region is not None else None
    return TransportOperator(A.domain, fn, support, core, kern, A.analytic and mu.analytic and nu.analytic,
                             A.fd_step, f"({mu.label},{nu.label})*{A.label}")


def _inverse_box(mu: Diffeomorphism, box):
    """Bounding box of mu^{-1}(box), sampled on the box boundary (exact for monotone axis maps)."""
    if box is None:
        return None
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
        return box
    pts = _grid((lo, hi), 17)
    pre = mu.inverse(pts)
    return (tuple(pre.min(axis=1)), tuple(pre.max(axis=1)))


def flow_jacobian(X: SmoothTensorField, tau: float, p):
    """(Fl_tau(p), DFl_tau(p)) for float (batched) or jet points."""
    n = X.domain.dim
    if _is_jet_point(p):
        base = J.value_point(p)
        _, order, _ = J.jet_info(p)
        y = J.variables(base, order + 1)
        fy = flow(X, tau, y)
        D = np.empty((n, n), dtype=object)
        for i in range(n):
            for k in range(n):
                D[i, k] = fy[i].derivative(k)
        F = np.empty(n, dtype=object)
        for i in range(n):
            F[i] = fy[i].truncate(order)
        return J.compose(F, base, p), J.compose(D, base, p)
    p = np.asarray(p, dtype=float)
    y = J.variables(p, 1)
    fy = flow(X, tau, y)
    batch = p.shape[1:]
    F = np.array([np.broadcast_to(fy[i].value, batch) for i in range(n)])
    D = np.empty((n, n) + batch)
    for i in range(n):
        for k in range(n):
            D[i, k] = np.broadcast_to(fy[i].derivative(k).value, batch)
    return F, D


def _flow_pullback_value(X, Y, A, tau, p, q):
    Fp, Dp = flow_jacobian(X, tau, p)
    Fq, Dq = flow_jacobian(Y, tau, q)
    return mat_mul(mat_mul(mat_inv(Dq), A(Fp, Fq)), Dp)


def lie_derivative_transport(X: SmoothTensorField, Y: SmoothTensorField, A: TransportOperator,
                             tau: float = TAU_LIE) -> TransportOperator:
    """d/dtau at 0 of (Fl^X_tau, Fl^Y_tau)* A: central differences, one Richardson level."""

    def fn(p, q):
        def central(t):
            return (_flow_pullback_value(X, Y, A, t, p, q) - _flow_pullback_value(X, Y, A, -t, p, q)) * (0.5 / t)

        d1 = central(tau)
        d2 = central(0.5 * tau)
        return (d2 * 4.0 - d1) * (1.0 / 3.0)

    kern = A.core if A.core is not None else None
    return TransportOperator(A.domain, fn, A.support, None, kern if X is Y else None,
                             A.analytic and X.analytic and Y.analytic, A.fd_step,
                             f"L[{X.label},{Y.label}]{A.label}")


# -- two-point tensors ------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoPointTerm:
    f: Callable  # (p, q) -> scalar
    eta: SmoothTensorField  # one-form, evaluated at p
    xi: SmoothTensorField  # vector field, evaluated at q


@dataclass(frozen=True)
class TwoPointTensor:
    domain: ChartDomain
    terms: tuple = ()

    def __call__(self, p, q):
        """Component matrix sum f(p,q) xi(q) eta(p)^T (numeric points)."""
        return two_point_to_transport(self)(p, q)


def two_point_to_transport(ups: TwoPointTensor) -> TransportOperator:
    n = ups.domain.dim

    def fn(p, q):
        jet = _is_jet_point(p) or _is_jet_point(q)
        if not jet:
            p = np.asarray(p, dtype=float)
            q = np.asarray(q, dtype=float)
            batch = np.broadcast_shapes(p.shape[1:], q.shape[1:])
            acc = np.zeros((n, n) + batch)
        else:
            acc = np.zeros((n, n)).astype(object)
        for term in ups.terms:
            fv = term.f(p, q)
            xi = term.xi(q)
            eta = term.eta(p)
            for i in range(n):
                for j in range(n):
                    acc[i, j] = acc[i, j] + fv * xi[i] * eta[j]
        return acc

    return TransportOperator(ups.domain, fn, None, None, None, label="bullet")


def _scalar_two_point_field(f, n):
    """Wrap f(p, q) as a field on R^{2n} for jet evaluation."""
    return lambda x: f(x[:n], x[n:])


def pullback_two_point(mu: Diffeomorphism, nu: Diffeomorphism, ups: TwoPointTensor) -> TwoPointTensor:
    terms = []
    for t in ups.terms:
        f = t.f
        terms.append(TwoPointTerm(lambda p, q, f=f: f(mu(p), nu(q)), pullback_tensor(mu, t.eta),
                                  pullback_tensor(nu, t.xi)))
    return TwoPointTensor(ups.domain, tuple(terms))


def _two_point_lie_scalar(f, X, Y, n):
    """(p, q) -> X(p) . d_p f + Y(q) . d_q f, via first-order jets in 2n variables."""

    def g(p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        batch = np.broadcast_shapes(p.shape[1:], q.shape[1:])
        z = np.concatenate([np.broadcast_to(p, (n,) + batch), np.broadcast_to(q, (n,) + batch)])
        zj = J.variables(z, 1)
        val = f(zj[:n], zj[n:])
        val = val if isinstance(val, J.Jet) else J.Jet.constant(np.broadcast_to(val, batch), 2 * n, 1)
        Xp, Yq = X(p), Y(q)
        out = np.zeros(batch)
        for i in range(n):
            out = out + Xp[i] * val.derivative(i).value + Yq[i] * val.derivative(n + i).value
        return out

    return g


def lie_two_point(X: SmoothTensorField, Y: SmoothTensorField, ups: TwoPointTensor) -> TwoPointTensor:
    """Leibniz expansion: (L f) eta(x)xi + f (L_X eta)(x)xi + f eta(x)(L_Y xi)."""
    from .geometry import lie_derivative_tensor

    n = ups.domain.dim
    terms = []
    for t in ups.terms:
        terms.append(TwoPointTerm(_two_point_lie_scalar(t.f, X, Y, n), t.eta, t.xi))
        terms.append(TwoPointTerm(t.f, lie_derivative_tensor(X, t.eta), t.xi))
        terms.append(TwoPointTerm(t.f, t.eta, lie_derivative_tensor(Y, t.xi)))
    return TwoPointTensor(ups.domain, tuple(terms))
