"""Tensor calculus on a single chart domain: fields, forms, flows, Lie derivatives,
metrics and geodesic parallel transport.

Points are float arrays of shape ``(n, *batch)`` or object arrays of ``n`` jets.
Component arrays of an (r, s) field have shape ``(n,)*(r+s)`` (upper indices
first) followed by the batch shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import jets as J
from .quadrature import DEFAULT, QuadratureSpec, box_rule


class DomainError(ValueError):
    pass


class FlowEscapeError(DomainError):
    pass


class ShootingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChartDomain:
    dim: int
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if (self.lo is None) != (self.hi is None):
            raise ValueError("give both bounds or neither")
        if self.lo is not None:
            object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
            object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
            if len(self.lo) != self.dim or len(self.hi) != self.dim:
                raise ValueError("bounds do not match dimension")
            if any(h <= l for l, h in zip(self.lo, self.hi)):
                raise ValueError("degenerate bounds")

    @classmethod
    def box(cls, lo, hi) -> "ChartDomain":
        lo = tuple(np.atleast_1d(lo).astype(float))
        hi = tuple(np.atleast_1d(hi).astype(float))
        return cls(len(lo), lo, hi)

    @property
    def bounded(self) -> bool:
        return self.lo is not None

    @property
    def scale(self) -> float:
        if not self.bounded:
            return 1.0
        return float(max(h - l for l, h in zip(self.lo, self.hi)))

    def contains(self, x, margin: float = 0.0) -> np.ndarray:
        """Elementwise strict containment of points ``x`` (shape (n, *batch))."""
        x = np.asarray(J.value(x) if J.is_jet_array(x) else x, dtype=float)
        if not self.bounded:
            return np.all(np.isfinite(x), axis=0)
        lo = np.array(self.lo).reshape((-1,) + (1,) * (x.ndim - 1))
        hi = np.array(self.hi).reshape((-1,) + (1,) * (x.ndim - 1))
        return np.all((x > lo + margin) & (x < hi - margin), axis=0)

    def contains_box(self, lo, hi, margin: float = 0.0) -> bool:
        if not self.bounded:
            return True
        return bool(np.all(np.asarray(lo) > np.array(self.lo) + margin)
                    and np.all(np.asarray(hi) < np.array(self.hi) - margin))

    def same_as(self, other: "ChartDomain") -> bool:
        return self.dim == other.dim


def _is_jet_point(x) -> bool:
    return isinstance(x, np.ndarray) and x.dtype == object


def _stack_numeric(raw, shape: tuple, batch: tuple) -> np.ndarray:
    """Coerce nested lists of scalars/arrays into a float array of shape+batch."""
    if not shape:
        return np.broadcast_to(np.asarray(raw, dtype=float), batch).astype(float)
    if isinstance(raw, np.ndarray) and raw.dtype != object and raw.shape == shape + batch:
        return raw.astype(float, copy=False)
    if isinstance(raw, np.ndarray) and raw.dtype != object and raw.shape[: len(shape)] == shape:
        return np.broadcast_to(raw, shape + batch).astype(float)
    out = np.empty(shape + batch)
    for i in range(shape[0]):
        out[i] = _stack_numeric(raw[i], shape[1:], batch)
    return out


def _stack_jets(raw, shape: tuple, nvars: int, order: int) -> np.ndarray:
    if not shape:
        if isinstance(raw, np.ndarray) and raw.dtype == object and raw.shape == ():
            raw = raw[()]
        return J.to_jet_array(raw, (), nvars, order)
    if isinstance(raw, np.ndarray) and raw.dtype == object and raw.shape == shape:
        return J.to_jet_array(raw, shape, nvars, order)
    if isinstance(raw, np.ndarray) and raw.dtype != object and raw.ndim == 0:
        return J.to_jet_array(float(raw), shape, nvars, order)
    if isinstance(raw, (int, float)) or isinstance(raw, J.Jet):
        return J.to_jet_array(raw, shape, nvars, order)
    out = np.empty(shape, dtype=object)
    for i in range(shape[0]):
        sub = _stack_jets(raw[i], shape[1:], nvars, order)
        if sub.ndim == 0:
            out[i] = sub[()]
        else:
            out[i] = sub
    return out


@dataclass(frozen=True, eq=False)
class SmoothTensorField:
    """An (r, s) tensor field given by a component callable.

    ``fn(x)`` receives the point coordinates (float array ``(n, *batch)`` or an
    object array of jets) and returns nested components.  ``analytic`` marks
    callables that accept jets; otherwise derivatives fall back to central
    finite differences with step ``fd_step`` (relative to the domain scale).
    """

    domain: ChartDomain
    r: int
    s: int
    fn: Callable
    analytic: bool = True
    deriv_order: int = 8
    fd_step: float = 1e-4
    label: str = ""
    fd_growth: float = 100.0

    @property
    def n(self) -> int:
        return self.domain.dim

    @property
    def comp_shape(self) -> tuple:
        return (self.n,) * (self.r + self.s)

    def __call__(self, x):
        if _is_jet_point(x):
            return self.at_jet(x)
        x = np.asarray(x, dtype=float)
        batch = x.shape[1:]
        return _stack_numeric(self.fn(x), self.comp_shape, batch)

    def at_jet(self, xj) -> np.ndarray:
        nvars, order, _ = J.jet_info(xj)
        if order > self.deriv_order:
            raise ValueError(f"field {self.label!r} supports derivatives up to order {self.deriv_order}")
        if self.analytic:
            return _stack_jets(self.fn(xj), self.comp_shape, nvars, order)
        h = self.fd_step * self.domain.scale * (1.0 if order <= 1 else self.fd_growth)
        return J.fd_jet(lambda y: self(y), xj, h, self.comp_shape, vectorized=True)

    def jacobian(self, x) -> np.ndarray:
        """Partial derivatives, shape comp_shape + (n,) + batch."""
        x = np.asarray(x, dtype=float)
        xj = J.variables(x, 1)
        vals = self.at_jet(xj)
        out = np.empty(self.comp_shape + (self.n,) + x.shape[1:])
        for idx in np.ndindex(*self.comp_shape):
            jet = vals[idx]
            for k in range(self.n):
                out[idx + (k,)] = np.broadcast_to(jet.derivative(k).value, x.shape[1:])
        return out

    # -- algebra -----------------------------------------------------------
    def _check(self, other: "SmoothTensorField"):
        if other.domain.dim != self.domain.dim:
            raise DomainError("fields live on different domains")

    def __add__(self, other: "SmoothTensorField") -> "SmoothTensorField":
        self._check(other)
        if (other.r, other.s) != (self.r, self.s):
            raise ValueError("valence mismatch")
        return derived_field(self.domain, self.r, self.s, lambda x: self(x) + other(x),
                             (self, other), f"({self.label}+{other.label})")

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, c: float) -> "SmoothTensorField":
        return derived_field(self.domain, self.r, self.s, lambda x: self(x) * c, (self,), f"{c}*{self.label}")

    def times(self, f: "SmoothTensorField") -> "SmoothTensorField":
        """Multiplication by a scalar field."""
        if f.r or f.s:
            raise ValueError("multiplier must be scalar")
        return derived_field(self.domain, self.r, self.s, lambda x: self(x) * f(x), (self, f),
                             f"{f.label}*{self.label}")


def derived_field(domain, r, s, fn, parents, label="") -> SmoothTensorField:
    analytic = all(p.analytic for p in parents)
    order = min(p.deriv_order for p in parents)
    return SmoothTensorField(domain, r, s, fn, analytic=analytic, deriv_order=order, label=label)


def constant_field(domain: ChartDomain, components, r: int = 0, s: int = 0, label: str = "") -> SmoothTensorField:
    comps = np.asarray(components, dtype=float)

    def fn(x):
        if _is_jet_point(x):
            return comps
        batch = np.shape(x)[1:]
        return np.broadcast_to(comps.reshape(comps.shape + (1,) * len(batch)), comps.shape + batch)

    return SmoothTensorField(domain, r, s, fn, label=label or f"const{comps.tolist()}")


def scalar_field(domain: ChartDomain, fn, label: str = "", analytic: bool = True) -> SmoothTensorField:
    return SmoothTensorField(domain, 0, 0, fn, analytic=analytic, label=label)


def vector_field(domain: ChartDomain, fn, label: str = "", analytic: bool = True) -> SmoothTensorField:
    return SmoothTensorField(domain, 1, 0, fn, analytic=analytic, label=label)


def coordinate_basis(domain: ChartDomain, r: int, s: int):
    """All coordinate basis (r, s) fields, as (multi-index, field) pairs."""
    n = domain.dim
    shape = (n,) * (r + s)
    out = []
    for idx in np.ndindex(*shape):
        comps = np.zeros(shape)
        comps[idx] = 1.0
        out.append((idx, constant_field(domain, comps, r, s, label=f"e{idx}")))
    return out


# -- fiber algebra ----------------------------------------------------------------

def apply_axis(M, T, axis: int):
    """Contract matrix ``M`` (n, n, *batch) into axis ``axis`` of ``T``: T'[..i..] = M[i,k] T[..k..]."""
    n = M.shape[0]
    Tm = np.moveaxis(np.asarray(T), axis, 0)
    if np.asarray(M).dtype == object and Tm.ndim > 1:
        # jets times arrays would broadcast into the jet batch: go elementwise
        out = np.empty(Tm.shape, dtype=object)
        for idx in np.ndindex(*Tm.shape[1:]):
            for i in range(n):
                acc = M[i, 0] * Tm[(0,) + idx]
                for k in range(1, n):
                    acc = acc + M[i, k] * Tm[(k,) + idx]
                out[(i,) + idx] = acc
        return np.moveaxis(out, 0, axis)
    rows = []
    for i in range(n):
        acc = M[i, 0] * Tm[0]
        for k in range(1, n):
            acc = acc + M[i, k] * Tm[k]
        rows.append(acc)
    if Tm.dtype == object or any(isinstance(r_, np.ndarray) and r_.dtype == object for r_ in rows):
        out = np.empty((n,) + np.shape(rows[0]), dtype=object)
        for i in range(n):
            out[i] = rows[i]
    else:
        out = np.array(rows)
    return np.moveaxis(out, 0, axis)


def transpose_matrix(M):
    return np.swapaxes(M, 0, 1)


def act_on_fiber(T, upper: Sequence, lower: Sequence):
    """Apply ``upper[a]`` to upper slot a and ``lower[b]`` (already transposed if needed) to lower slot b."""
    out = T
    for a, M in enumerate(upper):
        out = apply_axis(M, out, a)
    r = len(upper)
    for b, M in enumerate(lower):
        out = apply_axis(M, out, r + b)
    return out


def full_contract(T1, T2, ncomp: int):
    """Sum over all ``ncomp`` leading component axes of T1 * T2."""
    prod = T1 * T2
    for _ in range(ncomp):
        prod = prod.sum(axis=0) if not (isinstance(prod, np.ndarray) and prod.dtype == object) else _object_sum0(prod)
    return prod


def _object_sum0(arr):
    acc = arr[0]
    for k in range(1, arr.shape[0]):
        acc = acc + arr[k]
    return acc


def mat_inv(M):
    """Inverse of a batch of matrices; works for float (n, n, *batch) and jet object (n, n) arrays."""
    n = M.shape[0]
    if M.dtype != object:
        Mb = np.moveaxis(M, (0, 1), (-2, -1))
        return np.moveaxis(np.linalg.inv(Mb), (-2, -1), (0, 1))
    if n == 1:
        out = np.empty((1, 1), dtype=object)
        out[0, 0] = 1.0 / M[0, 0]
        return out
    if n == 2:
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        out = np.empty((2, 2), dtype=object)
        out[0, 0] = M[1, 1] / det
        out[0, 1] = -M[0, 1] / det
        out[1, 0] = -M[1, 0] / det
        out[1, 1] = M[0, 0] / det
        return out
    # Gauss-Jordan without pivoting on jets (base values assumed well conditioned)
    A = M.copy()
    I = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            I[i, j] = 1.0 if i == j else 0.0
    for c in range(n):
        piv = A[c, c]
        A[c] = A[c] / piv
        I[c] = I[c] / piv
        for rr in range(n):
            if rr != c:
                f = A[rr, c]
                A[rr] = A[rr] - f * A[c]
                I[rr] = I[rr] - f * I[c]
    return I


def mat_mul(A, B):
    """Batched matrix product over leading (n, n) axes."""
    n, k = A.shape[0], A.shape[1]
    m = B.shape[1]
    rows = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = A[i, 0] * B[0, j]
            for l in range(1, k):
                acc = acc + A[i, l] * B[l, j]
            row.append(acc)
        rows.append(row)
    if A.dtype == object or B.dtype == object:
        out = np.empty((n, m), dtype=object)
        for i in range(n):
            for j in range(m):
                out[i, j] = rows[i][j]
        return out
    return np.array(rows)


def mat_vec(A, v):
    n, k = A.shape[0], A.shape[1]
    out = [sum((A[i, l] * v[l] for l in range(1, k)), A[i, 0] * v[0]) for i in range(n)]
    if A.dtype == object or (isinstance(v, np.ndarray) and v.dtype == object):
        arr = np.empty(n, dtype=object)
        for i in range(n):
            arr[i] = out[i]
        return arr
    return np.array(out)


def tensor_product_fields(t1: SmoothTensorField, t2: SmoothTensorField) -> SmoothTensorField:
    """Outer product with index order (upper1, upper2, lower1, lower2)."""
    t1._check(t2)

    def fn(x):
        a, b = t1(x), t2(x)
        return fiber_outer(a, b, t1.r, t1.s, t2.r, t2.s)

    return derived_field(t1.domain, t1.r + t2.r, t1.s + t2.s, fn, (t1, t2), f"{t1.label}(x){t2.label}")


def fiber_outer(a, b, r1, s1, r2, s2):
    """Outer product of component arrays, reordered to (upper1, upper2, lower1, lower2)."""
    k1, k2 = r1 + s1, r2 + s2
    if isinstance(a, np.ndarray) and a.dtype == object or isinstance(b, np.ndarray) and b.dtype == object:
        a = np.asarray(a, dtype=object)
        b = np.asarray(b, dtype=object)
        shape = a.shape[:k1] + b.shape[:k2]
        out = np.empty(shape, dtype=object)
        for ia in np.ndindex(*a.shape[:k1]):
            for ib in np.ndindex(*b.shape[:k2]):
                out[ia + ib] = a[ia] * b[ib]
    else:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        batch = np.broadcast_shapes(a.shape[k1:], b.shape[k2:])
        ae = a.reshape(a.shape[:k1] + (1,) * k2 + a.shape[k1:])
        be = b.reshape((1,) * k1 + b.shape)
        out = ae * be
        out = np.broadcast_to(out, a.shape[:k1] + b.shape[:k2] + batch)
    # axes now: upper1 lower1 upper2 lower2
    order = list(range(r1)) + list(range(k1, k1 + r2)) + list(range(r1, k1)) + list(range(k1 + r2, k1 + k2))
    extra = list(range(k1 + k2, out.ndim))
    return np.transpose(out, order + extra)


def contract_fiber(T, i: int, j: int, r: int, s: int):
    """Trace of upper slot i against lower slot j."""
    if not (0 <= i < r and 0 <= j < s):
        raise IndexError("contraction slot out of range")
    T = np.asarray(T) if not isinstance(T, np.ndarray) else T
    n = T.shape[0]
    ax_u, ax_l = i, r + j
    acc = None
    for k in range(n):
        idx = [slice(None)] * T.ndim
        idx[ax_u] = k
        idx[ax_l] = k
        term = T[tuple(idx)]
        acc = term if acc is None else acc + term
    return acc


# -- Lie derivatives ---------------------------------------------------------------

def lie_jet(Xc, Tc, r: int, s: int):
    """Coordinate Lie derivative of T along X, both given as jets of order K+1.

    Returns jets of order K.
    """
    n = Xc.shape[0]
    shape = Tc.shape
    dT = [J.jmap(lambda e, k=k: e.derivative(k), Tc) for k in range(n)]
    dX = [[Xc[i].derivative(k) for k in range(n)] for i in range(n)]
    Xlow = [Xc[k].truncate(Xc[k].order - 1) for k in range(n)]
    Tlow = J.jmap(lambda e: e.truncate(e.order - 1), Tc)
    out = dT[0] * Xlow[0]
    for k in range(1, n):
        out = out + dT[k] * Xlow[k]
    for a in range(r):
        # - T^{..k..} dX^{i_a}/dx^k
        M = np.empty((n, n), dtype=object)
        for i in range(n):
            for k in range(n):
                M[i, k] = dX[i][k]
        out = out - apply_axis(M, Tlow, a)
    for b in range(s):
        # + T_{..k..} dX^k/dx^{j_b}
        M = np.empty((n, n), dtype=object)
        for j in range(n):
            for k in range(n):
                M[j, k] = dX[k][j]
        out = out + apply_axis(M, Tlow, r + b)
    if isinstance(out, J.Jet):
        wrapped = np.empty((), dtype=object)
        wrapped[()] = out
        out = wrapped
    if out.shape != shape:
        out = out.reshape(shape)
    return out


def _jet_eval_lifted(fields, xj, body):
    """Evaluate ``body`` on canonical jets of one extra order, then compose onto ``xj``."""
    base = J.value_point(xj)
    _, order, _ = J.jet_info(xj)
    y = J.variables(base, order + 1)
    res = body(*[f.at_jet(y) for f in fields])
    return J.compose(res, base, xj)


def _numeric_via_jets(fields, x, body):
    x = np.asarray(x, dtype=float)
    y = J.variables(x, 1)
    res = body(*[f.at_jet(y) for f in fields])
    batch = x.shape[1:]
    out = np.empty(res.shape + batch)
    for idx in np.ndindex(*res.shape):
        out[idx] = np.broadcast_to(res[idx].value, batch)
    return out


def first_order_derived(domain, r, s, fields, body, label, analytic=None, deriv_loss=1):
    """A field computed from first derivatives of ``fields`` (body works on lifted jets)."""

    def fn(x):
        if _is_jet_point(x):
            return _jet_eval_lifted(fields, x, body)
        return _numeric_via_jets(fields, x, body)

    base = derived_field(domain, r, s, fn, fields, label)
    return SmoothTensorField(domain, r, s, fn, analytic=True, deriv_order=base.deriv_order - deriv_loss, label=label)


def lie_derivative_tensor(X: SmoothTensorField, t: SmoothTensorField) -> SmoothTensorField:
    if (X.r, X.s) != (1, 0):
        raise ValueError("X must be a vector field")
    if X.domain.dim != t.domain.dim:
        raise DomainError("domain mismatch")
    if min(X.deriv_order, t.deriv_order) < 2:
        raise ValueError("insufficient differentiability for a Lie derivative")
    return first_order_derived(t.domain, t.r, t.s, (X, t), lambda Xc, Tc: lie_jet(Xc, Tc, t.r, t.s),
                               f"L[{X.label}]{t.label}")


def pullback_tensor(mu: "Diffeomorphism", t: SmoothTensorField) -> SmoothTensorField:
    """(mu* t)(p) = (T mu^{-1})^r_s t(mu(p)): Dmu(p)^{-1} on upper slots, Dmu(p)^T on lower slots."""

    def fn(x):
        D = mu.jacobian(x)
        Dinv = mat_inv(D)
        T = t(mu(x))
        return act_on_fiber(T, [Dinv] * t.r, [transpose_matrix(D)] * t.s)

    return SmoothTensorField(t.domain, t.r, t.s, fn, analytic=t.analytic and mu.analytic,
                             deriv_order=t.deriv_order - 1, label=f"pull{t.label}")


# -- flows ---------------------------------------------------------------------------

H_ODE = 1e-3


def flow(X: SmoothTensorField, tau: float, p, h_ode: float = H_ODE, domain: Optional[ChartDomain] = None):
    """RK4 integral curve of X from p for time tau (p may be batched or jets)."""
    domain = domain or X.domain
    steps = int(math.ceil(abs(tau) / h_ode)) if tau != 0 else 0
    if steps == 0:
        return p
    h = tau / steps
    jet_mode = _is_jet_point(p)
    y = p.copy() if jet_mode else np.array(p, dtype=float)

    def F(z):
        return X(z)

    for _ in range(steps):
        k1 = F(y)
        k2 = F(y + (0.5 * h) * k1)
        k3 = F(y + (0.5 * h) * k2)
        k4 = F(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(domain.contains(y)):
            raise FlowEscapeError("integral curve left the chart domain")
    return y


# -- n-forms -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NForm:
    """Compactly supported n-form ``density(x) dx^1 ^ ... ^ dx^n`` with a support box."""

    domain: ChartDomain
    density: Callable
    lo: tuple
    hi: tuple
    analytic: bool = True
    integral_hint: Optional[float] = None
    breakpoints: Optional[tuple] = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(np.atleast_1d(self.lo).astype(float)))
        object.__setattr__(self, "hi", tuple(np.atleast_1d(self.hi).astype(float)))

    def __call__(self, x):
        if _is_jet_point(x):
            if self.analytic:
                nvars, order, _ = J.jet_info(x)
                return J.to_jet_array(self.density(x), (), nvars, order)[()]
            h = 1e-4 * max(h - l for l, h in zip(self.lo, self.hi))
            return J.fd_jet(lambda y: self(y), x, h, (), vectorized=True)[()]
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= np.array(self.lo).reshape((-1,) + (1,) * (x.ndim - 1)))
                        & (x <= np.array(self.hi).reshape((-1,) + (1,) * (x.ndim - 1))), axis=0)
        val = np.broadcast_to(np.asarray(self.density(x), dtype=float), x.shape[1:])
        return np.where(inside, val, 0.0)

    @property
    def support_box(self):
        return np.array(self.lo), np.array(self.hi)

    def integral(self, spec: QuadratureSpec = DEFAULT) -> float:
        pts, w = box_rule(self.lo, self.hi, spec, self.breakpoints)
        return float(self(pts) @ w)

    def scale(self, c: float) -> "NForm":
        return NForm(self.domain, lambda x: self.density(x) * c, self.lo, self.hi, self.analytic,
                     None, self.breakpoints, f"{c}*{self.label}")

    def __add__(self, other: "NForm") -> "NForm":
        lo = np.minimum(self.lo, other.lo)
        hi = np.maximum(self.hi, other.hi)

        def dens(x):
            return self(x) + other(x)

        return NForm(self.domain, dens, lo, hi, self.analytic and other.analytic, None, None,
                     f"({self.label}+{other.label})")

    def times(self, f: SmoothTensorField) -> "NForm":
        return NForm(self.domain, lambda x: self.density(x) * f(x), self.lo, self.hi,
                     self.analytic and f.analytic, None, self.breakpoints, f"{f.label}*{self.label}")


def lie_derivative_nform(X: SmoothTensorField, omega: NForm) -> NForm:
    """Density of L_X omega is the coordinate divergence of X * density."""
    n = X.domain.dim

    def body(Xc, w):
        acc = (Xc[0] * w).derivative(0)
        for i in range(1, n):
            acc = acc + (Xc[i] * w).derivative(i)
        return acc

    def dens(x):
        if _is_jet_point(x):
            base = J.value_point(x)
            _, order, _ = J.jet_info(x)
            y = J.variables(base, order + 1)
            res = np.empty((), dtype=object)
            res[()] = body(X.at_jet(y), omega(y))
            return J.compose(res, base, x)[()]
        x = np.asarray(x, dtype=float)
        y = J.variables(x, 1)
        return np.broadcast_to(body(X.at_jet(y), omega(y)).value, x.shape[1:])

    return NForm(omega.domain, dens, omega.lo, omega.hi, True, 0.0, omega.breakpoints, f"L[{X.label}]{omega.label}")


# -- metrics, diffeomorphisms, transport ---------------------------------------------

@dataclass(frozen=True, eq=False)
class RiemannianMetric:
    domain: ChartDomain
    g: Callable
    radius: float = 1.0
    analytic: bool = True
    label: str = ""

    def field(self) -> SmoothTensorField:
        return SmoothTensorField(self.domain, 0, 2, self.g, analytic=self.analytic, label=self.label or "g")

    def __call__(self, x) -> np.ndarray:
        return self.field()(x)

    def validate(self, points) -> None:
        G = self(points)
        Gb = np.moveaxis(G, (0, 1), (-2, -1))
        if not np.allclose(Gb, np.swapaxes(Gb, -1, -2), atol=1e-12):
            raise ValueError("metric is not symmetric")
        np.linalg.cholesky(Gb)

    def christoffel(self, x) -> np.ndarray:
        """Gamma^k_ij, shape (n, n, n, *batch)."""
        x = np.asarray(x, dtype=float)
        G = self(x)
        dG = self.field().jacobian(x)  # (n, n, n_deriv, *batch)
        Gi = np.moveaxis(np.linalg.inv(np.moveaxis(G, (0, 1), (-2, -1))), (-2, -1), (0, 1))
        # lowered: Gamma_{l,ij} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
        low = 0.5 * (np.einsum("jli...->lij...", dG) + np.einsum("ilj...->lij...", dG)
                     - np.einsum("ijl...->lij...", dG))
        return np.einsum("kl...,lij...->kij...", Gi, low)

    def inner(self, x, v, w):
        return np.einsum("i...,ij...,j...->...", v, self(x), w)

    def norm_factor(self, x) -> np.ndarray:
        """Cholesky factor L with g = L L^T (for fiber norms)."""
        G = self(x)
        return np.moveaxis(np.linalg.cholesky(np.moveaxis(G, (0, 1), (-2, -1))), (-2, -1), (0, 1))


def euclidean_metric(domain: ChartDomain, scale: float = 1.0) -> RiemannianMetric:
    n = domain.dim
    return RiemannianMetric(domain, lambda x: scale * np.eye(n) if _is_jet_point(x)
                            else np.broadcast_to((scale * np.eye(n)).reshape((n, n) + (1,) * (np.ndim(x) - 1)),
                                                 (n, n) + np.shape(x)[1:]),
                            radius=np.inf, label=f"{scale}*euclid")


@dataclass(frozen=True, eq=False)
class Diffeomorphism:
    """Chart diffeomorphism with Newton-based inverse if none is supplied."""

    domain: ChartDomain
    forward: Callable
    inverse_fn: Optional[Callable] = None
    analytic: bool = True
    label: str = ""
    tol: float = 1e-13

    def _as_field(self, fn):
        return SmoothTensorField(self.domain, 1, 0, fn, analytic=self.analytic, label=self.label)

    def __call__(self, x):
        return self._as_field(self.forward)(x)

    def jacobian(self, x):
        """Dmu as (n, n, *batch) floats, or (n, n) jets at a jet point."""
        f = self._as_field(self.forward)
        if _is_jet_point(x):
            base = J.value_point(x)
            _, order, _ = J.jet_info(x)
            y = J.variables(base, order + 1)
            vals = f.at_jet(y)
            n = self.domain.dim
            D = np.empty((n, n), dtype=object)
            for i in range(n):
                for k in range(n):
                    D[i, k] = vals[i].derivative(k)
            return J.compose(D, base, x)
        return f.jacobian(x)

    def inverse(self, y):
        if self.inverse_fn is not None:
            return self._as_field(self.inverse_fn)(y)
        if _is_jet_point(y):
            # Newton on jets: converges in the nilpotent part after order+1 sweeps
            x = J.value_point(y)
            x = self.inverse(x)
            xj = np.empty(len(y), dtype=object)
            nv, order, _ = J.jet_info(y)
            for i in range(len(y)):
                xj[i] = J.Jet.constant(x[i], nv, order)
            for _ in range(order + 2):
                F = self(xj) - y
                D = self.jacobian(xj)
                xj = xj - mat_vec(mat_inv(D), F)
            return xj
        y = np.asarray(y, dtype=float)
        x = y.copy()
        for _ in range(100):
            F = self(x) - y
            D = self.jacobian(x)
            Db = np.moveaxis(D, (0, 1), (-2, -1))
            step = np.linalg.solve(Db, np.moveaxis(F, 0, -1)[..., None])[..., 0]
            x = x - np.moveaxis(step, -1, 0)
            if np.max(np.abs(step)) < self.tol:
                break
        else:
            raise RuntimeError("Newton inversion of diffeomorphism did not converge")
        return x

    def inverse_map(self) -> "Diffeomorphism":
        return Diffeomorphism(self.domain, self.inverse, self.forward, self.analytic, f"inv({self.label})")

    def compose(self, other: "Diffeomorphism") -> "Diffeomorphism":
        """self after other."""
        return Diffeomorphism(self.domain, lambda x: self(other(x)), lambda y: other.inverse(self.inverse(y)),
                              self.analytic and other.analytic, f"{self.label}o{other.label}")

    def check(self, points, tol: float = 1e-9) -> None:
        back = self.inverse(self(points))
        if np.max(np.abs(back - points)) > tol:
            raise ValueError("inverse(forward(p)) != p")
        D = np.moveaxis(self.jacobian(points), (0, 1), (-2, -1))
        if np.min(np.abs(np.linalg.det(D))) < 1e-12:
            raise ValueError("jacobian is singular")


def identity_diffeo(domain: ChartDomain) -> Diffeomorphism:
    return Diffeomorphism(domain, lambda x: x, lambda x: x, label="id")


def geodesic_parallel_transport(g: RiemannianMetric, p, q, steps: int = 200, tol: float = 1e-12,
                                max_iter: int = 30) -> np.ndarray:
    """Parallel transport matrices T_pM -> T_qM along the geodesic from p to q.

    ``q`` may be batched (shape (n, N)); the result is (n, n, N) (or (n, n)).
    The geodesic is found by Newton shooting on the initial velocity.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    if single:
        q = q[:, None]
    n, N = q.shape
    P0 = np.broadcast_to(p.reshape(n, 1), (n, N))
    dist = np.sqrt(np.sum((q - P0) ** 2, axis=0))
    if np.any(dist > g.radius):
        raise DomainError("target beyond the configured injectivity radius")
    if np.all(dist == 0.0):
        # constant geodesic: transport is the identity
        Pm = np.broadcast_to(np.eye(n)[:, :, None], (n, n, N)).copy()
        return Pm[:, :, 0] if single else Pm

    def rhs(x, v):
        Gam = g.christoffel(x)
        return v, -np.einsum("kij...,i...,j...->k...", Gam, v, v)

    def shoot(v0, with_transport=False):
        x, v = P0.copy(), v0.copy()
        h = 1.0 / steps
        Pm = np.broadcast_to(np.eye(n)[:, :, None], (n, n, N)).copy()

        def full(x, v, Pm):
            dx, dv = rhs(x, v)
            if not with_transport:
                return dx, dv, None
            Gam = g.christoffel(x)
            dP = -np.einsum("kij...,i...,j m...->km...".replace(" ", ""), Gam, v, Pm)
            return dx, dv, dP

        for _ in range(steps):
            a = full(x, v, Pm)
            b = full(x + 0.5 * h * a[0], v + 0.5 * h * a[1], Pm + 0.5 * h * a[2] if with_transport else Pm)
            c = full(x + 0.5 * h * b[0], v + 0.5 * h * b[1], Pm + 0.5 * h * b[2] if with_transport else Pm)
            d = full(x + h * c[0], v + h * c[1], Pm + h * c[2] if with_transport else Pm)
            x = x + h / 6 * (a[0] + 2 * b[0] + 2 * c[0] + d[0])
            v = v + h / 6 * (a[1] + 2 * b[1] + 2 * c[1] + d[1])
            if with_transport:
                Pm = Pm + h / 6 * (a[2] + 2 * b[2] + 2 * c[2] + d[2])
        return x, Pm

    v = q - P0
    fd = 1e-7
    for _ in range(max_iter):
        x1, _ = shoot(v)
        F = x1 - q
        if np.max(np.abs(F)) < tol:
            break
        Jm = np.empty((n, n, N))
        for k in range(n):
            dv = np.zeros_like(v)
            dv[k] = fd
            xp, _ = shoot(v + dv)
            xm, _ = shoot(v - dv)
            Jm[:, k] = (xp - xm) / (2 * fd)
        step = np.linalg.solve(np.moveaxis(Jm, -1, 0), np.moveaxis(F, -1, 0)[..., None])[..., 0]
        v = v - step.T
    else:
        raise ShootingError("geodesic shooting did not converge")
    _, Pm = shoot(v, with_transport=True)
    return Pm[:, :, 0] if single else Pm
