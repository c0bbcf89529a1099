"""Representatives u(omega, p, A) of the basic space and the operations on them.

A representative evaluates to a fiber tensor at p (component array of shape
(n,)*(r+s), upper slots first).  Besides ``evaluate`` every representative
offers directional derivatives in the form slot (``d1``) and the transport
slot (``d3``); the embeddings use exact linear or product-rule formulas,
composites fall back to finite differences in the functional slot.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import jets as J
from .distributions import TensorDistribution, dual_contract, density_from_form, _unwrap
from .geometry import (ChartDomain, Diffeomorphism, DomainError, NForm, SmoothTensorField, act_on_fiber,
                       constant_field, contract_fiber, fiber_outer, lie_derivative_nform, lie_derivative_tensor,
                       mat_inv, transpose_matrix, _is_jet_point)
from .transport import (TransportOperator, induced_apply, lie_derivative_transport, pullback_transport)

H_FUN = 1e-3
P_STEP = 1e-3


# -- helpers on forms --------------------------------------------------------------

def nform_axpy(omega: NForm, c: float, eta: NForm) -> NForm:
    """omega + c eta, keeping support and breakpoint information."""
    lo = np.minimum(omega.lo, eta.lo)
    hi = np.maximum(omega.hi, eta.hi)
    bps = None
    if omega.breakpoints or eta.breakpoints:
        n = len(lo)
        a = omega.breakpoints or ((),) * n
        b = eta.breakpoints or ((),) * n
        bps = tuple(tuple(sorted(set(a[i]) | set(b[i]))) for i in range(n))

    def dens(x):
        return omega(x) + c * eta(x)

    return NForm(omega.domain, dens, lo, hi, omega.analytic and eta.analytic, None, bps,
                 f"{omega.label}+{c:g}*{eta.label}")


def form_scale(omega: NForm, m: int = 33) -> float:
    """Sampled sup of |density| on the support box (a natural size for step selection)."""
    axes = [np.linspace(a, b, m) for a, b in zip(omega.lo, omega.hi)]
    pts = np.array([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])
    return float(np.max(np.abs(omega(pts)))) or 1.0


def transport_scale(A: TransportOperator, m: int = 9) -> float:
    if A.support is not None:
        box = A.support[0]
    elif A.domain.bounded:
        box = (A.domain.lo, A.domain.hi)
    else:
        box = ((-1.0,) * A.n, (1.0,) * A.n)
    axes = [np.linspace(a, b, m) for a, b in zip(*box)]
    pts = np.array([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])
    P = np.repeat(pts, pts.shape[1], axis=1)
    Q = np.tile(pts, (1, pts.shape[1]))
    return float(np.max(np.abs(A(P, Q)))) or 1.0


def push_forward_nform(mu: Diffeomorphism, omega: NForm) -> NForm:
    """mu_* omega: density y -> omega(mu^-1 y) / |det Dmu(mu^-1 y)|."""
    lo, hi = np.array(omega.lo), np.array(omega.hi)
    axes = [np.linspace(a, b, 17) for a, b in zip(lo, hi)]
    pts = np.array([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])
    img = mu(pts)
    nlo, nhi = img.min(axis=1), img.max(axis=1)
    bps = None
    if omega.breakpoints:
        mid = (lo + hi) / 2
        out = []
        for i, b in enumerate(omega.breakpoints):
            if not b:
                out.append(())
                continue
            pp = np.tile(mid[:, None], (1, len(b)))
            pp[i] = b
            out.append(tuple(mu(pp)[i]))
        bps = tuple(out)
    n = len(lo)

    def dens(y):
        x = mu.inverse(y)
        D = mu.jacobian(x)
        if n == 1:
            det = D[0, 0]
        elif n == 2:
            det = D[0, 0] * D[1, 1] - D[0, 1] * D[1, 0]
        else:
            det = np.linalg.det(np.moveaxis(D, (0, 1), (-2, -1)))
        if isinstance(det, J.Jet):
            det = det * np.sign(det.value)
        else:
            det = np.abs(det)
        return omega(x) / det

    return NForm(omega.domain, dens, tuple(nlo), tuple(nhi), omega.analytic and mu.analytic, None, bps,
                 f"{mu.label}_*{omega.label}")


def fiber_pullback(mu: Diffeomorphism, p, T, r: int, s: int):
    """Transport a fiber tensor at mu(p) back to p: Dmu(p)^-1 on upper slots, Dmu(p)^T on lower."""
    D = mu.jacobian(np.asarray(p, dtype=float)[:, None])[:, :, 0]
    return act_on_fiber(T, [np.linalg.inv(D)] * r, [D.T] * s)


def fiber_norm(T, r: int, s: int, L=None):
    """Frobenius norm after the Cholesky change of frame (|v|_g = |L^T v|)."""
    T = np.asarray(T, dtype=float)
    if L is None or r + s == 0:
        return float(np.sqrt(np.sum(T * T)))
    up = [L.T] * r
    low = [np.linalg.inv(L)] * s
    U = act_on_fiber(T, up, low)
    return float(np.sqrt(np.sum(U * U)))


# -- spreading ------------------------------------------------------------------------

def spreading_theta(A: TransportOperator, t_tilde, p, r: int = None, s: int = None,
                    ops: Optional[Sequence[TransportOperator]] = None) -> SmoothTensorField:
    """theta(A, t~, p): q -> A^s_r(p, q) t~(p) as an (s, r) field in q.

    ``t_tilde`` is a (s, r) field or directly its fiber value at p.  ``ops``
    overrides the per-slot operators (used for product-rule derivatives).
    """
    p = np.asarray(p, dtype=float)
    n = A.n
    if isinstance(t_tilde, SmoothTensorField):
        s_, r_ = t_tilde.r, t_tilde.s
        fiber = t_tilde(p[:, None])[..., 0]
    else:
        fiber = np.asarray(t_tilde, dtype=float)
        s_, r_ = s, r
    k = r_ + s_
    ops = list(ops) if ops is not None else [A] * k

    def fn(q):
        if _is_jet_point(q):
            if k == 0:
                return fiber
            return induced_apply(ops, p, q, fiber, s_, r_)
        q = np.asarray(q, dtype=float)
        batch = q.shape[1:]
        if k == 0:
            return np.broadcast_to(fiber, batch)
        pe = p.reshape((n,) + (1,) * len(batch))
        f = fiber.reshape(fiber.shape + (1,) * len(batch))
        return induced_apply(ops, pe, q, f, s_, r_)

    analytic = all(o.analytic for o in ops)
    return SmoothTensorField(A.domain, s_, r_, fn, analytic=analytic, label="theta")


# -- representatives ----------------------------------------------------------------------

class Representative:
    """Base class for elements of the basic space."""

    domain: ChartDomain
    r: int = 0
    s: int = 0
    label: str = ""
    provenance: tuple = ("composite",)

    @property
    def n(self) -> int:
        return self.domain.dim

    @property
    def fiber_shape(self) -> tuple:
        return (self.n,) * (self.r + self.s)

    def evaluate(self, omega: NForm, p, A: TransportOperator) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, omega, p, A):
        return self.evaluate(omega, p, A)

    # generic functional derivatives: 4th-order central differences plus one Richardson level
    def d1(self, omega, p, A, eta: NForm) -> np.ndarray:
        h = H_FUN * form_scale(omega) / form_scale(eta)

        def D(hh):
            f = lambda c: self.evaluate(nform_axpy(omega, c, eta), p, A)
            return (-f(2 * hh) + 8 * f(hh) - 8 * f(-hh) + f(-2 * hh)) / (12 * hh)

        return (16 * D(h / 2) - D(h)) / 15

    def d3(self, omega, p, A, *Bs) -> np.ndarray:
        if not Bs:
            return self.evaluate(omega, p, A)
        B, rest = Bs[0], Bs[1:]
        h = H_FUN * transport_scale(A) / transport_scale(B)

        def D(hh):
            f = lambda c: self.d3(omega, p, A + B.scale(c), *rest)
            return (-f(2 * hh) + 8 * f(hh) - 8 * f(-hh) + f(-2 * hh)) / (12 * hh)

        return (16 * D(h / 2) - D(h)) / 15

    def d2(self, omega, p, A, v, step: float = P_STEP) -> np.ndarray:
        """Directional derivative in the point slot (only meaningful for scalars)."""
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)

        def D(hh):
            f = lambda c: self.evaluate(omega, p + c * v, A)
            return (-f(2 * hh) + 8 * f(hh) - 8 * f(-hh) + f(-2 * hh)) / (12 * hh)

        return (16 * D(step / 2) - D(step)) / 15

    def point_field(self, omega, A, step: float = P_STEP, p_rel: bool = False) -> SmoothTensorField:
        """The field p -> u(omega, p, A) with omega and A frozen (finite-difference derivatives)."""

        def fn(x):
            x = np.asarray(x, dtype=float)
            batch = x.shape[1:]
            flat = x.reshape(self.n, -1)
            vals = np.array([self.evaluate(omega, flat[:, k], A) for k in range(flat.shape[1])])
            vals = np.moveaxis(vals, 0, -1)
            return vals.reshape(self.fiber_shape + batch)

        return SmoothTensorField(self.domain, self.r, self.s, fn, analytic=False,
                                 fd_step=step / self.domain.scale, fd_growth=10.0, label=f"{self.label}(.)")

    def singular_points(self) -> list:
        return []

    def zero(self):
        return np.zeros(self.fiber_shape)


def _check_domain(omega: NForm, domain: ChartDomain):
    if domain.bounded and not domain.contains_box(omega.lo, omega.hi):
        raise DomainError("support of omega escapes the chart domain")


@dataclass(eq=False)
class Sigma(Representative):
    t: SmoothTensorField = None

    def __post_init__(self):
        self.domain, self.r, self.s = self.t.domain, self.t.r, self.t.s
        self.label = f"sigma({self.t.label})"
        self.provenance = ("embedded-smooth", self.t.label)

    def evaluate(self, omega, p, A):
        p = np.asarray(p, dtype=float)
        return np.asarray(self.t(p[:, None]), dtype=float)[..., 0]

    def d1(self, omega, p, A, eta):
        return self.zero()

    def d3(self, omega, p, A, *Bs):
        return self.evaluate(omega, p, A) if not Bs else self.zero()


def sigma(t: SmoothTensorField) -> Sigma:
    return Sigma(t=t)


@dataclass(eq=False)
class Iota(Representative):
    """iota(v)(omega, p, A) . t~(p) = <v, theta(A, t~, p) (x) omega>."""

    v: TensorDistribution = None

    def __post_init__(self):
        self.domain, self.r, self.s = self.v.domain, self.v.r, self.v.s
        self.label = f"iota({self.v.label})"
        self.provenance = ("embedded-distribution", self.v.label)

    def _basis(self):
        # dual (s, r) fibers e with layout (J upper s, I lower r) -> component index (I, J)
        r, s, n = self.r, self.s, self.n
        for I in np.ndindex(*((n,) * r)):
            for Jx in np.ndindex(*((n,) * s)):
                e = np.zeros((n,) * (r + s))
                e[Jx + I] = 1.0
                yield I + Jx, e

    def pair_field(self, omega, p, A, t_tilde: SmoothTensorField, ops=None) -> float:
        """The defining action on a test field t~ (any extension of t~(p))."""
        theta = spreading_theta(A, t_tilde, p, ops=ops)
        return self.v.pair(theta, omega)

    def _evaluate_ops(self, omega, p, A, ops):
        _check_domain(omega, self.domain)
        out = np.zeros(self.fiber_shape)
        for idx, e in self._basis():
            theta = spreading_theta(A, e, p, self.r, self.s, ops=ops)
            out[idx] = self.v.pair(theta, omega)
        return out

    def evaluate(self, omega, p, A):
        return self._evaluate_ops(omega, p, A, None)

    def d1(self, omega, p, A, eta):
        return self.evaluate(eta, p, A)

    def d3(self, omega, p, A, *Bs):
        k = self.r + self.s
        j = len(Bs)
        if j == 0:
            return self.evaluate(omega, p, A)
        if j > k:
            return self.zero()
        # multilinear in the k slot factors: sum over injective slot assignments
        out = self.zero()
        for slots in itertools.permutations(range(k), j):
            ops = [A] * k
            for B, sl in zip(Bs, slots):
                ops[sl] = B
            out = out + self._evaluate_ops(omega, p, A, ops)
        return out

    def singular_points(self):
        return self.v.singular_points()


def iota(v: TensorDistribution) -> Iota:
    return Iota(v=v)


@dataclass(eq=False)
class TensorProduct(Representative):
    u1: Representative = None
    u2: Representative = None

    def __post_init__(self):
        if self.u1.domain.dim != self.u2.domain.dim:
            raise DomainError("factors live on different domains")
        self.domain = self.u1.domain
        self.r, self.s = self.u1.r + self.u2.r, self.u1.s + self.u2.s
        self.label = f"({self.u1.label}(x){self.u2.label})"

    def _outer(self, a, b):
        return fiber_outer(a, b, self.u1.r, self.u1.s, self.u2.r, self.u2.s)

    def evaluate(self, omega, p, A):
        return self._outer(self.u1.evaluate(omega, p, A), self.u2.evaluate(omega, p, A))

    def d1(self, omega, p, A, eta):
        a, b = self.u1.evaluate(omega, p, A), self.u2.evaluate(omega, p, A)
        return self._outer(self.u1.d1(omega, p, A, eta), b) + self._outer(a, self.u2.d1(omega, p, A, eta))

    def d3(self, omega, p, A, *Bs):
        # general Leibniz: split the direction set between the factors
        out = self.zero()
        j = len(Bs)
        for mask in itertools.product((0, 1), repeat=j):
            b1 = [B for B, m in zip(Bs, mask) if m == 0]
            b2 = [B for B, m in zip(Bs, mask) if m == 1]
            out = out + self._outer(self.u1.d3(omega, p, A, *b1), self.u2.d3(omega, p, A, *b2))
        return out

    def singular_points(self):
        return self.u1.singular_points() + self.u2.singular_points()


def tensor_product(u1: Representative, u2: Representative) -> TensorProduct:
    return TensorProduct(u1=u1, u2=u2)


@dataclass(eq=False)
class Contraction(Representative):
    u: Representative = None
    i: int = 0
    j: int = 0

    def __post_init__(self):
        if not (0 <= self.i < self.u.r and 0 <= self.j < self.u.s):
            raise IndexError("contraction slot out of range")
        self.domain = self.u.domain
        self.r, self.s = self.u.r - 1, self.u.s - 1
        self.label = f"C{self.i}{self.j}({self.u.label})"

    def _c(self, T):
        return np.asarray(contract_fiber(T, self.i, self.j, self.u.r, self.u.s), dtype=float)

    def evaluate(self, omega, p, A):
        return self._c(self.u.evaluate(omega, p, A))

    def d1(self, omega, p, A, eta):
        return self._c(self.u.d1(omega, p, A, eta))

    def d3(self, omega, p, A, *Bs):
        return self._c(self.u.d3(omega, p, A, *Bs))

    def singular_points(self):
        return self.u.singular_points()


def contract(u: Representative, i: int = 0, j: int = 0) -> Contraction:
    return Contraction(u=u, i=i, j=j)


def full_pairing(u: Representative, t_tilde: SmoothTensorField) -> Representative:
    """contract-all(u (x) sigma(t~)): the scalar u . t~ for u of valence (r, s), t~ of valence (s, r)."""
    if (t_tilde.r, t_tilde.s) != (u.s, u.r):
        raise ValueError("t~ must have the dual valence")
    w = tensor_product(u, sigma(t_tilde))
    # upper slots: (u, t~); lower slots: (u, t~).  u-upper pairs with t~-lower, then t~-upper with u-lower
    for _ in range(u.r):
        w = contract(w, 0, u.s)
    for _ in range(u.s):
        w = contract(w, 0, 0)
    return w


@dataclass(eq=False)
class LinearCombination(Representative):
    terms: tuple = ()

    def __post_init__(self):
        u0 = self.terms[0][1]
        for _, u in self.terms:
            if (u.r, u.s) != (u0.r, u0.s):
                raise ValueError("valence mismatch")
        self.domain, self.r, self.s = u0.domain, u0.r, u0.s
        self.label = "+".join(f"{c:g}*{u.label}" for c, u in self.terms)

    def evaluate(self, omega, p, A):
        return sum(c * u.evaluate(omega, p, A) for c, u in self.terms)

    def d1(self, omega, p, A, eta):
        return sum(c * u.d1(omega, p, A, eta) for c, u in self.terms)

    def d3(self, omega, p, A, *Bs):
        return sum(c * u.d3(omega, p, A, *Bs) for c, u in self.terms)

    def singular_points(self):
        return [q for _, u in self.terms for q in u.singular_points()]


def combine(*terms) -> LinearCombination:
    return LinearCombination(terms=tuple((float(c), u) for c, u in terms))


def difference(u1: Representative, u2: Representative) -> LinearCombination:
    return combine((1.0, u1), (-1.0, u2))


@dataclass(eq=False)
class HatPullback(Representative):
    """(mu^ * u)(omega, p, A) = mu*( u(mu_* omega, mu p, (mu, mu)_* A) )."""

    mu: Diffeomorphism = None
    u: Representative = None

    def __post_init__(self):
        self.domain, self.r, self.s = self.u.domain, self.u.r, self.u.s
        self.label = f"{self.mu.label}^*{self.u.label}"
        self._inv = self.mu.inverse_map()

    def _push_A(self, A):
        return pullback_transport(self._inv, self._inv, A)

    def _back(self, p, T):
        return fiber_pullback(self.mu, p, T, self.r, self.s)

    def _mp(self, p):
        return self.mu(np.asarray(p, dtype=float)[:, None])[:, 0]

    def evaluate(self, omega, p, A):
        T = self.u.evaluate(push_forward_nform(self.mu, omega), self._mp(p), self._push_A(A))
        return self._back(p, T)

    def d1(self, omega, p, A, eta):
        T = self.u.d1(push_forward_nform(self.mu, omega), self._mp(p), self._push_A(A),
                      push_forward_nform(self.mu, eta))
        return self._back(p, T)

    def d3(self, omega, p, A, *Bs):
        T = self.u.d3(push_forward_nform(self.mu, omega), self._mp(p), self._push_A(A),
                      *[self._push_A(B) for B in Bs])
        return self._back(p, T)

    def singular_points(self):
        out = []
        for q in self.u.singular_points():
            out.append(self.mu.inverse(np.asarray(q, dtype=float)[:, None])[:, 0])
        return out


def hat_pullback(mu: Diffeomorphism, u: Representative) -> HatPullback:
    return HatPullback(mu=mu, u=u)


@dataclass(eq=False)
class HatLie(Representative):
    """L^_X u = L_X(u(omega, ., A))(p) - d1 u(L_X omega) - d3 u(L_{X,X} A)."""

    X: SmoothTensorField = None
    u: Representative = None
    p_step: float = P_STEP

    def __post_init__(self):
        if (self.X.r, self.X.s) != (1, 0):
            raise ValueError("X must be a vector field")
        self.domain, self.r, self.s = self.u.domain, self.u.r, self.u.s
        self.label = f"L^[{self.X.label}]{self.u.label}"

    def part_point(self, omega, p, A):
        """Lie derivative in p of the frozen field (the L^_{0,X,0} part)."""
        f = self.u.point_field(omega, A, self.p_step)
        L = lie_derivative_tensor(self.X, f)
        return np.asarray(L(np.asarray(p, dtype=float)[:, None]), dtype=float)[..., 0]

    def part_form(self, omega, p, A):
        return -self.u.d1(omega, p, A, lie_derivative_nform(self.X, omega))

    def part_transport(self, omega, p, A):
        if self.r + self.s == 0 and isinstance(self.u, (Iota, Sigma)):
            return self.zero()
        return -self.u.d3(omega, p, A, lie_derivative_transport(self.X, self.X, A))

    def parts(self, omega, p, A) -> dict:
        return {"point": self.part_point(omega, p, A), "form": self.part_form(omega, p, A),
                "transport": self.part_transport(omega, p, A)}

    def evaluate(self, omega, p, A):
        return sum(self.parts(omega, p, A).values())

    def singular_points(self):
        return self.u.singular_points()


def hat_lie(X: SmoothTensorField, u: Representative, p_step: float = P_STEP) -> HatLie:
    return HatLie(X=X, u=u, p_step=p_step)


@dataclass(eq=False)
class Restriction(Representative):
    """u restricted to an open box: evaluation requires p and supp omega inside it."""

    u: Representative = None
    lo: tuple = ()
    hi: tuple = ()

    def __post_init__(self):
        self.domain = ChartDomain.box(self.lo, self.hi)
        self.r, self.s = self.u.r, self.u.s
        self.label = f"{self.u.label}|box"

    def _guard(self, omega, p):
        p = np.asarray(p, dtype=float)
        if not (np.all(p > np.array(self.lo)) and np.all(p < np.array(self.hi))):
            raise DomainError("point outside the restriction box")
        _check_domain(omega, self.domain)

    def evaluate(self, omega, p, A):
        self._guard(omega, p)
        return self.u.evaluate(omega, p, A)

    def d1(self, omega, p, A, eta):
        self._guard(omega, p)
        return self.u.d1(omega, p, A, eta)

    def d3(self, omega, p, A, *Bs):
        self._guard(omega, p)
        return self.u.d3(omega, p, A, *Bs)

    def singular_points(self):
        return self.u.singular_points()


def restrict(u: Representative, lo, hi) -> Restriction:
    return Restriction(u=u, lo=tuple(np.atleast_1d(lo).astype(float)), hi=tuple(np.atleast_1d(hi).astype(float)))


@dataclass(eq=False)
class Synthetic(Representative):
    """User-supplied evaluator; derivatives by the generic finite-difference paths."""

    fn: Callable = None
    dom: ChartDomain = None
    valence: tuple = (0, 0)
    name: str = "synthetic"
    sing: tuple = ()

    def __post_init__(self):
        self.domain = self.dom
        self.r, self.s = self.valence
        self.label = self.name

    def evaluate(self, omega, p, A):
        return np.asarray(self.fn(omega, np.asarray(p, dtype=float), A), dtype=float).reshape(self.fiber_shape)

    def singular_points(self):
        return [np.atleast_1d(np.asarray(q, dtype=float)) for q in self.sing]
