"""Truncated multivariate Taylor arithmetic (forward-mode AD of arbitrary order).

A :class:`Jet` holds the Taylor coefficients of a scalar function about a
point, up to total degree ``order`` in ``nvars`` variables.  Coefficient
arrays carry trailing batch dimensions, so a single jet can represent the
expansions at many base points at once.

Field callables in this package are written "number-generic": they accept
either plain ndarrays of coordinates or object arrays of jets and only use
arithmetic and numpy ufuncs.  Evaluating such a callable at a jet point gives
exact derivatives; for callables that cannot take jets, :func:`fd_jet`
reconstructs the expansion from central finite differences.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _monomials(nvars: int, order: int):
    monos = []
    for deg in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), deg):
            beta = [0] * nvars
            for i in combo:
                beta[i] += 1
            monos.append(tuple(beta))
    # combinations_with_replacement yields each exponent once per degree
    index = {b: k for k, b in enumerate(monos)}
    return tuple(monos), index


@lru_cache(maxsize=None)
def _product_table(nvars: int, order: int):
    monos, index = _monomials(nvars, order)
    I, J, K = [], [], []
    for i, a in enumerate(monos):
        for j, b in enumerate(monos):
            s = tuple(x + y for x, y in zip(a, b))
            if sum(s) <= order:
                I.append(i)
                J.append(j)
                K.append(index[s])
    I, J, K = np.array(I), np.array(J), np.array(K)
    scatter = np.zeros((len(monos), len(K)))
    scatter[K, np.arange(len(K))] = 1.0
    return I, J, scatter


@lru_cache(maxsize=None)
def _derivative_table(nvars: int, order: int, axis: int):
    """Source indices/factors for d/dx_axis, mapping order -> order-1."""
    monos_lo, _ = _monomials(nvars, order - 1)
    _, index_hi = _monomials(nvars, order)
    src, fac = [], []
    for b in monos_lo:
        up = list(b)
        up[axis] += 1
        src.append(index_hi[tuple(up)])
        fac.append(float(up[axis]))
    return np.array(src), np.array(fac)


@lru_cache(maxsize=None)
def _truncate_table(nvars: int, order: int, new_order: int):
    monos_lo, _ = _monomials(nvars, new_order)
    _, index_hi = _monomials(nvars, order)
    return np.array([index_hi[b] for b in monos_lo])


def _expand(c: np.ndarray, batch_ndim: int) -> np.ndarray:
    extra = batch_ndim - (c.ndim - 1)
    if extra > 0:
        c = c.reshape(c.shape[:1] + (1,) * extra + c.shape[1:])
    return c


class Jet:
    """Truncated Taylor polynomial in ``nvars`` variables of total degree ``order``."""

    __slots__ = ("c", "nvars", "order")
    __array_priority__ = 1000

    def __init__(self, c, nvars: int, order: int):
        self.c = np.asarray(c, dtype=float)
        self.nvars = nvars
        self.order = order

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, nvars: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        monos, _ = _monomials(nvars, order)
        c = np.zeros((len(monos),) + value.shape)
        c[0] = value
        return cls(c, nvars, order)

    @classmethod
    def variable(cls, value, axis: int, nvars: int, order: int) -> "Jet":
        jet = cls.constant(value, nvars, order)
        if order >= 1:
            e = [0] * nvars
            e[axis] = 1
            jet.c[_monomials(nvars, order)[1][tuple(e)]] = 1.0
        return jet

    # -- introspection ------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    @property
    def batch_shape(self) -> tuple:
        return self.c.shape[1:]

    def coefficient(self, beta) -> np.ndarray:
        _, index = _monomials(self.nvars, self.order)
        return self.c[index[tuple(beta)]]

    def partial(self, beta) -> np.ndarray:
        """The mixed partial derivative of multi-index ``beta`` at the base point."""
        return self.coefficient(beta) * float(np.prod([math.factorial(b) for b in beta]))

    def gradient(self) -> np.ndarray:
        out = []
        for i in range(self.nvars):
            e = [0] * self.nvars
            e[i] = 1
            out.append(self.coefficient(e))
        return np.array(out)

    def __repr__(self) -> str:
        return f"Jet(nvars={self.nvars}, order={self.order}, value={self.value!r})"

    # -- structural operations ---------------------------------------------
    def derivative(self, axis: int) -> "Jet":
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = _derivative_table(self.nvars, self.order, axis)
        fac = fac.reshape((-1,) + (1,) * (self.c.ndim - 1))
        return Jet(self.c[src] * fac, self.nvars, self.order - 1)

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        idx = _truncate_table(self.nvars, self.order, order)
        return Jet(self.c[idx], self.nvars, order)

    def _like(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.nvars != self.nvars:
                raise ValueError("jets over different variables cannot be combined")
            if other.order != self.order:
                k = min(self.order, other.order)
                return other.truncate(k)
            return other
        return Jet.constant(other, self.nvars, self.order)

    def _pair(self, other):
        other = self._like(other)
        a = self if self.order == other.order else self.truncate(other.order)
        bd = max(a.c.ndim, other.c.ndim) - 1
        return _expand(a.c, bd), _expand(other.c, bd), a.order

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, np.ndarray) and other.dtype == object:
            return NotImplemented
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            bd = max(self.c.ndim - 1, other.ndim)
            c = _expand(self.c, bd)
            c = np.broadcast_to(c, c.shape[:1] + np.broadcast_shapes(c.shape[1:], other.shape)).copy()
            c[0] = c[0] + other
            return Jet(c, self.nvars, self.order)
        a, b, order = self._pair(other)
        return Jet(a + b, self.nvars, order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.nvars, self.order)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, np.ndarray) and other.dtype == object:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, np.ndarray) and other.dtype == object:
            return NotImplemented
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            bd = max(self.c.ndim - 1, other.ndim)
            return Jet(_expand(self.c, bd) * other, self.nvars, self.order)
        a, b, order = self._pair(other)
        I, J, scatter = _product_table(self.nvars, order)
        prod = a[I] * b[J]
        return Jet(np.tensordot(scatter, prod, axes=1), self.nvars, order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, np.ndarray) and other.dtype == object:
            return NotImplemented
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return (exponent * self.log()).exp()
        e = float(exponent)
        if e.is_integer() and e >= 0:
            return self._ipow(int(e))
        if e.is_integer():
            return self.reciprocal()._ipow(int(-e))
        a = self.value
        taylor = [np.power(a, e)]
        coef = 1.0
        for k in range(1, self.order + 1):
            coef *= (e - k + 1) / k
            taylor.append(coef * np.power(a, e - k))
        return self._compose(taylor)

    def __rpow__(self, base):
        return (self * np.log(base)).exp()

    def _ipow(self, k: int):
        result = Jet.constant(np.ones(self.batch_shape), self.nvars, self.order)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # comparisons act on the base-point value (used for branch selection)
    def __lt__(self, other):
        return self.value < value(other)

    def __le__(self, other):
        return self.value <= value(other)

    def __gt__(self, other):
        return self.value > value(other)

    def __ge__(self, other):
        return self.value >= value(other)

    def __float__(self):
        return float(self.value)

    # -- elementary functions ------------------------------------------------
    def _compose(self, taylor):
        """f(self) given taylor[k] = f^(k)(a)/k! at the base value a."""
        h = Jet(self.c.copy(), self.nvars, self.order)
        h.c[0] = 0.0
        bd = max(np.ndim(t) for t in taylor)
        bd = max(bd, self.c.ndim - 1)
        out = Jet.constant(np.broadcast_to(taylor[0], np.broadcast_shapes(*(np.shape(t) for t in taylor), self.batch_shape)), self.nvars, self.order)
        power = h
        for k in range(1, self.order + 1):
            out = out + power * taylor[k]
            if k < self.order:
                power = power * h
        return out

    def exp(self):
        ea = np.exp(self.value)
        return self._compose([ea / math.factorial(k) for k in range(self.order + 1)])

    def log(self):
        a = self.value
        taylor = [np.log(a)] + [(-1.0) ** (k + 1) / (k * a**k) for k in range(1, self.order + 1)]
        return self._compose(taylor)

    def reciprocal(self):
        a = self.value
        return self._compose([(-1.0) ** k / a ** (k + 1) for k in range(self.order + 1)])

    def sqrt(self):
        return self**0.5

    def sin(self):
        a = self.value
        cyc = [np.sin(a), np.cos(a), -np.sin(a), -np.cos(a)]
        return self._compose([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def cos(self):
        a = self.value
        cyc = [np.cos(a), -np.sin(a), -np.cos(a), np.sin(a)]
        return self._compose([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def tan(self):
        return self.sin() / self.cos()

    def sinh(self):
        a = self.value
        cyc = [np.sinh(a), np.cosh(a)]
        return self._compose([cyc[k % 2] / math.factorial(k) for k in range(self.order + 1)])

    def cosh(self):
        a = self.value
        cyc = [np.cosh(a), np.sinh(a)]
        return self._compose([cyc[k % 2] / math.factorial(k) for k in range(self.order + 1)])

    def tanh(self):
        t = np.tanh(self.value)
        poly = np.polynomial.Polynomial([0.0, 1.0])
        one_minus_sq = np.polynomial.Polynomial([1.0, 0.0, -1.0])
        taylor = []
        for k in range(self.order + 1):
            taylor.append(poly(t) / math.factorial(k))
            poly = poly.deriv() * one_minus_sq
        return self._compose(taylor)

    def arctan(self):
        a = self.value
        taylor = [np.arctan(a)]
        if self.order:
            # Taylor coefficients of 1/(1+x^2) integrate to those of arctan
            base = Jet.variable(a, 0, 1, self.order - 1)
            r = (1.0 + base * base).reciprocal()
            for k in range(1, self.order + 1):
                taylor.append(r.coefficient((k - 1,)) / k)
        return self._compose(taylor)

    def __abs__(self):
        return self * np.sign(self.value)

    def absolute(self):
        return abs(self)

    # -- numpy interoperability ------------------------------------------------
    _UNARY = {
        "exp": "exp", "log": "log", "sqrt": "sqrt", "sin": "sin", "cos": "cos",
        "tan": "tan", "tanh": "tanh", "sinh": "sinh", "cosh": "cosh",
        "arctan": "arctan", "absolute": "absolute", "negative": "__neg__",
        "positive": "__pos__", "reciprocal": "reciprocal",
    }

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            return NotImplemented
        if any(isinstance(x, np.ndarray) and x.dtype == object for x in inputs):
            wrapped = [_as_object_scalar(x) if isinstance(x, Jet) else x for x in inputs]
            return ufunc(*wrapped)
        name = ufunc.__name__
        if name in self._UNARY and len(inputs) == 1:
            return getattr(inputs[0], self._UNARY[name])()
        if name == "square":
            return inputs[0] * inputs[0]
        a, b = inputs if len(inputs) == 2 else (inputs[0], None)
        if name == "add":
            return a + b if isinstance(a, Jet) else b + a
        if name == "subtract":
            return a - b if isinstance(a, Jet) else (-b) + a
        if name == "multiply":
            return a * b if isinstance(a, Jet) else b * a
        if name in ("true_divide", "divide"):
            return a / b if isinstance(a, Jet) else b.reciprocal() * a
        if name == "power":
            return a**b if isinstance(a, Jet) else b.__rpow__(a)
        if name in ("less", "less_equal", "greater", "greater_equal"):
            return ufunc(value(a), value(b))
        return NotImplemented


def _as_object_scalar(x):
    out = np.empty((), dtype=object)
    out[()] = x
    return out


# -- generic helpers ------------------------------------------------------------

def is_jet(x) -> bool:
    return isinstance(x, Jet)


def is_jet_array(x) -> bool:
    """True for object arrays (or sequences) whose entries include jets."""
    if isinstance(x, Jet):
        return True
    if isinstance(x, np.ndarray):
        if x.dtype != object:
            return False
        return any(isinstance(e, Jet) for e in x.flat)
    if isinstance(x, (list, tuple)):
        return any(is_jet_array(e) for e in x)
    return False


def value(x):
    """Base-point value of a jet, object array of jets, or plain number/array."""
    if isinstance(x, Jet):
        return x.value
    if isinstance(x, np.ndarray) and x.dtype == object:
        return np.array([value(e) for e in x.flat]).reshape(x.shape + np.shape(value(x.flat[0])) if x.size else x.shape)
    return x


def jet_info(x):
    """(nvars, order, batch_shape) of the first jet found in ``x``."""
    for e in (x.flat if isinstance(x, np.ndarray) else [x]):
        if isinstance(e, Jet):
            return e.nvars, e.order, e.batch_shape
    raise ValueError("no jet present")


def to_jet_array(raw, shape: tuple, nvars: int, order: int) -> np.ndarray:
    """Coerce a field's raw output to an object array of jets of the given shape."""
    if isinstance(raw, Jet):
        arr = np.empty((), dtype=object)
        arr[()] = raw
    else:
        arr = np.asarray(raw, dtype=object) if not isinstance(raw, np.ndarray) else raw
        if arr.dtype != object:
            arr = arr.astype(object)
    if arr.shape != shape:
        if arr.size == 1:
            single = arr.reshape(())[()]
            arr = np.empty(shape, dtype=object)
            for idx in np.ndindex(*shape):
                arr[idx] = single
        else:
            arr = arr.reshape(shape)
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        e = arr[idx]
        if isinstance(e, Jet):
            out[idx] = e if e.order == order else e.truncate(order)
        else:
            out[idx] = Jet.constant(np.asarray(e, dtype=float), nvars, order)
    return out


def variables(point, order: int) -> np.ndarray:
    """Canonical jet point: coordinate i is x_i + (variable i)."""
    point = np.asarray(point, dtype=float)
    n = point.shape[0]
    out = np.empty(n, dtype=object)
    for i in range(n):
        out[i] = Jet.variable(point[i], i, n, order)
    return out


def is_canonical(xj) -> bool:
    """Whether ``xj`` is exactly a canonical variable jet point."""
    if not isinstance(xj, np.ndarray) or xj.dtype != object:
        return False
    n = xj.shape[0]
    for i, e in enumerate(xj):
        if not isinstance(e, Jet) or e.nvars != n:
            return False
        if e.order == 0:
            continue
        monos, index = _monomials(n, e.order)
        expect = np.zeros(len(monos))
        ei = [0] * n
        ei[i] = 1
        expect[index[tuple(ei)]] = 1.0
        rest = e.c[1:].reshape(len(monos) - 1, -1)
        if not np.array_equal(rest, np.broadcast_to(expect[1:, None], rest.shape)):
            return False
    return True


def compose(coeffs: np.ndarray, base, xj) -> np.ndarray:
    """Evaluate canonical-variable jets ``coeffs`` (expanded about ``base``) at jet point ``xj``.

    ``coeffs`` is an object array of jets in ``len(base)`` canonical variables;
    ``xj`` an object array of jets (any variable count) whose values equal ``base``.
    """
    if is_canonical(xj):
        return coeffs
    n = len(xj)
    nv, order, _ = jet_info(xj)
    deltas = [xj[i] - value(xj[i]) for i in range(n)]
    powers = []
    for i in range(n):
        p = [Jet.constant(np.ones(deltas[i].batch_shape), nv, order)]
        for _ in range(order):
            p.append(p[-1] * deltas[i])
        powers.append(p)
    out = np.empty(coeffs.shape, dtype=object)
    for idx in np.ndindex(*coeffs.shape):
        src = coeffs[idx]
        monos, _ = _monomials(src.nvars, src.order)
        acc = None
        for k, beta in enumerate(monos):
            if sum(beta) > order:
                continue
            term = powers[0][beta[0]]
            for i in range(1, n):
                term = term * powers[i][beta[i]]
            term = term * src.c[k]
            acc = term if acc is None else acc + term
        out[idx] = acc
    return out


def lift(field_fn, xj, shape: tuple, extra: int = 1):
    """Evaluate ``field_fn`` on a canonical jet of order ``order+extra`` at the value of ``xj``.

    Returns (canonical jets of the higher order, base point, target order).
    Used by derived fields that need more derivatives than the caller asks for.
    """
    base = value_point(xj)
    _, order, _ = jet_info(xj)
    y = variables(base, order + extra)
    return field_fn(y), base, order


def jmap(fn, arr) -> np.ndarray:
    """Apply ``fn`` to every entry of an object array, keeping its shape."""
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(*arr.shape):
        out[idx] = fn(arr[idx])
    return out


def value_point(xj) -> np.ndarray:
    return np.array([value(e) for e in xj], dtype=float)


def where(mask, a, b):
    """Select between ``a`` and ``b`` by a boolean mask over the batch."""
    if isinstance(a, Jet) or isinstance(b, Jet):
        like = a if isinstance(a, Jet) else b
        ja = like._like(a) if not isinstance(a, Jet) else a
        jb = like._like(b) if not isinstance(b, Jet) else b
        ca, cb, order = ja._pair(jb)
        mask = np.asarray(mask)
        return Jet(np.where(mask, ca, cb), like.nvars, order)
    return np.where(mask, a, b)


def exp(x):
    return np.exp(x)


def taylor_coefficients(x, shape=()) -> dict:
    """Map multi-index -> partial derivative for a jet (or array of jets)."""
    if isinstance(x, Jet):
        monos, _ = _monomials(x.nvars, x.order)
        return {b: x.partial(b) for b in monos}
    raise TypeError("expected a Jet")


# -- finite-difference reconstruction --------------------------------------------

@lru_cache(maxsize=None)
def _stencil_weights(half_width: int, deriv: int) -> np.ndarray:
    offsets = np.arange(-half_width, half_width + 1, dtype=float)
    m = len(offsets)
    V = np.vander(offsets, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(V, rhs)


def fd_taylor(fn, x0, order: int, h: float, shape: tuple = (), vectorized: bool = False,
              half_width: int | None = None) -> np.ndarray:
    """Jets (canonical variables) of a numeric callable built by central differences.

    ``fn`` maps a point of shape (n,) (or (n, N) if ``vectorized``) to an array
    of ``shape`` (+ batch).  Derivatives of order k use a centred stencil with
    ``2*half_width+1`` points per axis.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    if half_width is None:
        half_width = order // 2 + 2
    if order == 0:
        half_width = 0
    offsets = np.arange(-half_width, half_width + 1)
    grid = list(itertools.product(offsets, repeat=n))
    pts = np.array([x0 + h * np.array(g, dtype=float) for g in grid]).T
    if vectorized:
        vals = np.asarray(fn(pts), dtype=float)
        vals = np.moveaxis(vals.reshape(shape + (len(grid),)), -1, 0)
    else:
        vals = np.array([np.asarray(fn(pts[:, k]), dtype=float).reshape(shape) for k in range(len(grid))])
    side = 2 * half_width + 1
    vals = vals.reshape((side,) * n + shape)
    monos, _ = _monomials(n, order)
    coeffs = np.zeros((len(monos),) + shape)
    for k, beta in enumerate(monos):
        acc = vals
        for axis in range(n):
            w = _stencil_weights(half_width, beta[axis]) if half_width else np.array([1.0])
            acc = np.tensordot(w, acc, axes=([0], [0]))
        fact = float(np.prod([math.factorial(b) for b in beta]))
        coeffs[k] = acc / (h ** sum(beta) * fact)
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        out[idx] = Jet(coeffs[(slice(None),) + idx], n, order)
    return out


def fd_jet(fn, xj, h: float, shape: tuple = (), vectorized: bool = False) -> np.ndarray:
    """Evaluate a numeric-only callable at a jet point via finite differences."""
    nv, order, batch = jet_info(xj)
    base = value_point(xj)
    if base.ndim == 1:
        coeffs = fd_taylor(fn, base, order, h, shape, vectorized)
        return compose(coeffs, base, xj)
    # batched base points: expand each separately and restack
    flat = base.reshape(base.shape[0], -1)
    n = base.shape[0]
    monos, _ = _monomials(n, order)
    stacked = np.zeros((len(monos),) + shape + (flat.shape[1],))
    for k in range(flat.shape[1]):
        cj = fd_taylor(fn, flat[:, k], order, h, shape, vectorized)
        for idx in np.ndindex(*shape):
            stacked[(slice(None),) + idx + (k,)] = cj[idx].c
    coeffs = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        coeffs[idx] = Jet(stacked[(slice(None),) + idx].reshape((len(monos),) + base.shape[1:]), n, order)
    return compose(coeffs, base, xj)
