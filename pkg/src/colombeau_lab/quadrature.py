"""Composite Gauss-Legendre rules on intervals and axis-aligned boxes."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _legendre(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class QuadratureSpec:
    panels: int = 8
    nodes: int = 16


DEFAULT = QuadratureSpec()


def interval_rule(a: float, b: float, spec: QuadratureSpec = DEFAULT, breakpoints=()):
    """Nodes and weights of a composite rule on [a, b].

    Interior breakpoints split the interval first; each piece gets ``spec.panels``
    equal panels.
    """
    cuts = [a] + sorted(c for c in breakpoints if a < c < b) + [b]
    xg, wg = _legendre(spec.nodes)
    xs, ws = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        edges = np.linspace(lo, hi, spec.panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        xs.append((mid[:, None] + half[:, None] * xg[None, :]).ravel())
        ws.append((half[:, None] * wg[None, :]).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def box_rule(lo, hi, spec: QuadratureSpec = DEFAULT, breakpoints=None):
    """Tensor-product rule on a box; returns points of shape (n, N) and weights (N,)."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    breakpoints = breakpoints or [()] * len(lo)
    rules = [interval_rule(a, b, spec, bp) for a, b, bp in zip(lo, hi, breakpoints)]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrid = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    pts = np.array([g.ravel() for g in grids])
    w = np.prod(np.array([g.ravel() for g in wgrid]), axis=0)
    return pts, w


def integrate_box(fn, lo, hi, spec: QuadratureSpec = DEFAULT, breakpoints=None) -> float:
    """Integral of a vectorized ``fn(points (n, N)) -> (N,)`` over a box."""
    pts, w = box_rule(lo, hi, spec, breakpoints)
    vals = np.asarray(fn(pts), dtype=float)
    return float(vals @ w)
