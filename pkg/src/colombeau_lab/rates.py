"""Log-log slope estimation for asymptotic orders O(eps^a)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

ABS_FLOOR = 1e-13
WINDOW = 6


@dataclass
class OrderReport:
    """Sup-values per eps with the fitted log-log slope.

    ``slope`` is +inf for identically vanishing data.  ``flags`` collects
    diagnostics: identically-zero, superconvergent, noise-floor, short-fit,
    oscillatory, super-polynomial, super-polynomial-decay, non-finite.
    """

    eps: list
    values: list
    slope: float
    ci: float
    flags: list = field(default_factory=list)
    used: int = 0
    verdict: str = "n/a"
    test_id: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def samples(self):
        return list(zip(self.eps, self.values))

    @property
    def identically_zero(self) -> bool:
        return "identically-zero" in self.flags

    def to_dict(self) -> dict:
        return {
            "test_id": self.test_id,
            "eps": [float(e) for e in self.eps],
            "values": [float(v) for v in self.values],
            "slope": _json_float(self.slope),
            "ci": _json_float(self.ci),
            "flags": list(self.flags),
            "used": self.used,
            "verdict": self.verdict,
            "meta": self.meta,
        }


def _json_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return float(x)


def _sign_changes(r: np.ndarray) -> int:
    s = np.sign(r[np.abs(r) > 1e-12 * max(1.0, np.max(np.abs(r)))])
    return int(np.sum(s[1:] != s[:-1]))


def estimate_order(eps, values, window: int = WINDOW, abs_floor: float = ABS_FLOOR,
                   test_id: str = "") -> OrderReport:
    """Least-squares slope of log(value) against log(eps) over the tail window."""
    eps = np.asarray(eps, dtype=float)
    vals = np.asarray(values, dtype=float)
    order = np.argsort(-eps)
    eps, vals = eps[order], vals[order]
    if len(eps) < 4:
        raise ValueError("need at least 4 samples")
    flags = []
    rep = dict(eps=eps.tolist(), values=vals.tolist(), test_id=test_id)
    if not np.all(np.isfinite(vals)):
        flags.append("non-finite")
        finite = np.isfinite(vals)
        first_bad = int(np.argmin(finite))
        return OrderReport(slope=-math.inf, ci=math.inf, flags=flags + ["super-polynomial"], used=first_bad, **rep)
    vals = np.abs(vals)
    if np.all(vals == 0.0):
        return OrderReport(slope=math.inf, ci=0.0, flags=["identically-zero"], **rep)
    if np.all(vals <= abs_floor):
        return OrderReport(slope=math.inf, ci=0.0, flags=["identically-zero", "superconvergent"], **rep)
    below = np.nonzero(vals <= abs_floor)[0]
    n_ok = len(vals)
    if len(below):
        n_ok = int(below[0])
        flags.append("noise-floor")
    e_ok, v_ok = eps[:n_ok], vals[:n_ok]
    if n_ok < 2:
        # decayed into the floor immediately: treat as superconvergent
        return OrderReport(slope=math.inf, ci=0.0, flags=flags + ["superconvergent"], used=n_ok, **rep)
    w = min(window, n_ok)
    if w < 4:
        flags.append("short-fit")
    x = np.log(e_ok[-w:])
    y = np.log(v_ok[-w:])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    resid = y - A @ coef
    if w > 2:
        s2 = float(resid @ resid) / (w - 2)
        se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
        ci = float(stats.t.ppf(0.975, w - 2) * se)
    else:
        ci = math.inf
    # diagnostics on the full usable range
    xl, yl = np.log(e_ok), np.log(v_ok)
    if len(xl) >= 5:
        lin = np.polyval(np.polyfit(xl, yl, 1), xl)
        quad = np.polyval(np.polyfit(xl, yl, 2), xl)
        r_lin, r_quad = yl - lin, yl - quad
        # local slopes that rise and then fall (or vice versa) by a visible amount
        loc = np.diff(yl) / np.diff(xl)
        turn = any(0 < k < len(loc) - 1 and min(abs(loc[k] - loc[0]), abs(loc[k] - loc[-1])) > 0.05
                   for k in (int(np.argmax(loc)), int(np.argmin(loc))))
        if (_sign_changes(r_lin) >= 3 and np.max(np.abs(r_quad)) > 5e-3) or turn:
            flags.append("oscillatory")
    if len(xl) >= 3:
        local = np.diff(yl) / np.diff(xl)
        steps = np.diff(local)
        if np.all(steps < 0) and local[0] - local[-1] > 5.0:
            flags.append("super-polynomial")
        if np.all(steps > 0) and local[-1] - local[0] > 5.0:
            flags.append("super-polynomial-decay")
    return OrderReport(slope=slope, ci=ci, flags=flags, used=w, **rep)


def geometric_grid(k_min: int = 3, k_max: int = 12, base: float = 2.0) -> list:
    return [base ** (-k) for k in range(k_min, k_max + 1)]
