"""Experiment configuration files (YAML) and their resolution into live objects.

Grammar (all keys optional unless noted)::

    name: str                     # required
    kind: str                     # required, one of KINDS
    seed: int
    description: str
    domain: {dim: int, lo: [..], hi: [..]}
    kernel: {profile: bump|cos2|expr:<text>, order: int, C: float}
    transport: {kind: identity-cutoff|twisted, plateau: [lo, hi], support: [lo, hi], entries: [[expr]]}
    K: [lo, hi]
    eps: {k_min: int, k_max: int}
    points_per_axis: int
    fields: {name: {valence: [r, s], components: [expr, ...]}}
    distributions: {name: {kind: delta|heaviside|pv|fp|regular, ..., field: name, coefficient: expr}}
    diffeos: {name: {forward: [expr, ...]}}
    forms: {name: {center: [..], radius: float, weight: expr}}
    representative: operation tree
    battery: {j_max, l_max, m_list, X: [field names], B: [transport specs], slope_tol, N_max}
    params: free-form, interpreted by the experiment kind

Operation trees are mappings with an ``op`` key::

    {op: iota, dist: name}          {op: sigma, field: name}
    {op: tensor, args: [t1, t2]}    {op: contract, arg: t, i: 0, j: 0}
    {op: combine, terms: [[c, t], ...]}
    {op: lie, X: name, arg: t}      {op: pullback, mu: name, arg: t}

Expressions use variables x1..xn (x, y, z as aliases); transport entries use
x1..xn for p and x(n+1)..x2n for q.
"""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Optional

import numpy as np
import yaml

KINDS = ("moderate", "negligible", "associate", "shadow", "lie-commute", "pullback-commute", "saturation",
         "nogo", "schwartz", "moments", "embed-diff")
OPS = ("iota", "sigma", "tensor", "contract", "combine", "lie", "pullback")
DIST_KINDS = ("delta", "heaviside", "pv", "fp", "regular")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require(cond: bool, path: str, msg: str):
    if not cond:
        raise ConfigError(path, msg)


def _num_list(x, path, length=None):
    _require(isinstance(x, (list, tuple)), path, "expected a list of numbers")
    try:
        out = [float(v) for v in x]
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a list of numbers") from None
    if length is not None:
        _require(len(out) == length, path, f"expected {length} entries")
    return out


@dataclass
class DomainSpec:
    dim: int = 1
    lo: Optional[list] = field(default_factory=lambda: [-3.0])
    hi: Optional[list] = field(default_factory=lambda: [3.0])


@dataclass
class KernelSpec:
    profile: str = "bump"
    order: int = 1
    C: float = 1.0


@dataclass
class TransportSpec:
    kind: str = "identity-cutoff"
    plateau: list = field(default_factory=lambda: [[-2.0], [2.0]])
    support: list = field(default_factory=lambda: [[-2.5], [2.5]])
    entries: Optional[list] = None


@dataclass
class EpsSpec:
    k_min: int = 3
    k_max: int = 12


@dataclass
class BatterySpec:
    j_max: int = 1
    l_max: int = 1
    m_list: list = field(default_factory=lambda: [1, 2, 3])
    X: list = field(default_factory=list)
    B: list = field(default_factory=list)
    slope_tol: float = 0.25
    N_max: float = 20.0


@dataclass
class ExperimentConfig:
    name: str
    kind: str
    seed: int = 0
    description: str = ""
    domain: DomainSpec = field(default_factory=DomainSpec)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    transport: TransportSpec = field(default_factory=TransportSpec)
    K: list = field(default_factory=lambda: [[-1.0], [1.0]])
    eps: EpsSpec = field(default_factory=EpsSpec)
    points_per_axis: int = 31
    fields: dict = field(default_factory=dict)
    distributions: dict = field(default_factory=dict)
    diffeos: dict = field(default_factory=dict)
    forms: dict = field(default_factory=dict)
    representative: Optional[dict] = None
    battery: BatterySpec = field(default_factory=BatterySpec)
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def eps_grid(self) -> list:
        return [2.0 ** (-k) for k in range(self.eps.k_min, self.eps.k_max + 1)]


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _build(cls, raw, path):
    if raw is None:
        return cls()
    _require(isinstance(raw, dict), path, "expected a mapping")
    known = {f.name for f in fields(cls)}
    for k in raw:
        _require(k in known, f"{path}.{k}", "unknown key")
    try:
        return cls(**copy.deepcopy(raw))
    except TypeError as exc:
        raise ConfigError(path, str(exc)) from None


def _check_box(box, n, path):
    _require(isinstance(box, (list, tuple)) and len(box) == 2, path, "expected [lo, hi]")
    lo = _num_list(box[0], f"{path}[0]", n)
    hi = _num_list(box[1], f"{path}[1]", n)
    _require(all(a < b for a, b in zip(lo, hi)), path, "lo must be below hi")
    return [lo, hi]


def _check_expr(text, dim, path):
    from .expr import ExpressionError, compile_expression
    _require(isinstance(text, (str, int, float)), path, "expected an expression string")
    try:
        compile_expression(str(text), dim)
    except ExpressionError as exc:
        raise ConfigError(path, f"bad expression: {exc}") from None


def _check_tree(tree, cfg: ExperimentConfig, path) -> tuple:
    """Validate an operation tree; returns its valence."""
    _require(isinstance(tree, dict) and "op" in tree, path, "expected a mapping with an 'op' key")
    op = tree["op"]
    _require(op in OPS, f"{path}.op", f"unknown op {op!r}")
    if op == "iota":
        name = tree.get("dist")
        _require(name in cfg.distributions, f"{path}.dist", f"unknown distribution {name!r}")
        f = cfg.distributions[name].get("field")
        return tuple(cfg.fields[f]["valence"]) if f else (0, 0)
    if op == "sigma":
        name = tree.get("field")
        _require(name in cfg.fields, f"{path}.field", f"unknown field {name!r}")
        return tuple(cfg.fields[name]["valence"])
    if op == "tensor":
        args = tree.get("args")
        _require(isinstance(args, list) and len(args) == 2, f"{path}.args", "expected two operands")
        a = _check_tree(args[0], cfg, f"{path}.args[0]")
        b = _check_tree(args[1], cfg, f"{path}.args[1]")
        return (a[0] + b[0], a[1] + b[1])
    if op == "contract":
        v = _check_tree(tree.get("arg"), cfg, f"{path}.arg")
        i, j = tree.get("i", 0), tree.get("j", 0)
        _require(0 <= i < v[0] and 0 <= j < v[1], path, "contraction slot out of range")
        return (v[0] - 1, v[1] - 1)
    if op == "combine":
        terms = tree.get("terms")
        _require(isinstance(terms, list) and terms, f"{path}.terms", "expected a non-empty list of [c, tree]")
        vals = []
        for k, t in enumerate(terms):
            _require(isinstance(t, list) and len(t) == 2, f"{path}.terms[{k}]", "expected [coefficient, tree]")
            _require(isinstance(t[0], (int, float)), f"{path}.terms[{k}][0]", "coefficient must be a number")
            vals.append(_check_tree(t[1], cfg, f"{path}.terms[{k}][1]"))
        _require(all(v == vals[0] for v in vals), f"{path}.terms", "valence mismatch")
        return vals[0]
    if op == "lie":
        X = tree.get("X")
        _require(X in cfg.fields and tuple(cfg.fields[X]["valence"]) == (1, 0), f"{path}.X",
                 "expected the name of a vector field")
        return _check_tree(tree.get("arg"), cfg, f"{path}.arg")
    mu = tree.get("mu")
    _require(mu in cfg.diffeos, f"{path}.mu", f"unknown diffeomorphism {mu!r}")
    return _check_tree(tree.get("arg"), cfg, f"{path}.arg")


def parse_config(raw: Any) -> ExperimentConfig:
    """Validate a mapping (e.g. loaded YAML) into an ExperimentConfig."""
    _require(isinstance(raw, dict), "<root>", "expected a mapping")
    raw = copy.deepcopy(raw)
    for key in ("name", "kind"):
        _require(key in raw, key, "required")
    _require(raw["kind"] in KINDS, "kind", f"unknown kind {raw['kind']!r}; expected one of {', '.join(KINDS)}")
    known = {f.name for f in fields(ExperimentConfig)}
    for k in raw:
        _require(k in known, k, "unknown key")
    sub = {"domain": DomainSpec, "kernel": KernelSpec, "transport": TransportSpec, "eps": EpsSpec,
           "battery": BatterySpec}
    for k, cls in sub.items():
        raw[k] = _build(cls, raw.get(k), k)
    cfg = ExperimentConfig(**raw)
    n = cfg.domain.dim
    _require(isinstance(n, int) and n >= 1, "domain.dim", "expected a positive integer")
    if cfg.domain.lo is not None or cfg.domain.hi is not None:
        cfg.domain.lo, cfg.domain.hi = _check_box([cfg.domain.lo, cfg.domain.hi], n, "domain")
    _require(cfg.kernel.profile in ("bump", "cos2") or str(cfg.kernel.profile).startswith("expr:"),
             "kernel.profile", "unknown profile")
    _require(isinstance(cfg.kernel.order, int) and 0 <= cfg.kernel.order <= 6, "kernel.order", "expected 0..6")
    _require(float(cfg.kernel.C) > 0, "kernel.C", "must be positive")
    cfg.kernel.C = float(cfg.kernel.C)
    _require(cfg.transport.kind in ("identity-cutoff", "twisted"), "transport.kind", "unknown transport kind")
    cfg.transport.plateau = _check_box(cfg.transport.plateau, n, "transport.plateau")
    cfg.transport.support = _check_box(cfg.transport.support, n, "transport.support")
    if cfg.transport.kind == "twisted":
        _check_entries(cfg.transport.entries, n, "transport.entries")
    cfg.K = _check_box(cfg.K, n, "K")
    _require(isinstance(cfg.eps.k_min, int) and isinstance(cfg.eps.k_max, int) and 0 <= cfg.eps.k_min
             and cfg.eps.k_max - cfg.eps.k_min >= 3, "eps", "need integers with k_max - k_min >= 3")
    _require(isinstance(cfg.points_per_axis, int) and cfg.points_per_axis >= 2, "points_per_axis", "expected >= 2")
    for name, fs in cfg.fields.items():
        p = f"fields.{name}"
        _require(isinstance(fs, dict), p, "expected a mapping")
        for k in fs:
            _require(k in ("valence", "components"), f"{p}.{k}", "unknown key")
        val = fs.get("valence", [0, 0])
        _require(isinstance(val, list) and len(val) == 2 and all(isinstance(v, int) and v >= 0 for v in val),
                 f"{p}.valence", "expected [r, s]")
        fs["valence"] = list(val)
        comps = fs.get("components")
        _require(isinstance(comps, list) and len(comps) == n ** sum(val), f"{p}.components",
                 f"expected {n ** sum(val)} expressions")
        for k, c in enumerate(comps):
            _check_expr(c, n, f"{p}.components[{k}]")
        fs["components"] = [str(c) for c in comps]
    for name, ds in cfg.distributions.items():
        _check_dist(ds, cfg, f"distributions.{name}")
    for name, ms in cfg.diffeos.items():
        p = f"diffeos.{name}"
        _require(isinstance(ms, dict) and isinstance(ms.get("forward"), list) and len(ms["forward"]) == n,
                 f"{p}.forward", f"expected {n} expressions")
        for k, c in enumerate(ms["forward"]):
            _check_expr(c, n, f"{p}.forward[{k}]")
        ms["forward"] = [str(c) for c in ms["forward"]]
    for name, fs in cfg.forms.items():
        p = f"forms.{name}"
        _require(isinstance(fs, dict), p, "expected a mapping")
        fs["center"] = _num_list(fs.get("center"), f"{p}.center", n)
        _require(isinstance(fs.get("radius"), (int, float)) and fs["radius"] > 0, f"{p}.radius", "expected > 0")
        fs["radius"] = float(fs["radius"])
        fs["weight"] = str(fs.get("weight", "1"))
        _check_expr(fs["weight"], n, f"{p}.weight")
    if cfg.representative is not None:
        _check_tree(cfg.representative, cfg, "representative")
    for k, X in enumerate(cfg.battery.X):
        _require(X in cfg.fields and cfg.fields[X]["valence"] == [1, 0], f"battery.X[{k}]",
                 "expected the name of a vector field")
    for k, B in enumerate(cfg.battery.B):
        _require(isinstance(B, dict), f"battery.B[{k}]", "expected a transport spec")
        _check_entries(B.get("entries"), n, f"battery.B[{k}].entries")
    _require(isinstance(cfg.params, dict), "params", "expected a mapping")
    return cfg


def _check_entries(entries, n, path):
    _require(isinstance(entries, list) and len(entries) == n and all(isinstance(r, list) and len(r) == n
                                                                      for r in entries), path,
             f"expected an {n}x{n} matrix of expressions")
    for i, row in enumerate(entries):
        for j, e in enumerate(row):
            _check_expr(e, 2 * n, f"{path}[{i}][{j}]")


def _check_dist(ds, cfg, p):
    n = cfg.domain.dim
    _require(isinstance(ds, dict), p, "expected a mapping")
    kind = ds.get("kind")
    _require(kind in DIST_KINDS, f"{p}.kind", f"unknown distribution kind {kind!r}")
    allowed = {"kind", "field", "coefficient", "point", "alpha", "center", "offset", "expr", "kinks"}
    for k in ds:
        _require(k in allowed, f"{p}.{k}", "unknown key")
    if kind in ("heaviside", "pv", "fp"):
        _require(n == 1, f"{p}.kind", "only available on one-dimensional charts")
    if kind == "delta":
        ds["point"] = _num_list(ds.get("point", [0.0] * n), f"{p}.point", n)
        alpha = ds.get("alpha", [0] * n)
        _require(isinstance(alpha, list) and len(alpha) == n and all(isinstance(a, int) and a >= 0 for a in alpha),
                 f"{p}.alpha", "expected a multi-index")
    if kind == "regular":
        _check_expr(ds.get("expr"), n, f"{p}.expr")
        ds["expr"] = str(ds["expr"])
    if "field" in ds:
        _require(ds["field"] in cfg.fields, f"{p}.field", f"unknown field {ds['field']!r}")
    if "coefficient" in ds:
        _check_expr(ds["coefficient"], n, f"{p}.coefficient")
        ds["coefficient"] = str(ds["coefficient"])


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"YAML syntax error: {exc}") from None
    return parse_config(raw)


def normalize(raw: dict) -> dict:
    """Canonical mapping form of a config (defaults filled in)."""
    return parse_config(raw).to_dict()
