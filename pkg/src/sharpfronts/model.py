"""Problem instances on [0, rho_bar]: scalar fields, models and assumption checks.

A model bundles the flux derivative h = f', the diffusivity D and the source g
of the equation ``rho_t + f(rho)_x = (D(rho) rho_x)_x + g(rho)``.  Fields carry
optional vanishing-order metadata at isolated points, and an exact "local"
evaluator ``field.near(p)(t) = field(p - t)`` that avoids cancellation when
``p - t`` is rounded (for t ~ 1e-9 next to rho_bar the naive form loses about
seven digits).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import EvaluationError, PreconditionError

TAGS = ("D", "D-tilde", "D-hat", "g", "g0", "g-hat", "g1")
BUILTIN_TAGS = (
    "power-at-top",
    "power-at-zero",
    "linear",
    "constant",
    "product",
    "table",
    "custom",
)

# (order, scale) pairs keyed by point
Orders = Mapping[float, tuple]


def _lookup(table: Mapping, point: float):
    for key, value in table.items():
        if key == point or math.isclose(key, point, rel_tol=1e-13, abs_tol=1e-300):
            return value
    return None


@dataclass(frozen=True)
class ScalarField:
    """A real function on [0, rho_bar] with optional endpoint metadata.

    ``below[p] = (a, K)`` declares ``f(p - t) ~ K t**a`` as t -> 0+, ``above[p]``
    declares ``f(p + t) ~ K t**a``.  ``near_factory(p)`` may return an exact
    evaluator of ``t -> f(p - t)`` (valid for either sign of t) or None.
    """

    func: Callable
    rho_bar: float = 1.0
    deriv: Callable | None = None
    below: Orders = field(default_factory=dict)
    above: Orders = field(default_factory=dict)
    builtin_tag: str = "custom"
    params: Mapping = field(default_factory=dict)
    near_factory: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.builtin_tag not in BUILTIN_TAGS:
            raise ValueError(f"unknown builtin_tag {self.builtin_tag!r}")

    def __call__(self, rho):
        return np.asarray(self.func(np.asarray(rho, dtype=float)), dtype=float)

    def near(self, point: float) -> Callable:
        """Return ``t -> f(point - t)``, exact where the family allows it."""
        if self.near_factory is not None:
            fn = self.near_factory(point)
            if fn is not None:
                return lambda t: np.asarray(fn(np.asarray(t, dtype=float)), dtype=float)
        return lambda t: self(point - np.asarray(t, dtype=float))

    def order_below(self, point: float):
        return _lookup(self.below, point)

    def order_above(self, point: float):
        return _lookup(self.above, point)

    @property
    def vanish_order_at_top(self):
        o = self.order_below(self.rho_bar)
        return None if o is None else o[0]

    @property
    def vanish_order_at_zero(self):
        o = self.order_above(0.0)
        return None if o is None else o[0]

    def derivative(self, rho):
        if self.deriv is None:
            raise PreconditionError("field has no analytic derivative")
        return np.asarray(self.deriv(np.asarray(rho, dtype=float)), dtype=float)

    def antiderivative(self) -> Callable:
        """Return F with F(0) = 0 and F' = self on [0, rho_bar]."""
        p = self.params
        fam = p.get("family")
        if fam == "constant":
            k = p["value"]
            return lambda r: k * np.asarray(r, dtype=float)
        if fam == "linear":
            a, b = p["a"], p["b"]
            return lambda r: a * np.asarray(r, dtype=float) + 0.5 * b * np.asarray(r, dtype=float) ** 2
        # tabulated: 4096 Gauss-Legendre panels, cumulative, monotone cubic
        nodes, weights = np.polynomial.legendre.leggauss(6)
        edges = np.linspace(0.0, self.rho_bar, 4097)
        a, b = edges[:-1, None], edges[1:, None]
        x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        panel = 0.5 * (b[:, 0] - a[:, 0]) * (self(x) @ weights)
        cum = np.concatenate([[0.0], np.cumsum(panel)])
        return PchipInterpolator(edges, cum, extrapolate=True)


# ---------------------------------------------------------------------------
# built-in families


def constant(value: float, rho_bar: float = 1.0) -> ScalarField:
    value = float(value)
    o = (0.0, value) if value != 0 else (math.inf, 0.0)
    return ScalarField(
        func=lambda r: np.full(np.shape(r), value),
        rho_bar=rho_bar,
        deriv=lambda r: np.zeros(np.shape(r)),
        below={rho_bar: o},
        above={0.0: o},
        builtin_tag="constant",
        params={"family": "constant", "value": value},
        near_factory=lambda p: (lambda t: np.full(np.shape(t), value)),
    )


def linear(a: float, b: float, rho_bar: float = 1.0) -> ScalarField:
    """a + b*rho."""
    a, b = float(a), float(b)
    top = a + b * rho_bar
    below = {rho_bar: (1.0, -b) if top == 0 and b != 0 else (0.0, top)}
    if a == 0 and b == 0:
        below = {rho_bar: (math.inf, 0.0)}
    above = {0.0: (1.0, b) if a == 0 and b != 0 else (0.0, a)}
    if a == 0 and b == 0:
        above = {0.0: (math.inf, 0.0)}
    return ScalarField(
        func=lambda r: a + b * r,
        rho_bar=rho_bar,
        deriv=lambda r: np.full(np.shape(r), b),
        below=below,
        above=above,
        builtin_tag="linear",
        params={"family": "linear", "a": a, "b": b},
        near_factory=lambda p: (lambda t: (a + b * p) - b * t),
    )


def _edge_slope(K, alpha):
    """Derivative of K*t**alpha at t = 0."""
    if alpha == 0 or alpha > 1 or K == 0:
        return 0.0
    if alpha == 1:
        return K
    return math.copysign(math.inf, K)


def power_at_top(K: float, alpha: float, rho_bar: float = 1.0) -> ScalarField:
    """K*(rho_bar - rho)**alpha."""
    K, alpha = float(K), float(alpha)

    def deriv(r):
        s = np.maximum(rho_bar - r, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s > 0, -K * alpha * s ** (alpha - 1), _edge_slope(-K, alpha))

    def near(p):
        if p == rho_bar:
            return lambda t: K * np.maximum(t, 0.0) ** alpha
        return None

    return ScalarField(
        func=lambda r: K * np.maximum(rho_bar - r, 0.0) ** alpha,
        rho_bar=rho_bar,
        deriv=deriv,
        below={rho_bar: (alpha, K)},
        above={0.0: (0.0, K * rho_bar**alpha)},
        builtin_tag="power-at-top",
        params={"family": "power-at-top", "K": K, "alpha": alpha},
        near_factory=near,
    )


def power_at_zero(K: float, alpha: float, rho_bar: float = 1.0) -> ScalarField:
    """K*rho**alpha."""
    K, alpha = float(K), float(alpha)

    def deriv(r):
        r = np.maximum(r, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r > 0, K * alpha * r ** (alpha - 1), _edge_slope(K, alpha))

    def near(p):
        if p == 0.0:
            return lambda t: K * np.maximum(-t, 0.0) ** alpha
        return None

    return ScalarField(
        func=lambda r: K * np.maximum(r, 0.0) ** alpha,
        rho_bar=rho_bar,
        deriv=deriv,
        below={rho_bar: (0.0, K * rho_bar**alpha)},
        above={0.0: (alpha, K)},
        builtin_tag="power-at-zero",
        params={"family": "power-at-zero", "K": K, "alpha": alpha},
        near_factory=near,
    )


def signed_power(K: float, alpha: float, center: float, rho_bar: float = 1.0) -> ScalarField:
    """K*sign(center - rho)*|center - rho|**alpha: positive below center, negative above."""
    K, alpha, center = float(K), float(alpha), float(center)

    def f(r):
        u = center - r
        return K * np.sign(u) * np.abs(u) ** alpha

    def near(p):
        if p == center:
            return lambda t: K * np.sign(t) * np.abs(t) ** alpha
        return None

    return ScalarField(
        func=f,
        rho_bar=rho_bar,
        below={center: (alpha, K), rho_bar: (0.0, -K * (rho_bar - center) ** alpha)},
        above={center: (alpha, -K), 0.0: (0.0, K * center**alpha)},
        builtin_tag="custom",
        params={"family": "signed-power", "K": K, "alpha": alpha, "center": center},
        near_factory=near,
    )


def table(x, y, rho_bar: float | None = None) -> ScalarField:
    """Monotone piecewise-cubic interpolation of tabulated values."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or len(x) < 2 or np.any(np.diff(x) <= 0):
        raise PreconditionError("table needs strictly increasing x and matching y")
    rb = float(x[-1]) if rho_bar is None else float(rho_bar)
    pchip = PchipInterpolator(x, y, extrapolate=False)
    dp = pchip.derivative()
    return ScalarField(
        func=lambda r: pchip(np.clip(r, x[0], x[-1])),
        rho_bar=rb,
        deriv=lambda r: dp(np.clip(r, x[0], x[-1])),
        builtin_tag="table",
        params={"family": "table", "x": x.tolist(), "y": y.tolist()},
    )


def custom(func: Callable, rho_bar: float = 1.0, deriv: Callable | None = None, below=None, above=None) -> ScalarField:
    return ScalarField(
        func=func,
        rho_bar=rho_bar,
        deriv=deriv,
        below=dict(below or {}),
        above=dict(above or {}),
        builtin_tag="custom",
        params={"family": "custom"},
    )


def product(*factors: ScalarField) -> ScalarField:
    if not factors:
        raise ValueError("product needs at least one factor")
    rho_bar = factors[0].rho_bar

    def f(r):
        out = np.ones(np.shape(r))
        for fac in factors:
            out = out * fac(r)
        return out

    def product_rule(r):
        vals = [fac(r) for fac in factors]
        ders = [fac.derivative(r) for fac in factors]
        total = np.zeros(np.shape(r))
        for i in range(len(factors)):
            term = ders[i]
            for j, v in enumerate(vals):
                if j != i:
                    term = term * v
            total = total + term
        return total

    deriv = product_rule if all(fac.deriv is not None for fac in factors) else None

    def combine(attr):
        keys = set()
        for fac in factors:
            keys.update(getattr(fac, attr).keys())
        out = {}
        for k in keys:
            entries = [_lookup(getattr(fac, attr), k) for fac in factors]
            if all(e is not None for e in entries):
                out[k] = (sum(e[0] for e in entries), math.prod(e[1] for e in entries))
        return out

    def near(p):
        parts = [fac.near(p) for fac in factors]

        def fn(t):
            out = np.ones(np.shape(t))
            for part in parts:
                out = out * part(t)
            return out

        return fn

    return ScalarField(
        func=f,
        rho_bar=rho_bar,
        deriv=deriv,
        below=combine("below"),
        above=combine("above"),
        builtin_tag="product",
        params={"family": "product", "factors": [dict(fac.params) for fac in factors]},
        near_factory=near,
    )


def add(a: ScalarField, b: ScalarField, scale_b: float = 1.0) -> ScalarField:
    """a + scale_b*b, with leading-order metadata where both sides declare it."""

    def merged(attr):
        out = {}
        ta, tb = getattr(a, attr), getattr(b, attr)
        for k in set(ta) | set(tb):
            ea, eb = _lookup(ta, k), _lookup(tb, k)
            if ea is None or eb is None:
                continue
            eb = (eb[0], scale_b * eb[1])
            if ea[1] == 0:
                out[k] = eb
            elif eb[1] == 0:
                out[k] = ea
            elif math.isclose(ea[0], eb[0]):
                s = ea[1] + eb[1]
                if s != 0:
                    out[k] = (ea[0], s)
            else:
                out[k] = min(ea, eb, key=lambda e: e[0])
        return out

    deriv = None
    if a.deriv is not None and b.deriv is not None:
        deriv = lambda r: a.derivative(r) + scale_b * b.derivative(r)  # noqa: E731

    def near(p):
        fa, fb = a.near(p), b.near(p)
        return lambda t: fa(t) + scale_b * fb(t)

    return ScalarField(
        func=lambda r: a(r) + scale_b * b(r),
        rho_bar=a.rho_bar,
        deriv=deriv,
        below=merged("below"),
        above=merged("above"),
        builtin_tag="custom",
        params={"family": "sum", "terms": [dict(a.params), dict(b.params)], "scale": scale_b},
        near_factory=near,
    )


def reflect_field(f: ScalarField, rho_bar: float, sign: float = 1.0) -> ScalarField:
    """rho -> sign * f(rho_bar - rho), keeping exact local evaluation."""

    def func(r):
        return sign * f.near(rho_bar)(r)

    def near(p):
        inner = f.near(rho_bar - p)
        return lambda t: sign * inner(-np.asarray(t, dtype=float))

    deriv = None
    if f.deriv is not None:
        deriv = lambda r: -sign * f.derivative(rho_bar - np.asarray(r, dtype=float))  # noqa: E731
    below = {rho_bar - k: (o[0], sign * o[1]) for k, o in f.above.items()}
    above = {rho_bar - k: (o[0], sign * o[1]) for k, o in f.below.items()}
    return ScalarField(
        func=func,
        rho_bar=rho_bar,
        deriv=deriv,
        below=below,
        above=above,
        builtin_tag="custom",
        params={"family": "reflected", "of": dict(f.params), "sign": sign, "about": rho_bar},
        near_factory=near,
    )


def estimate_vanishing_order(f: ScalarField, point: float, s: float = 1e-4, side: str = "below") -> float:
    """Finite-difference estimate log(f(p-s)/f(p-s/2))/log 2 (or p+s for side='above')."""
    ev = f.near(point)
    sg = 1.0 if side == "below" else -1.0
    v1, v2 = float(ev(sg * s)), float(ev(sg * s / 2))
    return math.log(abs(v1) / abs(v2)) / math.log(2.0)


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class Model:
    rho_bar: float
    flux_h: ScalarField
    diffusivity: ScalarField
    source: ScalarField
    rho0: float | None = None
    tags: frozenset = frozenset()
    L: float | None = None
    alpha: float | None = None
    name: str = ""

    def __post_init__(self):
        if not (self.rho_bar > 0 and math.isfinite(self.rho_bar)):
            raise PreconditionError("rho_bar must be a positive real")
        object.__setattr__(self, "tags", frozenset(self.tags))
        unknown = set(self.tags) - set(TAGS)
        if unknown:
            raise PreconditionError(f"unknown assumption tags {sorted(unknown)}")
        if self.rho0 is not None and not (0 < self.rho0 < self.rho_bar):
            raise PreconditionError("rho0 must lie in (0, rho_bar)", witness=self.rho0)

    def D(self, rho):
        return self.diffusivity(rho)

    def g(self, rho):
        return self.source(rho)

    def h(self, rho):
        return self.flux_h(rho)

    # exact evaluation at rho_bar - s
    def D_top(self, s):
        return self.diffusivity.near(self.rho_bar)(s)

    def g_top(self, s):
        return self.source.near(self.rho_bar)(s)

    def h_top(self, s):
        return self.flux_h.near(self.rho_bar)(s)

    @property
    def h_at_top(self) -> float:
        return float(self.h_top(0.0))

    def flux_function(self) -> Callable:
        return self.flux_h.antiderivative()

    def with_source(self, source: ScalarField, tags=None, name=None) -> "Model":
        return Model(
            self.rho_bar, self.flux_h, self.diffusivity, source, self.rho0,
            self.tags if tags is None else tags, self.L, self.alpha,
            self.name if name is None else name,
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rho_bar": self.rho_bar,
            "flux": dict(self.flux_h.params),
            "diffusivity": dict(self.diffusivity.params),
            "source": dict(self.source.params),
            "tags": sorted(self.tags),
            "rho0": self.rho0,
            "L": self.L,
            "alpha": self.alpha,
        }


# ---------------------------------------------------------------------------
# assumption checks


@dataclass(frozen=True)
class TagCheck:
    tag: str
    status: str  # "pass", "fail" or "assumed"
    witness: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(ch.status != "fail" for ch in self.checks)

    def __getitem__(self, tag: str) -> TagCheck:
        for ch in self.checks:
            if ch.tag == tag:
                return ch
        raise KeyError(tag)

    def failures(self):
        return [ch for ch in self.checks if ch.status == "fail"]

    def to_dict(self) -> dict:
        return {ch.tag: {"status": ch.status, "witness": ch.witness, "detail": ch.detail} for ch in self.checks}


def _finite(values, points, what):
    bad = ~np.isfinite(values)
    if np.any(bad):
        p = float(np.asarray(points)[bad][0])
        raise EvaluationError(f"{what} is not finite at rho = {p!r}", witness=p)


def _samples(model: Model, f: ScalarField, lo: float, hi: float, n_grid: int, n_cluster: int):
    """Densities in the open interval (lo, hi) with values, clusters within 1e-6 of both ends."""
    scale = model.rho_bar
    grid = np.linspace(lo, hi, n_grid)[1:-1]
    offs = np.geomspace(1e-6 * scale, 1e-14 * scale, n_cluster)
    offs = offs[offs < 0.5 * (hi - lo)]
    pts = [grid, hi - offs, lo + offs]
    vals = [f(grid), f.near(hi)(offs), f.near(lo)(-offs)]
    pts = np.concatenate(pts)
    vals = np.concatenate(vals)
    order = np.argsort(pts, kind="stable")
    return pts[order], vals[order]


def _first(points, mask):
    idx = np.flatnonzero(mask)
    return None if idx.size == 0 else float(points[idx[0]])


def validate_assumptions(model: Model, n_grid: int = 2048, n_cluster: int = 32, tags=None) -> AssumptionReport:
    """Check each declared tag by sampled sign tests; failures carry a witness density."""
    rb = model.rho_bar
    tags = sorted(model.tags if tags is None else tags)
    D, g = model.diffusivity, model.source
    checks = []

    d_pts, d_vals = _samples(model, D, 0.0, rb, n_grid, n_cluster)
    g_pts, g_vals = _samples(model, g, 0.0, rb, n_grid, n_cluster)
    _finite(d_vals, d_pts, "D")
    _finite(g_vals, g_pts, "g")
    D0, Dt = float(D(0.0)), float(model.D_top(0.0))
    g0, gt = float(g(0.0)), float(model.g_top(0.0))
    for v, p, what in ((D0, 0.0, "D"), (Dt, rb, "D"), (g0, 0.0, "g"), (gt, rb, "g")):
        _finite(np.array([v]), np.array([p]), what)
    dscale = max(1.0, float(np.max(np.abs(d_vals))))
    gscale = max(1.0, float(np.max(np.abs(g_vals))))
    zero_tol = 1e-12

    def positive_D(tag):
        w = _first(d_pts, d_vals <= 0)
        if w is not None:
            return TagCheck(tag, "fail", w, "D must be positive on (0, rho_bar)")
        return None

    for tag in tags:
        if tag in ("D", "D-tilde"):
            res = positive_D(tag)
            if res is None and abs(Dt) > zero_tol * dscale:
                res = TagCheck(tag, "fail", rb, "D(rho_bar) must vanish")
            if res is None and tag == "D-tilde":
                o = D.order_below(rb)
                if o is not None:
                    steep = o[0] < 1
                else:
                    s = np.array([1e-4, 1e-8, 1e-12]) * rb
                    q = model.D_top(s) / s
                    steep = q[2] > 1e2 * q[0]
                if not steep:
                    res = TagCheck(tag, "fail", rb, "D must have infinite slope at rho_bar")
                else:
                    try:
                        ell = ell_limit(model, numeric=True)
                    except PreconditionError as exc:
                        res = TagCheck(tag, "fail", rb, str(exc))
                    else:
                        if ell == -math.inf:
                            res = TagCheck(tag, "fail", rb, "limit of D g/(rho - rho_bar) diverges")
            if res is None:
                smooth = "assumed" if D.builtin_tag == "table" else "pass"
                res = TagCheck(tag, "pass", None, "differentiability " + smooth)
            checks.append(res)
            if D.builtin_tag == "table":
                checks.append(TagCheck(tag + ":C1", "assumed", None, "tabulated D; smoothness unverifiable"))
        elif tag == "D-hat":
            checks.append(positive_D(tag) or TagCheck(tag, "pass"))
        elif tag == "g":
            w = 0.0 if g0 <= 0 else _first(g_pts, g_vals <= 0)
            if w is not None:
                checks.append(TagCheck(tag, "fail", w, "g must be positive on [0, rho_bar)"))
            elif abs(gt) > zero_tol * gscale:
                checks.append(TagCheck(tag, "fail", rb, "g(rho_bar) must vanish"))
            else:
                checks.append(TagCheck(tag, "pass"))
        elif tag == "g0":
            w = _first(g_pts, g_vals <= 0)
            if w is not None:
                checks.append(TagCheck(tag, "fail", w, "g must be positive on (0, rho_bar)"))
            elif abs(g0) > zero_tol * gscale:
                checks.append(TagCheck(tag, "fail", 0.0, "g(0) must vanish"))
            elif abs(gt) > zero_tol * gscale:
                checks.append(TagCheck(tag, "fail", rb, "g(rho_bar) must vanish"))
            else:
                oD, og = D.order_above(0.0), g.order_above(0.0)
                if oD is not None and og is not None:
                    bounded = oD[0] + og[0] >= 1
                else:
                    t = np.array([1e-4, 1e-8, 1e-12]) * rb
                    q = D.near(0.0)(-t) * g.near(0.0)(-t) / t
                    bounded = q[2] <= 10 * q[0] + 1.0
                if bounded:
                    checks.append(TagCheck(tag, "pass"))
                else:
                    checks.append(TagCheck(tag, "fail", 0.0, "D g / rho unbounded near 0"))
        elif tag == "g-hat":
            w = _first(g_pts, g_vals >= 0)
            if w is None and gt >= 0:
                w = rb
            if w is not None:
                checks.append(TagCheck(tag, "fail", w, "g must be negative on (0, rho_bar]"))
            elif abs(g0) > zero_tol * gscale:
                checks.append(TagCheck(tag, "fail", 0.0, "g(0) must vanish"))
            else:
                checks.append(TagCheck(tag, "pass"))
        elif tag == "g1":
            r0 = model.rho0
            if r0 is None:
                checks.append(TagCheck(tag, "fail", None, "rho0 is required"))
                continue
            lp, lv = _samples(model, g, 0.0, r0, n_grid, n_cluster)
            up, uv = _samples(model, g, r0, rb, n_grid, n_cluster)
            _finite(lv, lp, "g")
            _finite(uv, up, "g")
            w = 0.0 if g0 <= 0 else _first(lp, lv <= 0)
            if w is None:
                w = _first(up, uv >= 0)
                if w is None and gt >= 0:
                    w = rb
            if w is not None:
                checks.append(TagCheck(tag, "fail", w, "g must be positive on [0, rho0) and negative on (rho0, rho_bar]"))
            else:
                checks.append(TagCheck(tag, "pass"))
    return AssumptionReport(tuple(checks))


def check_goodg(model: Model, n: int = 64) -> TagCheck:
    """|g(rho)| >= L |rho0 - rho|**alpha near rho0, alpha in (0, 1)."""
    if model.rho0 is None or model.L is None or model.alpha is None:
        return TagCheck("goodg", "fail", None, "needs rho0, L and alpha")
    if not (0 < model.alpha < 1 and model.L > 0):
        return TagCheck("goodg", "fail", None, "needs L > 0 and alpha in (0, 1)")
    r0 = model.rho0
    width = 0.25 * min(r0, model.rho_bar - r0)
    t = np.geomspace(width, 1e-12 * model.rho_bar, n)
    ev = model.source.near(r0)
    for sign in (1.0, -1.0):
        vals = np.abs(ev(sign * t))
        bad = vals < model.L * t**model.alpha * (1 - 1e-12)
        if np.any(bad):
            return TagCheck("goodg", "fail", float(r0 - sign * t[np.flatnonzero(bad)[-1]]), "|g| below L|rho0-rho|^alpha")
    return TagCheck("goodg", "pass")


# ---------------------------------------------------------------------------
# limit ell = lim D(phi) g(phi) / (phi - rho_bar)


def estimate_ell(model: Model, kmin: int = 10, kmax: int = 40):
    """Numerical limit from samples s = 2**-k with extrapolation; returns (value, error)."""
    s = model.rho_bar * 2.0 ** -np.arange(kmin, kmax + 1, dtype=float)
    q = -model.D_top(s) * model.g_top(s) / s
    _finite(q, model.rho_bar - s, "D*g/(phi - rho_bar)")
    floor = 64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(q))))
    d = np.diff(q)
    if np.all(np.abs(d[-8:]) <= floor):
        return float(q[-1]), float(floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = d[1:] / d[:-1]
    tail = ratio[-8:]
    if np.all(np.isfinite(tail)) and np.all(tail > 1.0 + 1e-6) and q[-1] < q[0]:
        return -math.inf, 0.0
    # Aitken's delta-squared: exact for q = ell + C r**k
    denom = d[1:] - d[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        acc = q[2:] - d[1:] ** 2 / denom
    acc = np.where(np.abs(denom) > floor, acc, q[2:])
    value = float(acc[-1])
    err = float(abs(acc[-1] - acc[-2]) + floor)
    if value > 0:  # sign forced by D, g >= 0
        value, err = 0.0, max(err, value)
    return value, err


def ell_limit(model: Model, c: float | None = None, numeric: bool = False) -> float:
    """Extended-real limit of D g / (phi - rho_bar) at rho_bar; ``c`` is accepted for symmetry."""
    oD = model.diffusivity.order_below(model.rho_bar)
    og = model.source.order_below(model.rho_bar)
    if oD is not None and og is not None:
        total = oD[0] + og[0]
        if math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-12):
            return -oD[1] * og[1]
        return 0.0 if total > 1 else -math.inf
    if not numeric:
        raise PreconditionError("vanishing orders of D and g at rho_bar are not declared; enable numeric estimation")
    return estimate_ell(model)[0]


# ---------------------------------------------------------------------------
# model spec files (JSON)


def field_from_spec(spec: Mapping, rho_bar: float) -> ScalarField:
    fam = spec.get("family")
    p = dict(spec.get("params", {}))
    if fam == "constant":
        f = constant(p.get("value", 0.0), rho_bar)
    elif fam == "linear":
        f = linear(p.get("a", 0.0), p.get("b", 0.0), rho_bar)
    elif fam == "power-at-top":
        f = power_at_top(p.get("K", 1.0), p["alpha"], rho_bar)
    elif fam == "power-at-zero":
        f = power_at_zero(p.get("K", 1.0), p["alpha"], rho_bar)
    elif fam == "signed-power":
        f = signed_power(p.get("K", 1.0), p["alpha"], p["center"], rho_bar)
    elif fam == "product":
        f = product(*(field_from_spec(fs, rho_bar) for fs in p["factors"]))
    elif fam == "table":
        f = table(p["x"], p["y"], rho_bar)
    else:
        raise PreconditionError(f"unknown field family {fam!r}")
    declared = spec.get("vanish_order_top")
    if declared is not None:
        if isinstance(declared, Mapping):
            order, scale = float(declared["order"]), declared.get("scale")
        else:
            order, scale = float(declared), None
        if scale is None:
            s = 1e-8 * rho_bar
            scale = float(f.near(rho_bar)(s)) / s**order
        below = dict(f.below)
        below = {k: v for k, v in below.items() if not math.isclose(k, rho_bar)}
        below[rho_bar] = (order, float(scale))
        f = ScalarField(f.func, f.rho_bar, f.deriv, below, f.above, f.builtin_tag, f.params, f.near_factory)
    return f


def model_from_dict(spec: Mapping) -> Model:
    rb = float(spec.get("rho_bar", 1.0))
    flux = spec.get("flux") or {"family": "constant", "params": {"value": 0.0}}
    return Model(
        rho_bar=rb,
        flux_h=field_from_spec(flux, rb),
        diffusivity=field_from_spec(spec["diffusivity"], rb),
        source=field_from_spec(spec["source"], rb),
        rho0=spec.get("rho0"),
        tags=frozenset(spec.get("tags", ())),
        L=spec.get("L"),
        alpha=spec.get("alpha"),
        name=spec.get("name", ""),
    )


def _pw(K, a, where="top"):
    return {"family": "power-at-" + where, "params": {"K": K, "alpha": a}}


_ZERO = {"family": "constant", "params": {"value": 0.0}}

BUILTIN_MODELS = {
    "aronson": {
        "rho_bar": 1.0, "flux": _ZERO, "diffusivity": _pw(2.0, 1.0, "zero"),
        "source": {"family": "product", "params": {"factors": [_pw(1.0, 1.0, "zero"), _pw(1.0, 1.0)]}},
        "tags": ["D-hat", "g0"],
    },
    "powers21": {"rho_bar": 1.0, "flux": _ZERO, "diffusivity": _pw(1.0, 2.0), "source": _pw(1.0, 1.0), "tags": ["D", "g"]},
    "powers22": {"rho_bar": 1.0, "flux": _ZERO, "diffusivity": _pw(1.0, 2.0), "source": _pw(1.0, 2.0), "tags": ["D", "g"]},
    "powers31": {"rho_bar": 1.0, "flux": _ZERO, "diffusivity": _pw(1.0, 3.0), "source": _pw(1.0, 1.0), "tags": ["D", "g"]},
    "strict-linear": {
        "rho_bar": 1.0, "flux": _ZERO, "diffusivity": _pw(1.0, 1.0), "source": _pw(1.0, 1.0),
        "tags": ["D", "g"], "L": 1.0, "alpha": 1.0,
    },
    "nonstrict-sqrt": {
        "rho_bar": 1.0, "flux": _ZERO, "diffusivity": _pw(1.0, 1.0), "source": _pw(1.0, 0.5),
        "tags": ["D", "g"], "L": 1.0, "alpha": 0.5,
    },
    "signchange": {
        "rho_bar": 1.0, "flux": _ZERO, "diffusivity": {"family": "constant", "params": {"value": 1.0}},
        "source": {"family": "signed-power", "params": {"K": 1.0, "alpha": 0.5, "center": 0.5}},
        "tags": ["D-hat", "g1"], "rho0": 0.5, "L": 1.0, "alpha": 0.5,
    },
    "signchange-linear": {
        "rho_bar": 1.0, "flux": _ZERO, "diffusivity": {"family": "constant", "params": {"value": 1.0}},
        "source": {"family": "linear", "params": {"a": 0.5, "b": -1.0}},
        "tags": ["D-hat", "g1"], "rho0": 0.5, "L": 1.0, "alpha": 0.5,
    },
}


def builtin_model(name: str) -> Model:
    if name not in BUILTIN_MODELS:
        raise KeyError(name)
    spec = dict(BUILTIN_MODELS[name])
    spec["name"] = name
    return model_from_dict(spec)


def load_model(path_or_name) -> Model:
    """Read a model spec file, or resolve a built-in model by name."""
    path = os.fspath(path_or_name)
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
        spec.setdefault("name", os.path.splitext(os.path.basename(path))[0])
        return model_from_dict(spec)
    name = os.path.splitext(os.path.basename(path))[0]
    if name in BUILTIN_MODELS:
        return builtin_model(name)
    raise FileNotFoundError(path)
