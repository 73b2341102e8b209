"""Wave profiles phi(xi) reconstructed from z through xi(phi) = int D/z."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .classify import Classification, classify
from .errors import NumericalError, PreconditionError
from .model import Model, reflect_field
from .zsolver import SolverOptions, ZSolution, solve_z

DIRECTIONS = ("from-top", "to-top", "from-zero", "to-zero")
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class XiTable:
    """Monotone table of xi against s = rho_bar - phi, with xi(rho_bar/2) = 0."""

    rho_bar: float
    s: np.ndarray  # increasing
    xi: np.ndarray  # increasing in s
    dxi_dt: np.ndarray  # d xi / d log(s) = s D / |z|
    xi_top: float  # limit at s -> 0 (xi_bar), -inf if the integral diverges
    xi_bottom: float  # limit at phi -> 0 (varpi), +inf if it diverges
    top_power: float  # q in D/|z| ~ s**q next to rho_bar
    bottom_power: float  # q in D/|z| ~ phi**q next to 0

    @property
    def phi(self) -> np.ndarray:
        return self.rho_bar - self.s

    def spline(self):
        return CubicHermiteSpline(np.log(self.s), self.xi, self.dxi_dt)

    def xi_at_s(self, s):
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape)
        inside = (s >= self.s[0]) & (s <= self.s[-1])
        out[inside] = self.spline()(np.log(s[inside]))
        lo = s < self.s[0]
        if np.any(lo):
            q = self.top_power
            if math.isfinite(self.xi_top):
                out[lo] = self.xi_top + (self.xi[0] - self.xi_top) * (s[lo] / self.s[0]) ** (q + 1)
            else:
                g0 = self.dxi_dt[0]  # s D/|z| at s0
                with np.errstate(divide="ignore"):
                    out[lo] = self.xi[0] + (g0 * np.log(s[lo] / self.s[0]) if abs(q + 1) < 1e-9
                                            else g0 / (q + 1) * ((s[lo] / self.s[0]) ** (q + 1) - 1))
        hi = s > self.s[-1]
        if np.any(hi):
            p = np.maximum(self.rho_bar - s[hi], 0.0)
            pf = self.rho_bar - self.s[-1]
            if math.isfinite(self.xi_bottom):
                out[hi] = self.xi_bottom - (self.xi_bottom - self.xi[-1]) * (p / pf) ** (self.bottom_power + 1)
            else:
                out[hi] = math.inf
        return out

    def s_at_xi(self, x):
        """Inverse of xi_at_s on (xi_top, xi_bottom) by bisection on the Hermite table."""
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, np.nan)
        sp = self.spline()
        inside = (x >= self.xi[0]) & (x <= self.xi[-1])
        if np.any(inside):
            xv = x[inside]
            k = np.clip(np.searchsorted(self.xi, xv, side="right") - 1, 0, len(self.xi) - 2)
            t = np.log(self.s)
            lo, hi = t[k].copy(), t[k + 1].copy()
            exact_lo = xv == self.xi[k]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                up = sp(mid) > xv
                hi = np.where(up, mid, hi)
                lo = np.where(up, lo, mid)
            res = np.exp(0.5 * (lo + hi))
            res[exact_lo] = self.s[k[exact_lo]]
            out[inside] = res
        top = x < self.xi[0]
        if np.any(top):
            q, xt = self.top_power, self.xi_top
            if math.isfinite(xt):
                ratio = np.clip((x[top] - xt) / (self.xi[0] - xt), 0.0, None)
                out[top] = self.s[0] * ratio ** (1.0 / (q + 1))
            else:
                g0 = self.dxi_dt[0]
                d = x[top] - self.xi[0]
                if abs(q + 1) < 1e-9:
                    out[top] = self.s[0] * np.exp(d / g0)
                else:
                    out[top] = self.s[0] * np.clip(1 + d * (q + 1) / g0, 0.0, None) ** (1.0 / (q + 1))
        bot = x > self.xi[-1]
        if np.any(bot):
            pf = self.rho_bar - self.s[-1]
            if math.isfinite(self.xi_bottom):
                ratio = np.clip((self.xi_bottom - x[bot]) / (self.xi_bottom - self.xi[-1]), 0.0, None)
                out[bot] = self.rho_bar - pf * ratio ** (1.0 / (self.bottom_power + 1))
            else:
                out[bot] = self.rho_bar - pf
        return out


def _power(v1, v2, x1, x2):
    return math.log(v2 / v1) / math.log(x2 / x1)


def xi_of_phi(zsol: ZSolution, model: Model) -> XiTable:
    """Cumulative quadrature of xi(phi) = int_{rho_bar/2}^{phi} D/z on the solver grid."""
    rb = model.rho_bar
    s = np.unique(np.concatenate([zsol.s, [0.5 * rb]]))
    t = np.log(s)
    if np.any(zsol.at_s(s) >= 0):
        raise NumericalError("invalid z: not negative in the interior")
    f = lambda ss: ss * model.D_top(ss) / np.abs(zsol.at_s(ss))  # noqa: E731
    a, b = t[:-1, None], t[1:, None]
    nodes = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    vals = f(np.exp(nodes))
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-integrable singularity in D/z")
    pieces = 0.5 * (b[:, 0] - a[:, 0]) * (vals @ _GL_W)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    half = int(np.flatnonzero(s == 0.5 * rb)[0])
    xi = cum - cum[half]
    xi[half] = 0.0
    dxi = f(s)
    # tail toward rho_bar: D/|z| ~ s**q
    j = min(int(np.searchsorted(s, 4 * s[0])), len(s) - 1)
    q_top = _power(dxi[0] / s[0], dxi[j] / s[j], s[0], s[j])
    xi_top = xi[0] - dxi[0] / (q_top + 1) if q_top > -1 + 1e-6 else -math.inf
    # tail toward 0: D/|z| ~ phi**q
    phi = rb - s
    pf = phi[-1]
    i = int(np.searchsorted(-phi, -4 * pf))
    i = min(max(i, 0), len(s) - 2)
    w_end = dxi[-1] / s[-1]
    w_i = dxi[i] / s[i]
    if w_end == 0 or w_i == 0 or phi[i] == pf:
        q_bot = 0.0
    else:
        q_bot = _power(w_end, w_i, pf, phi[i])
    xi_bottom = xi[-1] + w_end * pf / (q_bot + 1) if q_bot > -1 + 1e-6 else math.inf
    return XiTable(rb, s, xi, dxi, float(xi_top), float(xi_bottom), float(q_top), float(q_bot))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfileSolution:
    xi_grid: np.ndarray
    phi_values: np.ndarray
    xi_bar: float
    varpi: float
    kind: str  # "sharp", "classical-strict", "classical-nonstrict"
    direction: str
    c: float
    left_derivative_at_xi_bar: float
    right_derivative_at_xi_bar: float
    rho_bar: float = 1.0
    phi_fn: Callable | None = field(default=None, compare=False, repr=False)
    flux_fn: Callable | None = field(default=None, compare=False, repr=False)
    meta: dict = field(default_factory=dict, compare=False)

    def phi_at(self, xi):
        return self.phi_fn(np.asarray(xi, dtype=float))

    def flux_at(self, xi):
        """D(phi) phi' at xi."""
        return self.flux_fn(np.asarray(xi, dtype=float))

    def interpolant(self) -> PchipInterpolator:
        return PchipInterpolator(self.xi_grid, self.phi_values, extrapolate=False)

    def rows(self):
        return np.column_stack([self.xi_grid, self.phi_values])

    def sidecar(self) -> dict:
        def ext(x):
            if x == -math.inf:
                return "-inf"
            if x == math.inf:
                return "inf"
            return x

        return {
            "xi_bar": ext(self.xi_bar),
            "varpi": ext(self.varpi),
            "kind": self.kind,
            "direction": self.direction,
            "c": self.c,
        }


def _uniform_grid(left: float, right: float, n: int, extra=()) -> np.ndarray:
    """Uniform grid with node 0 (when inside) and the given extra nodes inserted."""
    h = (right - left) / (n - 1)
    k0 = math.ceil(left / h - 1e-9)
    k1 = math.floor(right / h + 1e-9)
    grid = h * np.arange(k0, k1 + 1, dtype=float)
    pts = [grid]
    for x in extra:
        if math.isfinite(x) and left <= x <= right:
            pts.append(np.array([x]))
    grid = np.unique(np.concatenate(pts))
    # drop nodes closer than h/100 to an inserted node
    keep = np.ones(len(grid), bool)
    for x in extra:
        if math.isfinite(x):
            close = (np.abs(grid - x) < 1e-2 * h) & (grid != x) & (grid != 0.0)
            keep &= ~close
    return grid[keep]


def reconstruct(zsol: ZSolution, model: Model, classification: Classification, window=None,
                n: int = 4097, xi_star: float = 0.0, table: XiTable | None = None) -> ProfileSolution:
    """Decreasing profile from rho_bar with phi(xi_star) = rho_bar/2."""
    rb = model.rho_bar
    table = table or xi_of_phi(zsol, model)
    mono = classification.monotonicity
    if mono == "indeterminate":
        mono = "non-strict" if math.isfinite(table.xi_top) else "strict"
    if mono == "strict":
        xi_bar = -math.inf
    else:
        xi_bar = table.xi_top if math.isfinite(table.xi_top) else float(classification.xi_bar)
    tab = replace(table, xi_top=xi_bar) if xi_bar != table.xi_top else table
    varpi = tab.xi_bottom
    g_zero = "g0" in model.tags or abs(float(model.g(0.0))) <= 1e-14
    warnings = []
    if window is None:
        a = xi_bar if math.isfinite(xi_bar) else float(tab.xi_at_s(np.array([1e-4 * rb]))[0])
        b = varpi if math.isfinite(varpi) else float(tab.xi_at_s(np.array([rb * (1 - 1e-4)]))[0])
        span = b - a
        left = a - 0.1 * span if math.isfinite(xi_bar) else a
        right = b + 0.1 * span if (math.isfinite(varpi) and g_zero) else b
    else:
        left, right = (float(w) - xi_star for w in window)
        if not left <= 0 <= right:
            raise PreconditionError("window must contain the normalization point")
    if math.isfinite(varpi) and right > varpi and not g_zero:
        warnings.append("window truncated at varpi: g(0) > 0")
        right = varpi
    if not math.isfinite(varpi) and right > tab.xi[-1]:
        right = float(tab.xi[-1])
    grid = _uniform_grid(left, right, n, extra=(xi_bar, varpi))

    front = classification.front_slope if classification.kind == "sharp" else 0.0

    def phi_fn(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        top = x <= xi_bar
        bot = x >= varpi
        mid = ~(top | bot)
        out[top] = rb
        out[bot] = 0.0
        out[mid] = rb - tab.s_at_xi(x[mid])
        out[x == 0.0] = 0.5 * rb
        return out

    def flux_fn(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        mid = (x > xi_bar) & (x < varpi)
        out[mid] = zsol.at_s(tab.s_at_xi(x[mid]))
        return out

    values = phi_fn(grid)
    if mono == "strict" and np.any(values >= rb):
        values = np.minimum(values, np.nextafter(rb, 0))
    kind = "sharp" if classification.kind == "sharp" else ("classical-strict" if mono == "strict" else "classical-nonstrict")
    finite = math.isfinite(xi_bar)
    prof = ProfileSolution(
        xi_grid=grid,
        phi_values=values,
        xi_bar=xi_bar,
        varpi=varpi,
        kind=kind,
        direction="from-top",
        c=zsol.c,
        left_derivative_at_xi_bar=0.0,
        right_derivative_at_xi_bar=front if finite else 0.0,
        rho_bar=rb,
        phi_fn=phi_fn,
        flux_fn=flux_fn,
        meta={"warnings": warnings, "classification": classification, "table": tab, "zsol": zsol},
    )
    return shift(prof, xi_star) if xi_star != 0.0 else prof


# ---------------------------------------------------------------------------
# orientation transforms


def shift(p: ProfileSolution, xi_star: float) -> ProfileSolution:
    """Translate so that phi(xi_star) = rho_bar/2; values are untouched."""
    if xi_star == 0.0:
        return p
    base_phi, base_flux = p.phi_fn, p.flux_fn
    return replace(
        p,
        xi_grid=p.xi_grid + xi_star,
        xi_bar=p.xi_bar + xi_star,
        varpi=p.varpi + xi_star,
        phi_fn=lambda x: base_phi(np.asarray(x, dtype=float) - xi_star),
        flux_fn=lambda x: base_flux(np.asarray(x, dtype=float) - xi_star),
        meta={**p.meta, "xi_star": p.meta.get("xi_star", 0.0) + xi_star},
    )


def flip(p: ProfileSolution, direction: str) -> ProfileSolution:
    """xi -> -xi."""
    base_phi, base_flux = p.phi_fn, p.flux_fn
    return replace(
        p,
        xi_grid=-p.xi_grid[::-1],
        phi_values=p.phi_values[::-1].copy(),
        xi_bar=-p.xi_bar,
        varpi=-p.varpi,
        direction=direction,
        left_derivative_at_xi_bar=0.0 - p.right_derivative_at_xi_bar,
        right_derivative_at_xi_bar=0.0 - p.left_derivative_at_xi_bar,
        phi_fn=lambda x: base_phi(-np.asarray(x, dtype=float)),
        flux_fn=lambda x: -base_flux(-np.asarray(x, dtype=float)),
    )


def mirror_density(p: ProfileSolution, direction: str) -> ProfileSolution:
    """phi -> rho_bar - phi."""
    rb = p.rho_bar
    base_phi, base_flux = p.phi_fn, p.flux_fn
    return replace(
        p,
        phi_values=rb - p.phi_values,
        direction=direction,
        left_derivative_at_xi_bar=0.0 - p.left_derivative_at_xi_bar,
        right_derivative_at_xi_bar=0.0 - p.right_derivative_at_xi_bar,
        phi_fn=lambda x: rb - base_phi(x),
        flux_fn=lambda x: -base_flux(x),
    )


def reversed_flow(model: Model) -> Model:
    """h -> -h (paired with c -> -c this is the reflection x -> -x)."""
    return replace(model, flux_h=reflect_negate(model.flux_h), name=model.name + ":reversed")


def reflect_negate(f):
    from .model import add, constant

    return add(constant(0.0, f.rho_bar), f, scale_b=-1.0)


def reflect_density(model: Model) -> Model:
    """rho -> rho_bar - rho: D(rho_bar - rho), -g(rho_bar - rho), h(rho_bar - rho)."""
    rb = model.rho_bar
    tagmap = {"D-hat": "D-hat", "g-hat": "g", "g": "g-hat", "g1": "g1"}
    tags = frozenset(tagmap[t] for t in model.tags if t in tagmap)
    if "D-hat" in model.tags and abs(float(model.D(0.0))) <= 1e-14:
        tags |= {"D"}
    return Model(
        rho_bar=rb,
        flux_h=reflect_field(model.flux_h, rb, 1.0),
        diffusivity=reflect_field(model.diffusivity, rb, 1.0),
        source=reflect_field(model.source, rb, -1.0),
        rho0=None if model.rho0 is None else rb - model.rho0,
        tags=tags,
        L=model.L,
        alpha=model.alpha,
        name=model.name + ":reflected",
    )


def _require(model: Model, direction: str):
    tags = model.tags
    if direction in ("from-top", "to-top"):
        if not tags & {"D", "D-tilde", "D-hat"}:
            raise PreconditionError("missing tag D (or D-tilde) for a front at rho_bar")
        if not tags & {"g", "g0"}:
            raise PreconditionError("missing tag g for a front at rho_bar")
    else:
        if not tags & {"D-hat", "D"}:
            raise PreconditionError("missing tag D-hat for a front at 0")
        if "g-hat" not in tags:
            raise PreconditionError("missing tag g-hat for a front at 0")


def profile_from_top(model: Model, c: float, opts: SolverOptions | None = None, window=None,
                     n: int = 4097, xi_star: float = 0.0) -> ProfileSolution:
    z = solve_z(model, c, opts)
    cl = classify(model, c, z)
    return reconstruct(z, model, cl, window=window, n=n, xi_star=xi_star)


def semi_wavefront(model: Model, c: float, direction: str = "from-top", opts: SolverOptions | None = None,
                   window=None, n: int = 4097, xi_star: float = 0.0) -> ProfileSolution:
    """Semi-wavefront profile in the requested orientation, with phi(xi_star) = rho_bar/2."""
    if direction not in DIRECTIONS:
        raise PreconditionError(f"unknown direction {direction!r}")
    _require(model, direction)
    flip_win = None if window is None else (-window[1], -window[0])
    if direction == "from-top":
        return profile_from_top(model, c, opts, window, n, xi_star)
    if direction == "to-top":
        base = profile_from_top(reversed_flow(model), -c, opts, flip_win, n)
        return shift(replace(flip(base, "to-top"), c=c), xi_star)
    hat = reflect_density(model)
    if direction == "from-zero":
        base = profile_from_top(hat, c, opts, window, n)
        return shift(mirror_density(base, "from-zero"), xi_star)
    base = profile_from_top(reversed_flow(hat), -c, opts, flip_win, n)
    return shift(replace(mirror_density(flip(base, "to-zero"), "to-zero"), c=c), xi_star)


def profile_residual(p: ProfileSolution, model: Model) -> np.ndarray:
    """|phi' - z/D| / max(1, |z/D|) with centred differences, at grid points with 0 < phi < rho_bar."""
    x, y = p.xi_grid, p.phi_values
    dl, dr = x[1:-1] - x[:-2], x[2:] - x[1:-1]
    # second-order centred difference on a non-uniform grid
    d = (y[2:] * dl**2 - y[:-2] * dr**2 + y[1:-1] * (dr**2 - dl**2)) / (dl * dr * (dl + dr))
    xm, ym = x[1:-1], y[1:-1]
    inner = (ym > 0) & (ym < p.rho_bar) & (y[:-2] > 0) & (y[:-2] < p.rho_bar) & (y[2:] > 0) & (y[2:] < p.rho_bar)
    ratio = p.flux_at(xm[inner]) / model.D(ym[inner])
    return np.abs(d[inner] - ratio) / np.maximum(1.0, np.abs(ratio))
