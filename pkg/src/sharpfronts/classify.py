"""Sharp versus classical behaviour at rho_bar and strict versus non-strict monotonicity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericalError
from .model import Model
from .zsolver import ZSolution

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def log_quad(fun, a: float, b: float, panels: int = 1) -> float:
    """Integral of fun(s) ds over [a, b] (0 < a < b) with Gauss-Legendre in log s."""
    if b <= a:
        return 0.0
    edges = np.linspace(math.log(a), math.log(b), panels + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    u = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
    s = np.exp(u)
    vals = fun(s) * s
    return float(np.sum(0.5 * (hi[:, 0] - lo[:, 0]) * (vals @ _GL_W)))


def inverse_flux(model: Model, zsol: ZSolution):
    """s -> D(rho_bar - s) / |z(rho_bar - s)|, i.e. |d xi / d phi|."""
    return lambda s: model.D_top(s) / np.abs(zsol.at_s(s))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    kind: str  # "sharp", "classical" or "indeterminate"
    front_slope: float
    monotonicity: str = "indeterminate"  # "strict", "non-strict" or "indeterminate"
    rationale_tag: str = ""
    numeric_slope: float | None = None
    xi_bar: float | None = None  # with xi(rho_bar/2) = 0
    confidence: str = "normal"
    exponents: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind == "classical" and self.front_slope != 0:
            raise ValueError("classical profiles have zero front slope")
        if self.kind == "sharp" and not self.front_slope < 0:
            raise ValueError("sharp decreasing fronts have negative front slope")

    def sidecar(self) -> dict:
        return {
            "kind": self.kind,
            "front_slope": self.front_slope,
            "monotonicity": self.monotonicity,
            "xi_bar": "-inf" if self.xi_bar == -math.inf else self.xi_bar,
            "rationale_tag": self.rationale_tag,
            "numeric_slope": self.numeric_slope,
            "confidence": self.confidence,
        }


def _top_order(f, rho_bar):
    o = f.order_below(rho_bar)
    return None if o is None else (float(o[0]), float(o[1]))


def diffusivity_slope_at_top(model: Model) -> float:
    """D'(rho_bar), possibly -inf."""
    o = _top_order(model.diffusivity, model.rho_bar)
    if o is not None:
        a, K = o
        if a > 1:
            return 0.0
        if a == 1:
            return -K
        return -math.inf if a < 1 and K > 0 else 0.0
    if model.diffusivity.deriv is not None:
        return float(model.diffusivity.derivative(model.rho_bar))
    s = 1e-6 * model.rho_bar
    return float(-(model.D_top(s) - model.D_top(0.0)) / s)


def gap_order(model: Model, c: float):
    """Vanishing order gamma of h - c at rho_bar (inf if h - c vanishes identically near rho_bar)."""
    params = model.flux_h.params
    if params.get("family") == "constant":
        return math.inf, 0.0
    if params.get("family") == "linear":
        b = params["b"]
        return (1.0, -b) if b != 0 else (math.inf, 0.0)
    s = np.array([1e-4, 5e-5]) * model.rho_bar
    d = model.h_top(s) - c
    if np.all(np.abs(d) <= 1e-14 * max(1.0, abs(c))):
        return math.inf, 0.0
    gamma = math.log(abs(d[0]) / abs(d[1])) / math.log(2.0)
    return gamma, float(d[1] / s[1] ** gamma)


def numeric_front_slope(model: Model, zsol: ZSolution, s0: float = 1e-4) -> float:
    """Three-point extrapolation of z/D as phi -> rho_bar; -inf for geometric growth."""
    s = np.array([s0, s0 / 2, s0 / 4]) * model.rho_bar
    q = zsol.at_s(s) / model.D_top(s)
    d1, d2 = q[1] - q[0], q[2] - q[1]
    scale = max(1.0, float(np.max(np.abs(q))))
    if abs(d1) <= 1e-13 * scale and abs(d2) <= 1e-13 * scale:
        return float(q[2])
    r = d2 / d1 if d1 != 0 else math.inf
    if r >= 1.0 - 1e-9 and d2 < 0:
        return -math.inf
    if r <= 0 or r >= 1:
        return float(q[2])
    return float(q[2] + d2 * r / (1 - r))


def exponent_rule(alpha: float, beta: float, gamma: float):
    """Formal leading-order rule for c = h(rho_bar), D'(rho_bar) = 0; returns (delta, branch)."""
    d1 = 0.5 * (alpha + beta + 1)
    if gamma >= alpha + beta - d1:
        return d1, "energy"
    return gamma + 1, "advection"


def classify_at_top(model: Model, c: float, zsol: ZSolution | None = None) -> Classification:
    """Sharp or classical behaviour at rho_bar and the front slope lim z/D."""
    rb = model.rho_bar
    hb = model.h_at_top
    numeric = numeric_front_slope(model, zsol) if zsol is not None else None
    if float(model.D_top(0.0)) > 1e-14:
        return _check(Classification("classical", 0.0, rationale_tag="diffusivity positive at rho_bar",
                                     numeric_slope=numeric))
    Ddot = diffusivity_slope_at_top(model)
    if ("D-tilde" in model.tags and "D" not in model.tags) or Ddot == -math.inf:
        return _check(Classification("classical", 0.0, rationale_tag="steep diffusivity: always classical",
                                     numeric_slope=numeric))
    tol = 1e-12 * max(1.0, abs(c), abs(hb))
    if c < hb - tol:
        slope = (hb - c) / Ddot if Ddot < 0 else -math.inf
        return _check(Classification("sharp", slope, "non-strict", "c below h(rho_bar)", numeric))
    if c > hb + tol:
        return _check(Classification("classical", 0.0, rationale_tag="c above h(rho_bar)", numeric_slope=numeric))
    if Ddot < 0:
        return _check(Classification("classical", 0.0, rationale_tag="c equals h(rho_bar), D slope negative",
                                     numeric_slope=numeric))
    oD = _top_order(model.diffusivity, rb)
    og = _top_order(model.source, rb)
    if oD is None or og is None:
        return Classification("indeterminate", numeric if numeric is not None else math.nan,
                              rationale_tag="borderline speed without vanishing orders",
                              numeric_slope=numeric, confidence="reduced")
    alpha, KD = oD
    beta, Kg = og
    gamma, Kh = gap_order(model, c)
    delta, branch = exponent_rule(alpha, beta, gamma)
    d = delta - alpha
    exps = {"alpha": alpha, "beta": beta, "gamma": gamma, "delta": delta}
    tag = f"formal exponent rule ({branch} balance)"
    if abs(d) <= 1e-12:
        if branch == "energy":
            slope = -math.sqrt(2 * KD * Kg / (alpha + beta + 1)) / KD
        else:
            slope = -Kh / ((gamma + 1) * KD)
        if not slope < 0:
            slope = numeric if numeric is not None and numeric < 0 else -math.inf
        return _check(Classification("sharp", slope, "non-strict", tag, numeric, exponents=exps))
    if d < 0:
        return _check(Classification("sharp", -math.inf, "non-strict", tag, numeric, exponents=exps))
    return _check(Classification("classical", 0.0, rationale_tag=tag, numeric_slope=numeric, exponents=exps))


def _check(cl: Classification) -> Classification:
    """Downgrade confidence when the numerical limit disagrees with the symbolic verdict."""
    q = cl.numeric_slope
    if q is None:
        return cl
    if cl.front_slope == -math.inf:
        ok = q == -math.inf or q < -1e3
    elif cl.front_slope == 0:
        ok = abs(q) <= 1e-2
    else:
        ok = abs(q - cl.front_slope) <= 1e-3 * abs(cl.front_slope)
    return cl if ok else replace(cl, confidence="reduced", rationale_tag=cl.rationale_tag + "; numeric limit disagrees")


# ---------------------------------------------------------------------------
# monotonicity


@dataclass(frozen=True)
class Monotonicity:
    verdict: str  # "strict", "non-strict", "indeterminate"
    xi_bar: float  # -inf for strict, nan when indeterminate
    integral: float  # I at the smallest eps
    tail: float
    increments: tuple
    theorem: str = ""
    confidence: str = "normal"


def _strict_clause(model: Model, c: float) -> bool:
    """g <= L (rho_bar - rho) near rho_bar and c > h(rho_bar)."""
    if model.L is None or not c > model.h_at_top:
        return False
    s = np.geomspace(1e-12, 0.5, 200) * model.rho_bar
    return bool(np.all(model.g_top(s) <= model.L * s * (1 + 1e-12)))


def _nonstrict_clause(model: Model, c: float) -> bool:
    """g >= L (rho_bar - rho)**alpha with alpha in (0, 1) and c >= h(rho_bar)."""
    a, L = model.alpha, model.L
    if a is None or L is None or not (0 < a < 1) or not c >= model.h_at_top:
        return False
    s = np.geomspace(1e-12, 0.5, 200) * model.rho_bar
    return bool(np.all(model.g_top(s) >= L * s**a * (1 - 1e-12)))


def integral_test(model: Model, zsol: ZSolution, eps_min: float = 1e-10):
    """Increments of I(eps) = int_{rho_bar/2}^{rho_bar-eps} D/|z| over successive halvings of eps."""
    rb = model.rho_bar
    f = inverse_flux(model, zsol)
    eps = [0.5 * rb]
    while eps[-1] / 2 >= eps_min * rb * (1 - 1e-12):
        eps.append(eps[-1] / 2)
    inc = np.array([log_quad(f, eps[k + 1], eps[k]) for k in range(len(eps) - 1)])
    return np.array(eps), inc


def classify_monotonicity(model: Model, c: float, zsol: ZSolution, eps_min: float = 1e-10,
                          strict_increment: float = 0.5, tail_tol: float = 1e-4) -> Monotonicity:
    """Strict (xi_bar = -inf) or non-strict (finite xi_bar) attainment of rho_bar."""
    eps, inc = integral_test(model, zsol, eps_min)
    total = float(np.sum(inc))
    last = inc[-5:]
    strict_num = bool(np.all(last >= strict_increment))
    r = inc[-1] / inc[-2] if inc[-2] > 0 else math.inf
    tail = inc[-1] * r / (1 - r) if 0 <= r < 1 else math.inf
    nonstrict_num = (not strict_num) and tail <= tail_tol and bool(np.all(np.diff(inc[-5:]) <= 0))
    theorem = ""
    expected = None
    if _strict_clause(model, c):
        theorem, expected = "sub-linear source bound, c above h(rho_bar)", "strict"
    elif _nonstrict_clause(model, c):
        theorem, expected = "power lower bound on source, exponent below 1", "non-strict"
    if strict_num:
        verdict = "strict"
    elif nonstrict_num:
        verdict = "non-strict"
    else:
        verdict = "indeterminate"
    if expected is not None and verdict not in ("indeterminate", expected):
        raise NumericalError(f"monotonicity conflict: integral test says {verdict}, theorem says {expected}")
    confidence = "normal"
    if verdict == "indeterminate" and expected is not None:
        verdict = expected
        confidence = "reduced"
    if abs(c - model.h_at_top) <= 1e-12 * max(1.0, abs(c)):
        confidence = "reduced"
    if verdict == "strict":
        xi_bar = -math.inf
    elif verdict == "non-strict":
        xi_bar = -(total + (tail if math.isfinite(tail) else 0.0))
    else:
        xi_bar = math.nan
    return Monotonicity(verdict, xi_bar, total, float(tail), tuple(inc.tolist()), theorem, confidence)


def classify(model: Model, c: float, zsol: ZSolution) -> Classification:
    """Behaviour at rho_bar together with the monotonicity verdict."""
    cl = classify_at_top(model, c, zsol)
    mono = classify_monotonicity(model, c, zsol)
    verdict, xi_bar = mono.verdict, mono.xi_bar
    confidence = cl.confidence if mono.confidence == "normal" else "reduced"
    if cl.kind == "sharp" and verdict != "non-strict":
        # a sharp front reaches rho_bar at a finite point
        verdict = "non-strict"
        confidence = "reduced"
        if not math.isfinite(xi_bar):
            xi_bar = -mono.integral
    tag = cl.rationale_tag + ("; " + mono.theorem if mono.theorem else "")
    return replace(cl, monotonicity=verdict, xi_bar=xi_bar, rationale_tag=tag, confidence=confidence)
