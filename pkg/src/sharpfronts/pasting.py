"""Traveling waves through an interior zero rho0 of g, by pasting classical semi-wavefronts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PreconditionError
from .model import Model, check_goodg, reflect_field
from .profile import ProfileSolution, flip, profile_from_top, reflect_density, reversed_flow, shift
from .zsolver import SolverOptions

PATTERNS = ("phi1", "phi2", "phi3", "phi4", "plateau")
# (left piece, right piece) joined at their common contact point
_ROLES = {
    "phi1": ("phi_1b", "phi_2a"),
    "phi2": ("phi_2b", "phi_1a"),
    "phi3": ("phi_1b", "phi_1a"),
    "phi4": ("phi_2b", "phi_2a"),
    "plateau": ("phi_2b", "phi_1a"),
}


def reflect_model(model: Model) -> Model:
    """(D, g, h) -> (D(rho_bar - .), -g(rho_bar - .), h(rho_bar - .)) on the same interval."""
    return reflect_density(model)


def _restrict(model: Model, top: float, name: str) -> Model:
    """Same fields on [0, top], with top playing the role of rho_bar."""
    fields = [replace(f, rho_bar=top) for f in (model.flux_h, model.diffusivity, model.source)]
    return Model(top, *fields, rho0=None, tags=frozenset({"D-hat", "g"}), L=model.L, alpha=model.alpha, name=name)


def lower_model(model: Model) -> Model:
    """The problem on [0, rho0]."""
    return _restrict(model, model.rho0, model.name + ":lower")


def upper_model(model: Model) -> Model:
    """The problem on [rho0, rho_bar] written for psi = rho_bar - phi on [0, rho_bar - rho0]."""
    rb = model.rho_bar
    full = Model(
        rb,
        reflect_field(model.flux_h, rb, 1.0),
        reflect_field(model.diffusivity, rb, 1.0),
        reflect_field(model.source, rb, -1.0),
        name=model.name + ":upper",
    )
    return _restrict(full, rb - model.rho0, full.name)


@dataclass(frozen=True)
class Pieces:
    c: float
    rho_bar: float
    rho0: float
    phi_1a: ProfileSolution
    phi_1b: ProfileSolution
    phi_2a: ProfileSolution
    phi_2b: ProfileSolution

    def __getitem__(self, key: str) -> ProfileSolution:
        return getattr(self, key)


def _lift(p: ProfileSolution, rb: float, direction: str) -> ProfileSolution:
    """psi -> rho_bar - psi."""
    base_phi, base_flux = p.phi_fn, p.flux_fn
    return replace(
        p,
        phi_values=rb - p.phi_values,
        rho_bar=rb,
        direction=direction,
        left_derivative_at_xi_bar=0.0 - p.left_derivative_at_xi_bar,
        right_derivative_at_xi_bar=0.0 - p.right_derivative_at_xi_bar,
        phi_fn=lambda x: rb - base_phi(x),
        flux_fn=lambda x: -base_flux(x),
    )


def _from_and_to(sub: Model, c: float, opts, n: int):
    a = profile_from_top(sub, c, opts, n=n)
    b = replace(flip(profile_from_top(reversed_flow(sub), -c, opts, n=n), "to-top"), c=c)
    for p in (a, b):
        if not math.isfinite(p.xi_bar):
            raise PreconditionError("pasting impossible: a piece is strict at rho0 (goodg violated or alpha >= 1)")
    return a, b


def build_pieces(model: Model, c: float, opts: SolverOptions | None = None, n: int = 4097) -> Pieces:
    if "g1" not in model.tags or model.rho0 is None:
        raise PreconditionError("missing tag g1 (with rho0)")
    if model.alpha is None or model.L is None:
        raise PreconditionError("goodg metadata (L, alpha) required")
    if not 0 < model.alpha < 1:
        raise PreconditionError("pasting impossible: goodg needs alpha in (0, 1)")
    rb, r0 = model.rho_bar, model.rho0
    chk = check_goodg(model)
    if chk.status == "fail":
        raise PreconditionError(f"pasting impossible: goodg violated ({chk.detail})", witness=chk.witness)
    a1, b1 = _from_and_to(lower_model(model), c, opts, n)
    pa, pb = _from_and_to(upper_model(model), c, opts, n)
    return Pieces(
        c=float(c),
        rho_bar=rb,
        rho0=r0,
        phi_1a=replace(a1, direction="from-rho0"),
        phi_1b=replace(b1, direction="to-rho0"),
        phi_2a=_lift(pa, rb, "from-rho0"),
        phi_2b=_lift(pb, rb, "to-rho0"),
    )


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PasteResult:
    pattern: str
    plateau_width: float
    pieces: tuple
    joined: ProfileSolution
    junction_flux_sup: float
    junctions: tuple
    expected_range: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def sidecar(self) -> dict:
        d = self.joined.sidecar()
        d.update(pattern=self.pattern, plateau_width=self.plateau_width, junction_flux_sup=self.junction_flux_sup,
                 junctions=list(self.junctions))
        return d


def _expected_range(pattern: str, rb: float, r0: float):
    if pattern == "phi3":
        return (0.0, r0)
    if pattern == "phi4":
        return (r0, rb)
    return (0.0, rb)


def _curve(p: ProfileSolution, left: bool):
    """Grid of the non-constant part of a piece: xi <= xi_bar for a left piece, >= for a right one."""
    x, y = p.xi_grid, p.phi_values
    lo, hi = min(p.xi_bar, p.varpi), max(p.xi_bar, p.varpi)
    m = (x >= lo) & (x <= hi)
    return x[m], y[m]


def paste(pieces: Pieces, pattern: str, plateau_width: float = 0.0, base_shift: float = 0.0,
          junction_points: int = 5) -> PasteResult:
    if pattern not in PATTERNS:
        raise PreconditionError(f"unknown pattern {pattern!r}")
    if plateau_width < 0 or not math.isfinite(plateau_width):
        raise PreconditionError("plateau_width must be a finite real >= 0")
    if pattern != "plateau" and plateau_width != 0.0:
        raise PreconditionError("plateau_width applies to the plateau pattern only")
    lname, rname = _ROLES[pattern]
    left, right = pieces[lname], pieces[rname]
    if left.c != right.c:
        raise PreconditionError("pieces built at different speeds")
    for p in (left, right):
        if not math.isfinite(p.xi_bar):
            raise PreconditionError("pasting impossible: contact point is not finite")
    rb, r0 = pieces.rho_bar, pieces.rho0
    j_left = float(base_shift)
    j_right = j_left + float(plateau_width)
    L = shift(left, j_left - left.xi_bar)
    R = shift(right, j_right - right.xi_bar)
    xl, yl = _curve(L, True)
    xr, yr = _curve(R, False)
    # the contact nodes are exact
    yl = np.where(xl == L.xi_bar, r0, yl)
    yr = np.where(xr == R.xi_bar, r0, yr)
    parts_x, parts_y = [xl], [yl]
    if plateau_width > 0:
        h = float(np.median(np.diff(xl)))
        k = max(int(math.ceil(plateau_width / h)), 1)
        xp = np.linspace(j_left, j_right, k + 1)[1:-1]
        parts_x.append(xp)
        parts_y.append(np.full(xp.shape, r0))
    parts_x.append(xr[xr > j_left] if plateau_width == 0 else xr)
    parts_y.append(yr[xr > j_left] if plateau_width == 0 else yr)
    grid = np.concatenate(parts_x)
    values = np.concatenate(parts_y)
    if np.any(np.diff(grid) <= 0):
        raise PreconditionError("pieces overlap after alignment")
    lo_end, hi_end = float(grid[0]), float(grid[-1])

    def phi_fn(x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, r0)
        a, b = x < j_left, x > j_right
        out[a] = L.phi_at(x[a])
        out[b] = R.phi_at(x[b])
        return out

    def flux_fn(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        a, b = x < j_left, x > j_right
        out[a] = L.flux_at(x[a])
        out[b] = R.flux_at(x[b])
        return out

    joined = ProfileSolution(
        xi_grid=grid,
        phi_values=values,
        xi_bar=j_left,
        varpi=hi_end,
        kind="classical-nonstrict",
        direction="pasted",
        c=left.c,
        left_derivative_at_xi_bar=0.0,
        right_derivative_at_xi_bar=0.0,
        rho_bar=rb,
        phi_fn=phi_fn,
        flux_fn=flux_fn,
        meta={"pattern": pattern, "domain": (lo_end, hi_end)},
    )
    sup = 0.0
    for j in {j_left, j_right}:
        idx = np.argsort(np.abs(grid - j), kind="stable")[:junction_points]
        sup = max(sup, float(np.max(np.abs(flux_fn(grid[idx])))))
    return PasteResult(
        pattern=pattern,
        plateau_width=float(plateau_width),
        pieces=(pieces.phi_1a, pieces.phi_1b, pieces.phi_2a, pieces.phi_2b),
        joined=joined,
        junction_flux_sup=sup,
        junctions=(j_left, j_right) if plateau_width > 0 else (j_left,),
        expected_range=_expected_range(pattern, rb, r0),
    )


# ---------------------------------------------------------------------------
# weak form


def bump_functions(n: int, lo: float, hi: float, seed: int = 0, around=None):
    """Fixed-seed polynomial bumps (1 - u^2)^4 with random centres and widths."""
    rng = np.random.default_rng(seed)
    span = hi - lo
    out = []
    for _ in range(n):
        if around is not None:
            centre = around + rng.uniform(-0.1, 0.1) * span
            width = rng.uniform(0.15, 0.4) * span
        else:
            centre = rng.uniform(lo + 0.2 * span, hi - 0.2 * span)
            width = rng.uniform(0.05, 0.2) * span
        width = min(width, centre - lo, hi - centre)
        out.append((float(centre), float(width)))
    return out


def weak_residual(p: ProfileSolution, model: Model, centre: float, width: float, nodes: int = 64,
                  panels: int = 256) -> float:
    """int (D phi' - f(phi) + c phi) psi' - g(phi) psi over the support of psi."""
    f = model.flux_function()
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(centre - width, centre + width, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    x = (0.5 * (b - a) * xg + 0.5 * (a + b)).ravel()
    w = (0.5 * (b - a) * wg).ravel()
    u = (x - centre) / width
    psi = (1 - u**2) ** 4
    dpsi = -8 * u * (1 - u**2) ** 3 / width
    phi = p.phi_at(x)
    flux = p.flux_at(x)
    integrand = (flux - f(phi) + p.c * phi) * dpsi - model.g(phi) * psi
    return float(np.sum(w * integrand))


def weak_residuals(result: PasteResult, model: Model, n: int = 20, seed: int = 0) -> np.ndarray:
    lo, hi = result.joined.meta["domain"]
    out = []
    for j in result.junctions:
        for centre, width in bump_functions(n, lo, hi, seed, around=j):
            out.append(weak_residual(result.joined, model, centre, width))
    return np.array(out)
