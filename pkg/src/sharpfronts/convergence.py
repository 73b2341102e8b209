"""Semi-wavefronts for g_n = g0 + bump/n converging to the wavefront of g0."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classify import classify
from .errors import PreconditionError
from .model import Model, ScalarField, add, power_at_top
from .profile import ProfileSolution, reconstruct, xi_of_phi
from .zsolver import SolverOptions, ZSolution, critical_speed, solve_z


def _probe(rho_bar: float, n: int = 2048, cluster: int = 32) -> np.ndarray:
    x = np.linspace(0.0, rho_bar, n + 1)
    t = rho_bar * np.logspace(-12, -6, cluster)
    return np.unique(np.concatenate([x, t, rho_bar - t]))


def build_family(g0: ScalarField, n: int, bump: ScalarField | None = None) -> ScalarField:
    """g_n = g0 + bump/n."""
    if int(n) != n or n < 1:
        raise PreconditionError("n must be a positive integer")
    rb = g0.rho_bar
    bump = bump or power_at_top(1.0, 1.0, rb)
    r = _probe(rb)
    b = np.asarray(bump(r), dtype=float)
    inner = r < rb
    if np.any(b[inner] <= 0):
        w = float(r[inner][np.argmax(b[inner] <= 0)])
        raise PreconditionError(f"bump must be positive on [0, rho_bar): fails at rho={w:.17g}", witness=w)
    if abs(float(bump(rb))) > 1e-14:
        raise PreconditionError("bump must vanish at rho_bar", witness=rb)
    return add(g0, bump, scale_b=1.0 / n)


def family_model(model0: Model, n: int, bump: ScalarField | None = None) -> Model:
    tags = (set(model0.tags) - {"g0"}) | {"g"}
    return model0.with_source(build_family(model0.source, n, bump), tags=frozenset(tags),
                              name=f"{model0.name}:n={n}")


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ordering:
    ok: bool
    min_gap: float  # min of z1 - z2 on the merged grid
    strict_interior: bool
    grid: np.ndarray = field(repr=False)
    z1: np.ndarray = field(repr=False)
    z2: np.ndarray = field(repr=False)


def _merged(a: ZSolution, b: ZSolution) -> np.ndarray:
    s = np.unique(np.concatenate([a.s, b.s]))
    return s[(s > 0) & (s < a.rho_bar)]


def compare_z(model_1: Model, c1: float, model_2: Model, c2: float, opts: SolverOptions | None = None,
              check_critical: bool = True, slack: float = 1e-8) -> Ordering:
    """Check z1 >= z2 when g1 <= g2 and c2 <= c1."""
    rb = model_1.rho_bar
    r = _probe(rb)
    d = np.asarray(model_1.g(r) - model_2.g(r))
    if np.any(d > 1e-14):
        w = float(r[np.argmax(d > 1e-14)])
        raise PreconditionError(f"need g1 <= g2: fails at rho={w:.17g}", witness=w)
    if c2 > c1:
        raise PreconditionError("need c2 <= c1")
    if check_critical and abs(float(model_1.g(0.0))) <= 1e-14:
        cs = critical_speed(model_1, c1 - 1.0, c1, tol=1e-4, opts=opts)
        if c1 < cs.c_lo:
            raise PreconditionError(f"need c1 >= c1* ~ {cs.c_star:.6g}")
    z1 = solve_z(model_1, c1, opts)
    z2 = z1 if (model_2 is model_1 and c2 == c1) else solve_z(model_2, c2, opts)
    s = _merged(z1, z2)
    a, b = z1.at_s(s), z2.at_s(s)
    gap = a - b
    return Ordering(
        ok=bool(np.all(gap >= -slack)),
        min_gap=float(gap.min()),
        strict_interior=bool(np.all(gap > 0)),
        grid=rb - s,
        z1=a,
        z2=b,
    )


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    c: float
    c0_star: float
    n_values: tuple
    z_sup_errors: tuple
    phi_c0_errors: tuple
    phi_c1_errors: tuple
    ordering_checks: tuple  # profile ordering: phi_n > phi_0 left of 0, < right of 0
    z_monotone: bool  # z_n <= z_m <= z_0 for n < m (within slack)
    sign_changes: tuple  # number of sign changes of phi_n - phi_0 on the window
    xi_interval: tuple
    window: tuple
    notes: tuple = ()

    @property
    def converged(self) -> bool:
        return (
            self.z_sup_errors[-1] <= 1e-3
            and self.phi_c1_errors[-1] <= 1e-2
            and all(self.ordering_checks)
            and self.z_monotone
        )

    def rows(self):
        return [
            (n, ze, e0, e1, ok)
            for n, ze, e0, e1, ok in zip(self.n_values, self.z_sup_errors, self.phi_c0_errors,
                                         self.phi_c1_errors, self.ordering_checks)
        ]

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "c0_star": self.c0_star,
            "n_values": list(self.n_values),
            "z_sup_errors": list(self.z_sup_errors),
            "phi_c0_errors": list(self.phi_c0_errors),
            "phi_c1_errors": list(self.phi_c1_errors),
            "ordering_checks": list(self.ordering_checks),
            "z_monotone": self.z_monotone,
            "sign_changes": list(self.sign_changes),
            "xi_interval": list(self.xi_interval),
            "window": list(self.window),
            "converged": self.converged,
            "notes": list(self.notes),
        }


def _profile(model: Model, c: float, opts, n_grid: int) -> tuple[ZSolution, ProfileSolution]:
    z = solve_z(model, c, opts)
    cl = classify(model, c, z)
    tab = xi_of_phi(z, model)
    return z, (cl, tab)


def _count_sign_changes(d: np.ndarray, floor: float = 1e-12) -> int:
    sg = np.sign(d[np.abs(d) > floor])
    return int(np.count_nonzero(sg[1:] != sg[:-1]))


def run_convergence(model0: Model, n_list=(1, 2, 4, 8, 16, 32), c: float = 1.0, bump: ScalarField | None = None,
                    xi_interval=None, opts: SolverOptions | None = None, z_window=(0.1, 0.9),
                    phi_window=(0.01, 0.99), n_grid: int = 4097, c0_star: float | None = None,
                    cstar_tol: float = 1e-4) -> ConvergenceReport:
    rb = model0.rho_bar
    if "g0" not in model0.tags:
        raise PreconditionError("model0 needs a monostable source (tag g0)")
    if c0_star is None:
        cs = critical_speed(model0, c - 1.0, c, tol=cstar_tol, opts=opts)
        c0_star, c0_lo = cs.c_star, cs.c_lo
    else:
        c0_lo = c0_star
    if c < c0_lo:
        raise PreconditionError("wavefront does not exist below critical speed")
    notes = []
    z0 = solve_z(model0, c, opts)
    cl0 = classify(model0, c, z0)
    p0 = reconstruct(z0, model0, cl0, n=n_grid)
    # bounded window where phi_0 stays inside [0.01, 0.99] rho_bar
    tab0 = p0.meta["table"]
    lo_xi = float(tab0.xi_at_s(np.array([(1 - phi_window[1]) * rb]))[0])
    hi_xi = float(tab0.xi_at_s(np.array([(1 - phi_window[0]) * rb]))[0])
    if not math.isfinite(p0.xi_bar) or not math.isfinite(p0.varpi):
        notes.append("J is a half-line; errors are sampled on a truncated window")
    if xi_interval is None:
        span = hi_xi - lo_xi
        xi_interval = (lo_xi + 0.2 * span, hi_xi - 0.2 * span)
    a, b = xi_interval
    xs = np.linspace(a, b, 2001)
    phi0 = p0.phi_at(xs)
    d0 = p0.flux_at(xs) / model0.D(phi0)
    s_z = np.linspace((1 - z_window[1]) * rb, (1 - z_window[0]) * rb, 2001)
    zz0 = z0.at_s(s_z)
    cmp_s = _merged(z0, z0)
    win = np.linspace(lo_xi, hi_xi, 4001)
    base_win = p0.phi_at(win)

    z_err, e0, e1, order, changes = [], [], [], [], []
    previous = None
    monotone = True
    for n in n_list:
        mn = family_model(model0, n, bump)
        zn = solve_z(mn, c, opts)
        pn = reconstruct(zn, mn, classify(mn, c, zn), n=n_grid)
        z_err.append(float(np.max(np.abs(zn.at_s(s_z) - zz0))))
        phin = pn.phi_at(xs)
        e0.append(float(np.max(np.abs(phin - phi0))))
        e1.append(float(np.max(np.abs(pn.flux_at(xs) / mn.D(phin) - d0))))
        zc = zn.at_s(cmp_s)
        if np.any(zc > z0.at_s(cmp_s) + 1e-8):
            monotone = False
        if previous is not None and np.any(previous > zc + 1e-8):
            monotone = False
        previous = zc
        # ordering: phi_n > phi_0 for xi < 0, phi_n < phi_0 on (0, varpi_n)
        hi_n = min(hi_xi, pn.varpi)
        left = win[(win < 0)]
        right = win[(win > 0) & (win < hi_n)]
        ok = bool(np.all(pn.phi_at(left) > p0.phi_at(left)) and np.all(pn.phi_at(right) < p0.phi_at(right)))
        order.append(ok)
        diff = pn.phi_at(win) - base_win
        changes.append(_count_sign_changes(diff[win < hi_n]))
    return ConvergenceReport(
        c=float(c),
        c0_star=float(c0_star),
        n_values=tuple(int(n) for n in n_list),
        z_sup_errors=tuple(z_err),
        phi_c0_errors=tuple(e0),
        phi_c1_errors=tuple(e1),
        ordering_checks=tuple(order),
        z_monotone=monotone,
        sign_changes=tuple(changes),
        xi_interval=(float(a), float(b)),
        window=(lo_xi, hi_xi),
        notes=tuple(notes),
    )
