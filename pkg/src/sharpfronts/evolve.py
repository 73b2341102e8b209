"""Explicit finite-volume evolution of rho_t + f(rho)_x = (D(rho) rho_x)_x + g(rho)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import NumericalError, PreconditionError
from .model import Model


@dataclass(frozen=True)
class Field1D:
    x_grid: np.ndarray
    values: np.ndarray
    time: float = 0.0
    clamp_events: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])


@dataclass(frozen=True)
class _Coefficients:
    """Model data sampled once per run."""

    model: Model
    flux: object
    h_max: float
    D_max: float
    frame: float = 0.0


def _coefficients(model: Model, frame: float = 0.0) -> _Coefficients:
    r = np.linspace(0.0, model.rho_bar, 4097)
    return _Coefficients(
        model=model,
        flux=model.flux_function(),
        h_max=float(np.max(np.abs(model.h(r) - frame))),
        D_max=float(np.max(model.D(r))),
        frame=frame,
    )


def stable_dt(model: Model, dx: float, frame: float = 0.0, co: _Coefficients | None = None) -> float:
    """0.4 min(dx / max|h|, dx^2 / (2 max D + eps))."""
    co = co or _coefficients(model, frame)
    adv = dx / co.h_max if co.h_max > 0 else math.inf
    return 0.4 * min(adv, dx * dx / (2 * co.D_max + 1e-300))


BOUNDARIES = ("dirichlet", "neumann")


def _check_boundary(boundary: str) -> int:
    if boundary not in BOUNDARIES:
        raise PreconditionError(f"unknown boundary {boundary!r}")
    return int(boundary == "neumann")


def _rhs(u: np.ndarray, co: _Coefficients, dx: float, boundary: str = "dirichlet") -> np.ndarray:
    """Spatial operator. Dirichlet: boundary cells get zero rate; Neumann: mirrored ghost cells."""
    m = co.model
    if _check_boundary(boundary):
        return _rhs(np.concatenate([u[:1], u, u[-1:]]), co, dx)[1:-1]
    d = m.D(u)
    Dface = 0.5 * (d[1:] + d[:-1])
    diff = Dface * (u[1:] - u[:-1]) / dx
    f = co.flux(u) - co.frame * u
    speed = m.h(0.5 * (u[1:] + u[:-1])) - co.frame
    F = np.where(speed >= 0, f[:-1], f[1:])  # upwind
    out = np.zeros_like(u)
    out[1:-1] = ((diff[1:] - diff[:-1]) - (F[1:] - F[:-1])) / dx + m.g(u[1:-1])
    return out


def _finish(fd: Field1D, u: np.ndarray, t: float, rho_bar: float) -> Field1D:
    if not np.all(np.isfinite(u)) or u.max() > rho_bar + 1e-3 or u.min() < -1e-3:
        raise NumericalError("instability: values left [0, rho_bar] by more than 1e-3; reduce dt (CFL)")
    bad = (u > rho_bar + 1e-10) | (u < -1e-10)
    n = int(np.count_nonzero(bad))
    if n:
        u = np.clip(u, 0.0, rho_bar)
    return Field1D(fd.x_grid, u, t, fd.clamp_events + n, fd.meta)


def step(fd: Field1D, model: Model, dt: float, frame: float = 0.0, co: _Coefficients | None = None,
         check_cfl: bool = True, boundary: str = "dirichlet") -> Field1D:
    """One forward-Euler step with upwind advection and conservative degenerate diffusion."""
    co = co or _coefficients(model, frame)
    dx = fd.dx
    if check_cfl and dt > stable_dt(model, dx, frame, co) * (1 + 1e-12):
        raise PreconditionError(f"dt={dt:.3g} exceeds the stability bound {stable_dt(model, dx, frame, co):.3g}")
    u = fd.values + dt * _rhs(fd.values, co, dx, boundary)
    return _finish(fd, u, fd.time + dt, model.rho_bar)


# ---------------------------------------------------------------------------
# Runge-Kutta-Legendre super time stepping (explicit, second order)


def rkl2_stages(dt: float, dt_explicit: float) -> int:
    """Smallest s with dt <= dt_explicit (s^2 + s - 2) / 4."""
    s = math.ceil(0.5 * (-1 + math.sqrt(9 + 16 * dt / dt_explicit)))
    return max(s, 2)


@dataclass(frozen=True)
class Tables:
    """D, g, f - frame*rho and h - frame sampled on a uniform density grid for the compiled kernel."""

    D: np.ndarray
    g: np.ndarray
    f: np.ndarray
    h: np.ndarray
    rho_bar: float

    @property
    def upwind(self) -> int:
        if np.all(self.h >= 0):
            return 1
        if np.all(self.h <= 0):
            return -1
        return 0


def make_tables(co: _Coefficients, n: int = 65537) -> Tables:
    m = co.model
    r = np.linspace(0.0, m.rho_bar, n)
    return Tables(
        np.ascontiguousarray(m.D(r), dtype=float),
        np.ascontiguousarray(m.g(r), dtype=float),
        np.ascontiguousarray(co.flux(r) - co.frame * r, dtype=float),
        np.ascontiguousarray(m.h(r) - co.frame, dtype=float),
        float(m.rho_bar),
    )


@njit(cache=True, fastmath=True)
def _rhs_tab(u, out, tD, tg, tf, th, scale, dx, upwind, neumann, d, f):
    """Tabulated spatial operator. upwind: +1 (h >= 0), -1 (h <= 0), 0 (sign varies)."""
    n = u.shape[0]
    m = tD.shape[0] - 1
    for i in range(n):
        x = min(max(u[i] * scale, 0.0), float(m))
        j = min(int(x), m - 1)
        w = x - j
        # (1 - w) a + w b is exact at both table ends
        d[i] = (1.0 - w) * tD[j] + w * tD[j + 1]
        f[i] = (1.0 - w) * tf[j] + w * tf[j + 1]
        out[i] = (1.0 - w) * tg[j] + w * tg[j + 1]
    inv = 1.0 / dx
    lo, hi = (0, n) if neumann else (1, n - 1)
    for i in range(lo, hi):
        im, ip = max(i - 1, 0), min(i + 1, n - 1)
        a = 0.5 * (d[i] + d[ip]) * (u[ip] - u[i]) - 0.5 * (d[im] + d[i]) * (u[i] - u[im])
        if upwind > 0:
            fr, fl = f[i], f[im]
        elif upwind < 0:
            fr, fl = f[ip], f[i]
        else:
            x1 = min(max(0.5 * (u[i] + u[ip]) * scale, 0.0), float(m))
            j1 = min(int(x1), m - 1)
            x0 = min(max(0.5 * (u[im] + u[i]) * scale, 0.0), float(m))
            j0 = min(int(x0), m - 1)
            fr = f[i] if th[j1] + (x1 - j1) * (th[j1 + 1] - th[j1]) >= 0.0 else f[ip]
            fl = f[im] if th[j0] + (x0 - j0) * (th[j0 + 1] - th[j0]) >= 0.0 else f[i]
        out[i] = (a * inv - (fr - fl)) * inv + out[i]
    if not neumann:
        out[0] = 0.0
        out[n - 1] = 0.0


@njit(cache=True)
def _rkl2_kernel(y0, dt, s, tD, tg, tf, th, scale, dx, upwind, neumann):
    n = y0.shape[0]
    m0 = np.empty(n)
    work = np.empty(n)
    d = np.empty(n)
    f = np.empty(n)
    _rhs_tab(y0, m0, tD, tg, tf, th, scale, dx, upwind, neumann, d, f)
    w1 = 4.0 / (s * s + s - 2)
    b = np.empty(s + 1)
    for k in range(s + 1):
        b[k] = 1.0 / 3.0 if k < 3 else (k * k + k - 2) / (2.0 * k * (k + 1))
    y2 = y0.copy()
    y1 = y0 + b[1] * w1 * dt * m0
    y = np.empty(n)
    for k in range(2, s + 1):
        mu = (2 * k - 1) / k * b[k] / b[k - 1]
        nu = -(k - 1) / k * b[k] / b[k - 2]
        mt = mu * w1
        gt = -(1.0 - b[k - 1]) * mt
        _rhs_tab(y1, work, tD, tg, tf, th, scale, dx, upwind, neumann, d, f)
        for i in range(n):
            # increment form: a constant state with zero rate is reproduced exactly
            y[i] = y0[i] + mu * (y1[i] - y0[i]) + nu * (y2[i] - y0[i]) + mt * dt * work[i] + gt * dt * m0[i]
        y2, y1, y = y1, y, y2
    return y1


def rkl2_step(fd: Field1D, model: Model, dt: float, frame: float = 0.0, co: _Coefficients | None = None,
              stages: int | None = None, tables: Tables | None = None, boundary: str = "dirichlet") -> Field1D:
    """One explicit RKL2 step: s forward-Euler-like stages with the Legendre recursion.

    Coefficients come from lookup tables (linear interpolation on 65537 densities).
    """
    co = co or _coefficients(model, frame)
    tables = tables or make_tables(co)
    dx = fd.dx
    dt_e = stable_dt(model, dx, frame, co) / 0.4 * 0.9  # forward-Euler limit with a margin
    s = stages or rkl2_stages(dt, dt_e)
    scale = (len(tables.D) - 1) / tables.rho_bar
    y = _rkl2_kernel(np.ascontiguousarray(fd.values, dtype=float), float(dt), int(s),
                     tables.D, tables.g, tables.f, tables.h, scale, dx, tables.upwind, _check_boundary(boundary))
    return _finish(fd, y, fd.time + dt, model.rho_bar)


# ---------------------------------------------------------------------------


def field_from_profile(profile, x_grid: np.ndarray, shift: float = 0.0) -> Field1D:
    """Initial data rho(x, 0) = phi(x - shift), using the profile's exact evaluator."""
    x = np.asarray(x_grid, dtype=float)
    return Field1D(x, np.asarray(profile.phi_at(x - shift), dtype=float), 0.0)


def uniform_grid(a: float, b: float, dx: float) -> np.ndarray:
    n = int(round((b - a) / dx))
    return a + dx * np.arange(n + 1)


def evolve(fd: Field1D, model: Model, T: float, dt: float | None = None, scheme: str = "explicit",
           frames: int = 40, frame: float = 0.0, boundary: str = "dirichlet") -> list[Field1D]:
    """Advance to time T; returns frames at equally spaced times (including t = 0 and T)."""
    co = _coefficients(model, frame)
    dx = fd.dx
    if scheme == "explicit":
        dt = dt or stable_dt(model, dx, frame, co)
        advance = lambda f, h: step(f, model, h, frame, co, boundary=boundary)  # noqa: E731
    elif scheme == "rkl2":
        dt = dt or min(0.05, T / frames)
        tables = make_tables(co)
        advance = lambda f, h: rkl2_step(f, model, h, frame, co, tables=tables, boundary=boundary)  # noqa: E731
    else:
        raise PreconditionError(f"unknown scheme {scheme!r}")
    times = np.linspace(fd.time, fd.time + T, frames + 1)
    out = [replace(fd, meta={**fd.meta, "frame_speed": frame})]
    cur = out[0]
    for target in times[1:]:
        while cur.time < target - 1e-12 * max(1.0, abs(target)):
            h = min(dt, target - cur.time)
            cur = advance(cur, h)
        cur = replace(cur, time=float(target))
        out.append(cur)
    return out


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpeedFit:
    speed: float
    residual: float
    times: np.ndarray
    positions: np.ndarray


def crossing(fd: Field1D, level: float) -> float:
    """Sub-grid position where the field crosses level; the crossing must be unique."""
    u = fd.values - level
    sg = np.sign(u)
    nz = np.flatnonzero(sg != 0)
    flips = np.flatnonzero(sg[nz][1:] != sg[nz][:-1])
    if len(flips) != 1:
        raise NumericalError("non-monotone front" if len(flips) > 1 else "level not crossed")
    i, k = nz[flips[0]], nz[flips[0] + 1]
    x = fd.x_grid
    return float(x[i] + (x[k] - x[i]) * u[i] / (u[i] - u[k]))


def measure_speed(trajectory, level: float) -> SpeedFit:
    """Least-squares slope of the level crossing over the second half of the trajectory."""
    t = np.array([f.time for f in trajectory])
    x = np.array([crossing(f, level) for f in trajectory])
    frame = trajectory[0].meta.get("frame_speed", 0.0)
    x = x + frame * t
    half = t >= t[0] + 0.5 * (t[-1] - t[0])
    A = np.column_stack([t[half], np.ones(int(half.sum()))])
    coef, *_ = np.linalg.lstsq(A, x[half], rcond=None)
    res = x[half] - A @ coef
    return SpeedFit(float(coef[0]), float(np.sqrt(np.mean(res**2))), t, x)


def sup_drift(a: Field1D, b: Field1D) -> float:
    return float(np.max(np.abs(a.values - b.values)))
