import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from conftest import power_model
from sharpfronts.errors import PreconditionError
from sharpfronts.model import builtin_model
from sharpfronts.zsolver import (
    SolverOptions,
    bracket_check,
    closed_form_z,
    critical_speed,
    ode_residual,
    solve_z,
    upper_bracket,
    zdot_at_endpoint,
)


@pytest.fixture(scope="module")
def z21():
    return solve_z(power_model(2, 1), 0.0)


def test_zdot_examples():
    assert zdot_at_endpoint(0.0, 1.0, 0.0) == 0.0
    assert zdot_at_endpoint(0.0, -1.0, 0.0) == 1.0
    assert zdot_at_endpoint(0.3, 0.3, -1.0) == 1.0


def test_zdot_rejects_minus_infinity():
    with pytest.raises(PreconditionError, match="inapplicable"):
        zdot_at_endpoint(0.0, 0.0, -math.inf)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(-5, 5), ell=st.floats(-5, -1e-6))
def test_zdot_solves_the_quadratic(a, ell):
    # m^2 - (h - c) m + ell = 0 with the positive root
    m = zdot_at_endpoint(a, 0.0, ell)
    assert m > 0
    assert abs(m * m - a * m + ell) <= 1e-9 * max(1.0, m * m)


def _oracle(phi):
    """-sqrt(2 int_phi^1 (1 - s)^3 ds) by independent adaptive quadrature."""
    return -math.sqrt(2 * quad(lambda s: (1 - s) ** 3, phi, 1.0, epsabs=1e-15, epsrel=1e-13)[0])


def test_closed_form_values(z21):
    assert float(z21(0.5)) == pytest.approx(-0.25 / math.sqrt(2), abs=1e-9)
    assert float(z21(1.0)) == 0.0
    assert z21.z0 == pytest.approx(-1 / math.sqrt(2), abs=1e-9)
    assert _oracle(0.5) == pytest.approx(-0.176777, abs=1e-6)
    assert _oracle(0.0) == pytest.approx(-0.707107, abs=1e-6)


def test_closed_form_against_quadrature(z21):
    phi = np.linspace(0.0, 1 - 1e-4, 401)
    ref = np.array([_oracle(p) for p in phi])
    assert np.max(np.abs(z21(phi) - ref)) <= 1e-6
    assert np.max(np.abs(closed_form_z(power_model(2, 1), phi) - ref)) <= 1e-10


@pytest.mark.parametrize("name,c", [("powers21", 0.0), ("powers21", 0.5), ("aronson", 0.5), ("aronson", 1.0),
                                    ("strict-linear", 1.0), ("nonstrict-sqrt", 1.0), ("powers22", 0.0)])
def test_ode_residual_and_sign(name, c):
    m = builtin_model(name)
    opts = SolverOptions()
    z = solve_z(m, c, opts)
    r = ode_residual(m, c, z.s, z.zs)
    assert np.max(r) <= 10 * opts.rel_tol
    assert np.all(z.zs < 0)
    assert z.values[-1] == 0.0


@pytest.mark.parametrize("name,c", [("powers21", -1.0), ("strict-linear", -1.0), ("strict-linear", 1.0)])
def test_endpoint_slope(name, c):
    m = builtin_model(name)
    z = solve_z(m, c)
    q = [float(z(1 - d)) / (-d) for d in (1e-3, 1e-4, 1e-5)]
    if z.zdot_at_top == 0.0:
        assert abs(q[-1]) <= 1e-3
    else:
        assert abs(q[-1] - z.zdot_at_top) <= 1e-3 * abs(z.zdot_at_top)


def test_borderline_speed_uses_energy_seed():
    z = solve_z(builtin_model("powers22"), 0.0)
    assert z.zdot_at_top == 0.0
    assert z.z0 == pytest.approx(-math.sqrt(2 / 5), abs=1e-9)


def test_aronson_shooting_dichotomy():
    m = builtin_model("aronson")
    above = solve_z(m, 1.2)
    below = solve_z(m, 0.3)
    assert abs(above.z0) <= above.threshold
    assert below.z0 < -below.threshold


def test_aronson_exact_wave_at_speed_one():
    z = solve_z(builtin_model("aronson"), 1.0)
    p = np.linspace(0, 1, 501)
    assert np.max(np.abs(z(p) + p * (1 - p))) <= 1e-8


def test_independent_integrator_agrees():
    m = builtin_model("aronson")
    c = 1.2
    # quasi-equilibrium start: z ~ -k s with k^2 + c k - 2 = 0
    k = (-c + math.sqrt(c * c + 8)) / 2
    s0 = 1e-7
    ref = solve_ivp(lambda p, z: [-c - 2 * p * p * (1 - p) / z[0]], [1 - s0, 0.05], [-k * s0], method="Radau",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    p = np.linspace(0.1, 0.9, 81)
    assert np.max(np.abs(solve_z(m, c)(p) - ref.sol(p)[0])) <= 1e-7


def test_critical_speed_bracket_and_history():
    m = builtin_model("aronson")
    cs = critical_speed(m, 0.5, 2.0, tol=1e-4)
    assert cs.c_hi - cs.c_lo <= 1e-4
    assert cs.c_star == pytest.approx(0.5 * (cs.c_lo + cs.c_hi))
    assert all(len(row) == 3 for row in cs.history)
    # expansion when the initial bracket misses
    cs2 = critical_speed(m, 1.5, 2.0, tol=1e-3)
    assert abs(cs2.c_star - cs.c_star) <= 2e-3


def test_critical_speed_rejects_empty_bracket():
    with pytest.raises(PreconditionError):
        critical_speed(builtin_model("aronson"), 1.0, 1.0)


def test_brackets_nonstrict_sqrt():
    m = builtin_model("nonstrict-sqrt")
    z = solve_z(m, 1.0)
    rep = bracket_check(z, m, 1.0)
    assert rep.upper.status == "pass" and rep.lower.status == "pass"
    doubled = upper_bracket(z, m, 1.0, eps=2 * rep.upper.parameter)
    assert doubled.status == "pass"


def test_lower_bracket_not_applicable_for_linear_source():
    m = builtin_model("strict-linear")
    rep = bracket_check(solve_z(m, 1.0), m, 1.0)
    assert rep.lower.status == "not applicable"
    assert rep.ok


@settings(max_examples=8, deadline=None)
@given(c=st.floats(-1.0, 1.0))
def test_comparison_in_speed(c):
    # larger speed gives larger z for the same model
    m = builtin_model("powers21")
    lo, hi = solve_z(m, c), solve_z(m, c + 0.25)
    p = np.linspace(0.01, 0.99, 99)
    assert np.all(hi(p) >= lo(p) - 1e-8)


@pytest.mark.parametrize("c", [-3.79202934731754e-274, -1e-12])
def test_speed_just_below_threshold(c):
    # the endpoint slope underflows; the solution must approach the c = 0 one
    z = solve_z(builtin_model("powers21"), c)
    assert z.z0 == pytest.approx(-1 / math.sqrt(2), abs=1e-9)


def test_deterministic(z21):
    again = solve_z(power_model(2, 1), 0.0)
    assert np.array_equal(again.s, z21.s) and np.array_equal(again.zs, z21.zs)


def test_eps_top_recorded():
    z = solve_z(builtin_model("powers21"), 0.0, SolverOptions(eps_top=1e-4))
    assert z.seed_offset == 1e-4
    assert z.sidecar()["seed_offset"] == 1e-4


def test_bad_options():
    with pytest.raises(PreconditionError):
        SolverOptions(rel_tol=0.0)
    with pytest.raises(PreconditionError):
        solve_z(builtin_model("powers21"), 0.0, SolverOptions(eps_top=0.5))
