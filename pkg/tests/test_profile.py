import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import power_model
from sharpfronts.classify import classify
from sharpfronts.errors import PreconditionError
from sharpfronts.model import Model, builtin_model, constant, linear, power_at_top, power_at_zero
from sharpfronts.profile import (
    profile_residual,
    reconstruct,
    reversed_flow,
    semi_wavefront,
    xi_of_phi,
)
from sharpfronts.zsolver import solve_z

R2 = math.sqrt(2)


@pytest.fixture(scope="module")
def p21():
    return semi_wavefront(power_model(2, 1), 0.0)


def test_xi_table_closed_form():
    m = power_model(2, 1)
    tab = xi_of_phi(solve_z(m, 0.0), m)
    assert float(tab.xi_at_s(np.array([0.25]))[0]) == pytest.approx(-0.25 * R2, abs=1e-9)
    assert float(tab.xi_at_s(np.array([0.5]))[0]) == 0.0
    assert tab.xi_bottom == pytest.approx(0.5 * R2, abs=1e-9)
    assert tab.xi_top == pytest.approx(-0.5 * R2, abs=1e-9)


def test_from_top_profile_is_linear(p21):
    x = p21.xi_grid
    inside = (x > p21.xi_bar) & (x < p21.varpi)
    assert np.max(np.abs(p21.phi_values[inside] - (0.5 - x[inside] / R2))) <= 1e-9
    assert p21.kind == "sharp"
    assert p21.right_derivative_at_xi_bar == pytest.approx(-1 / R2, rel=1e-12)
    assert float(p21.phi_at(np.array([0.0]))[0]) == 0.5


def test_to_top_mirror(p21):
    q = semi_wavefront(power_model(2, 1), 0.0, "to-top")
    x = np.linspace(-0.6, 0.6, 41)
    assert np.max(np.abs(q.phi_at(x) - np.clip(0.5 + x / R2, 0, 1))) <= 1e-9
    assert q.xi_bar == pytest.approx(-p21.xi_bar, abs=1e-12)
    assert q.left_derivative_at_xi_bar == pytest.approx(1 / R2, rel=1e-12)


def test_direction_duality():
    base = power_model(2, 1)
    m = Model(1.0, linear(0.0, 0.3), base.diffusivity, base.source, tags=base.tags)
    c = 0.1
    a = semi_wavefront(m, c, "from-top")
    b = semi_wavefront(reversed_flow(m), -c, "to-top")
    x = np.linspace(a.xi_bar, a.varpi, 101)
    assert np.max(np.abs(a.phi_at(x) - b.phi_at(-x))) <= 1e-12


def test_from_zero_sharp_when_c_below_h0():
    m = Model(1.0, constant(0.0), power_at_zero(1.0, 2.0), power_at_zero(-1.0, 1.0),
              tags=frozenset({"D-hat", "g-hat"}))
    p = semi_wavefront(m, -0.5, "from-zero")
    assert p.kind == "sharp"
    assert math.isfinite(p.xi_bar)
    v = p.phi_at(np.array([p.xi_bar - 0.1, p.xi_bar, 0.0]))
    assert v[0] == 0.0 and v[1] == 0.0 and v[2] == 0.5
    assert np.all(np.diff(p.phi_values) >= 0)


def test_missing_tag_rejected():
    m = Model(1.0, constant(0.0), constant(1.0), power_at_top(1.0, 1.0), tags=frozenset({"g"}))
    with pytest.raises(PreconditionError, match="tag D"):
        semi_wavefront(m, 0.0)
    with pytest.raises(PreconditionError, match="g-hat"):
        semi_wavefront(power_model(2, 1), 0.0, "from-zero")


@settings(max_examples=15, deadline=None)
@given(xi_star=st.floats(-3.0, 3.0))
def test_translation_covariance(xi_star, p21):
    q = semi_wavefront(power_model(2, 1), 0.0, xi_star=xi_star)
    assert np.array_equal(q.phi_values, p21.phi_values)
    assert np.array_equal(q.xi_grid, p21.xi_grid + xi_star)
    assert float(q.phi_at(np.array([xi_star]))[0]) == 0.5


@pytest.mark.parametrize("name,c", [("powers21", 0.0), ("powers21", 0.5), ("powers22", 0.0), ("aronson", 1.0),
                                    ("strict-linear", 1.0), ("nonstrict-sqrt", 1.0), ("strict-linear", -1.0)])
def test_profile_ode_residual(name, c):
    m = builtin_model(name)
    p = semi_wavefront(m, c)
    r = profile_residual(p, m)
    assert r.size > 0
    assert np.max(r) <= 1e-6


@pytest.mark.parametrize("name,c", [("powers21", 0.0), ("nonstrict-sqrt", 1.0), ("strict-linear", 1.0),
                                    ("aronson", 1.0)])
def test_attainment_of_top(name, c):
    p = semi_wavefront(builtin_model(name), c)
    at_top = p.phi_values >= p.rho_bar
    if math.isfinite(p.xi_bar):
        assert np.array_equal(at_top, p.xi_grid <= p.xi_bar)
    else:
        assert not np.any(at_top)


def test_monotone_decreasing_and_bounded():
    for name, c in (("powers21", 0.3), ("aronson", 1.2), ("nonstrict-sqrt", 2.0)):
        p = semi_wavefront(builtin_model(name), c)
        assert np.all(np.diff(p.phi_values) <= 0)
        assert p.phi_values.min() >= 0 and p.phi_values.max() <= p.rho_bar


def test_aronson_exact_profile():
    p = semi_wavefront(builtin_model("aronson"), 1.0)
    x = p.xi_grid[p.xi_grid < p.varpi]
    assert np.max(np.abs(p.phi_values[: len(x)] - (1 - 0.5 * np.exp(x / 2)))) <= 1e-8
    assert p.xi_bar == -math.inf
    assert p.varpi == pytest.approx(2 * math.log(2), abs=1e-8)


def test_truncation_warning_when_source_positive_at_zero():
    m = builtin_model("powers21")  # g(0) = 1 > 0
    z = solve_z(m, 0.0)
    p = reconstruct(z, m, classify(m, 0.0, z), window=(-1.0, 2.0))
    assert p.xi_grid[-1] == pytest.approx(p.varpi)
    assert p.meta["warnings"]


def test_window_must_contain_normalization_point():
    m = builtin_model("powers21")
    z = solve_z(m, 0.0)
    with pytest.raises(PreconditionError):
        reconstruct(z, m, classify(m, 0.0, z), window=(0.1, 0.5))


def test_sidecar_and_rows(p21):
    side = p21.sidecar()
    assert set(side) == {"xi_bar", "varpi", "kind", "direction", "c"}
    assert p21.rows().shape == (len(p21.xi_grid), 2)
    strict = semi_wavefront(builtin_model("strict-linear"), 1.0)
    assert strict.sidecar()["xi_bar"] == "-inf"
