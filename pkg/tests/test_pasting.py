import math
from dataclasses import replace

import numpy as np
import pytest

from sharpfronts.errors import PreconditionError
from sharpfronts.model import Model, builtin_model, constant, custom, power_at_top
from sharpfronts.pasting import build_pieces, bump_functions, paste, reflect_model, weak_residuals

SQRT6 = math.sqrt(6)


@pytest.fixture(scope="module")
def model():
    return builtin_model("signchange")


@pytest.fixture(scope="module")
def pieces(model):
    return build_pieces(model, 0.0)


def test_reflect_model_examples():
    m = Model(1.0, constant(0.0), custom(lambda r: r * (1 - r)), power_at_top(1.0, 1.0))
    hat = reflect_model(m)
    assert float(hat.D(0.3)) == pytest.approx(0.21, abs=1e-15)
    assert float(hat.g(0.0)) == 0.0


def test_reflect_involution():
    m = builtin_model("signchange")
    twice = reflect_model(reflect_model(m))
    r = np.linspace(0, 1, 64)
    for a, b in ((m.D, twice.D), (m.g, twice.g), (m.h, twice.h)):
        assert np.array_equal(np.asarray(a(r), dtype=float), np.asarray(b(r), dtype=float))


def test_pieces_have_finite_contact(pieces):
    for key in ("phi_1a", "phi_1b", "phi_2a", "phi_2b"):
        p = pieces[key]
        assert math.isfinite(p.xi_bar)
        assert p.left_derivative_at_xi_bar == 0.0 and p.right_derivative_at_xi_bar == 0.0
    # D = 1 and |g| = |rho0 - rho|^(1/2) on both sides: the contact sits at -sqrt(6) from the midpoint
    assert pieces["phi_1a"].xi_bar == pytest.approx(-SQRT6, abs=1e-8)
    assert pieces["phi_1b"].xi_bar == pytest.approx(SQRT6, abs=1e-8)


def test_mirror_pieces(pieces):
    a, b = pieces["phi_1a"], pieces["phi_1b"]
    x = np.linspace(-3, 3, 121)
    assert np.max(np.abs(a.phi_at(x) - b.phi_at(-x))) <= 1e-12


@pytest.mark.parametrize("pattern,increasing", [("phi1", True), ("phi2", False)])
def test_monotone_patterns(pieces, pattern, increasing):
    res = paste(pieces, pattern)
    v = res.joined.phi_values
    d = np.diff(v)
    assert np.all(d >= 0) if increasing else np.all(d <= 0)
    assert v.min() == 0.0 and v.max() == 1.0
    # crosses rho0 once; neighbours of the contact round to rho0 because phi - rho0 ~ (xi - xi_bar)^4
    sg = np.sign(v - 0.5)
    sg = sg[sg != 0]
    assert np.count_nonzero(sg[1:] != sg[:-1]) == 1


def test_phi3_range(pieces):
    res = paste(pieces, "phi3")
    v = res.joined.phi_values
    assert v.min() == 0.0 and v.max() == 0.5
    k = int(np.argmax(v))
    assert np.all(np.diff(v[: k + 1]) >= 0) and np.all(np.diff(v[k:]) <= 0)


def test_phi4_range(pieces):
    v = paste(pieces, "phi4").joined.phi_values
    assert v.min() == 0.5 and v.max() == 1.0


def test_plateau(pieces, model):
    res = paste(pieces, "plateau", plateau_width=0.5)
    j0, j1 = res.junctions
    assert j1 - j0 == pytest.approx(0.5)
    x = np.linspace(j0, j1, 11)
    assert np.all(res.joined.phi_at(x) == 0.5)
    assert res.junction_flux_sup <= 1e-6
    assert np.max(np.abs(weak_residuals(res, model))) <= 1e-5


@pytest.mark.parametrize("pattern", ["phi1", "phi2", "phi3", "phi4"])
def test_junction_and_weak_form(pieces, model, pattern):
    res = paste(pieces, pattern)
    assert res.junction_flux_sup <= 1e-6
    assert np.max(np.abs(weak_residuals(res, model, n=20, seed=7))) <= 1e-5


def test_weak_residual_detects_a_wrong_speed(pieces, model):
    wrong = paste(build_pieces(model, 0.3), "phi1")
    # the c = 0.3 profile tested against the c = 0 weak form
    bad = weak_residuals(replace(wrong, joined=replace(wrong.joined, c=0.0)), model)
    assert np.max(np.abs(bad)) > 1e-3


def test_uniqueness_up_to_shift(pieces):
    a = paste(pieces, "phi1")
    b = paste(pieces, "phi1", base_shift=1.25)
    assert np.max(np.abs(a.joined.xi_grid + 1.25 - b.joined.xi_grid)) <= 1e-12
    assert np.array_equal(a.joined.phi_values, b.joined.phi_values)


def test_nonzero_speed(model):
    res = paste(build_pieces(model, 0.3), "phi1")
    assert res.junction_flux_sup <= 1e-6
    assert np.max(np.abs(weak_residuals(res, model))) <= 1e-5


def test_linear_near_rho0_rejected():
    with pytest.raises(PreconditionError, match="pasting impossible"):
        build_pieces(builtin_model("signchange-linear"), 0.0)


def test_paste_argument_errors(pieces):
    with pytest.raises(PreconditionError):
        paste(pieces, "phi1", plateau_width=-1.0)
    with pytest.raises(PreconditionError):
        paste(pieces, "phi9")
    with pytest.raises(PreconditionError):
        build_pieces(builtin_model("aronson"), 0.0)


def test_bump_functions_are_seeded():
    assert bump_functions(5, 0, 1, seed=3) == bump_functions(5, 0, 1, seed=3)
    assert bump_functions(5, 0, 1, seed=3) != bump_functions(5, 0, 1, seed=4)
    for centre, width in bump_functions(50, -2, 2, seed=1):
        assert -2 <= centre - width and centre + width <= 2
