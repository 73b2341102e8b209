import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import power_model
from sharpfronts.errors import EvaluationError, PreconditionError
from sharpfronts.model import (
    BUILTIN_MODELS,
    Model,
    builtin_model,
    constant,
    custom,
    ell_limit,
    estimate_ell,
    estimate_vanishing_order,
    linear,
    load_model,
    model_from_dict,
    power_at_top,
    power_at_zero,
    reflect_field,
    table,
    validate_assumptions,
)


def test_powers_model_passes_all_tags():
    rep = validate_assumptions(power_model(2, 1))
    assert rep.ok
    assert rep["D"].status == "pass" and rep["g"].status == "pass"


def test_aronson_passes_g0_and_fails_g_at_zero():
    m = builtin_model("aronson")
    assert validate_assumptions(m, tags=["g0"]).ok
    rep = validate_assumptions(m, tags=["g"])
    assert not rep.ok
    assert rep["g"].witness == 0.0


def test_linear_sign_change_passes_g1():
    m = Model(1.0, constant(0.0), constant(1.0), linear(0.5, -1.0), rho0=0.5, tags=frozenset({"g1"}))
    assert validate_assumptions(m).ok


def test_negative_diffusivity_names_witness():
    m = Model(1.0, constant(0.0), linear(-0.1, 1.0), power_at_top(1.0, 1.0), tags=frozenset({"D", "g"}))
    rep = validate_assumptions(m)
    bad = rep.failures()[0]
    assert bad.tag == "D"
    assert bad.witness is not None and float(m.D(bad.witness)) <= 0


def test_non_finite_value_raises_evaluation_error():
    f = custom(lambda r: np.where(np.asarray(r) > 0.5, np.nan, 1.0))
    m = Model(1.0, constant(0.0), f, power_at_top(1.0, 1.0), tags=frozenset({"D", "g"}))
    with pytest.raises(EvaluationError):
        validate_assumptions(m)


@pytest.mark.parametrize("alpha,beta,K,expected", [
    (2.0, 1.0, 1.0, 0.0),
    (0.5, 0.5, 1.0, -1.0),
    (0.25, 0.5, 1.0, -math.inf),
])
def test_ell_limit_examples(alpha, beta, K, expected):
    m = power_model(alpha, beta, K_g=K)
    assert ell_limit(m) == expected


def test_ell_numeric_bound_contains_declared_value():
    for alpha, beta in ((2.0, 1.0), (0.5, 0.5), (1.0, 0.0)):
        m = power_model(alpha, beta)
        value, err = estimate_ell(m)
        assert abs(value - ell_limit(m)) <= err + 1e-12


@pytest.mark.parametrize("name", sorted(BUILTIN_MODELS))
def test_declared_vanishing_orders_match_finite_differences(name):
    m = builtin_model(name)
    for f in (m.diffusivity, m.source):
        order = f.order_below(m.rho_bar)
        if order is None or order[0] in (0.0, math.inf):
            continue
        for s in (1e-3, 1e-4, 1e-5):
            est = estimate_vanishing_order(f, m.rho_bar, s)
            assert abs(est - order[0]) <= 0.05


@settings(max_examples=40, deadline=None)
@given(K=st.floats(0.1, 10.0), alpha=st.floats(0.1, 4.0))
def test_power_field_order_and_scale(K, alpha):
    f = power_at_top(K, alpha)
    assert f.order_below(1.0) == (alpha, K)
    s = np.geomspace(1e-8, 1e-2, 13)
    ratio = f.near(1.0)(s) / (K * s**alpha)
    assert np.max(np.abs(ratio - 1)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0.2, 3.0), s=st.floats(1e-6, 1e-3))
def test_vanishing_order_estimate_property(alpha, s):
    assert abs(estimate_vanishing_order(power_at_top(1.0, alpha), 1.0, s) - alpha) <= 0.05


def test_validate_is_deterministic():
    for name in BUILTIN_MODELS:
        m = builtin_model(name)
        assert validate_assumptions(m).to_dict() == validate_assumptions(m).to_dict()


def test_near_evaluation_is_exact_close_to_top():
    f = power_at_top(1.0, 2.0)
    assert f.near(1.0)(1e-12) == pytest.approx(1e-24, rel=1e-12)
    assert float(f(1.0)) == 0.0


def test_reflect_field_substitutes():
    f = custom(lambda r: r * (1 - r))
    assert float(reflect_field(f, 1.0)(0.3)) == pytest.approx(0.21, abs=1e-15)
    assert float(reflect_field(f, 1.0, -1.0)(0.3)) == pytest.approx(-0.21, abs=1e-15)


def test_table_field_is_monotone_cubic():
    f = table([0.0, 0.5, 1.0], [0.0, 0.8, 1.0])
    x = np.linspace(0, 1, 101)
    assert np.all(np.diff(f(x)) >= 0)


def test_model_spec_roundtrip(tmp_path):
    spec = {
        "rho_bar": 1.0,
        "flux": {"family": "constant", "params": {"value": 0.0}},
        "diffusivity": {"family": "power-at-top", "params": {"K": 1.0, "alpha": 2.0}},
        "source": {"family": "power-at-top", "params": {"K": 1.0, "alpha": 1.0}},
        "tags": ["D", "g"],
    }
    path = tmp_path / "m.json"
    path.write_text(json.dumps(spec))
    m = load_model(path)
    ref = model_from_dict(spec)
    x = np.linspace(0, 1, 33)
    assert np.array_equal(m.D(x), ref.D(x)) and np.array_equal(m.g(x), ref.g(x))
    assert m.tags == {"D", "g"}


def test_unknown_family_rejected():
    with pytest.raises(PreconditionError):
        model_from_dict({"diffusivity": {"family": "spline"}, "source": {"family": "constant"}})


def test_power_at_zero_is_exact():
    f = power_at_zero(2.0, 1.0)
    assert float(f(0.25)) == 0.5
