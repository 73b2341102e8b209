import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpfronts.convergence import build_family, compare_z, family_model, run_convergence
from sharpfronts.errors import PreconditionError
from sharpfronts.model import builtin_model, constant, custom, linear


@pytest.fixture(scope="module")
def aronson():
    return builtin_model("aronson")


def test_build_family_example(aronson):
    g10 = build_family(aronson.source, 10, linear(1.0, -1.0))
    assert float(g10(0.0)) == pytest.approx(0.1, abs=1e-15)
    assert float(g10(1.0)) == 0.0


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 1000), r=st.floats(0.0, 1.0))
def test_build_family_formula(n, r):
    g0 = builtin_model("aronson").source
    gn = build_family(g0, n)
    assert float(gn(r)) == pytest.approx(r * (1 - r) + (1 - r) / n, abs=1e-14)


def test_build_family_rejects_bad_bump(aronson):
    with pytest.raises(PreconditionError):
        build_family(aronson.source, 3, constant(1.0))  # does not vanish at rho_bar
    with pytest.raises(PreconditionError) as exc:
        build_family(aronson.source, 3, custom(lambda r: (0.5 - r) * (1 - r)))
    assert exc.value.witness is not None
    with pytest.raises(PreconditionError):
        build_family(aronson.source, 0)


def test_compare_equal_speeds(aronson):
    m2 = family_model(aronson, 1)
    o = compare_z(aronson, 1.0, m2, 1.0)
    assert o.ok


def test_compare_strict_interior(aronson):
    o = compare_z(aronson, 1.2, family_model(aronson, 1), 1.0)
    assert o.ok and o.strict_interior and o.min_gap > 0


def test_compare_identical_is_bitwise(aronson):
    o = compare_z(aronson, 1.0, aronson, 1.0)
    assert np.array_equal(o.z1, o.z2) and o.min_gap == 0.0


def test_compare_preconditions(aronson):
    with pytest.raises(PreconditionError, match="g1 <= g2"):
        compare_z(family_model(aronson, 1), 1.0, aronson, 1.0)
    with pytest.raises(PreconditionError, match="c2 <= c1"):
        compare_z(aronson, 1.0, family_model(aronson, 1), 1.2)
    with pytest.raises(PreconditionError, match="c1\\*"):
        compare_z(aronson, 0.5, family_model(aronson, 1), 0.5)


@settings(max_examples=6, deadline=None)
@given(n=st.integers(1, 40), dc=st.floats(0.0, 0.5))
def test_comparison_property(n, dc):
    a = builtin_model("aronson")
    o = compare_z(a, 1.0 + dc, family_model(a, n), 1.0, check_critical=False)
    assert o.ok


@pytest.fixture(scope="module")
def report(aronson):
    return run_convergence(aronson, n_list=[1, 2, 4, 8, 16, 32], c=1.0)


def test_convergence_report(report):
    assert report.z_monotone
    assert all(report.ordering_checks)
    assert all(k == 1 for k in report.sign_changes)
    e1 = np.array(report.phi_c1_errors)
    assert np.all(np.diff(e1) < 0)
    assert e1[-1] <= 1e-2
    assert np.all(np.diff(report.z_sup_errors) < 0)


def test_z_error_rate_is_one_over_n(report):
    # the bump (1 - rho)/n moves z by O(1/n); the observed constant is about 0.55
    n = np.array(report.n_values, dtype=float)
    scaled = np.array(report.z_sup_errors) * n
    assert np.all((scaled > 0.4) & (scaled < 0.7))


def test_convergence_deterministic(aronson, report):
    again = run_convergence(aronson, n_list=[32, 32], c=1.0, c0_star=report.c0_star)
    assert again.rows()[0][1:] == again.rows()[1][1:]
    assert again.rows()[0] == report.rows()[-1]


def test_convergence_below_critical_speed(aronson):
    with pytest.raises(PreconditionError, match="below critical speed"):
        run_convergence(aronson, n_list=[1], c=0.5)


def test_report_dict(report):
    d = report.to_dict()
    assert d["n_values"] == [1, 2, 4, 8, 16, 32]
    assert d["converged"] is False  # the z-sup target of 1e-3 is not reached at n = 32
