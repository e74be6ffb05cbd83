import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numba import njit

from oracles import lorenz_exact, rk4_step_mp, section_crossing_dense
from recevd import systems as S
from recevd.errors import ConfigError, DivergedOrbit, NoReturn
from recevd.rng import substream

C_PLUS = (math.sqrt(72.0), math.sqrt(72.0), 27.0)
C_MINUS = (-math.sqrt(72.0), -math.sqrt(72.0), 27.0)


# --- catalog ------------------------------------------------------------------

@pytest.mark.parametrize("kind,d", [
    ("doubling", 1), ("quadratic", 1), ("intermittency", 1), ("arnold", 1), ("rotation", 1),
    ("alves_viana", 2), ("henon", 2), ("lorenz_return", 2),
    ("anosov", 3), ("lorenz_flow", 3), ("lorenz_strobo", 3),
])
def test_dimension_by_kind(kind, d):
    assert S.SystemSpec.create(kind).dimension == d


def test_arnold_requires_invertibility():
    with pytest.raises(ConfigError):
        S.SystemSpec.create("arnold", k=1 / (2 * math.pi))
    S.SystemSpec.create("arnold", k=0.159)


@pytest.mark.parametrize("kw", [{"dt": 0.0}, {"dt": 0.02}, {"tau_sample": 0.0105}])
def test_flow_parameter_validation(kw):
    with pytest.raises(ConfigError):
        S.SystemSpec.create("lorenz_strobo", **kw)


def test_rejects_unknown_and_nonfinite():
    with pytest.raises(ConfigError):
        S.SystemSpec.create("doubling", a=1.0)
    with pytest.raises(ConfigError):
        S.SystemSpec.create("henon", a=float("nan"))
    with pytest.raises(ConfigError):
        S.SystemSpec.create("pendulum")


# --- step / orbit examples -----------------------------------------------------

def test_step_examples():
    assert S.step(S.SystemSpec.create("doubling"), [0.25])[0] == 0.5
    assert S.step(S.SystemSpec.create("quadratic", a=3.9), [0.5])[0] == pytest.approx(0.975, abs=1e-15)
    np.testing.assert_array_equal(S.step(S.SystemSpec.create("henon"), [0.0, 0.0]), [1.0, 0.0])


def test_orbit_examples():
    o = S.orbit(S.SystemSpec.create("doubling"), [1 / 3], 4)[:, 0]
    np.testing.assert_allclose(o, [1 / 3, 2 / 3, 1 / 3, 2 / 3], atol=1e-15)
    o = S.orbit(S.SystemSpec.create("rotation", theta=0.25), [0.0], 5)[:, 0]
    np.testing.assert_array_equal(o, [0.0, 0.25, 0.5, 0.75, 0.0])


def test_quadratic_orbit_against_exact_rationals():
    a, x = Fraction(39, 10), Fraction(1, 5)
    exact = [x]
    for _ in range(2):
        x = a * x * (1 - x)
        exact.append(x)
    o = S.orbit(S.SystemSpec.create("quadratic", a=3.9), [0.2], 3)[:, 0]
    np.testing.assert_allclose(o, [float(v) for v in exact], rtol=1e-15)
    assert exact[2] == Fraction(1143792, 1250000)


def test_transient_is_discarded():
    spec = S.SystemSpec.create("quadratic")
    full = S.orbit(spec, [0.3], 10)
    np.testing.assert_array_equal(S.orbit(spec, [0.3], 4, transient=6), full[6:])


def test_henon_divergence_raises_and_sampling_recovers():
    spec = S.SystemSpec.create("henon")
    with pytest.raises(DivergedOrbit):
        S.orbit(spec, [5.0, 5.0], 50)
    rows = S.sample_orbit(spec, substream(1, 0), 1000)
    assert np.all(np.abs(rows) < 2)


def test_alves_viana_matches_formula():
    spec = S.SystemSpec.create("alves_viana", base_degree=3)
    x, y = 0.1, 0.2
    nxt = S.step(spec, [x, y])
    assert nxt[0] == pytest.approx((3 * x) % 1.0, abs=1e-15)
    assert nxt[1] == pytest.approx(1.9 + 0.01 * math.sin(2 * math.pi * x) - y * y, abs=1e-15)


def test_exact_generators_do_not_collapse():
    for kind in ("doubling", "anosov", "alves_viana"):
        spec = S.SystemSpec.create(kind)
        assert S.uses_exact_generator(spec)
        rows = S.sample_orbit(spec, substream(3, 0), 5000)
        tail = rows[-1000:, 0]
        assert np.unique(tail).size > 900
        assert 0.4 < tail.mean() < 0.6


def test_exact_doubling_generator_is_the_doubling_map():
    rows = S.sample_orbit(S.SystemSpec.create("doubling"), substream(5, 0), 200)[:, 0]
    # each iterate is 2x mod 1 of the previous up to the 53-bit window
    np.testing.assert_allclose(rows[1:], (2 * rows[:-1]) % 1.0, atol=2**-51)


# --- metrics ------------------------------------------------------------------

def test_distance_examples():
    assert S.distance(S.MetricKind.TORUS_1D, [0.1], [0.9]) == pytest.approx(0.2, abs=1e-15)
    assert S.distance(S.MetricKind.SKEW_PRODUCT, [0.0, 0.0], [0.3, 0.4]) == pytest.approx(0.5, abs=1e-15)
    assert S.distance(S.MetricKind.EUCLID_3D, [0, 0, 0], [1, 2, 2]) == 3.0


def _random_states(metric, rng, k):
    d = metric.dimension
    if metric in (S.MetricKind.TORUS_1D, S.MetricKind.TORUS_3D):
        return rng.random((k, d))
    if metric is S.MetricKind.SKEW_PRODUCT:
        return np.column_stack([rng.random(k), rng.uniform(-2, 2, k)])
    return rng.uniform(-5, 5, (k, d))


@pytest.mark.parametrize("metric", list(S.MetricKind))
def test_metric_axioms(metric):
    rng = np.random.default_rng(11)
    P, Q, R = (_random_states(metric, rng, 10**4) for _ in range(3))
    dpq = np.array([S.distances(metric, P[i:i + 1], Q[i])[0] for i in range(len(P))])
    dqp = np.array([S.distances(metric, Q[i:i + 1], P[i])[0] for i in range(len(P))])
    dpr = np.array([S.distances(metric, P[i:i + 1], R[i])[0] for i in range(len(P))])
    drq = np.array([S.distances(metric, R[i:i + 1], Q[i])[0] for i in range(len(P))])
    assert np.all(dpq >= 0)
    np.testing.assert_array_equal(dpq, dqp)
    assert np.all(dpq <= dpr + drq + 1e-12)
    assert np.all(S.distances(metric, P, P[0])[:1] == 0)


def test_torus_coordinates_compare_mod_one():
    assert S.distance(S.MetricKind.TORUS_3D, [0.0, 0.5, 0.9], [1.0, 1.5, -0.1]) == pytest.approx(0, abs=1e-15)
    rng = np.random.default_rng(0)
    P = rng.uniform(-3, 3, (1000, 1))
    assert np.all(S.distances(S.MetricKind.TORUS_1D, P, [0.0]) <= 0.5)


# --- map invariants -----------------------------------------------------------------

unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(x=unit, y=unit, z=unit, eps=st.floats(0, 0.15))
def test_torus_maps_stay_in_unit_cube(x, y, z, eps):
    for spec, state in [
        (S.SystemSpec.create("doubling", eps=eps), [x]),
        (S.SystemSpec.create("anosov", eps=eps), [x, y, z]),
        (S.SystemSpec.create("arnold", theta=y, k=eps), [x]),
        (S.SystemSpec.create("rotation", theta=y), [x]),
    ]:
        o = S.orbit(spec, state, 20)
        assert np.all(o >= 0) and np.all(o < 1)


def test_quadratic_keeps_unit_interval():
    rng = np.random.default_rng(2)
    for a in (0.0, 1.3, 3.9, 4.0):
        spec = S.SystemSpec.create("quadratic", a=a)
        xs = rng.random(10**5)
        out = np.array([S.step(spec, [x])[0] for x in xs[:2000]])
        assert np.all((out >= 0) & (out <= 1))
        # the formula itself, vectorized, on the full sample
        v = a * xs * (1 - xs)
        assert np.all((v >= 0) & (v <= 1))


@settings(max_examples=200, deadline=None)
@given(x=st.floats(0, 1), b=st.floats(0.01, 0.99))
def test_intermittency_maps_into_unit_interval(x, b):
    y = S.step(S.SystemSpec.create("intermittency", b=b), [x])[0]
    assert 0 <= y <= 1


def test_intermittency_boundary_goes_to_linear_branch():
    assert S.step(S.SystemSpec.create("intermittency", b=0.3), [0.5])[0] == 0.0
    left = S.step(S.SystemSpec.create("intermittency", b=0.3), [0.25])[0]
    assert left == pytest.approx(0.25 * (1 + 0.5**0.3))


def test_orbits_are_deterministic():
    spec = S.SystemSpec.create("henon")
    a = S.orbit(spec, [0.1, 0.1], 1000, 100)
    b = S.orbit(spec, [0.1, 0.1], 1000, 100)
    assert a.tobytes() == b.tobytes()


# --- flow -----------------------------------------------------------------------

@pytest.mark.parametrize("eq", [(0.0, 0.0, 0.0), C_PLUS, C_MINUS])
@pytest.mark.parametrize("dt", [1e-3, 1e-2])
def test_equilibria_are_bit_exact(eq, dt):
    flow = S.FlowSpec(dt=dt)
    out = S.integrate_flow(flow, eq, 1000 * dt)
    assert out.tobytes() == np.array(eq).tobytes()


def test_rk4_single_step_matches_high_precision():
    out = S.integrate_flow(S.FlowSpec(dt=0.01), [1.0, 1.0, 1.0], 0.01)
    ref = rk4_step_mp([1.0, 1.0, 1.0], 0.01)
    np.testing.assert_allclose(out, ref, rtol=1e-12)


def test_rk4_default_step_matches_independent_integrator():
    out = S.integrate_flow(S.FlowSpec(), [1.0, 1.0, 1.0], 0.01)
    ref = lorenz_exact([1.0, 1.0, 1.0], 0.01)
    # ten RK4 steps at dt = 1e-3 carry ~1.5e-10 relative truncation error
    np.testing.assert_allclose(out, ref, rtol=5e-10)


def test_rk4_error_is_fourth_order():
    x = [1.0, 1.0, 1.0]
    ref = lorenz_exact(x, 0.02)
    coarse = S.integrate_flow(S.FlowSpec(dt=0.002), x, 0.02)
    fine = S.integrate_flow(S.FlowSpec(dt=0.001), x, 0.02)
    ratio = np.abs(coarse - ref) / np.abs(fine - ref)
    assert np.all((ratio > 14) & (ratio < 18))
    richardson = (16 * fine - coarse) / 15
    assert np.max(np.abs(richardson - ref) / np.abs(ref)) < 1e-11


def test_integration_time_must_be_multiple_of_dt():
    with pytest.raises(ConfigError):
        S.integrate_flow(S.FlowSpec(), [1, 1, 1], 0.0105)


def test_poincare_return_generic_vector_field():
    @njit
    def falling(x1, x2, x3, p):
        return 0.0, 0.0, -1.0

    flow = S.FlowSpec(vector_field=falling, params=(0.0,))
    out = S.poincare_return(flow, [0.0, 0.0, 31.0])
    np.testing.assert_allclose(out, [0.0, 0.0, 30.0], atol=1e-9)


def test_poincare_return_lands_on_section():
    flow = S.FlowSpec()
    y = S.poincare_return(flow, [1.0, 1.0, 30.0])
    assert abs(y[2] - 30.0) <= 1e-9
    assert S.poincare_return(flow, y)[2] == pytest.approx(30.0, abs=1e-9)


def test_poincare_return_after_500_returns_against_dense_oracle():
    spec = S.SystemSpec.create("lorenz_return")
    start = S.orbit(spec, [1.0, 1.0], 1, transient=500)[0]
    got = S.poincare_return(spec.flow, [start[0], start[1], 30.0])
    ref = section_crossing_dense([start[0], start[1], 30.0 - 1e-14], h=1e-4)
    np.testing.assert_allclose(got, ref, atol=1e-6)


def test_start_on_stable_manifold_never_returns():
    flow = S.FlowSpec(time_budget=50.0)
    with pytest.raises(NoReturn):
        S.poincare_return(flow, [0.0, 0.0, 30.0])


def test_lorenz_return_orbit_stays_on_attractor():
    rows = S.sample_orbit(S.SystemSpec.create("lorenz_return"), substream(4, 0), 200)
    assert rows.shape == (200, 2)
    assert np.all(np.abs(rows) < 30)


def test_strobo_orbit_matches_flow_integration():
    spec = S.SystemSpec.create("lorenz_strobo", tau_sample=0.01)
    rows = S.orbit(spec, [1.0, 1.0, 1.0], 3)
    np.testing.assert_array_equal(rows[2], S.integrate_flow(spec.flow, [1.0, 1.0, 1.0], 0.02))
