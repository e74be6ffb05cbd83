import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recevd import extremes as X
from recevd.errors import ConfigError, InsufficientData
from recevd.systems import MetricKind, SystemSpec

GENERIC = (0.3183098861837907,)
DOUBLING_SRC = X.OrbitObservable(SystemSpec.create("doubling"), GENERIC)
IID = X.IIDExponential()


class Constant:
    """Constant series source."""

    d = 1

    def __init__(self, value):
        self.value = value

    def series(self, rng, length):
        return np.full(length, self.value)

    def describe(self):
        return "constant"


# --- elementary pieces --------------------------------------------------------

def test_observable_examples():
    assert X.observable([0.0], [1.0], MetricKind.INTERVAL_EUCLID) == 0.0
    assert X.observable([0.0, 0.0], [math.exp(-5), 0.0], MetricKind.EUCLID_2D) == pytest.approx(5.0)
    assert X.observable([0.2], [0.2], MetricKind.TORUS_1D) == 50.0
    assert X.observable([0.2], [0.2], MetricKind.TORUS_1D, cap=30.0) == 30.0


def test_block_maxima_examples():
    assert X.block_maxima([1, 3, 2, 5, 4, 0], 3) == [3, 5]
    assert X.block_maxima([1, 3, 2], 1) == [1, 3, 2]
    assert X.block_maxima([1, 3, 2], 4) == []
    with pytest.raises(ConfigError):
        X.block_maxima([1.0], 0)


@settings(max_examples=100, deadline=None)
@given(series=st.lists(st.floats(-1e6, 1e6), max_size=200), block=st.integers(1, 50))
def test_block_maxima_properties(series, block):
    out = X.block_maxima(series, block)
    assert len(out) == len(series) // block
    for i, m in enumerate(out):
        assert all(m >= v for v in series[i * block:(i + 1) * block])


def test_threshold_examples():
    assert X.threshold(0, math.ceil(math.e**5), 1) == pytest.approx(5, abs=0.01)
    assert X.threshold(2, math.ceil(math.e**4), 2) == pytest.approx(3, abs=0.01)
    assert X.threshold(0, math.ceil(math.e**6), 3) == pytest.approx(2, abs=0.01)
    with pytest.raises(ConfigError):
        X.threshold(0, 1, 1)


@settings(max_examples=100, deadline=None)
@given(u=st.floats(-10, 10), du=st.floats(1e-3, 5), n=st.integers(2, 10**8), d=st.integers(1, 3))
def test_threshold_strictly_increasing(u, du, n, d):
    assert X.threshold(u + du, n, d) > X.threshold(u, n, d)
    assert X.threshold(u, n + 1, d) > X.threshold(u, n, d)


def test_g_na_examples():
    assert X.g_na(0.0, 10**4, 0.5) == 1.0
    assert X.g_na(100.0, 10**4, 0.5) == 0.0
    assert X.g_na(1.0, 16, 0.5) == 0.31640625
    assert X.g_na(500.0, 10**4, 0.5) == 0.0


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 10**8), a=st.floats(0.1, 1.0), f1=st.floats(0, 1), f2=st.floats(0, 1))
def test_g_na_range_and_monotone(n, a, f1, f2):
    m = n**a
    t1, t2 = sorted((f1 * m, f2 * m))
    g1, g2 = X.g_na(t1, n, a), X.g_na(t2, n, a)
    assert 0 <= g2 <= g1 <= 1


def test_gumbel_reference_arithmetic():
    assert float(X.gumbel(0.0, 2.0)) == pytest.approx(0.135335, abs=1e-6)


def test_config_validation():
    for kw in ({"u_grid": ()}, {"u_grid": (1.0, 0.0)}, {"u_grid": (0.0, math.inf)},
               {"n_grid": ()}, {"n_grid": (100, 10)}, {"a_exponent": 0.0}, {"a_exponent": 1.5}):
        with pytest.raises(ConfigError):
            X.EvdConfig(**kw)


# --- tau_n --------------------------------------------------------------------

def test_tau_n_lebesgue():
    cfg = X.EvdConfig(target=GENERIC)
    t0 = X.tau_n(DOUBLING_SRC, cfg, 0.0, 10**4, 10**5, 20, seed=1)
    assert abs(t0.tau - 2.0) <= t0.ci_halfwidth
    t1 = X.tau_n(DOUBLING_SRC, cfg, math.log(2), 10**4, 10**5, 20, seed=2)
    assert abs(t1.tau - 1.0) <= t1.ci_halfwidth


def test_tau_n_beyond_cap_is_empty():
    cfg = X.EvdConfig(target=GENERIC)
    t = X.tau_n(DOUBLING_SRC, cfg, 60.0, 10**4, 1000, 5, seed=1)
    assert t.tau == 0.0 and t.empty and t.invalid


# --- empirical maxima ---------------------------------------------------------

def test_empirical_cdf_trivial_ends():
    cfg = X.EvdConfig(target=GENERIC)
    assert X.empirical_max_cdf(DOUBLING_SRC, cfg, 100, 60.0, 50, seed=1).p == 1.0
    # u_n = (u + ln n) <= 0 <= min phi on the unit circle (distances are <= 1/2)
    assert X.empirical_max_cdf(DOUBLING_SRC, cfg, 100, -10.0, 50, seed=1).p == 0.0


def test_empirical_cdf_gumbel_doubling():
    est = X.empirical_max_cdf(DOUBLING_SRC, None, 10**4, 0.0, 2000, seed=7)
    assert abs(est.p - math.exp(-2)) <= 3 * est.stderr


def test_empirical_cdf_validation():
    with pytest.raises(ConfigError):
        X.empirical_max_cdf(IID, None, 100, 0.0, 10, seed=0)
    with pytest.raises(ConfigError):
        X.empirical_max_cdf(IID, None, 1, 0.0, 50, seed=0)
    with pytest.raises(ConfigError):
        X.empirical_max_cdf(IID, None, 100, 0.0, 50, seed=0, mode="bogus")


def test_chopped_mode_runs():
    est = X.empirical_max_cdf(IID, None, 1000, 0.0, 500, seed=3, mode="chopped")
    assert abs(est.p - math.exp(-1)) <= 4 * est.stderr


def test_empirical_cdf_monotone_on_shared_orbits():
    u_grid = (-1.0, 0.0, 1.0, 2.0)
    n_grid = (100, 1000, 10**4)
    maxima = X._replicate_maxima(DOUBLING_SRC, n_grid, 200, seed=5)
    assert np.all(np.diff(maxima, axis=1) >= 0)
    table = np.array([[np.mean(maxima[:, k] <= X.threshold(u, n, 1))
                       for u in u_grid] for k, n in enumerate(n_grid)])
    assert np.all(np.diff(table, axis=1) >= 0)
    same_level = np.array([np.mean(maxima[:, k] <= 3.0) for k in range(len(n_grid))])
    assert np.all(np.diff(same_level) <= 0)


@settings(max_examples=50, deadline=None)
@given(series=st.lists(st.floats(-100, 100), min_size=1, max_size=300))
def test_running_maxima_nondecreasing(series):
    run = np.maximum.accumulate(np.asarray(series))
    assert np.all(np.diff(run) >= 0)
    assert run[-1] == max(series)


# --- report -------------------------------------------------------------------

def test_iid_report_converges_to_gumbel():
    cfg = X.EvdConfig(u_grid=(-2, -1, 0, 1, 2, 3, 4), n_grid=(10, 100, 10**4))
    rep = X.evd_report(IID, cfg, 10**5, 20, 2000, seed=11)
    worst = max(abs(r.empirical_cdf - math.exp(-math.exp(-r.u))) for r in rep.rows if r.n == 10**4)
    assert worst < 0.05
    b1 = {n: np.mean([r.b1 for r in rep.rows if r.n == n]) for n in cfg.n_grid}
    assert b1[10**4] < b1[10]


def test_report_columns_recompute():
    cfg = X.EvdConfig(target=GENERIC, u_grid=(-1.0, 0.0, 2.0), n_grid=(100, 1000))
    rep = X.evd_report(DOUBLING_SRC, cfg, 10**4, 10, 100, seed=3)
    for r in rep.rows:
        assert r.g_na == X.g_na(r.tau_n, r.n, rep.a_exponent)
        assert r.gumbel_ref == float(X.gumbel(r.u, rep.c_hat))
        assert r.b1 == abs(r.empirical_cdf - r.g_na)
        assert r.b2 == abs(r.g_na - r.gumbel_ref)
        assert 0 <= r.empirical_cdf <= 1 and 0 <= r.g_na <= 1 and r.b1 >= 0 and r.b2 >= 0
    top = [r for r in rep.rows if r.n == 1000]
    assert rep.c_hat == pytest.approx(np.mean([r.tau_n * math.exp(r.u) for r in top]), rel=1e-12)


def test_report_without_exceedances_is_insufficient():
    cfg = X.EvdConfig(u_grid=(0.0, 1.0), n_grid=(100, 1000))
    with pytest.raises(InsufficientData):
        X.evd_report(Constant(-1.0), cfg, 100, 5, 20, seed=0)


def test_doubling_b1_shrinks_with_n():
    # at u = 0 the finite-n gap between G_{sqrt n} and the maxima law is
    # about 0.024 at n = 100 and 0.003 at n = 1e4, above Monte Carlo noise
    cfg = X.EvdConfig(target=GENERIC, u_grid=(0.0,), n_grid=(100, 10**4))
    small, large = [], []
    for seed in range(10):
        rep = X.evd_report(DOUBLING_SRC, cfg, 10**5, 20, 2000, seed=seed)
        small.append(rep.row(100, 0.0).b1)
        large.append(rep.row(10**4, 0.0).b1)
    assert np.median(large) < np.median(small)


# --- blocking diagnostics -------------------------------------------------------

def test_pair_sum_trivial_extremes():
    assert X.pair_sum(DOUBLING_SRC, None, 1000, 10, 1000, 5, seed=1, u=100.0).value == 0.0
    ps = X.pair_sum(Constant(5.0), None, 100, 10, 1000, 5, seed=1, u=-100.0)
    assert ps.value == 9.0


def test_pair_sum_periodic_center():
    src = X.OrbitObservable(SystemSpec.create("doubling"), (0.0,))
    n = 1000
    ps = X.pair_sum(src, None, n, 2, 10**5, 20, seed=2, u=0.0)
    assert abs(ps.value - 1 / n) <= 3 * ps.stderr


def test_gamma_trivial_cases():
    g = X.gamma_nt(DOUBLING_SRC, None, 1000, 5, 0, 1000, 5, seed=1)
    assert g.value == 0.0
    g = X.gamma_nt(Constant(-3.0), None, 1000, 5, 10, 1000, 5, seed=1)
    assert g.value == 0.0


@pytest.mark.parametrize("t", [1, 10, 100])
def test_gamma_iid_is_zero(t):
    g = X.gamma_nt(IID, None, 100, t, 10, 10**4, 40, seed=t)
    assert g.value <= 3 * g.stderr


def test_blocking_layout_defaults():
    diag = X.blocking_diagnostics(DOUBLING_SRC, None, 10**4, 1000, 5, seed=1)
    assert (diag.p, diag.t) == (100, math.floor(math.log(10**4) ** 2))
    assert abs(diag.q * (diag.p + diag.t) - 10**4) <= diag.p + diag.t
    assert diag.gamma_nt.value >= 0 and diag.pair_sum.value >= 0
