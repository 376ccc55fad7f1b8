import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from orbital_lab.ensembles import deterministic_diag, gaussian_hermitian, scalar
from orbital_lab.haar import as_generator, observable, orbital_values
from orbital_lab.weak import (
    CAUCHY,
    ESCAPING,
    INCONCLUSIVE,
    DiagnosticConfig,
    EmpiricalMeasure,
    WindowMetric,
    default_test_family,
    levy_prohorov_estimate,
    precompactness_diagnostic,
    precompactness_from_values,
    recurrence_estimate,
    w1_distance,
)

SCHED = [4, 8, 16, 32, 64, 128, 256]


def em(*xs):
    return EmpiricalMeasure(np.asarray(xs, dtype=float))


def test_empirical_measure_basics():
    m = em(3, 1, 2)
    assert list(m.samples) == [1, 2, 3] and m.count == 3
    assert m.cdf(2) == pytest.approx(2 / 3) and m.cdf(0.5) == 0
    with pytest.raises(ValueError):
        EmpiricalMeasure([])
    with pytest.raises(ValueError):
        EmpiricalMeasure([1.0, np.nan])


def test_w1_examples():
    a = em(0.3, -1, 2)
    assert w1_distance(a, a) == 0
    assert w1_distance(em(0), em(1)) == 1
    assert w1_distance(em(0, 1), em(0, 0)) == 0.5
    assert w1_distance(em(0, 1), em(0)) == 0.5


def test_lp_examples():
    a = em(0.3, -1, 2)
    assert levy_prohorov_estimate(a, a, grid=1e-3) == 0
    assert levy_prohorov_estimate(em(0), em(1), grid=1e-3) == 1
    assert abs(levy_prohorov_estimate(em(0), em(0.3), grid=1e-3) - 0.3) <= 1e-3
    assert levy_prohorov_estimate(em(0), em(0.3)) == pytest.approx(0.3, abs=0.3e-3)
    with pytest.raises(ValueError):
        levy_prohorov_estimate(a, a, grid=0)


def _pairs(count, seed):
    g = as_generator(seed)
    for _ in range(count):
        ka, kb = g.integers(1, 40, size=2)
        yield g.random(ka), g.random(kb) * g.uniform(0.2, 1.0)


def test_w1_matches_scipy_oracle():
    for x, y in _pairs(1000, 1):
        assert w1_distance(EmpiricalMeasure(x), EmpiricalMeasure(y)) == pytest.approx(
            stats.wasserstein_distance(x, y), rel=1e-9, abs=1e-12)


def test_metric_axioms_on_random_triples():
    g = as_generator(5)
    for (x, y), z in zip(_pairs(1000, 2), (g.random(g.integers(1, 40)) for _ in range(1000))):
        a, b, c = EmpiricalMeasure(x), EmpiricalMeasure(y), EmpiricalMeasure(z)
        for d in (w1_distance, lambda u, v: levy_prohorov_estimate(u, v, grid=1e-3)):
            assert d(a, b) == d(b, a)
            assert d(a, a) == 0
            assert d(a, b) >= 0
        assert w1_distance(a, c) <= w1_distance(a, b) + w1_distance(b, c) + 1e-12
        # The grid estimate is an upper bound within one step, so allow 2 steps.
        lp = [levy_prohorov_estimate(u, v, grid=1e-3) for u, v in ((a, c), (a, b), (b, c))]
        assert lp[0] <= lp[1] + lp[2] + 2e-3


def test_lp_squared_bounded_by_w1():
    grid = 1e-3
    for x, y in _pairs(1000, 3):
        a, b = EmpiricalMeasure(x), EmpiricalMeasure(y)
        lp = levy_prohorov_estimate(a, b, grid=grid)
        assert lp <= 1
        assert lp ** 2 <= w1_distance(a, b) + 2 * grid


@settings(max_examples=50, deadline=None)
@given(x=st.lists(st.floats(-5, 5), min_size=1, max_size=20), shift=st.floats(0, 0.9))
def test_lp_of_small_shift(x, shift):
    # Translating by s < 1 moves every atom by s, so LP <= s (within a step).
    a = EmpiricalMeasure(x)
    b = EmpiricalMeasure(np.asarray(x) + shift)
    assert levy_prohorov_estimate(a, b, grid=1e-3) <= shift + 1e-3
    assert w1_distance(a, b) == pytest.approx(shift, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), w=st.integers(1, 4))
def test_window_metric_axioms(seed, w):
    g = as_generator(seed)
    a, b, c = (g.standard_normal((w, w)) * 10 ** g.uniform(-3, 3) for _ in range(3))
    d = WindowMetric(w)
    assert d(a, a) == 0
    assert d(a, b) == d(b, a)
    assert 0 <= d(a, b) < 1
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-12


def test_window_metric_ignores_outside_entries():
    a = np.zeros((4, 4))
    b = a.copy()
    b[3, 3] = 100.0
    assert WindowMetric(3)(a, b) == 0
    assert WindowMetric(1)(np.array([[0.0]]), np.array([[1.0]])) == pytest.approx(0.25 * 0.5)


def test_default_test_family():
    fam = default_test_family(window=2, count=3)
    assert len(fam) == 6
    x = as_generator(0).standard_normal((2, 2)) + 5.0
    for f in fam:
        x0 = np.eye(2) if f.params["reference"] == "identity" else np.zeros((2, 2))
        assert f(x0) == 1.0
        assert f.positive and f.bound == 1.0
        assert 0 < f(x) <= 1
    for ref in ("zero", "identity"):
        vals = [f(x) for f in fam if f.params["reference"] == ref]
        assert all(b < a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        default_test_family(1, 0)


def test_recurrence_examples():
    one = observable("constant", value=1.0)
    assert recurrence_estimate(gaussian_hermitian(1.0, 0), one, SCHED, 50, 0).inf == 1.0
    three = observable("constant", value=3.0)
    assert recurrence_estimate(gaussian_hermitian(1.0, 0), three, [2, 5], 10, 0).inf == 3.0
    f = observable("psi-distance", reference="scalar", c=2.5, window=2)
    est = recurrence_estimate(scalar(2.5), f, SCHED, 100, 1)
    assert est.inf == pytest.approx(1.0, abs=1e-12)


def test_recurrence_drift_for_diag_index():
    est = recurrence_estimate(deterministic_diag("index"), observable("inv-abs"), SCHED, 2000, 0)
    assert est.per_n[-1].mean < 0.2 * est.per_n[0].mean
    assert est.inf == est.per_n[-1].mean


def test_recurrence_rejects_non_positive_observable():
    with pytest.raises(ValueError):
        recurrence_estimate(scalar(1.0), observable("coord-re"), SCHED, 10, 0)
    with pytest.raises(ValueError):
        recurrence_estimate(scalar(1.0), observable("inv-abs", i=5), SCHED, 10, 0)
    with pytest.raises(ValueError):
        recurrence_estimate(scalar(1.0), observable("inv-abs"), [8, 4], 10, 0)


def test_precompactness_scalar_is_cauchy():
    res = precompactness_diagnostic(scalar(1.5), observable("coord-re"), SCHED, 500, 0)
    assert res.verdict == CAUCHY
    assert np.all(np.abs(res.pairwise) < 1e-12)


def test_precompactness_diag_index_escapes():
    res = precompactness_diagnostic(deterministic_diag("index"), observable("coord-re"), SCHED, 2000, 0)
    assert res.verdict == ESCAPING
    assert res.distance(4, 256) > res.distance(4, 128) > res.distance(4, 64)


def test_precompactness_verdict_rules():
    g = as_generator(8)
    flat = [g.normal(0, 1, 4000) for _ in range(6)]
    assert precompactness_from_values(range(6), flat).verdict == CAUCHY
    drift = [g.normal(k, 1, 4000) for k in range(6)]
    assert precompactness_from_values(range(6), drift).verdict == ESCAPING
    # A jump back at the end is neither Cauchy nor a monotone escape.
    wobble = [g.normal(v, 1, 4000) for v in (0, 1, 2, 3, 0, 3)]
    assert precompactness_from_values(range(6), wobble).verdict == INCONCLUSIVE
    cfg = DiagnosticConfig(cauchy_floor=10.0)
    assert precompactness_from_values(range(6), drift, cfg).verdict == CAUCHY


def test_subsampling_stability():
    f = observable("coord-re")
    p = gaussian_hermitian(1.0, 4)
    trials, ok = 40, 0
    for s in range(trials):
        v = orbital_values(f, p, 16, 2000, s)
        full, half = np.mean(v), np.mean(v[:1000])
        se = np.std(v, ddof=1) / np.sqrt(v.size)
        ok += abs(full - half) < 4 * se
    assert ok >= 0.95 * trials
