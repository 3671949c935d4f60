import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geoslice.diagnostics import (
    DegenerateSeriesError,
    SeriesTooShortError,
    autocorrelation,
    ess,
    ess_details,
    summarize_repetitions,
    trace_statistic,
)
from geoslice.samplers import ChainResult
from geoslice.targets import vmf_sphere_target


def ar1(rng, n, phi=0.5):
    eps = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = eps[0] / np.sqrt(1 - phi ** 2)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + eps[i]
    return x


def test_trace_statistic():
    t = vmf_sphere_target(np.array([0.0, 1.0]), 2.0)
    states = np.array([[1.0, 0.0], [0.0, 1.0]])
    chain = ChainResult(states, np.array([0.0, 2.0]))
    np.testing.assert_array_equal(trace_statistic(chain), [0.0, 2.0])
    np.testing.assert_array_equal(trace_statistic(chain, t), [0.0, 2.0])
    one = ChainResult(states[:1], np.array([5.0]))
    assert list(trace_statistic(one)) == [5.0]


def test_autocorrelation_lag_zero(rng):
    r = autocorrelation(rng.standard_normal(100))
    assert r[0] == pytest.approx(1.0)


def test_iid_ess(rng):
    n = 10_000
    assert 0.8 * n <= ess(rng.standard_normal(n)) <= 1.2 * n


def test_ar1_ess(rng):
    n = 100_000
    assert 0.30 * n <= ess(ar1(rng, n)) <= 0.37 * n


def test_alternating_is_clamped():
    res = ess_details(np.tile([1.0, -1.0], 500))
    assert res.ess == 1000 and res.superefficient


def test_ess_errors():
    with pytest.raises(SeriesTooShortError):
        ess(np.arange(5.0))
    with pytest.raises(DegenerateSeriesError):
        ess(np.ones(50))
    with pytest.raises(DegenerateSeriesError):
        ess(np.array([np.nan] + [1.0] * 20))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.sampled_from([0.5, 1.0, 2.0, 4.0]))
def test_ess_affine_invariance(seed, a, b):
    x = ar1(np.random.default_rng(seed), 2000)
    # Powers of two keep the rescaling exact in floating point.
    assert ess(a + b * x) == pytest.approx(ess(x), rel=1e-9)
    assert ess(b * x) == ess(x)


def test_thinning(rng):
    ratios = []
    for _ in range(50):
        x = ar1(rng, 4000, 0.9)
        ratios.append(ess(x[::2]) / ess(x))
    assert np.mean(ratios) > 0.5


def test_summaries():
    s = summarize_repetitions([5])
    assert (s.min, s.median, s.max) == (5, 5, 5)
    s = summarize_repetitions([1, 2, 3])
    assert (s.min, s.median, s.max) == (1, 2, 3)
    s = summarize_repetitions([4, 1, 3, 2])
    assert (s.min, s.median, s.max, s.n_samples) == (1, 2, 4, 4)
    assert s.per_run_ess == [4, 1, 3, 2]
    with pytest.raises(ValueError):
        summarize_repetitions([])
