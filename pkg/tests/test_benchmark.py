import math

import numpy as np
import pytest

from repdel.benchmark import (
    f_tau,
    f_tau_stats,
    gaps,
    opt_threshold,
    regret_trace,
    stackelberg_regret,
    write_f_curve_csv,
)
from repdel.core import InvalidParameter
from repdel.instances import InstanceModel, independent_uniform, two_uniform_complement

TAU_STAR = math.sqrt(2) - 1
F_STAR = 4 * (math.sqrt(2) - 1) / 3


def mc_oracle(tau, n, seed):
    """Plain numpy: two U[0,1] solutions with y = 1 - x; the best response to
    'x >= tau' is the smallest eligible x, worth 0 when nothing is eligible."""
    X = np.random.default_rng(seed).random((n, 2))
    masked = np.where(X >= tau, X, np.inf)
    u = masked.min(axis=1)
    u[np.isinf(u)] = 0.0
    return u.mean(), u.std(ddof=1) / math.sqrt(n)


def test_deterministic_f_tau():
    inst = InstanceModel.deterministic([(0.3, 0.9), (0.7, 0.5)])
    assert f_tau(inst, 0.0) == 0.3
    assert f_tau(inst, 0.5) == 0.7
    assert f_tau_stats(inst, 0.5)[1] == 0.0
    assert f_tau(inst, 0.3, inclusive=False) == 0.7


def test_oracle_confirms_closed_form_peak():
    mean, se = mc_oracle(TAU_STAR, 1_000_000, 11)
    assert abs(mean - F_STAR) < max(4 * se, 1e-3)
    assert abs(mean - F_STAR) <= 0.005


@pytest.mark.parametrize("tau", [0.0, 0.1, 0.3, TAU_STAR, 0.6, 0.9])
def test_closed_form_curve_against_oracle(tau):
    mean, se = mc_oracle(tau, 400_000, 12)
    assert float(two_uniform_complement().curve(tau)) == pytest.approx(mean, abs=5 * se + 1e-12)


def test_monte_carlo_f_tau():
    inst = two_uniform_complement()
    mean, se = f_tau_stats(inst, TAU_STAR, n_samples=1_000_000, seed=3)
    assert abs(mean - F_STAR) <= 0.01
    assert se < 1e-3


def test_standard_error_scales_with_sqrt_n():
    inst = two_uniform_complement()
    _, se1 = f_tau_stats(inst, 0.4, n_samples=10_000, seed=1)
    _, se2 = f_tau_stats(inst, 0.4, n_samples=160_000, seed=1)
    assert se1 / se2 == pytest.approx(4.0, rel=0.1)


def test_opt_threshold_deterministic():
    r = opt_threshold(InstanceModel.deterministic([(0.3, 0.9), (0.7, 0.5)]))
    assert (r.tau_star, r.opt_per_round) == (0.7, 0.7)
    r = opt_threshold(InstanceModel.deterministic([(0.5, 0.5)]))
    assert (r.tau_star, r.opt_per_round) == (0.5, 0.5)
    xs = np.random.default_rng(0).random(7)
    r = opt_threshold(InstanceModel.deterministic(zip(xs, 1 - xs)))
    assert r.opt_per_round == xs.max()


@pytest.mark.parametrize("estimator", ["monte-carlo", "analytic"])
def test_opt_threshold_two_uniform(estimator):
    r = opt_threshold(two_uniform_complement(), 2000, 100_000, 5, estimator)
    assert abs(r.tau_star - TAU_STAR) <= 0.02
    assert abs(r.opt_per_round - F_STAR) <= 0.01
    assert r.estimator == estimator


def test_opt_threshold_monte_carlo_without_curve():
    r = opt_threshold(independent_uniform(2), 200, 20_000, 1)
    assert r.estimator == "monte-carlo"
    assert r.opt_per_round == r.f_values.max()


def test_opt_threshold_validation():
    with pytest.raises(InvalidParameter):
        opt_threshold(two_uniform_complement(), grid_size=1)
    with pytest.raises(InvalidParameter):
        opt_threshold(two_uniform_complement(), estimator="exact")


def test_regret_examples():
    assert stackelberg_regret(np.full(10, 0.7), 0.7) == 0.0
    assert stackelberg_regret(np.zeros(10), 0.7) == pytest.approx(7.0)
    a, b = np.random.default_rng(1).random((2, 50))
    assert stackelberg_regret(np.concatenate([a, b]), 0.6) == pytest.approx(
        stackelberg_regret(a, 0.6) + stackelberg_regret(b, 0.6))
    tr = regret_trace([0.3, 0.7, 0.0], 0.7)
    np.testing.assert_allclose(tr, [0.4, 0.4, 1.1])


def test_gaps():
    assert gaps([0.2, 0.5, 0.5]) == pytest.approx([0.3, 0.0, 0.0])
    assert gaps([0.4]) == [0.0]
    f = two_uniform_complement().curve(np.arange(1, 7) / 6)
    g = gaps(list(f))
    assert min(g) == 0.0 and int(np.argmin(g)) == 1  # threshold 2/6 is closest to the peak
    with pytest.raises(InvalidParameter):
        gaps([])


def test_f_curve_csv(tmp_path):
    r = opt_threshold(two_uniform_complement(), 10, estimator="analytic")
    p = tmp_path / "f.csv"
    write_f_curve_csv(r, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "tau,f_estimate,stderr,n_samples"
    assert len(lines) == len(r.taus) + 1
