"""Compiled and pure-Python kernels must agree bit for bit."""
import numpy as np
import pytest

from repdel import _pykernels, kernels

backends = kernels.backends()
needs_c = pytest.mark.skipif("cython" not in backends, reason="compiled kernels not built")


def _data(n=3000, K=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, K))
    return X, 1.0 - X if seed % 2 == 0 else rng.random((n, K))


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in backends


@needs_c
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_threshold_functions_agree(seed):
    c = backends["cython"]
    X, Y = _data(seed=seed)
    grid = np.linspace(0, 1, 101)
    for a, b in zip(c.threshold_curve(X, Y, grid), _pykernels.threshold_curve(X, Y, grid)):
        np.testing.assert_array_equal(a, b)
    for kind in (0, 1, 2, 3):
        np.testing.assert_array_equal(c.threshold_utilities(X, Y, kind, 0.4),
                                      _pykernels.threshold_utilities(X, Y, kind, 0.4))


@needs_c
@pytest.mark.parametrize("agent,eps", [(kernels.MYOPIC, 0.0), (kernels.ADVERSARIAL, 0.05)])
def test_bandit_kernels_agree(agent, eps):
    c = backends["cython"]
    X, Y = _data(5000, 2, 4)
    for a, b in zip(c.run_ucb(X, Y, 6, agent, eps), _pykernels.run_ucb(X, Y, 6, agent, eps)):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(c.run_se(X, Y, 6, 9, 0.01, 5000, agent, eps),
                    _pykernels.run_se(X, Y, 6, 9, 0.01, 5000, agent, eps)):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("mod", list(backends.values()), ids=list(backends))
def test_responses_against_brute_force(mod):
    rng = np.random.default_rng(7)
    for _ in range(300):
        K = int(rng.integers(1, 6))
        xs = np.round(rng.random(K), 1)
        ys = np.round(rng.random(K), 1)
        tau = float(np.round(rng.random(), 1))
        for kind in (0, 1):
            ok = [i for i in range(K) if (xs[i] >= tau if kind == 0 else xs[i] > tau)]
            best, bkey = -1, (0.0, 0.0)
            for i in ok:
                if (ys[i], xs[i]) > bkey:
                    best, bkey = i, (ys[i], xs[i])
            assert mod.best_response(xs, ys, kind, tau) == best


def test_python_fallback_selected_by_env():
    import os
    import subprocess
    import sys

    code = ("from repdel import kernels; from repdel.engine import *; from repdel.instances import *;"
            "r = run_simulation(SimulationConfig(two_uniform_complement(), MechanismSpec('ucb_threshold'), T=3000));"
            "print(kernels.BACKEND, repr(r.regret))")
    env = {**os.environ, "REPDEL_KERNELS": "python"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, regret = out.stdout.split()
    assert backend == "python"
    from repdel.engine import MechanismSpec, SimulationConfig, run_simulation
    from repdel.instances import two_uniform_complement
    here = run_simulation(SimulationConfig(two_uniform_complement(), MechanismSpec("ucb_threshold"), T=3000))
    assert float(regret) == here.regret
