import json

import numpy as np
import pytest

from repdel.core import InvalidParameter
from repdel.instances import (
    CHUNK,
    InstanceModel,
    RealizationStream,
    appendix_k,
    check_d_dense,
    check_lipschitz,
    check_stochastic_lipschitz,
    fixture,
    generate_deterministic_chain,
    independent_uniform,
    p1,
    p2,
    two_uniform_complement,
    two_uniform_complement_truncated,
)


def test_d_dense_examples():
    assert check_d_dense([0.1, 0.15, 0.2, 0.25], 0.05)
    res = check_d_dense([0.1, 0.9], 0.05)
    assert not res and res.witness == (0, 1)
    assert check_d_dense(p1(0.1), 0.1)


def test_d_dense_uses_a_third_point():
    # 0 and 0.3 are far apart, but 0.1 is within d of 0 and closer to 0.3 than 0 is
    assert check_d_dense([0.0, 0.1, 0.2, 0.3], 0.1)
    assert not check_d_dense([0.0, 0.1, 0.3], 0.1)


def test_lipschitz_examples():
    xs = np.linspace(0.05, 0.95, 9)
    line = InstanceModel.deterministic(zip(xs, 1 - xs))
    assert check_lipschitz(line, 1 - 1e-9, 1 + 1e-9)
    flat = InstanceModel.deterministic([(0.1, 0.5), (0.2, 0.5)])
    res = check_lipschitz(flat, 1e-6, 1.0)
    assert not res and res.witness == (0, 1)


def test_stochastic_lipschitz():
    assert check_stochastic_lipschitz(two_uniform_complement(), 1.0, 5000)
    assert not check_stochastic_lipschitz(independent_uniform(2), 1.0, 5000)
    assert check_stochastic_lipschitz(independent_uniform(1), 1.0, 100)


def test_chain_generator_examples():
    inst = generate_deterministic_chain(20, 0.02, 0.9, 1.1, 0.05, seed=3)
    assert check_d_dense(inst, 0.02) and check_lipschitz(inst, 0.9, 1.1)
    assert inst.ys.min() > 0.05
    one = generate_deterministic_chain(1, 0.02, 0.9, 1.1, 0.05, seed=3)
    assert check_d_dense(one, 0.02) and check_lipschitz(one, 0.9, 1.1)
    with pytest.raises(InvalidParameter):
        generate_deterministic_chain(60, 0.02, 0.9, 1.1, 0.05)


def test_fixtures():
    assert [(s.x, s.y) for s in p1(0.1, 1e-14).solutions] == [(0.1, 1.0), (0.2, 1e-14)]
    assert [(s.x, s.y) for s in p2(0.1).solutions] == [(0.1, 1.0)]
    assert [(s.x, s.y) for s in appendix_k(0.1).solutions] == [(0.5, 1.0), (1.0, 0.1)]
    assert fixture("P1(0.1, 1e-14)") == p1(0.1, 1e-14)
    assert fixture("TwoUniformComplementTruncated", 0.05) == two_uniform_complement_truncated(0.05)
    with pytest.raises(InvalidParameter):
        fixture("Nope")


def test_truncated_sampler_respects_y_min():
    X, Y = two_uniform_complement_truncated(0.05).sample_block(np.random.default_rng(0), 10_000)
    assert Y.min() >= 0.05 and X.max() <= 0.95


def test_json_round_trip():
    for inst in (p1(), appendix_k(), two_uniform_complement(), generate_deterministic_chain(5, 0.05, 1, 1.2, 0.05, 1)):
        back = InstanceModel.from_dict(json.loads(inst.to_json()))
        assert back.key() == inst.key()
    with pytest.raises(InvalidParameter):
        InstanceModel.from_dict({**p1().to_dict(), "extra": 1})


def test_stream_is_chunk_invariant():
    inst = two_uniform_complement()
    a = RealizationStream(inst, np.random.default_rng(9))
    b = RealizationStream(inst, np.random.default_rng(9))
    n = 3 * CHUNK + 16
    Xa, Ya = a.take(n)
    parts = [b.take(k) for k in (1, CHUNK - 1, 5, 2 * CHUNK, 11)]
    np.testing.assert_array_equal(Xa, np.concatenate([p[0] for p in parts]))
    np.testing.assert_array_equal(Ya, np.concatenate([p[1] for p in parts]))


def test_deterministic_realization_constant():
    inst = p1()
    assert np.array_equal(inst.realization(1).xs, inst.realization(500).xs)
