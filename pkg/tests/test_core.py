import math

import numpy as np
import pytest

from repdel.core import (
    EligibleSet,
    History,
    InvalidParameter,
    InvalidProposal,
    Outcome,
    Realization,
    RoundRecord,
    SetKind,
    Solution,
    is_eligible,
    round_outcome,
)


def test_threshold_boundaries():
    s = Solution(0.5, 0.3)
    assert is_eligible(EligibleSet.inclusive(0.5), s)
    assert not is_eligible(EligibleSet.strict(0.5), s)
    assert not is_eligible(EligibleSet.accept_none(), s)
    assert is_eligible(EligibleSet.accept_all(), Solution(0.0, 0.0))


def test_explicit_set_tolerance():
    E = EligibleSet.explicit([(0.25, 0.5)])
    assert E.contains_xy(0.25 + 1e-13, 0.5)
    assert not E.contains_xy(0.26, 0.5)


def test_solution_range_checked():
    with pytest.raises(InvalidParameter):
        Solution(1.5, 0.2)
    with pytest.raises(InvalidParameter):
        Solution(0.2, -0.1)


def test_round_outcome_examples():
    real = Realization(1, [0.5], [0.2])
    assert round_outcome(EligibleSet.inclusive(0.3), real, 0) == (True, 0.5, 0.2)
    assert round_outcome(EligibleSet.inclusive(0.6), real, 0) == (False, 0.0, 0.0)
    assert round_outcome(EligibleSet.accept_all(), real, None) == (False, 0.0, 0.0)
    with pytest.raises(InvalidProposal):
        round_outcome(EligibleSet.accept_all(), real, 3)


@pytest.mark.parametrize("E", [EligibleSet.inclusive(0.25), EligibleSet.strict(0.7),
                               EligibleSet.accept_all(), EligibleSet.accept_none()])
def test_label_round_trip(E):
    assert EligibleSet.from_label(E.label) == E


def _filled(n=12, gamma=0.5):
    h = History(gamma=gamma)
    sets = [EligibleSet.inclusive(0.1), EligibleSet.strict(0.3)]
    for t in range(n):
        E = sets[t % 2]
        acc = t % 3 != 0
        h.append(E, 0 if acc else None, Outcome(acc, 0.4 if acc else 0.0, 0.6 if acc else 0.0),
                 0.4 if acc else math.nan, 0.6 if acc else math.nan)
    return h


def test_history_records_and_discounting():
    h = _filled()
    assert len(h) == 12
    r = h[4]
    assert isinstance(r, RoundRecord) and r.round == 5 and r.accepted
    assert r.agent_utility_discounted == pytest.approx(0.5 ** 4 * 0.6)
    want = sum(0.5 ** t * (0.6 if t % 3 else 0.0) for t in range(12))
    assert h.discounted_agent_utilities().sum() == pytest.approx(want)


def test_history_view_hides_later_rounds():
    h = _filled()
    v = h.view(5)
    assert len(v) == 5
    assert v.fields(4) == h.fields(4)
    with pytest.raises(IndexError):
        v[5]


def test_history_copy_is_independent():
    h = _filled()
    c = h.copy()
    c.overwrite(2, None, Outcome(False, 0.0, 0.0), math.nan, math.nan)
    assert h.fields(2) == (True, 0.4, 0.6)
    assert c.fields(2) == (False, 0.0, 0.0)


def test_history_fill_matches_append():
    a, b = History(), History()
    E = EligibleSet.inclusive(0.3)
    out = Outcome(True, 0.5, 0.2)
    for _ in range(7):
        a.append(E, 1, out, 0.5, 0.2)
    b.fill(7, E, 1, out, 0.5, 0.2)
    assert a.transcript() == b.transcript()
    np.testing.assert_array_equal(a.principal_utilities, b.principal_utilities)


def test_from_records_round_trip():
    h = _filled()
    h2 = History.from_records(list(h), gamma=0.5)
    assert h2.transcript() == h.transcript()
    assert SetKind(h2[1].eligible.kind) == SetKind.STRICT
