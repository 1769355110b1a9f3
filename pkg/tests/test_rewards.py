import itertools

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from critique_rl.rewards import (
    DomainError, RewardRecord, composite_reward, group_advantages, metarm_reward, process_reward,
)


def test_process_threshold_is_strict():
    assert process_reward(0.5) == 0
    assert process_reward(0.5000001) == 1
    assert process_reward(0.0) == 0 and process_reward(1.0) == 1
    for bad in (-0.1, 1.1, float("nan")):
        with pytest.raises(DomainError):
            process_reward(bad)


def test_composite_branches():
    assert composite_reward(False, True, 1, 0.5) == -1.0
    assert composite_reward(False, False, None, 0.5) == -1.0
    assert composite_reward(True, False, 1, 0.5) == 0.0
    assert composite_reward(True, True, 1, 0.5) == 1.5
    assert composite_reward(True, True, 0, 0.5) == 1.0
    assert composite_reward(True, False, 1, 0.5, regularized=False) == 0.5
    with pytest.raises(DomainError):
        composite_reward(True, True, 1, 1.5)
    with pytest.raises(DomainError):
        composite_reward(True, True, None, 0.5)


def test_metarm_reward_clips_bonus():
    assert metarm_reward(True, True, 1.9, 0.5) == 1.5
    assert metarm_reward(True, True, 1.3, 0.5) == pytest.approx(1.3)
    assert metarm_reward(True, True, 0.6, 0.5) == 1.0
    assert metarm_reward(True, False, 1.9, 0.5) == 0.0
    assert metarm_reward(False, True, 1.9, 0.5) == -1.0


def test_reward_record_source_checked():
    with pytest.raises(ValueError):
        RewardRecord(True, True, None, 1.0, "elsewhere")


def test_advantage_worked_example():
    # rewards [1, 0, 0, 1]: mean 0.5, population std 0.5
    g = group_advantages([1, 0, 0, 1])
    assert g.mean == 0.5 and g.std == 0.5
    assert g.advantages == (1.0, -1.0, -1.0, 1.0)


def test_literal_sigma_variant():
    # root of the summed squares (1.0) over N = 4
    g = group_advantages([1, 0, 0, 1], literal_sigma=True)
    assert g.std == 0.25 and g.advantages == (2.0, -2.0, -2.0, 2.0)
    g = group_advantages([2, 0])
    lit = group_advantages([2, 0], literal_sigma=True)
    assert g.std == 1.0 and lit.std == pytest.approx(np.sqrt(2) / 2)


def test_degenerate_group_is_zero():
    assert group_advantages([1.5] * 4).advantages == (0.0,) * 4
    with pytest.raises(ValueError):
        group_advantages([])


rewards_lists = st.lists(st.floats(-2, 2, allow_nan=False), min_size=2, max_size=8)


@settings(max_examples=200, deadline=None)
@given(r=rewards_lists, shift=st.floats(-5, 5), scale=st.floats(0.1, 10))
def test_advantages_normalised_and_affine_invariant(r, shift, scale):
    assume(np.std(r) > 1e-3)
    a = np.array(group_advantages(r).advantages)
    assert abs(a.mean()) < 1e-9
    assert abs(np.sqrt(np.mean(a ** 2)) - 1.0) < 1e-9
    b = np.array(group_advantages([scale * x + shift for x in r]).advantages)
    np.testing.assert_allclose(a, b, atol=1e-7)


def test_exhaustive_reward_table():
    for valid, match, r, lam in itertools.product([True, False], [True, False],
                                                   [0, 0.5, 0.6, 1, 1.3, 1.9], [0, 0.5, 1]):
        expected_meta = -1.0 if not valid else (0.0 if not match else 1.0 + min(lam, max(0.0, r - 1.0)))
        assert metarm_reward(valid, match, r, lam) == expected_meta
        if r in (0, 1):
            expected = -1.0 if not valid else (1.0 + lam * r if match else 0.0)
            assert composite_reward(valid, match, r, lam) == expected
