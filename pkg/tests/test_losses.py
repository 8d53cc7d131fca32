import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from fairselect.losses import (
    DegenerateBatchError,
    FairnessConfig,
    LossValue,
    bce_loss,
    fairness_loss,
    parity_loss_combined,
    parity_loss_pairwise,
    total_loss,
)

probs_st = st.lists(st.floats(0.01, 0.99), min_size=2, max_size=12)


def fd(f, x, h=1e-6):
    x = np.array(x, dtype=float)
    return oracles.central_diff(lambda: f(x), x, h)


def rel(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8))


def test_bce_hand_value():
    assert bce_loss([0.5, 0.5], [0, 1]).value == pytest.approx(math.log(2), abs=1e-15)


def test_bce_near_perfect():
    assert bce_loss([0.999999], [1]).value < 1e-5


@pytest.mark.parametrize("probs", [[0.0, 0.5], [1.0, 0.5]])
def test_bce_rejects_boundary(probs):
    with pytest.raises(ValueError):
        bce_loss(probs, [0, 1])


def test_bce_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        bce_loss([0.2, 0.3], [1])


def test_bce_gradient_matches_fd(rng):
    for _ in range(10):
        p = rng.uniform(0.05, 0.95, size=9)
        y = rng.integers(0, 2, size=9)
        g = bce_loss(p, y).grad
        assert rel(g, fd(lambda q: bce_loss(q, y).value, p)) < 1e-6


def test_pairwise_hand_value():
    assert parity_loss_pairwise([0.8, 0.8, 0.5, 0.5], [1, 1, 0, 0]).value == pytest.approx(0.09, abs=1e-15)


def test_pairwise_needs_both_groups():
    for mask in ([1, 1], [0, 0]):
        with pytest.raises(DegenerateBatchError, match="degenerate batch"):
            parity_loss_pairwise([0.4, 0.6], mask)


def test_combined_hand_value():
    lv = parity_loss_combined([0.9, 0.3, 0.6, 0.2], [0, 1, 0, 1], [0, 0, 0, 1], 0.32, 0.68)
    assert lv.value == pytest.approx(0.0812, abs=1e-15)
    assert lv.components["race"] == pytest.approx(0.02, abs=1e-15)
    assert lv.components["country"] == pytest.approx(0.0612, abs=1e-15)


def test_combined_zero_race_weight_is_country_term():
    p, r, c = [0.9, 0.3, 0.6, 0.2], [0, 1, 0, 1], [0, 0, 0, 1]
    full = parity_loss_combined(p, r, c, 0.0, 0.68)
    assert full.value == pytest.approx(0.68 * 0.09, abs=1e-15)
    # with the race term switched off an empty race group is allowed
    assert parity_loss_combined(p, [0, 0, 0, 0], c, 0.0, 0.68).value == full.value


def test_combined_empty_weighted_group():
    with pytest.raises(DegenerateBatchError):
        parity_loss_combined([0.1, 0.2], [0, 0], [1, 0], 0.32, 0.68)


def test_total_loss_linear():
    pred = LossValue(0.5, np.array([0.1, 0.2]))
    fair = LossValue(0.1, np.array([1.0, -1.0]))
    t = total_loss(pred, fair, 3.0)
    assert t.value == pytest.approx(0.8)
    np.testing.assert_allclose(t.grad, [3.1, -2.8])
    z = total_loss(pred, fair, 0.0)
    assert z.value == 0.5 and np.array_equal(z.grad, pred.grad)
    with pytest.raises(ValueError):
        total_loss(pred, fair, -1.0)


def test_fairness_config_validation():
    with pytest.raises(ValueError):
        FairnessConfig(lam=-1)
    with pytest.raises(ValueError):
        FairnessConfig(mode="gender_only")
    with pytest.raises(ValueError):
        FairnessConfig(w_race=0, w_country=0)


def test_fairness_loss_modes():
    p = np.array([0.9, 0.3, 0.6, 0.2])
    r = np.array([0, 1, 0, 1], bool)
    c = np.array([0, 0, 0, 1], bool)
    race = fairness_loss(FairnessConfig(lam=1, mode="race_only"), p, r, c)
    assert race.value == pytest.approx((0.25 - 0.75) ** 2)
    assert race.components == {"race": race.value, "country": 0.0}
    term = fairness_loss(FairnessConfig(lam=1, mode="country_only", single_loss="combined_term"), p, r, c)
    assert term.value == pytest.approx(0.09)
    comb = fairness_loss(FairnessConfig(lam=1), p, r, c)
    assert comb.value == pytest.approx(0.0812)


@settings(max_examples=60, deadline=None)
@given(probs=probs_st, data=st.data())
def test_pairwise_matches_oracle_and_fd(probs, data):
    n = len(probs)
    mask = data.draw(st.lists(st.booleans(), min_size=n, max_size=n).filter(lambda m: 0 < sum(m) < n))
    lv = parity_loss_pairwise(probs, mask)
    assert lv.value == pytest.approx(oracles.pairwise(probs, mask), abs=1e-12)
    numeric = fd(lambda q: parity_loss_pairwise(q, mask).value, probs)
    assert np.max(np.abs(lv.grad - numeric)) < 1e-8


@settings(max_examples=60, deadline=None)
@given(probs=probs_st, data=st.data(), wr=st.floats(0, 2), wc=st.floats(0.01, 2))
def test_combined_matches_oracle_and_fd(probs, data, wr, wc):
    n = len(probs)
    masks = st.lists(st.booleans(), min_size=n, max_size=n).filter(any)
    r, c = data.draw(masks), data.draw(masks)
    lv = parity_loss_combined(probs, r, c, wr, wc)
    assert lv.value == pytest.approx(oracles.combined(probs, r, c, wr, wc), abs=1e-12)
    numeric = fd(lambda q: parity_loss_combined(q, r, c, wr, wc).value, probs)
    assert np.max(np.abs(lv.grad - numeric)) < 1e-8


@settings(max_examples=40, deadline=None)
@given(probs=probs_st, data=st.data())
def test_pairwise_permutation_invariant(probs, data):
    n = len(probs)
    mask = data.draw(st.lists(st.booleans(), min_size=n, max_size=n).filter(lambda m: 0 < sum(m) < n))
    perm = data.draw(st.permutations(range(n)))
    a = parity_loss_pairwise(probs, mask).value
    b = parity_loss_pairwise([probs[i] for i in perm], [mask[i] for i in perm]).value
    assert a == pytest.approx(b, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(v=st.floats(0.01, 0.99), n=st.integers(2, 10), data=st.data())
def test_equal_predictions_are_fixed_points(v, n, data):
    probs = [v] * n
    r = data.draw(st.lists(st.booleans(), min_size=n, max_size=n).filter(lambda m: 0 < sum(m) < n))
    c = data.draw(st.lists(st.booleans(), min_size=n, max_size=n).filter(any))
    for lv in (parity_loss_pairwise(probs, r), parity_loss_combined(probs, r, c, 0.32, 0.68)):
        assert abs(lv.value) <= 1e-12 and np.max(np.abs(lv.grad)) <= 1e-12
