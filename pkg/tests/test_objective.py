import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regada import objective
from regada.autodiff import Tensor, backward, grad_check, ops
from regada.checks import full_loss_case, tiny_config
from regada.config import LossConfig
from regada.errors import ConfigError, ValidationError
from regada.objective import (
    action_triplet_loss,
    adverb_triplet_loss,
    regression_loss,
    sample_negative_actions,
    sample_negative_adverbs,
    total_loss,
    trip,
)


def t(x):
    return Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)


def trip_oracle(a, p, n, mu):
    return max(0.0, float(np.linalg.norm(a - p) - np.linalg.norm(a - n) + mu))


def test_trip_examples():
    assert trip(t([[0.0, 0.0]]), t([[0.0, 0.0]]), t([[1.0, 0.0]]), 0.5).data[0] == 0.0
    assert trip(t([[1.0, 2.0]]), t([[3.0, 1.0]]), t([[3.0, 1.0]]), 0.5).data[0] == 0.5
    assert trip(t([[0.0, 0.0]]), t([[0.0, 3.0]]), t([[2.0, 0.0]]), 0.5).data[0] == 1.5


def test_trip_subgradient_zero_at_kink():
    a, p, n = t([[0.0, 0.0]]), t([[0.0, 1.0]]), t([[0.0, 1.5]])
    backward(ops.sum(trip(a, p, n, 0.5)))
    np.testing.assert_array_equal(p.grad, 0.0)


@pytest.mark.parametrize("loss", [action_triplet_loss, adverb_triplet_loss])
def test_triplet_batches(loss, rng):
    one = loss(t([[0.0, 0.0]]), t([[0.0, 3.0]]), t([[2.0, 0.0]]), 0.5).item()
    assert one == 1.5
    assert loss(t([[1.0, 2.0]]), t([[3.0, 1.0]]), t([[3.0, 1.0]]), 0.5).item() == 0.5
    a, p, n = (rng.standard_normal((6, 4)) for _ in range(3))
    val = loss(t(a), t(p), t(n), 0.5).item()
    oracle = np.mean([trip_oracle(a[i], p[i], n[i], 0.5) for i in range(6)])
    assert abs(val - oracle) <= 1e-12
    doubled = loss(t(np.vstack([a, a])), t(np.vstack([p, p])), t(np.vstack([n, n])), 0.5).item()
    assert abs(doubled - val) <= 1e-12


def test_regression_examples(rng):
    x = rng.standard_normal((3, 4))
    assert regression_loss(t(x), t(x)).item() == 0.0
    assert regression_loss(t([[0.0, 0.0]]), t([[1.0, 0.0]])).item() == 1.0
    y = rng.standard_normal((3, 4))
    oracle = np.mean([np.sum((x[i] - y[i]) ** 2) for i in range(3)])
    assert abs(regression_loss(t(x), t(y)).item() - oracle) <= 1e-12


def test_total_loss_weighting():
    comps = {"action": t(0.7), "adverb": t(0.2), "reg": t(3.0)}
    assert total_loss(comps, LossConfig(1, 0, 0)).item() == 0.7
    assert total_loss(comps, LossConfig(0, 0, 1)).item() == 3.0
    assert abs(total_loss(comps, LossConfig(1, 2, 1)).item() - (0.7 + 0.4 + 3.0)) <= 1e-15
    with pytest.raises(ConfigError):
        LossConfig(0, 0, 0).validate()
    with pytest.raises(ConfigError):
        total_loss(comps, LossConfig(0, 0, 0))


def test_zero_lambda_equals_removed_term(monkeypatch):
    cfg = tiny_config()
    cfg.loss.lambda_reg = 0.0
    f, params, _ = full_loss_case(np.random.default_rng(2), cfg)
    backward(f())
    with_zero = [p.grad.copy() for p in params]

    def never(*args):
        raise AssertionError("a zero-weight term was computed")

    monkeypatch.setattr(objective, "regression_loss", never)
    for p in params:
        p.grad = None
    backward(f())
    for g0, p in zip(with_zero, params):
        np.testing.assert_array_equal(g0, p.grad)


def test_full_loss_gradients_at_five_configs():
    rng = np.random.default_rng(21)
    worst = max(grad_check(*full_loss_case(rng)[:2]) for _ in range(5))
    assert worst <= 1e-4


def test_total_loss_nonnegative():
    rng = np.random.default_rng(5)
    for _ in range(5):
        f, _, _ = full_loss_case(rng)
        assert f().item() >= 0.0


@given(st.integers(2, 9), st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_negative_action_never_positive(n_actions, seed):
    r = np.random.default_rng(seed)
    acts = r.integers(0, n_actions, 400)
    neg = sample_negative_actions(acts, n_actions, r)
    assert np.all(neg != acts) and neg.min() >= 0 and neg.max() < n_actions


def test_negative_sampling_properties():
    r = np.random.default_rng(0)
    adv = r.integers(0, 6, 10_000)
    ant = np.array([1, 0, 3, 2, 5, 4])
    np.testing.assert_array_equal(sample_negative_adverbs(adv, 6, "antonym", r, ant), ant[adv])
    rand = sample_negative_adverbs(adv, 6, "random_nonmatching", r)
    assert np.all(rand != adv)
    assert set(np.unique(rand)) == set(range(6))
    acts = r.integers(0, 5, 10_000)
    neg = sample_negative_actions(acts, 5, r)
    assert np.all(neg != acts)
    # uniform over the other four actions
    counts = np.bincount(neg[acts == 0], minlength=5)[1:]
    assert counts.min() > 0.2 * counts.sum()


def test_sampling_errors():
    with pytest.raises(ConfigError):
        sample_negative_actions(np.zeros(3, int), 1, np.random.default_rng(0))
    with pytest.raises(ValidationError):
        sample_negative_adverbs(np.zeros(3, int), 4, "antonym", np.random.default_rng(0), None)
