import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiclear.network import build_relative_liabilities
from multiclear.payment_rules import (
    PriorityProportional,
    Surplus,
    center_and_weights,
    payment_map,
    payment_utility,
    rule_from_config,
    solve_payment,
    solve_payments,
)
from multiclear.scenarios import two_bank_network

ONE = np.ones(2)


def test_surplus_center_and_weights():
    delta = 0.01
    c, d = center_and_weights(Surplus(delta=(delta, delta)), ONE, np.array([0.5, 1.0]), ONE)
    np.testing.assert_allclose(c, [1 + delta, 1 + delta])
    np.testing.assert_allclose(d, [1 / (0.5 + delta), 1 / delta])


def test_priority_fill_levels():
    rule = PriorityProportional(2)
    s, pi = rule.fill_levels(ONE[None], np.array([[0.0, 1.5]]), ONE)
    np.testing.assert_allclose(s, [[1.0, 0.5]])
    _, pi0 = PriorityProportional(0).fill_levels(ONE[None], np.array([[0.0, 1.5]]), ONE)
    np.testing.assert_allclose(pi0, [0.75])


def test_pi_is_one_when_priority_covers_everything():
    _, pi = PriorityProportional(1).fill_levels(np.array([[1.0, 0.0]]), np.array([[2.0, 0.0]]), ONE)
    assert pi[0] == 1.0


def test_spec_examples():
    np.testing.assert_allclose(solve_payment(Surplus(), ONE, [0.5, 1.0], ONE), [0.5, 1.0], atol=1e-12)
    np.testing.assert_allclose(solve_payment(PriorityProportional(2), ONE, [0.0, 1.5], ONE), [1.0, 0.5], atol=1e-12)
    np.testing.assert_allclose(solve_payment(PriorityProportional(0), ONE, [0.0, 1.5], ONE), [0.75, 0.75], atol=1e-12)
    for rule in (Surplus(), PriorityProportional(0), PriorityProportional(2)):
        np.testing.assert_array_equal(solve_payment(rule, ONE, [2.0, 2.0], ONE), ONE)


def test_priority_order_reverses_seniority():
    p = solve_payment(PriorityProportional(2, order=(1, 0)), ONE, [0.0, 1.5], ONE)
    np.testing.assert_allclose(p, [0.5, 1.0], atol=1e-12)


def test_zero_obligations_pay_nothing():
    np.testing.assert_array_equal(solve_payment(Surplus(), np.zeros(3), np.ones(3), np.ones(3)), 0.0)


def test_eisenberg_noe_reduction():
    rng = np.random.default_rng(0)
    for _ in range(300):
        pbar, e, q = rng.uniform(0, 5, 3)
        for rule in (PriorityProportional(1), PriorityProportional(0), Surplus()):
            p = solve_payment(rule, [pbar], [e], [q])
            assert p[0] == min(pbar, e * q / q)


def _oracle(rule, pbar, e, q, n=400):
    p1, p2 = np.linspace(0, pbar[0], n), np.linspace(0, pbar[1], n)
    c, d = center_and_weights(rule, pbar, e, q)
    h = -0.5 * (d[0] * (c[0] - p1)[:, None] ** 2 + d[1] * (c[1] - p2)[None, :] ** 2)
    ok = q[0] * p1[:, None] + q[1] * p2[None, :] <= e @ q
    return h[ok].max()


@pytest.mark.parametrize(
    "rule", [Surplus(), PriorityProportional(0), PriorityProportional(1), PriorityProportional(2, order=(1, 0))]
)
def test_grid_oracle_is_tight(rule):
    """The optimum beats every grid point, and the grid gets close to it."""
    rng = np.random.default_rng(1)
    for _ in range(50):
        pbar, e, q = rng.uniform(0.2, 3, 2), rng.uniform(0, 1.5, 2), rng.uniform(0.3, 3, 2)
        p = solve_payment(rule, pbar, e, q)
        h = payment_utility(rule, p, pbar, e, q)[0]
        best = _oracle(rule, pbar, e, q)
        assert best <= h + 1e-8
        c, d = center_and_weights(rule, pbar, e, q)
        cell = np.max(pbar) / 399
        assert h - best <= np.max(d * np.abs(c)) * 4 * cell + 1e-9


@settings(max_examples=200, deadline=None)
@given(
    m=st.integers(1, 4),
    seed=st.integers(0, 2**31),
    rule_ix=st.integers(0, 3),
)
def test_feasible_and_monotone_in_inflow(m, seed, rule_ix):
    rng = np.random.default_rng(seed)
    rules = [Surplus(), PriorityProportional(0), PriorityProportional(m),
             PriorityProportional(int(rng.integers(0, m + 1)), order=tuple(int(k) for k in rng.permutation(m)))]
    rule = rules[rule_ix]
    pbar = rng.uniform(0, 3, m) * (rng.random(m) < 0.8)
    q = rng.uniform(0.2, 3, m)
    e = rng.uniform(0, 2, m)
    e2 = e + rng.uniform(0, 1, m) * (rng.random(m) < 0.5)
    p, p2 = solve_payment(rule, pbar, e, q), solve_payment(rule, pbar, e2, q)
    w = e @ q
    assert np.all(p >= 0) and np.all(p <= pbar)
    assert p @ q <= w + 1e-10 * max(1.0, w)
    if w < pbar @ q:
        assert abs(p @ q - w) <= 1e-10 * max(1.0, w)
    else:
        np.testing.assert_array_equal(p, pbar)
    assert np.all(p2 >= p - 1e-10)


def test_batch_matches_single():
    rng = np.random.default_rng(2)
    pbar, e, q = rng.uniform(0, 2, (30, 3)), rng.uniform(0, 1, (30, 3)), rng.uniform(0.5, 2, 3)
    rule = PriorityProportional(1, order=(2, 0, 1))
    batch = solve_payments(rule, pbar, e, q)
    for i in range(30):
        np.testing.assert_allclose(batch[i], solve_payment(rule, pbar[i], e[i], q), rtol=1e-14, atol=1e-15)


def test_payment_map_two_bank():
    net = two_bank_network()
    rel = build_relative_liabilities(net)
    np.testing.assert_array_equal(payment_map(Surplus(), net, rel, rel.pbar, ONE), rel.pbar)
    zero = type(net)(net.L, np.zeros((2, 2)))
    np.testing.assert_array_equal(payment_map(Surplus(), zero, rel, np.zeros((2, 2)), ONE), 0.0)


def test_payments_see_holdings_only_through_obligation_cap():
    net = two_bank_network()
    rel = build_relative_liabilities(net)
    y = np.array([[1.0, 0.0], [0.0, 1.0]])
    bigger = y + np.array([[0.0, 5.0], [5.0, 0.0]])  # excess over obligations
    np.testing.assert_array_equal(payment_map(Surplus(), net, rel, y, ONE), payment_map(Surplus(), net, rel, bigger, ONE))


def test_rule_validation_and_config():
    with pytest.raises(ValueError):
        PriorityProportional(-1)
    with pytest.raises(ValueError):
        PriorityProportional(1, order=(0, 0))
    with pytest.raises(ValueError):
        Surplus(delta=(0.0, 1.0))
    with pytest.raises(ValueError):
        solve_payment(PriorityProportional(3), ONE, ONE, ONE)
    for rule in (Surplus(), PriorityProportional(1, order=(1, 0)), Surplus(delta=(0.1, 0.2))):
        assert rule_from_config(rule.to_config()) == rule
    assert rule_from_config({"payment_rule": "proportional"}) == PriorityProportional(0)
    with pytest.raises(ValueError):
        rule_from_config({"payment_rule": "lottery"})
