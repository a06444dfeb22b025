import numpy as np
import pytest

from multiclear import (
    AssetMax,
    CappedLinear,
    ClearingSystem,
    Constant,
    MinTrading,
    NonConvergence,
    PriorityProportional,
    RuleBook,
    SolverSettings,
    Surplus,
    arctan_symmetric,
    clearing_holdings,
    diagnostics,
    equilibrium_set_scan,
    fictitious_default,
    price_equilibrium,
    random_network,
    tatonnement,
)
from multiclear.scenarios import two_bank_network

B = 0.375
F_LIN = CappedLinear.two_asset(B, 0.05, 5.0)


@pytest.fixture(scope="module")
def system():
    return ClearingSystem(two_bank_network())


def test_two_bank_examples(system):
    np.testing.assert_allclose(system.holdings([1.0, 1.0]).holdings, [[1, 2], [2, 1]], atol=1e-12)
    res = system.holdings([1.0, 0.2])
    np.testing.assert_allclose(res.holdings, [[0.6, 0.0], [2.4, 1.0]], atol=1e-12)
    assert res.defaults == (0,)


def test_fictitious_default_matches_picard(system):
    for q2 in (0.2, 0.5, 1.0, 3.0):
        fd = system.fictitious_default([1.0, q2])
        pic = system.holdings([1.0, q2])
        np.testing.assert_allclose(fd.holdings, pic.holdings, atol=1e-10)
        assert fd.defaults == pic.defaults
    fd = fictitious_default(two_bank_network(), q=[1.0, 0.2])
    assert fd.defaults == (0,) and fd.default_trace[-1] == (0,)


def test_greatest_dominates_least():
    for seed in range(5):
        net = random_network(8, seed=seed, link_prob=0.4)
        q = np.array([1.0, 0.7])
        hi = clearing_holdings(net, q=q, direction="greatest")
        lo = clearing_holdings(net, q=q, direction="least")
        assert np.all(hi.payments >= lo.payments - 1e-10)


def test_price_equilibrium_branches(system):
    res = price_equilibrium(system, F_LIN, F_LIN.shock_for_price([1.0, 1.0]))
    assert res.prices[1] == pytest.approx(1.0, abs=1e-9)
    res = price_equilibrium(system, F_LIN, F_LIN.shock_for_price([1.0, 4.0]))
    assert res.prices[1] == pytest.approx(0.5 * (4 + np.sqrt(16 + 8 * B)), abs=1e-8)
    free = arctan_symmetric(3.0, 2.0, 0.0)
    res = price_equilibrium(ClearingSystem(random_network(10, seed=2)), free)
    np.testing.assert_array_equal(res.prices, free(np.zeros(2)))


def test_tatonnement_lands_in_scan_set(system):
    trace = tatonnement(system, F_LIN, F_LIN.shock_for_price([1.0, 0.5]), step=0.1)
    assert trace.converged
    assert trace.terminal[1] == pytest.approx(0.05, abs=1e-9)
    scan = equilibrium_set_scan(system, F_LIN, F_LIN.shock_for_price([1.0, 0.5]), grid_n=400)
    assert np.min(np.abs(scan.second_prices() - trace.terminal[1])) <= 1e-6
    assert trace.prices.shape == (len(trace.times), 2)
    assert trace.times[0] == 0.0 and np.all(np.diff(trace.times) > 0)


def test_single_jump_in_attained_price(system):
    q0s = np.linspace(0.75, 0.95, 21)
    attained = []
    for q0 in q0s:
        attained.append(tatonnement(system, F_LIN, F_LIN.shock_for_price([1.0, q0]), step=0.5).terminal[1])
    attained = np.asarray(attained)
    gaps = np.diff(attained)
    big = np.flatnonzero(np.abs(gaps) > 0.1)
    assert len(big) == 1
    cell = q0s[1] - q0s[0]
    lo3 = -B + 2 * np.sqrt(B)
    assert q0s[big[0]] - cell <= lo3 <= q0s[big[0] + 1] + cell
    # nondecreasing on each side of the jump
    assert np.all(gaps[: big[0]] >= -1e-9) and np.all(gaps[big[0] + 1:] >= -1e-9)


def test_scan_triple_region(system):
    scan = equilibrium_set_scan(system, F_LIN, F_LIN.shock_for_price([1.0, 1.0]), grid_n=400)
    q0 = 1.0
    disc = np.sqrt(q0**2 + 2 * B * (q0 - 2) + B**2)
    ref = sorted([q0 - 2 * B, 0.5 * (q0 + B - disc), 0.5 * (q0 + B + disc)])
    np.testing.assert_allclose(scan.second_prices(), ref, atol=1e-8)


def test_nonconvergence_and_rejections(system):
    net = random_network(10, seed=3, link_prob=0.5)
    tiny = ClearingSystem(net, RuleBook(Surplus(), AssetMax(1)), SolverSettings(max_iter=1))
    with pytest.raises(NonConvergence):
        tiny.holdings([1.0, 0.3])
    three = ClearingSystem(random_network(4, seed=0, m=3))
    with pytest.raises(ValueError):
        equilibrium_set_scan(three, Constant([1.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        tatonnement(system, F_LIN, step=2.0)
    with pytest.raises(ValueError):
        price_equilibrium(system, F_LIN, damping=0.0)


def test_diagnostics_wealth_identity():
    for seed in range(4):
        net = random_network(12, seed=seed, link_prob=0.3)
        rules = RuleBook(PriorityProportional(1), MinTrading())
        res = clearing_holdings(net, rules, q=[1.0, 0.4])
        d = diagnostics(res, net.x)
        assert abs(d["wealth_gap"]) <= 1e-9 * (1 + d["wealth_endowment"])
        np.testing.assert_array_equal(d["defaulted"], d["equity"] < -1e-9)
        rec = res.to_record()
        assert rec["defaults"] == list(res.defaults)
