from pathlib import Path

import numpy as np
import pytest

from multiclear import (
    ClearingSystem,
    MinTrading,
    MultiLayerNetwork,
    PriorityProportional,
    RuleBook,
    Surplus,
    arctan_symmetric,
    equilibrium_set_scan,
    random_network,
    tatonnement,
)
from multiclear.scenarios import (
    PLOT_COLUMNS,
    ConfigError,
    emit_plot_data,
    grexit_rules,
    load_config,
    parse_config,
    run_grexit_config,
    run_scenario,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
B = 0.375

LINEAR = """\
network: {source: example, name: two_bank}
inverse_demand: {family: capped_linear, b: 0.375, lower: 0.05, upper: 5.0}
sweep:
  q0_2: [0.5, 0.8, 0.9, 1.0, 2.0, 4.0]
  scan: true
solver: {grid_n: 400}
"""


def linear_selected(q0, b=B):
    """Price reached by tâtonnement from q0 in the two-bank example."""
    if q0 < -b + 2 * np.sqrt(b):
        return max(q0 - 2 * b, 0.05)
    if q0 < 3 - 2 * b / 3:
        return 0.5 * (q0 + b + np.sqrt(q0**2 + 2 * b * (q0 - 2) + b**2))
    return min(0.5 * (q0 + np.sqrt(q0**2 + 8 * b)), 5.0)


@pytest.fixture(scope="module")
def linear_result():
    return run_scenario(parse_config(LINEAR), write=False)


def test_config_errors_carry_lines():
    text = "seed: 0\nnetwork: {source: random, n_firms: -2}\ninverse_demand: {family: arctan_symmetric}\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text, source="bad.yaml")
    assert any(m.startswith("bad.yaml:2: network") for m in exc.value.messages)
    with pytest.raises(ConfigError, match="bad.yaml:2: malformed"):
        parse_config("seed: 0\nnetwork: {source: [}\ninverse_demand: {}\n", source="bad.yaml")
    with pytest.raises(ConfigError):
        parse_config("network: {source: random}\n")  # inverse_demand missing


def test_effective_config_is_echoed(tmp_path):
    cfg = parse_config(LINEAR).with_overrides(seed=5, out=tmp_path)
    assert cfg.effective["solver"]["tol"] == 1e-12
    assert cfg.seed == 5
    again = parse_config(cfg.dump())
    assert again.config_hash() == cfg.config_hash()


@pytest.mark.parametrize("name", ["two_bank_linear", "arctan_value_max", "arctan_min_trading", "grexit_toy"])
def test_shipped_configs_validate(name):
    load_config(CONFIGS / f"{name}.yaml")


def test_linear_sweep_matches_selector(linear_result):
    assert linear_result.failures == 0
    for r in linear_result.records:
        q0 = r["q0"][1]
        assert r["q_star"][1] == pytest.approx(linear_selected(q0), abs=1e-8)
        assert min(abs(v - r["q_star"][1]) for v in r["equilibria"]) <= 1e-6
    counts = [len(r["equilibria"]) for r in linear_result.records]
    assert counts == [1, 1, 3, 3, 1, 1]
    # the attained price jumps between 0.8 and 0.9 and nowhere else
    qs = [r["q_star"][1] for r in linear_result.records]
    assert qs[1] < 0.1 and qs[2] > 0.5


def test_sweep_output_is_reproducible(tmp_path):
    text = LINEAR.replace("scan: true", "scan: false")
    a = run_scenario(parse_config(text).with_overrides(out=tmp_path / "a"))
    b = run_scenario(parse_config(text).with_overrides(out=tmp_path / "b"))
    assert (tmp_path / "a/scenario_sweep.csv").read_bytes() == (tmp_path / "b/scenario_sweep.csv").read_bytes()
    assert (tmp_path / "a/scenario_summary.json").exists()
    assert (tmp_path / "a/scenario_effective_config.yaml").exists()
    par = run_scenario(parse_config(text.replace("grid_n: 400", "grid_n: 400, workers: 2")), write=False)
    assert par.records == a.records
    header, rows = a.csv_rows()
    assert header[0] == "schema_version" and all(r[0] == 1 for r in rows)
    assert b.metadata["config_hash"] == a.metadata["config_hash"]


def test_frictionless_price_is_constant():
    text = """\
network: {source: random, n_firms: 8}
inverse_demand: {family: arctan_symmetric, impact: 0}
sweep: {gamma0: [[0, 0], [0, 5], [0, -5]]}
"""
    res = run_scenario(parse_config(text), write=False)
    for r in res.records:
        assert r["q_star"] == [1.0, 1.0]


def test_value_max_config_stays_at_unshocked_price():
    cfg = load_config(CONFIGS / "arctan_value_max.yaml")
    eff = cfg.effective
    eff["sweep"]["q0_2"] = [1.0]
    res = run_scenario(cfg, write=False)
    np.testing.assert_allclose(res.records[0]["q_star"], [1.0, 1.0], atol=1e-9)


def test_plot_data_kinds(linear_result):
    curve = emit_plot_data(linear_result, "price_curve").splitlines()
    assert curve[0].split(",") == PLOT_COLUMNS["price_curve"] and len(curve) == 7
    eq = emit_plot_data(linear_result, "equilibrium_set").splitlines()
    assert len(eq) == 1 + 10
    assert sum(int(line.split(",")[2]) for line in eq[1:]) == 6
    for kind in PLOT_COLUMNS:
        assert emit_plot_data([] if kind != "trace" else None, kind).strip() == ",".join(PLOT_COLUMNS[kind])
    with pytest.raises(ValueError):
        emit_plot_data([], "histogram")


def test_trace_plot_data(tmp_path):
    net = MultiLayerNetwork.from_interbank(np.zeros((1, 1)), [1.0], [0.0])
    net = MultiLayerNetwork(np.concatenate([net.L, np.zeros_like(net.L)], axis=2), np.array([[1.0, 0.0]]))
    F = arctan_symmetric(3.0, 2.0, 1.0)
    tr = tatonnement(ClearingSystem(net), F, F.shock_for_price([1.0, 0.5]))
    path = tmp_path / "plots/trace.csv"
    text = emit_plot_data(tr, "trace", path)
    assert path.read_text() == text
    assert text.splitlines()[0] == "t,q_1,q_2"
    assert len(text.splitlines()) == len(tr.times) + 1


def test_grexit_priority_orientation():
    book = grexit_rules(4, [1, 3])
    assert [r.order for r in book.payment] == [(0, 1), (1, 0), (0, 1), (1, 0)]
    assert all(r == PriorityProportional(2, order=r.order) for r in book.payment)


def test_grexit_impact_sweep():
    cfg = load_config(CONFIGS / "grexit_toy.yaml")
    cfg.effective["grexit"]["impact_grid"] = [0.0, 1e-4]
    rep = run_grexit_config(cfg)
    text = emit_plot_data(rep, "impact_sweep").splitlines()
    assert text[0] == "b,q_star_2,n_defaults" and len(text) == 3
    assert rep.impact_sweep[0]["n_defaults"] == 0
    assert rep.impact_sweep[1]["q_star_2"] == pytest.approx(float(rep.q_star[1]), abs=1e-9)


def test_relabeling_invariance():
    rng = np.random.default_rng(0)
    for seed in range(3):
        net = random_network(7, seed=seed, link_prob=0.4, m=3)
        perm = rng.permutation(3)
        inv = np.argsort(perm)
        moved = MultiLayerNetwork(net.L[:, :, perm], net.x[:, perm])
        q = rng.uniform(0.3, 2.0, 3)
        for rule in (Surplus(), PriorityProportional(2, order=(2, 0, 1))):
            if isinstance(rule, PriorityProportional):
                moved_rule = PriorityProportional(2, order=tuple(int(inv[k]) for k in rule.order))
            else:
                moved_rule = rule
            a = ClearingSystem(net, RuleBook(rule, MinTrading())).holdings(q)
            b = ClearingSystem(moved, RuleBook(moved_rule, MinTrading())).holdings(q[perm])
            np.testing.assert_allclose(b.holdings, a.holdings[:, perm], atol=1e-10)
            assert a.defaults == b.defaults


def _table_system(seed, rule, settings=None):
    return ClearingSystem(random_network(20, seed=seed), RuleBook(rule, MinTrading()))


def test_payment_rules_change_outcomes():
    """On one random network the three rules clear at different prices with different default sets."""
    F = arctan_symmetric(3.0, 2.0, 1.0)
    out = {}
    for name, rule in (("surplus", Surplus()), ("priority", PriorityProportional(2)),
                       ("proportional", PriorityProportional(0))):
        system = _table_system(0, rule)
        tr = tatonnement(system, F, np.zeros(2))
        out[name] = (tr.terminal[1], system.holdings(tr.terminal).defaults)
    assert out["priority"][0] < 0.35  # pushed toward the price floor
    assert len({v[1] for v in out.values()}) >= 2
    assert len({round(v[0], 6) for v in out.values()}) == 3


def test_proportional_rule_admits_several_equilibria():
    F = arctan_symmetric(3.0, 2.0, 1.0)
    scan = equilibrium_set_scan(_table_system(74, PriorityProportional(0)), F, np.zeros(2), grid_n=200)
    assert len(scan) >= 3
