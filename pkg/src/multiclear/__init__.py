"""Clearing of multi-asset interbank obligations with physical delivery and price impact."""
from .behavior import AssetMax, InfeasibleFloor, MinTrading, RuleBook, ValueMax, solve_holdings
from .clearing import (
    ClearingError,
    ClearingResult,
    ClearingSystem,
    MonotonicityViolation,
    NonConvergence,
    SolverSettings,
    clearing_holdings,
    diagnostics,
    equilibrium_set_scan,
    fictitious_default,
    price_equilibrium,
    tatonnement,
)
from .market import CappedLinear, Constant, arctan_symmetric, make_ratio_form, make_symmetric_two_asset
from .network import (
    MultiLayerNetwork,
    build_relative_liabilities,
    calibrate_from_aggregates,
    random_network,
    realized_inflow,
    split_two_currency,
)
from .payment_rules import PriorityProportional, Surplus, solve_payment
from .scenarios import emit_plot_data, load_config, run_grexit, run_scenario

__all__ = [
    "AssetMax",
    "CappedLinear",
    "ClearingError",
    "ClearingResult",
    "ClearingSystem",
    "Constant",
    "InfeasibleFloor",
    "MinTrading",
    "MonotonicityViolation",
    "MultiLayerNetwork",
    "NonConvergence",
    "PriorityProportional",
    "RuleBook",
    "SolverSettings",
    "Surplus",
    "ValueMax",
    "arctan_symmetric",
    "build_relative_liabilities",
    "calibrate_from_aggregates",
    "clearing_holdings",
    "diagnostics",
    "emit_plot_data",
    "equilibrium_set_scan",
    "fictitious_default",
    "load_config",
    "make_ratio_form",
    "make_symmetric_two_asset",
    "price_equilibrium",
    "random_network",
    "realized_inflow",
    "run_grexit",
    "run_scenario",
    "solve_holdings",
    "solve_payment",
    "split_two_currency",
    "tatonnement",
]
