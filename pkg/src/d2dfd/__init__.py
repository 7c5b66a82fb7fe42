"""Analytic and Monte Carlo models of overlay cellular / D2D networks with
half- and full-duplex devices."""

from .model import (
    Densities,
    GeneralLaplaceParams,
    Scenario,
    ScenarioError,
    derive_densities,
    load_scenario,
    parse_scenario,
    reference_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Densities",
    "GeneralLaplaceParams",
    "Scenario",
    "ScenarioError",
    "derive_densities",
    "load_scenario",
    "parse_scenario",
    "reference_scenario",
    "__version__",
]
