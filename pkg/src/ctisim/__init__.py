"""Deterministic desk-scale simulator of a blockchain-backed CTI sharing platform."""

__version__ = "0.1.0"

from .config import ScenarioConfig, load_config, parse_config
from .ledger import Chain, verify_chain
from .simulation import ScenarioResult, run_scenario

__all__ = [
    "Chain",
    "ScenarioConfig",
    "ScenarioResult",
    "load_config",
    "parse_config",
    "run_scenario",
    "verify_chain",
    "__version__",
]
