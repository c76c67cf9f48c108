"""Reference mechanisms and approximate oracles."""
from hzmarket.baselines.mechanisms import (
    MechanismReport,
    OrdinalProfile,
    mechanism_report,
    ps_interim,
    rsd_interim,
)
from hzmarket.baselines.oracle import (
    ApproxEquilibrium,
    GridCluster,
    game_oracle,
    game_oracle_all,
    grid_oracle,
    market_maker_value,
)

__all__ = [
    "ApproxEquilibrium",
    "GridCluster",
    "MechanismReport",
    "OrdinalProfile",
    "game_oracle",
    "game_oracle_all",
    "grid_oracle",
    "market_maker_value",
    "mechanism_report",
    "ps_interim",
    "rsd_interim",
]
