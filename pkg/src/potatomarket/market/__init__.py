"""Market domain layer: agents, protocols, economics and the simulation driver."""

from .agents import (
    MAIN_AGENT,
    ROUNDS_PER_MONTH,
    DistributorAgent,
    KonsumenAgent,
    MainAgent,
    MarketAgent,
    ProdusenAgent,
    pick_highest_quote,
)
from .content import CommodityLot, DateStamp
from .economy import (
    MarketAgentState,
    PlantedBatch,
    PledgeContract,
    harvest,
    plant,
    produce_monthly,
    sell_at_market,
    sort_lots,
)
from .protocol import LICENSED, check_log
from .simulation import Audit, Simulation, bundled_data_dir, run_scenario

__all__ = [
    "MAIN_AGENT", "ROUNDS_PER_MONTH", "Audit", "CommodityLot", "DateStamp", "DistributorAgent",
    "KonsumenAgent", "LICENSED", "MainAgent", "MarketAgent", "MarketAgentState", "PlantedBatch",
    "PledgeContract", "ProdusenAgent", "Simulation", "bundled_data_dir", "check_log", "harvest",
    "pick_highest_quote", "plant", "produce_monthly", "run_scenario", "sell_at_market", "sort_lots",
]
