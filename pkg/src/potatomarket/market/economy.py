"""Agent books and the non-communicative economics: planting, harvest, sorting,
production and traditional-market sales."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from ..scenario import AgentSpec, GlobalSpec
from .content import CommodityLot, DateStamp

# lots smaller than this are taken whole rather than split off
KG_EPS = 1e-9

DISTRIBUTOR_REFERENCE_KG = 1000.0
KONSUMEN_REFERENCE_MONTHS = 6.0


@dataclass
class PlantedBatch:
    seed_kg: float
    planted_at: DateStamp
    matures_at: DateStamp


@dataclass
class PledgeContract:
    produsen: str
    konsumen: str
    price_rp_per_kg: float
    conversation_id: str
    status: str = "open"

    @property
    def is_open(self) -> bool:
        return self.status == "open"


@dataclass
class Books:
    """Running totals of every flow that crosses the simulation boundary."""

    production_income_rp: float = 0.0
    market_income_rp: float = 0.0
    plant_cost_rp: float = 0.0
    harvested_kg: float = 0.0
    consumed_kg: float = 0.0
    market_sold_kg: float = 0.0


@dataclass
class MarketAgentState:
    spec: AgentSpec
    money_rp: float
    stock: list[CommodityLot] = field(default_factory=list)
    seed_kg: float = 0.0
    batches: list[PlantedBatch] = field(default_factory=list)
    pledge: Optional[PledgeContract] = None
    finance_series: dict[int, float] = field(default_factory=dict)
    commodity_series: dict[int, float] = field(default_factory=dict)
    books: Books = field(default_factory=Books)

    @classmethod
    def from_spec(cls, spec: AgentSpec, global_: GlobalSpec) -> "MarketAgentState":
        stock = []
        if spec.stock_start_kg > 0:
            stock.append(CommodityLot(spec.stock_start_kg, initial_diameter(spec, global_),
                                      spec.normal_buy_price_rp_per_kg))
        return cls(spec=spec, money_rp=spec.money_start_rp, stock=stock, seed_kg=spec.seed_start_kg)

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def stock_kg(self) -> float:
        return sum(lot.kg for lot in self.stock)

    def has_open_pledge(self) -> bool:
        return self.pledge is not None and self.pledge.is_open

    def record_year_end(self, year: int) -> None:
        if year in self.finance_series:
            raise ValueError(f"{self.name}: year {year} already recorded")
        self.finance_series[year] = self.money_rp
        self.commodity_series[year] = self.stock_kg


def initial_diameter(spec: AgentSpec, global_: GlobalSpec) -> float:
    """Starting stock is assumed to meet the holder's own standard."""
    if spec.max_diameter_cm > 0:
        return 0.5 * (spec.min_diameter_cm + spec.max_diameter_cm)
    return max(spec.min_diameter_cm, global_.diameter_mean_cm)


def passes(diameter: float, min_d: float, max_d: float) -> bool:
    if min_d == 0 and max_d == 0:
        return True
    if max_d == 0:
        return diameter >= min_d
    return min_d <= diameter <= max_d


def sort_lots(lots, min_d: float, max_d: float) -> tuple[list[CommodityLot], list[CommodityLot]]:
    """Split lots into (pass, reject) by the [min_d, max_d] diameter window.

    A (0, 0) window passes everything; a zero maximum means no upper bound.
    """
    if min_d > 0 and max_d > 0 and min_d > max_d:
        raise ValueError(f"empty sorting window [{min_d}, {max_d}]")
    ok, bad = [], []
    for lot in lots:
        (ok if passes(lot.diameter_cm, min_d, max_d) else bad).append(lot)
    return ok, bad


def take_kg(lots: list[CommodityLot], kg: float, window: Optional[tuple[float, float]] = None
            ) -> list[CommodityLot]:
    """Remove up to ``kg`` from ``lots`` oldest first, splitting one lot if needed.

    With ``window`` only lots passing that diameter window are taken.
    """
    taken: list[CommodityLot] = []
    remaining = kg
    i = 0
    while i < len(lots) and remaining > KG_EPS:
        lot = lots[i]
        if window is not None and not passes(lot.diameter_cm, *window):
            i += 1
            continue
        if lot.kg <= remaining + KG_EPS:
            taken.append(lots.pop(i))
            remaining -= lot.kg
        else:
            taken.append(dataclasses.replace(lot, kg=remaining))
            lots[i] = dataclasses.replace(lot, kg=lot.kg - remaining)
            remaining = 0.0
    return taken


def available_kg(lots, window: Optional[tuple[float, float]] = None) -> float:
    if window is None:
        return sum(lot.kg for lot in lots)
    return sum(lot.kg for lot in lots if passes(lot.diameter_cm, *window))


def field_capacity_kg(state: MarketAgentState, global_: GlobalSpec) -> float:
    return state.spec.field_ha * global_.seed_per_ha


def plant(state: MarketAgentState, global_: GlobalSpec, date: DateStamp) -> Optional[PlantedBatch]:
    """Plant as much seed as field and money allow, if the field is free."""
    if state.batches or state.seed_kg <= 0:
        return None
    q = min(state.seed_kg, field_capacity_kg(state, global_))
    cost_per_kg = state.spec.plant_cost_rp_per_ha / global_.seed_per_ha
    if cost_per_kg > 0:
        q = min(q, state.money_rp / cost_per_kg)
    if q <= 0:
        return None
    cost = min(q * cost_per_kg, state.money_rp)
    state.seed_kg = max(0.0, state.seed_kg - q)
    state.money_rp -= cost
    state.books.plant_cost_rp += cost
    batch = PlantedBatch(q, date, date.add_months(global_.growth_months))
    state.batches.append(batch)
    return batch


def harvest(state: MarketAgentState, global_: GlobalSpec, date: DateStamp, rng) -> list[CommodityLot]:
    """Harvest every batch maturing at ``date``; the lots are returned, not stocked."""
    lots: list[CommodityLot] = []
    for batch in [b for b in state.batches if b.matures_at == date]:
        state.batches.remove(batch)
        revenue = batch.seed_kg * global_.harvest_ratio
        if rng.random() < state.spec.harvest_failure_chance:
            revenue *= rng.uniform(0.3, 0.8)
        state.books.harvested_kg += revenue
        remaining = revenue
        while remaining > KG_EPS:
            kg = min(global_.lot_kg, remaining)
            if remaining - kg <= KG_EPS:
                kg = remaining
            d = rng.gauss(global_.diameter_mean_cm, global_.diameter_sd_cm)
            d = min(global_.diameter_max_cm, max(global_.diameter_min_cm, d))
            lots.append(CommodityLot(kg, d, 0.0))
            remaining -= kg
    return lots


def sell_at_market(state: MarketAgentState, lots) -> float:
    """Sell lots out of the simulation at the agent's market income price."""
    kg = sum(lot.kg for lot in lots)
    income = kg * state.spec.market_income_rp_per_kg
    state.money_rp += income
    state.books.market_income_rp += income
    state.books.market_sold_kg += kg
    return income


def window(spec: AgentSpec) -> tuple[float, float]:
    return spec.min_diameter_cm, spec.max_diameter_cm


def produce_monthly(state: MarketAgentState) -> float:
    """Run one month of production; returns the shortfall in kg (0 if produced)."""
    usage = state.spec.production_usage_kg
    if usage <= 0:
        return 0.0
    have = available_kg(state.stock, window(state.spec))
    if have + KG_EPS < usage:
        return usage - have
    used = take_kg(state.stock, usage, window(state.spec))
    kg = sum(lot.kg for lot in used)
    income = kg * state.spec.production_income_rp_per_kg
    state.money_rp += income
    state.books.production_income_rp += income
    state.books.consumed_kg += kg
    return 0.0


def receive_delivery(state: MarketAgentState, lots, price: float
                     ) -> tuple[list[CommodityLot], list[CommodityLot], float]:
    """Sort delivered lots and keep what passes and is affordable.

    Returns (kept, returned, paid).  ``paid`` has already left ``state.money_rp``.
    """
    ok, returned = sort_lots(lots, *window(state.spec))
    ok = list(ok)
    if price > 0:
        affordable = state.money_rp / price
        kept = take_kg(ok, affordable)
    else:
        kept, ok = ok, []
    returned = returned + ok
    kept_kg = sum(lot.kg for lot in kept)
    paid = min(kept_kg * price, state.money_rp)
    state.money_rp -= paid
    state.stock.extend(dataclasses.replace(lot, unit_price_rp=price) for lot in kept)
    return kept, returned, paid


def reference_stock_kg(state: MarketAgentState, global_: GlobalSpec) -> float:
    role = state.spec.service
    if role == "produsen":
        return state.spec.field_ha * global_.seed_per_ha * global_.harvest_ratio
    if role == "distributor":
        return DISTRIBUTOR_REFERENCE_KG
    return KONSUMEN_REFERENCE_MONTHS * state.spec.production_usage_kg


def stock_level(state: MarketAgentState, global_: GlobalSpec) -> float:
    ref = reference_stock_kg(state, global_)
    if ref <= 0:
        return 0.0
    return min(2.0, max(0.0, state.stock_kg / ref))


def price_ratio(counterparty_rp: float, own_rp: float) -> float:
    if own_rp <= 0:
        return 2.0 if counterparty_rp > 0 else 1.0
    return min(2.0, max(0.0, counterparty_rp / own_rp))


def target_need_kg(state: MarketAgentState, global_: GlobalSpec) -> float:
    """How much a buyer wants to hold beyond its current stock."""
    role = state.spec.service
    if role == "produsen":
        return 0.0
    return max(0.0, reference_stock_kg(state, global_) - state.stock_kg)
