"""Build a world from a scenario and drive it month by month."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from ..fcl import FuzzyProgram, load_fcl
from ..runtime import World
from ..scenario import Scenario
from .agents import (
    MAIN_AGENT,
    ROUNDS_PER_MONTH,
    DistributorAgent,
    KonsumenAgent,
    MainAgent,
    MarketAgent,
    ProdusenAgent,
)
from .content import DateStamp, payload_kg, payload_money

AGENT_CLASSES = {"produsen": ProdusenAgent, "distributor": DistributorAgent, "konsumen": KonsumenAgent}


@dataclass(frozen=True)
class Audit:
    """Actual holdings versus what the boundary flows say they should be."""

    money_rp: float
    expected_money_rp: float
    stock_kg: float
    expected_stock_kg: float
    min_money_rp: float
    min_stock_kg: float

    @property
    def money_error(self) -> float:
        return abs(self.money_rp - self.expected_money_rp)

    @property
    def stock_error(self) -> float:
        return abs(self.stock_kg - self.expected_stock_kg)


def agent_rng(seed: int, name: str) -> random.Random:
    # string seeds hash with SHA-512, independent of PYTHONHASHSEED
    return random.Random(f"{seed}:{name}")


class Simulation:
    def __init__(self, scenario: Scenario, seed: int = 42, keep_log: bool = True,
                 controllers: Optional[dict[str, FuzzyProgram]] = None):
        self.scenario = scenario
        self.seed = seed
        self.world = World(keep_log=keep_log)
        self.main = MainAgent(scenario.global_)
        self.world.spawn_agent(MAIN_AGENT, None, self.main.behaviors(), state=self.main)
        self.market: dict[str, MarketAgent] = {}
        cache: dict[str, FuzzyProgram] = dict(controllers or {})
        for spec in scenario.expanded():
            if spec.fcl_path not in cache:
                cache[spec.fcl_path] = load_fcl(scenario.fcl_file(spec))
            cls = AGENT_CLASSES[spec.service]
            agent = cls(spec, scenario.global_, cache[spec.fcl_path], agent_rng(seed, spec.name))
            self.world.spawn_agent(spec.name, spec.service, agent.behaviors(), state=agent)
            self.market[spec.name] = agent
        self.initial_money = sum(a.state.money_rp for a in self.market.values())
        self.initial_stock = sum(a.state.stock_kg for a in self.market.values())
        self.months_done = 0
        self.finished = False

    @property
    def total_months(self) -> int:
        return self.scenario.global_.months

    @property
    def date(self) -> DateStamp:
        """The last month every agent has completed (the start month before any)."""
        start = DateStamp(self.scenario.global_.start_year, 1)
        return start.add_months(max(self.months_done, 1) - 1)

    def agents(self) -> list[MarketAgent]:
        return [self.market[n] for n in sorted(self.market)]

    def step_month(self) -> None:
        if self.months_done >= self.total_months:
            raise RuntimeError("simulation already ran all months")
        if self.months_done == 0:
            self.world.run_round()
        for _ in range(ROUNDS_PER_MONTH):
            self.world.run_round()
        self.months_done += 1

    def run(self, on_month: Optional[Callable[["Simulation"], None]] = None) -> None:
        while self.months_done < self.total_months:
            self.step_month()
            if on_month is not None:
                on_month(self)
        self.finish()

    def finish(self) -> None:
        """Record the last (possibly partial) year for every agent."""
        if self.finished:
            return
        self.finished = True
        if self.months_done == 0:
            return
        year = self.date.year
        for agent in self.agents():
            if year not in agent.state.finance_series:
                agent.state.record_year_end(year)

    def audit(self) -> Audit:
        agents = self.agents()
        books = [a.state.books for a in agents]
        in_flight = self.world.in_flight()
        money = math.fsum([a.state.money_rp for a in agents] + [payload_money(m.content) for m in in_flight])
        stock = math.fsum([a.state.stock_kg for a in agents] + [payload_kg(m.content) for m in in_flight])
        expected_money = math.fsum([self.initial_money]
                                   + [b.production_income_rp + b.market_income_rp - b.plant_cost_rp for b in books])
        expected_stock = math.fsum([self.initial_stock]
                                   + [b.harvested_kg - b.consumed_kg - b.market_sold_kg for b in books])
        return Audit(money, expected_money, stock, expected_stock,
                     min((a.state.money_rp for a in agents), default=0.0),
                     min((min((l.kg for l in a.state.stock), default=0.0) for a in agents), default=0.0))

    def service_of(self, name: str) -> Optional[str]:
        if name == MAIN_AGENT:
            return "main"
        return self.market[name].service


def run_scenario(scenario: Scenario, seed: int = 42, keep_log: bool = True) -> Simulation:
    sim = Simulation(scenario, seed=seed, keep_log=keep_log)
    sim.run()
    return sim


def bundled_data_dir() -> Path:
    return Path(__file__).resolve().parent.parent / "data"
