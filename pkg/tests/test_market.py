import dataclasses

import pytest

from potatomarket.market import Simulation, agents as agent_mod, economy as eco
from potatomarket.market.agents import ROUNDS_PER_MONTH, MainAgent, pick_highest_quote
from potatomarket.market.content import (
    Allocation,
    CommodityLot,
    DateStamp,
    DateSync,
    Delivery,
    Interest,
    OfferInfo,
    PledgeProposal,
    PriceQuote,
    Rejection,
)
from potatomarket.runtime import Performative as P, Protocol, decode_content, encode_content
from potatomarket.scenario import Scenario, parse_scenario


# harness

def mini(dummy_path, names, years=1, **overrides):
    """A scenario holding only the named dummy agents, with field overrides per name."""
    full = parse_scenario(dummy_path)
    blocks = []
    for b in full.blocks:
        if b.name in names:
            blocks.append(dataclasses.replace(b, **overrides.get(b.name, {})))
    g = dataclasses.replace(full.global_, block_count=len(blocks), duration_years=years)
    return Scenario(g, tuple(blocks), full.base_dir)


class FixedController:
    """Stands in for the fuzzy engine: fixed outputs, recorded inputs."""

    def __init__(self, accept=1.0, adjust=0.0):
        self.accept, self.adjust = accept, adjust
        self.calls = []

    def __call__(self, program, inputs):
        self.calls.append(dict(inputs))
        return {"accept": self.accept, "adjust": self.adjust}


@pytest.fixture
def controller(monkeypatch):
    fixed = FixedController()
    monkeypatch.setattr(agent_mod, "evaluate", fixed)
    return fixed


def run_through(sim, month, offset):
    """Run rounds until every agent has acted at ``offset`` of the 1-based ``month``."""
    target = 1 + (month - 1) * ROUNDS_PER_MONTH + offset
    while sim.world.round <= target:
        sim.world.run_round()


def sent(sim, performative, protocol=None):
    return [e for e in sim.world.message_log
            if e.performative is performative and (protocol is None or e.protocol is protocol)]


class StubRng:
    def __init__(self, u, loss=0.5, diameters=(5.5,)):
        self.u, self.loss = u, loss
        self.diameters = list(diameters)
        self.i = 0

    def random(self):
        return self.u

    def uniform(self, a, b):
        return self.loss

    def gauss(self, mu, sd):
        d = self.diameters[self.i % len(self.diameters)]
        self.i += 1
        return d


def state_of(dummy_path, name, **changes):
    s = parse_scenario(dummy_path)
    spec = next(b for b in s.blocks if b.name == name)
    return eco.MarketAgentState.from_spec(dataclasses.replace(spec, **changes), s.global_), s.global_


# dates

def test_date_wraps_into_new_year():
    assert DateStamp(2002, 12).next() == DateStamp(2003, 1)
    assert DateStamp(2002, 1).add_months(4) == DateStamp(2002, 5)
    with pytest.raises(ValueError):
        DateStamp(2002, 13)


def test_dummy_calendar_ends_in_final_december(dummy_path):
    sim = Simulation(parse_scenario(dummy_path))
    sim.run()
    assert sim.date == DateStamp(2009, 12)
    syncs = sent(sim, P.SUBSCRIBE, Protocol.DETAILED_YEAR)
    convs = sorted({e.conversation_id for e in syncs})
    assert len(convs) == 96
    for conv in convs:
        assert sorted(e.receiver for e in syncs if e.conversation_id == conv) == \
            ["D3", "D4", "K5", "K6", "P1", "P2"]


def test_all_agents_share_the_month(dummy_path):
    sim = Simulation(parse_scenario(dummy_path))
    for _ in range(14):
        sim.step_month()
        assert {a.date for a in sim.agents()} == {sim.date}
    assert sim.date == DateStamp(2003, 2)
    assert all(set(a.state.finance_series) == {2002} for a in sim.agents())


def test_main_agent_stops_after_last_month(dummy_path):
    main = MainAgent(dataclasses.replace(parse_scenario(dummy_path).global_, duration_years=1))
    sim = Simulation(parse_scenario(dummy_path))
    main.months_sent = 12
    before = main.date
    main.sync_date(sim.world, None)
    assert main.date == before and sim.world.pending_count() == 0


# economy operations

def test_plant_uses_seed_and_money(dummy_path):
    state, g = state_of(dummy_path, "P1")
    batch = eco.plant(state, g, DateStamp(2002, 1))
    assert batch.seed_kg == 20 and batch.matures_at == DateStamp(2002, 5)
    assert state.money_rp == 34000 and state.seed_kg == 0
    assert state.books.plant_cost_rp == 1000
    assert eco.plant(state, g, DateStamp(2002, 2)) is None


def test_field_capacity_binds_only_above_capacity(dummy_path):
    state, g = state_of(dummy_path, "P1", seed_start_kg=5000, money_start_rp=10**9)
    assert eco.field_capacity_kg(state, g) == pytest.approx(2300)
    assert eco.plant(state, g, DateStamp(2002, 1)).seed_kg == pytest.approx(2300)
    assert state.seed_kg == pytest.approx(2700)
    # below capacity only money binds: 35000 Rp at 50 Rp/kg plants 700 kg
    small, g = state_of(dummy_path, "P1", seed_start_kg=2299)
    assert eco.plant(small, g, DateStamp(2002, 1)).seed_kg == pytest.approx(700)
    rich, g = state_of(dummy_path, "P1", seed_start_kg=2299, money_start_rp=10**9)
    assert eco.plant(rich, g, DateStamp(2002, 1)).seed_kg == pytest.approx(2299)


def test_plant_without_seed_or_money_is_noop(dummy_path):
    state, g = state_of(dummy_path, "P1", seed_start_kg=0)
    assert eco.plant(state, g, DateStamp(2002, 1)) is None
    broke, g = state_of(dummy_path, "P1", money_start_rp=0)
    assert eco.plant(broke, g, DateStamp(2002, 1)) is None
    assert broke.seed_kg == 20


def test_harvest_without_failure(dummy_path):
    state, g = state_of(dummy_path, "P1")
    eco.plant(state, g, DateStamp(2002, 1))
    assert eco.harvest(state, g, DateStamp(2002, 4), StubRng(0.99)) == []
    lots = eco.harvest(state, g, DateStamp(2002, 5), StubRng(0.99))
    assert [lot.kg for lot in lots] == [10, 10, 10, 10]
    assert state.books.harvested_kg == 40 and state.batches == []


def test_harvest_failure_scales_revenue(dummy_path):
    state, g = state_of(dummy_path, "P1")
    eco.plant(state, g, DateStamp(2002, 1))
    lots = eco.harvest(state, g, DateStamp(2002, 5), StubRng(0.1, loss=0.5))
    assert sum(lot.kg for lot in lots) == pytest.approx(20)


def test_harvest_without_planting_yields_nothing(dummy_path):
    state, g = state_of(dummy_path, "P1", seed_start_kg=0)
    assert eco.harvest(state, g, DateStamp(2002, 5), StubRng(0.99)) == []


def test_harvest_diameters_clamped(dummy_path):
    state, g = state_of(dummy_path, "P1")
    eco.plant(state, g, DateStamp(2002, 1))
    lots = eco.harvest(state, g, DateStamp(2002, 5), StubRng(0.99, diameters=(-3.0, 40.0, 5.0)))
    assert [lot.diameter_cm for lot in lots] == [1.0, 12.0, 5.0, 1.0]


def test_sort_lots_by_window():
    lots = [CommodityLot(1, 4.0), CommodityLot(1, 5.5), CommodityLot(1, 6.0)]
    ok, bad = eco.sort_lots(lots, 4.9, 6.3)
    assert [l.diameter_cm for l in ok] == [5.5, 6.0] and [l.diameter_cm for l in bad] == [4.0]
    assert eco.sort_lots(lots, 0, 0) == (lots, [])
    assert eco.sort_lots([], 4.9, 6.3) == ([], [])
    with pytest.raises(ValueError):
        eco.sort_lots(lots, 6.3, 4.9)


def test_zero_maximum_means_no_upper_bound():
    ok, bad = eco.sort_lots([CommodityLot(1, 4.0), CommodityLot(1, 11.0)], 5.0, 0)
    assert [l.diameter_cm for l in ok] == [11.0] and len(bad) == 1


def test_take_kg_splits_and_respects_window():
    lots = [CommodityLot(10, 4.0), CommodityLot(10, 5.5), CommodityLot(10, 5.6)]
    taken = eco.take_kg(lots, 15, (5.0, 6.0))
    assert [(l.kg, l.diameter_cm) for l in taken] == [(10, 5.5), (5, 5.6)]
    assert [(l.kg, l.diameter_cm) for l in lots] == [(10, 4.0), (5, 5.6)]
    assert eco.take_kg(lots, 100) == [CommodityLot(10, 4.0), CommodityLot(5, 5.6)] and lots == []


def test_produce_monthly(dummy_path):
    state, _ = state_of(dummy_path, "K5")
    assert eco.produce_monthly(state) == 0
    assert state.stock_kg == 350 and state.money_rp == 400000 + 450000
    short, _ = state_of(dummy_path, "K5", stock_start_kg=100)
    assert eco.produce_monthly(short) == pytest.approx(50)
    assert short.stock_kg == 100 and short.money_rp == 400000
    idle, _ = state_of(dummy_path, "K5", production_usage_kg=0, stock_start_kg=0)
    assert eco.produce_monthly(idle) == 0 and idle.money_rp == 400000


def test_produce_only_uses_in_window_stock(dummy_path):
    state, _ = state_of(dummy_path, "K5", stock_start_kg=0)
    state.stock.extend([CommodityLot(200, 4.0), CommodityLot(100, 5.5)])
    assert eco.produce_monthly(state) == pytest.approx(50)
    assert state.stock_kg == 300


def test_sell_at_market(dummy_path):
    state, _ = state_of(dummy_path, "D3")
    assert eco.sell_at_market(state, [CommodityLot(4, 4.0)]) == 4800
    assert state.money_rp == 250000 + 4800 and state.books.market_sold_kg == 4
    assert eco.sell_at_market(state, []) == 0
    nothing, _ = state_of(dummy_path, "D3", market_income_rp_per_kg=0)
    eco.sell_at_market(nothing, [CommodityLot(4, 4.0)])
    assert nothing.money_rp == 250000 and nothing.books.market_sold_kg == 4


def test_receive_delivery_settlement(dummy_path):
    state, _ = state_of(dummy_path, "K5", stock_start_kg=0)
    lots = [CommodityLot(10, d) for d in (5.2, 5.5, 5.9, 7.0)]
    kept, returned, paid = eco.receive_delivery(state, lots, 6200)
    assert sum(l.kg for l in kept) == 30 and paid == 186000
    assert [l.diameter_cm for l in returned] == [7.0]
    assert state.money_rp == 400000 - 186000 and state.stock_kg == 30
    assert all(l.unit_price_rp == 6200 for l in state.stock)


def test_receive_delivery_affordability_cap(dummy_path):
    state, _ = state_of(dummy_path, "K5", stock_start_kg=0, money_start_rp=62000)
    lots = [CommodityLot(10, d) for d in (5.2, 5.5, 5.9, 7.0)]
    kept, returned, paid = eco.receive_delivery(state, lots, 6200)
    assert sum(l.kg for l in kept) == pytest.approx(10) and paid == pytest.approx(62000)
    assert sum(l.kg for l in returned) == pytest.approx(30)
    assert state.money_rp == pytest.approx(0)


def test_receive_delivery_rejects_all(dummy_path):
    state, _ = state_of(dummy_path, "K5", stock_start_kg=0)
    kept, returned, paid = eco.receive_delivery(state, [CommodityLot(40, 9.0)], 6200)
    assert kept == [] and paid == 0 and sum(l.kg for l in returned) == 40


def test_controller_inputs(dummy_path):
    assert eco.price_ratio(6200, 5300) == pytest.approx(1.1698, abs=1e-4)
    assert eco.price_ratio(50000, 5300) == 2.0 and eco.price_ratio(0, 5300) == 0.0
    assert eco.price_ratio(5, 0) == 2.0 and eco.price_ratio(0, 0) == 1.0
    k5, g = state_of(dummy_path, "K5")
    assert eco.stock_level(k5, g) == pytest.approx(500 / 900)
    d3, g = state_of(dummy_path, "D3")
    assert eco.stock_level(d3, g) == pytest.approx(12 / 1000)
    p1, g = state_of(dummy_path, "P1", stock_start_kg=50000)
    assert eco.stock_level(p1, g) == 2.0
    assert eco.target_need_kg(p1, g) == 0 and eco.target_need_kg(k5, g) == pytest.approx(400)


def test_record_year_end_rejects_duplicates(dummy_path):
    state, _ = state_of(dummy_path, "D3")
    state.record_year_end(2002)
    assert state.finance_series == {2002: 250000} and state.commodity_series == {2002: 12}
    with pytest.raises(ValueError):
        state.record_year_end(2002)


def test_pick_highest_quote():
    assert pick_highest_quote([("D3", 5700 * 1.1), ("K5", 6000.0)]) == ("D3", pytest.approx(6270))
    assert pick_highest_quote([("K6", 1.0)]) == ("K6", 1.0)
    assert pick_highest_quote([("D4", 6000.0), ("D3", 6000.0)]) == ("D3", 6000.0)
    quotes = [("D3", 5200.0), ("D4", 5900.0), ("K5", 5800.0)]
    scaled = [(n, q * 3.7) for n, q in quotes]
    assert pick_highest_quote(quotes)[0] == pick_highest_quote(scaled)[0] == "D4"


def test_payloads_round_trip():
    lots = (CommodityLot(10.0, 5.5, 5300.0), CommodityLot(2.5, 4.0))
    for item in (DateStamp(2002, 1), DateSync(2002, 1), OfferInfo(20.0, 5300.0), Interest(5.0, 26500.0, 4.9, 6.3),
                 Allocation(5.0, 5300.0, lots, 10.0), PriceQuote(6270.0), PledgeProposal(6200.0),
                 Delivery(lots, 6200.0), Rejection(lots, 1.0)):
        assert decode_content(encode_content(item)) == item


# protocols

def test_offer_serves_buyers_in_name_order(dummy_path, controller):
    sc = mini(dummy_path, ["P1", "D3", "D4"], P1=dict(stock_start_kg=20, seed_start_kg=0),
              D3=dict(money_start_rp=15 * 5300), D4=dict(money_start_rp=15 * 5300))
    sim = Simulation(sc)
    run_through(sim, 1, 14)
    p1, d3, d4 = (sim.market[n].state for n in ("P1", "D3", "D4"))
    assert p1.stock_kg == 0 and p1.money_rp == 35000 + 20 * 5300
    assert d3.stock_kg == pytest.approx(12 + 15) and d3.money_rp == pytest.approx(0)
    assert d4.stock_kg == pytest.approx(3 + 5) and d4.money_rp == pytest.approx(10 * 5300)
    audit = sim.audit()
    assert audit.money_error <= 1e-6 and audit.stock_error <= 1e-9
    ratios = {round(c["price_ratio"], 6) for c in controller.calls}
    assert ratios == {round(5300 / 5700, 6), round(5300 / 5500, 6)}


def test_offer_declined_by_all_leaves_stock(dummy_path, controller):
    controller.accept = 0.0
    sc = mini(dummy_path, ["P1", "D3", "D4"], P1=dict(stock_start_kg=20, seed_start_kg=0))
    sim = Simulation(sc)
    run_through(sim, 1, 16)
    assert sim.market["P1"].state.stock_kg == 20 and sim.market["P1"].state.money_rp == 35000
    replies = sent(sim, P.INFORM_IF, Protocol.OFFER)
    assert sorted(e.sender for e in replies) == ["D3", "D4"]
    assert not sent(sim, P.AGREE, Protocol.OFFER) and not sent(sim, P.REFUSE, Protocol.OFFER)


def test_distributor_offers_only_to_konsumen(dummy_path, controller):
    sc = mini(dummy_path, ["P1", "D3", "K5"], P1=dict(stock_start_kg=0, seed_start_kg=0))
    sim = Simulation(sc)
    run_through(sim, 1, 16)
    offers = sent(sim, P.INFORM, Protocol.OFFER)
    assert {(e.sender, e.receiver) for e in offers} == {("D3", "K5")}


def test_request_buys_cheapest_first(dummy_path, controller):
    sc = mini(dummy_path, ["P1", "D3", "K5"], P1=dict(stock_start_kg=20, seed_start_kg=0),
              D3=dict(stock_start_kg=100), K5=dict(stock_start_kg=100))
    sim = Simulation(sc)
    run_through(sim, 1, 8)
    p1, d3, k5 = (sim.market[n].state for n in ("P1", "D3", "K5"))
    assert p1.stock_kg == 0 and p1.money_rp == 35000 + 20 * 5300
    assert d3.stock_kg == pytest.approx(70) and d3.money_rp == pytest.approx(250000 + 30 * 5700)
    assert k5.stock_kg == pytest.approx(150)
    assert k5.money_rp == pytest.approx(400000 - 20 * 5300 - 30 * 5700)
    assert {e.receiver for e in sent(sim, P.REQUEST, Protocol.OFFER)} == {"P1", "D3"}
    assert {e.receiver for e in sent(sim, P.AGREE, Protocol.OFFER) if e.sender == "K5"} == {"P1", "D3"}


def test_request_without_stock_expires(dummy_path, controller):
    sc = mini(dummy_path, ["D3", "K5"], D3=dict(stock_start_kg=0), K5=dict(stock_start_kg=100))
    sim = Simulation(sc)
    run_through(sim, 1, 9)
    assert sent(sim, P.REQUEST, Protocol.OFFER)
    assert not sent(sim, P.QUERY_IF) and not sent(sim, P.AGREE)
    assert sim.market["K5"].state.money_rp == 400000


def test_pledge_deal_accepted(dummy_path, controller):
    sim = Simulation(mini(dummy_path, ["P1", "K5"], years=1, P1=dict(stock_start_kg=0)))
    run_through(sim, 1, 10)
    p1, k5 = sim.market["P1"].state, sim.market["K5"].state
    assert p1.pledge is not None and k5.pledge is not None
    assert (p1.pledge.konsumen, k5.pledge.produsen) == ("K5", "P1")
    assert p1.pledge.price_rp_per_kg == 6200
    produsen_ratio = [c["price_ratio"] for c in controller.calls]
    assert pytest.approx(6200 / 5300) in produsen_ratio
    run_through(sim, 3, 16)
    assert len(sent(sim, P.PROPOSE, Protocol.SEED)) == 1


def test_pledge_rejection_rotates_produsen(dummy_path, controller):
    controller.accept = 0.0
    sim = Simulation(mini(dummy_path, ["P1", "P2", "K5"], P1=dict(stock_start_kg=0), P2=dict(stock_start_kg=0)))
    run_through(sim, 3, 16)
    assert [e.receiver for e in sent(sim, P.PROPOSE, Protocol.SEED)] == ["P1", "P2", "P1"]
    assert len(sent(sim, P.REJECT_PROPOSAL, Protocol.SEED)) == 3
    assert all(sim.market[n].state.pledge is None for n in ("P1", "P2", "K5"))


def test_pledged_harvest_goes_to_dealer(dummy_path, controller):
    sc = mini(dummy_path, ["P1", "K5"], P1=dict(stock_start_kg=0, harvest_failure_chance=0))
    sim = Simulation(sc)
    run_through(sim, 5, 3)
    p1, k5 = sim.market["P1"].state, sim.market["K5"].state
    assert p1.books.harvested_kg == pytest.approx(40)
    assert p1.pledge.status == "delivered" and k5.pledge.status == "delivered"
    assert [e.receiver for e in sent(sim, P.CONFIRM, Protocol.PLEDGE)] == ["K5"]
    assert not sent(sim, P.CFP)
    kept = k5.stock_kg - (500 - 3 * 150)  # 500 kg covers three months of production
    returned = p1.books.market_sold_kg
    assert kept + returned == pytest.approx(40)
    assert p1.money_rp == pytest.approx(34000 + kept * 6200 + returned * 1000)


def test_divergence_sells_to_highest_quote(dummy_path, controller):
    controller.adjust = 0.1
    sc = mini(dummy_path, ["P1", "D3", "D4"], P1=dict(stock_start_kg=0, harvest_failure_chance=0),
              D3=dict(money_start_rp=10**7), D4=dict(money_start_rp=10**7))
    sim = Simulation(sc)
    run_through(sim, 5, 5)
    cfps = sent(sim, P.CFP, Protocol.PLEDGE)
    assert sorted(e.receiver for e in cfps) == ["D3", "D4"]
    assert sorted(e.sender for e in sent(sim, P.REQUEST_WHEN, Protocol.PLEDGE)) == ["D3", "D4"]
    assert [e.receiver for e in sent(sim, P.CONFIRM, Protocol.PLEDGE)] == ["D3"]
    p1, d3 = sim.market["P1"].state, sim.market["D3"].state
    kept = d3.stock_kg - 12
    assert kept + p1.books.market_sold_kg == pytest.approx(40)
    assert p1.money_rp == pytest.approx(34000 + kept * 5700 * 1.1 + p1.books.market_sold_kg * 1000)
    audit = sim.audit()
    assert audit.money_error <= 1e-6 and audit.stock_error <= 1e-9


def test_divergence_without_buyers_keeps_harvest(dummy_path, controller):
    sim = Simulation(mini(dummy_path, ["P1"], P1=dict(stock_start_kg=0, harvest_failure_chance=0)))
    run_through(sim, 5, 5)
    assert sim.market["P1"].state.stock_kg == pytest.approx(40)
    assert not sim.world.message_log or not sent(sim, P.CFP)


# year-end series

def test_idle_agent_series_constant(dummy_path):
    sim = Simulation(mini(dummy_path, ["D3"], years=3))
    sim.run()
    state = sim.market["D3"].state
    assert state.finance_series == {2002: 250000, 2003: 250000, 2004: 250000}
    assert state.commodity_series == {2002: 12, 2003: 12, 2004: 12}


def test_series_match_ledger_replay(dummy_path):
    sim = Simulation(mini(dummy_path, ["K5"], years=2))
    sim.run()
    state = sim.market["K5"].state
    # 500 kg covers three months of 150; nobody sells, so production stops after March 2002
    assert state.commodity_series == {2002: 50, 2003: 50}
    assert state.finance_series == {2002: 400000 + 450 * 3000, 2003: 400000 + 450 * 3000}
    b = state.books
    assert state.money_rp == pytest.approx(400000 + b.production_income_rp + b.market_income_rp - b.plant_cost_rp)


def test_dummy_series_have_eight_years(dummy_path):
    sim = Simulation(parse_scenario(dummy_path))
    sim.run()
    for agent in sim.agents():
        assert sorted(agent.state.finance_series) == list(range(2002, 2010))
        assert sorted(agent.state.commodity_series) == list(range(2002, 2010))
        assert agent.state.finance_series[2009] == agent.state.money_rp


# invariants

def test_dummy_conserves_every_round(dummy_path):
    sim = Simulation(parse_scenario(dummy_path), seed=11)
    for _ in range(1 + 24 * ROUNDS_PER_MONTH):
        sim.world.run_round()
        audit = sim.audit()
        assert audit.money_error <= 1e-6 and audit.stock_error <= 1e-9
        assert audit.min_money_rp >= 0 and audit.min_stock_kg >= 0


def test_at_most_one_open_pledge(dummy_path):
    sim = Simulation(parse_scenario(dummy_path), seed=5)

    def check(s):
        for k in ("K5", "K6"):
            pledge = s.market[k].state.pledge
            if pledge is not None and pledge.is_open:
                assert s.market[pledge.produsen].state.pledge.conversation_id == pledge.conversation_id
        open_by = [a.state.pledge.produsen for a in s.agents()
                   if a.service == "produsen" and a.state.has_open_pledge()]
        assert len(open_by) == len(set(open_by))

    sim.run(on_month=check)


def test_planted_seed_within_field(dummy_path):
    sim = Simulation(parse_scenario(dummy_path))

    def check(s):
        for a in s.agents():
            cap = eco.field_capacity_kg(a.state, s.scenario.global_)
            assert sum(b.seed_kg for b in a.state.batches) <= cap + 1e-9

    sim.run(on_month=check)
