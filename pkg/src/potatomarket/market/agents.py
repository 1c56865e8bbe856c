"""Market agents and their interaction protocols.

A simulated month spans ``ROUNDS_PER_MONTH`` scheduler rounds.  Agents learn
the month from the MainAgent's SUBSCRIBE broadcast and then act at fixed round
offsets after it, so each protocol finishes inside its month:

====== =====================================================================
offset activity
====== =====================================================================
0      year-end recording (January), harvest, pledge delivery or price poll
2      farmer picks the highest quote and delivers
4      industry production; shortfall starts a commodity request
6      industry picks the cheapest quotes
8      industry proposes a pledge deal
10     farmers offer their stock (allocation at 12)
13     middlemen offer their stock (allocation at 15)
16     farmers plant
====== =====================================================================

Offsets in between are taken up by replies, which are always sent in the
round after the triggering message arrives.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Optional

from ..fcl import FuzzyProgram, evaluate
from ..runtime import AclMessage, Agent, Behavior, BehaviorKind, Performative as P, Protocol, World
from ..scenario import AgentSpec, GlobalSpec
from . import economy as eco
from .content import (
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

log = logging.getLogger(__name__)

ROUNDS_PER_MONTH = 17
HARVEST = 0
DIVERGE_PICK = 2
PRODUCE = 4
REQUEST_PICK = 6
PROPOSE = 8
OFFER_PRODUSEN = 10
ALLOCATE_PRODUSEN = 12
OFFER_DISTRIBUTOR = 13
ALLOCATE_DISTRIBUTOR = 15
PLANT = 16

ACCEPT_THRESHOLD = 0.5
MAIN_AGENT = "Main"


class ProtocolError(Exception):
    pass


@dataclass
class _OpenOffer:
    conversation_id: str
    ask: float
    interests: list[tuple[str, Interest]] = field(default_factory=list)


@dataclass
class _PriceSearch:
    conversation_id: str
    lots: list[CommodityLot]
    quotes: list[tuple[str, float]] = field(default_factory=list)


@dataclass
class _Request:
    conversation_id: str
    needed_kg: float
    quotes: list[tuple[str, OfferInfo]] = field(default_factory=list)


class MarketAgent:
    """Common machinery: date tracking, dispatch, controller queries, buying."""

    service = ""
    sells_to: tuple[str, ...] = ()

    def __init__(self, spec: AgentSpec, global_: GlobalSpec, controller: FuzzyProgram, rng: random.Random):
        self.state = eco.MarketAgentState.from_spec(spec, global_)
        self.global_ = global_
        self.controller = controller
        self.rng = rng
        self.date: Optional[DateStamp] = None
        self.month_round: Optional[int] = None
        self.world: Optional[World] = None
        self._awaiting: dict[str, float] = {}
        self.log: list[str] = []

    @property
    def name(self) -> str:
        return self.state.name

    @property
    def spec(self) -> AgentSpec:
        return self.state.spec

    def behaviors(self) -> list[Behavior]:
        return [Behavior("CyclicBehavior", self.step, BehaviorKind.CYCLIC)]

    # scheduling

    def step(self, world: World, agent: Agent) -> None:
        self.world = world
        for msg in world.drain(self.name):
            self.dispatch(msg)
        if self.month_round is not None:
            self.on_phase(world.round - self.month_round)

    def dispatch(self, msg: AclMessage) -> None:
        key = (msg.performative, msg.protocol)
        if key == (P.SUBSCRIBE, Protocol.DETAILED_YEAR):
            self.on_date(msg)
            return
        handler = getattr(self, f"on_{msg.protocol.value.lower()}_{msg.performative.value.lower()}", None)
        if handler is None:
            raise ProtocolError(f"{self.name} cannot handle {msg.performative.value}/{msg.protocol.value} "
                                f"from {msg.sender}")
        handler(msg)

    def on_date(self, msg: AclMessage) -> None:
        sync: DateSync = msg.content
        date = DateStamp(sync.year, sync.month)
        if date.month == 1 and date.year - 1 >= self.global_.start_year:
            self.state.record_year_end(date.year - 1)
        self.date = date
        self.month_round = self.world.round

    def on_phase(self, offset: int) -> None:
        pass

    # helpers

    def send(self, receivers, performative: P, protocol: Protocol, conversation_id: str, content=None) -> None:
        if isinstance(receivers, str):
            receivers = (receivers,)
        self.world.send(AclMessage(self.name, tuple(receivers), performative, protocol, conversation_id, content))

    def reply(self, msg: AclMessage, performative: P, content=None) -> None:
        self.world.send(msg.reply(performative, content, sender=self.name))

    def conv(self, kind: str) -> str:
        return f"{kind}:{self.name}:{self.date}"

    def decide(self, counterparty_price: float) -> dict[str, float]:
        inputs = {
            "price_ratio": eco.price_ratio(counterparty_price, self.spec.normal_buy_price_rp_per_kg),
            "stock_level": eco.stock_level(self.state, self.global_),
        }
        return evaluate(self.controller, inputs)

    def note(self, text: str) -> None:
        self.log.append(f"{self.date} {text}")

    def window(self) -> tuple[float, float]:
        return eco.window(self.spec)

    def outstanding_kg(self) -> float:
        return sum(self._awaiting.values())

    # buying side, shared by distributors and konsumen

    def on_offer_inform(self, msg: AclMessage) -> None:
        offer: OfferInfo = msg.content
        need = eco.target_need_kg(self.state, self.global_) - self.outstanding_kg()
        accept = self.decide(offer.ask_rp)["accept"]
        kg = min(need, offer.kg)
        if offer.ask_rp > 0:
            kg = min(kg, self.state.money_rp / offer.ask_rp)
        if accept < ACCEPT_THRESHOLD or kg <= eco.KG_EPS:
            # responders to an offer may only use INFORM_IF; zero kg declines
            lo, hi = self.window()
            self.reply(msg, P.INFORM_IF, Interest(0.0, 0.0, lo, hi))
            return
        self._commit(msg, P.INFORM_IF, kg, offer.ask_rp)

    def _commit(self, msg: AclMessage, performative: P, kg: float, ask: float) -> None:
        escrow = min(kg * ask, self.state.money_rp)
        self.state.money_rp -= escrow
        self._awaiting[msg.conversation_id] = kg
        lo, hi = self.window()
        self.reply(msg, performative, Interest(kg, escrow, lo, hi))

    def on_offer_agree(self, msg: AclMessage) -> None:
        if isinstance(msg.content, Allocation):
            self._settle_allocation(msg, msg.content)
        else:
            self.on_request_agreed(msg)

    def on_offer_refuse(self, msg: AclMessage) -> None:
        if isinstance(msg.content, Allocation):
            self._settle_allocation(msg, msg.content)
        # a plain REFUSE declines an offer or request; nothing to undo

    def _settle_allocation(self, msg: AclMessage, alloc: Allocation) -> None:
        self.state.money_rp += alloc.refund_rp
        self._awaiting.pop(msg.conversation_id, None)
        ok, bad = eco.sort_lots(alloc.lots, *self.window())
        self.state.stock.extend(ok)
        if bad:
            eco.sell_at_market(self.state, bad)
        if alloc.kg > 0:
            self.note(f"bought {alloc.kg:.2f} kg from {msg.sender} at {alloc.price_rp:.2f}")

    def on_pledge_cfp(self, msg: AclMessage) -> None:
        offer: OfferInfo = msg.content
        adjust = self.decide(offer.ask_rp)["adjust"]
        self.reply(msg, P.REQUEST_WHEN, PriceQuote(self.spec.normal_buy_price_rp_per_kg * (1.0 + adjust)))

    def on_pledge_confirm(self, msg: AclMessage) -> None:
        delivery: Delivery = msg.content
        kept, returned, paid = eco.receive_delivery(self.state, delivery.lots, delivery.price_rp)
        if self.state.pledge is not None and self.state.pledge.conversation_id == msg.conversation_id:
            self.state.pledge.status = "delivered"
        self.reply(msg, P.DISCONFIRM, Rejection(tuple(returned), paid))
        self.note(f"received {sum(l.kg for l in kept):.2f} kg from {msg.sender}, paid {paid:.2f}")

    # selling side, shared by produsen and distributors

    def _start_offer(self, world: World) -> None:
        if self.state.stock_kg <= eco.KG_EPS:
            return
        buyers = [n for svc in self.sells_to for n in world.search_service(svc)]
        if not buyers:
            return
        ask = self.spec.normal_buy_price_rp_per_kg
        self._offer = _OpenOffer(self.conv("offer"), ask)
        self.send(sorted(buyers), P.INFORM, Protocol.OFFER, self._offer.conversation_id,
                  OfferInfo(self.state.stock_kg, ask))

    def on_offer_inform_if(self, msg: AclMessage) -> None:
        offer = getattr(self, "_offer", None)
        if offer is None or offer.conversation_id != msg.conversation_id:
            raise ProtocolError(f"{self.name}: interest for unknown offer {msg.conversation_id}")
        offer.interests.append((msg.sender, msg.content))

    def _allocate_offer(self) -> None:
        offer = getattr(self, "_offer", None)
        if offer is None:
            return
        self._offer = None
        for buyer, interest in sorted(offer.interests, key=lambda e: e[0]):
            if interest.kg <= eco.KG_EPS:
                continue
            self._deliver(buyer, P.AGREE, offer.conversation_id, interest, offer.ask)

    def _deliver(self, buyer: str, performative: P, conversation_id: str, interest: Interest, ask: float) -> None:
        lots = eco.take_kg(self.state.stock, interest.kg, (interest.min_diameter_cm, interest.max_diameter_cm))
        lots = tuple(CommodityLot(l.kg, l.diameter_cm, ask) for l in lots)
        given = sum(l.kg for l in lots)
        cost = min(interest.escrow_rp, given * ask)
        self.state.money_rp += cost
        refund = interest.escrow_rp - cost
        alloc = Allocation(given, ask, lots, refund)
        perf = performative if given > 0 else P.REFUSE
        self.send(buyer, perf, Protocol.OFFER, conversation_id, alloc)
        if given > 0:
            self.note(f"sold {given:.2f} kg to {buyer} at {ask:.2f}")

    def on_offer_request(self, msg: AclMessage) -> None:
        want: Interest = msg.content
        have = eco.available_kg(self.state.stock, (want.min_diameter_cm, want.max_diameter_cm))
        if have > eco.KG_EPS:
            self.reply(msg, P.QUERY_IF, OfferInfo(have, self.spec.normal_buy_price_rp_per_kg))

    def on_request_agreed(self, msg: AclMessage) -> None:
        self._deliver(msg.sender, P.AGREE, msg.conversation_id, msg.content, self.spec.normal_buy_price_rp_per_kg)


class ProdusenAgent(MarketAgent):
    service = "produsen"
    sells_to = ("distributor", "konsumen")

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._search: Optional[_PriceSearch] = None
        self._offer = None

    def on_phase(self, offset: int) -> None:
        if offset == HARVEST:
            self._harvest()
        elif offset == DIVERGE_PICK:
            self._pick_highest()
        elif offset == OFFER_PRODUSEN:
            self._start_offer(self.world)
        elif offset == ALLOCATE_PRODUSEN:
            self._allocate_offer()
        elif offset == PLANT:
            batch = eco.plant(self.state, self.global_, self.date)
            if batch:
                self.note(f"planted {batch.seed_kg:.2f} kg seed, matures {batch.matures_at}")

    def _harvest(self) -> None:
        lots = eco.harvest(self.state, self.global_, self.date, self.rng)
        if not lots:
            return
        kg = sum(l.kg for l in lots)
        self.note(f"harvested {kg:.2f} kg")
        pledge = self.state.pledge
        if pledge is not None and pledge.is_open:
            pledge.status = "delivered"
            self.send(pledge.konsumen, P.CONFIRM, Protocol.PLEDGE, pledge.conversation_id,
                      Delivery(tuple(lots), pledge.price_rp_per_kg))
            return
        self.state.stock.extend(lots)
        buyers = [n for svc in ("distributor", "konsumen") for n in self.world.search_service(svc)]
        if not buyers:
            return
        self._search = _PriceSearch(self.conv("pledge"), lots)
        self.send(sorted(buyers), P.CFP, Protocol.PLEDGE, self._search.conversation_id,
                  OfferInfo(kg, self.spec.normal_buy_price_rp_per_kg))

    def on_pledge_request_when(self, msg: AclMessage) -> None:
        if self._search is None or self._search.conversation_id != msg.conversation_id:
            raise ProtocolError(f"{self.name}: quote for unknown price search {msg.conversation_id}")
        self._search.quotes.append((msg.sender, msg.content.rp_per_kg))

    def _pick_highest(self) -> None:
        search, self._search = self._search, None
        if search is None or not search.quotes:
            return
        winner, price = pick_highest_quote(search.quotes)
        lots = []
        for lot in search.lots:
            for i, held in enumerate(self.state.stock):
                if held is lot:
                    lots.append(self.state.stock.pop(i))
                    break
        if not lots:
            return
        self.send(winner, P.CONFIRM, Protocol.PLEDGE, search.conversation_id, Delivery(tuple(lots), price))
        self.note(f"delivering harvest to {winner} at {price:.2f}")

    def on_pledge_disconfirm(self, msg: AclMessage) -> None:
        back: Rejection = msg.content
        self.state.money_rp += back.paid_rp
        if back.lots:
            eco.sell_at_market(self.state, back.lots)
            self.note(f"market-sold {sum(l.kg for l in back.lots):.2f} kg returned by {msg.sender}")

    def on_seed_propose(self, msg: AclMessage) -> None:
        proposal: PledgeProposal = msg.content
        can_deliver = self.state.seed_kg > 0 or bool(self.state.batches)
        if self.state.has_open_pledge() or not can_deliver:
            self.reply(msg, P.REJECT_PROPOSAL)
            return
        if self.decide(proposal.rp_per_kg)["accept"] < ACCEPT_THRESHOLD:
            self.reply(msg, P.REJECT_PROPOSAL)
            return
        self.state.pledge = eco.PledgeContract(self.name, msg.sender, proposal.rp_per_kg, msg.conversation_id)
        self.reply(msg, P.ACCEPT_PROPOSAL)
        self.note(f"pledged harvest to {msg.sender} at {proposal.rp_per_kg:.2f}")


class DistributorAgent(MarketAgent):
    service = "distributor"
    sells_to = ("konsumen",)

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._offer = None

    def on_phase(self, offset: int) -> None:
        if offset == OFFER_DISTRIBUTOR:
            self._start_offer(self.world)
        elif offset == ALLOCATE_DISTRIBUTOR:
            self._allocate_offer()


class KonsumenAgent(MarketAgent):
    service = "konsumen"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._request: Optional[_Request] = None
        self._proposal_turn = 0

    def on_phase(self, offset: int) -> None:
        if offset == PRODUCE:
            self._produce()
        elif offset == REQUEST_PICK:
            self._pick_cheapest()
        elif offset == PROPOSE:
            self._propose_pledge()

    def _produce(self) -> None:
        short = eco.produce_monthly(self.state)
        if short <= 0:
            if self.spec.production_usage_kg > 0:
                self.note(f"produced {self.spec.production_usage_kg:.2f} kg")
            return
        sellers = [n for svc in ("produsen", "distributor") for n in self.world.search_service(svc)]
        if not sellers:
            return
        self._request = _Request(self.conv("request"), short)
        lo, hi = self.window()
        self.send(sorted(sellers), P.REQUEST, Protocol.OFFER, self._request.conversation_id,
                  Interest(short, 0.0, lo, hi))

    def on_offer_query_if(self, msg: AclMessage) -> None:
        if self._request is None or self._request.conversation_id != msg.conversation_id:
            raise ProtocolError(f"{self.name}: quote for unknown request {msg.conversation_id}")
        self._request.quotes.append((msg.sender, msg.content))

    def _pick_cheapest(self) -> None:
        req, self._request = self._request, None
        if req is None:
            return
        remaining = req.needed_kg
        for seller, quote in sorted(req.quotes, key=lambda e: (e[1].ask_rp, e[0])):
            kg = min(remaining, quote.kg)
            if quote.ask_rp > 0:
                kg = min(kg, self.state.money_rp / quote.ask_rp)
            if kg <= eco.KG_EPS:
                self.send(seller, P.REFUSE, Protocol.OFFER, req.conversation_id)
                continue
            self._commit_to(seller, req.conversation_id, kg, quote.ask_rp)
            remaining -= kg

    def _commit_to(self, seller: str, conversation_id: str, kg: float, ask: float) -> None:
        escrow = min(kg * ask, self.state.money_rp)
        self.state.money_rp -= escrow
        self._awaiting[f"{conversation_id}@{seller}"] = kg
        lo, hi = self.window()
        self.send(seller, P.AGREE, Protocol.OFFER, conversation_id, Interest(kg, escrow, lo, hi))

    def _settle_allocation(self, msg: AclMessage, alloc: Allocation) -> None:
        self._awaiting.pop(f"{msg.conversation_id}@{msg.sender}", None)
        super()._settle_allocation(msg, alloc)

    def _propose_pledge(self) -> None:
        price = self.spec.normal_pledge_price_rp_per_kg
        if self.state.has_open_pledge() or price <= 0 or self.spec.production_usage_kg <= 0:
            return
        produsen = self.world.search_service("produsen")
        if not produsen:
            return
        target = produsen[self._proposal_turn % len(produsen)]
        self._proposal_turn += 1
        self.send(target, P.PROPOSE, Protocol.SEED, self.conv("seed"), PledgeProposal(price))

    def on_seed_accept_proposal(self, msg: AclMessage) -> None:
        self.state.pledge = eco.PledgeContract(msg.sender, self.name, self.spec.normal_pledge_price_rp_per_kg,
                                               msg.conversation_id)
        self.note(f"pledge deal with {msg.sender}")

    def on_seed_reject_proposal(self, msg: AclMessage) -> None:
        pass


class MainAgent:
    """Keeps the calendar and broadcasts the date to every market agent."""

    def __init__(self, global_: GlobalSpec):
        self.global_ = global_
        self.date = DateStamp(global_.start_year, 1).add_months(-1)
        self.months_sent = 0
        self.name = MAIN_AGENT

    def behaviors(self) -> list[Behavior]:
        return [Behavior("DelayBehavior", self.sync_date, BehaviorKind.DELAYED, period=ROUNDS_PER_MONTH)]

    def sync_date(self, world: World, agent: Agent) -> None:
        if self.months_sent >= self.global_.months:
            return
        self.date = self.date.next()
        self.months_sent += 1
        receivers = [n for svc in ("produsen", "distributor", "konsumen") for n in world.search_service(svc)]
        if receivers:
            world.send(AclMessage(self.name, tuple(sorted(receivers)), P.SUBSCRIBE, Protocol.DETAILED_YEAR,
                                  f"date:{self.date}", DateSync(self.date.year, self.date.month)))


def pick_highest_quote(quotes) -> tuple[str, float]:
    """Highest price wins; ties go to the lexicographically first bidder."""
    return min(quotes, key=lambda e: (-e[1], e[0]))
