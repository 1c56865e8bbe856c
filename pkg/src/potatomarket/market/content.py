"""Message payloads exchanged by market agents.

Money and goods in transit always travel inside one of these records, so a
snapshot of the world's in-flight messages plus every agent's books accounts
for all money and commodity in the simulation.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..runtime import content_type


@content_type
@dataclass(frozen=True, order=True)
class DateStamp:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month {self.month} outside 1..12")

    def next(self) -> "DateStamp":
        if self.month == 12:
            return DateStamp(self.year + 1, 1)
        return DateStamp(self.year, self.month + 1)

    def add_months(self, n: int) -> "DateStamp":
        total = self.year * 12 + (self.month - 1) + n
        return DateStamp(total // 12, total % 12 + 1)

    def __str__(self) -> str:
        return f"{self.year}-{self.month:02d}"


@content_type
@dataclass(frozen=True)
class CommodityLot:
    kg: float
    diameter_cm: float
    unit_price_rp: float = 0.0

    def __post_init__(self):
        if not self.kg > 0:
            raise ValueError(f"lot must have positive kg, got {self.kg}")


@content_type
@dataclass(frozen=True)
class DateSync:
    year: int
    month: int


@content_type
@dataclass(frozen=True)
class OfferInfo:
    kg: float
    ask_rp: float


@content_type
@dataclass(frozen=True)
class Interest:
    """Wanted quantity and the buyer's diameter standard.

    ``escrow_rp`` is the buyer's money sent along to pay for it; a (0, 0)
    window accepts any diameter.
    """

    kg: float
    escrow_rp: float = 0.0
    min_diameter_cm: float = 0.0
    max_diameter_cm: float = 0.0


@content_type
@dataclass(frozen=True)
class Allocation:
    """Seller's answer to an Interest: goods, price, and unspent escrow returned."""

    kg: float
    price_rp: float
    lots: tuple[CommodityLot, ...] = ()
    refund_rp: float = 0.0


@content_type
@dataclass(frozen=True)
class PriceQuote:
    rp_per_kg: float


@content_type
@dataclass(frozen=True)
class PledgeProposal:
    rp_per_kg: float


@content_type
@dataclass(frozen=True)
class Delivery:
    lots: tuple[CommodityLot, ...]
    price_rp: float


@content_type
@dataclass(frozen=True)
class Rejection:
    """Goods sent back from a delivery, plus the payment for what was kept."""

    lots: tuple[CommodityLot, ...]
    paid_rp: float = 0.0


def payload_money(content) -> float:
    if isinstance(content, Interest):
        return content.escrow_rp
    if isinstance(content, Allocation):
        return content.refund_rp
    if isinstance(content, Rejection):
        return content.paid_rp
    return 0.0


def payload_kg(content) -> float:
    if isinstance(content, (Allocation, Delivery, Rejection)):
        return sum(lot.kg for lot in content.lots)
    return 0.0
