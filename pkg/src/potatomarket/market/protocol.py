"""Which performatives each role may send under which interaction protocol.

The table lists the licensed interactions of the market: for every
(sender role, performative, protocol) it lists the roles that may receive it.
"""

from __future__ import annotations

from typing import Callable, Iterable

from ..runtime import LogEntry, Performative as P, Protocol

PRODUSEN, DISTRIBUTOR, KONSUMEN, MAIN = "produsen", "distributor", "konsumen", "main"

LICENSED: dict[tuple[str, P, Protocol], frozenset[str]] = {}


def _allow(role: str, protocol: Protocol, performatives: Iterable[P], receivers: Iterable[str]) -> None:
    for perf in performatives:
        key = (role, perf, protocol)
        LICENSED[key] = LICENSED.get(key, frozenset()) | frozenset(receivers)


# produsen
_allow(PRODUSEN, Protocol.OFFER, [P.QUERY_IF], [DISTRIBUTOR, KONSUMEN])
_allow(PRODUSEN, Protocol.SEED, [P.ACCEPT_PROPOSAL, P.REJECT_PROPOSAL], [KONSUMEN])
_allow(PRODUSEN, Protocol.OFFER, [P.INFORM, P.INFORM_IF, P.AGREE, P.REFUSE], [DISTRIBUTOR, KONSUMEN])
_allow(PRODUSEN, Protocol.PLEDGE, [P.CFP, P.CONFIRM], [DISTRIBUTOR, KONSUMEN])
# distributor
_allow(DISTRIBUTOR, Protocol.OFFER, [P.INFORM_IF], [PRODUSEN])
_allow(DISTRIBUTOR, Protocol.PLEDGE, [P.REQUEST_WHEN, P.DISCONFIRM], [PRODUSEN])
_allow(DISTRIBUTOR, Protocol.OFFER, [P.QUERY_IF], [KONSUMEN])
_allow(DISTRIBUTOR, Protocol.OFFER, [P.INFORM, P.INFORM_IF, P.AGREE, P.REFUSE], [KONSUMEN])
# konsumen
_allow(KONSUMEN, Protocol.OFFER, [P.INFORM_IF], [PRODUSEN, DISTRIBUTOR])
_allow(KONSUMEN, Protocol.PLEDGE, [P.REQUEST_WHEN, P.DISCONFIRM], [PRODUSEN])
_allow(KONSUMEN, Protocol.SEED, [P.PROPOSE, P.AGREE, P.REFUSE], [PRODUSEN])
_allow(KONSUMEN, Protocol.OFFER, [P.REQUEST, P.AGREE, P.REFUSE], [PRODUSEN, DISTRIBUTOR])
# main agent
_allow(MAIN, Protocol.DETAILED_YEAR, [P.SUBSCRIBE], [PRODUSEN, DISTRIBUTOR, KONSUMEN])


def check_log(entries: Iterable[LogEntry], role_of: Callable[[str], str]) -> list[str]:
    """Return one violation description per unlicensed log entry."""
    problems = []
    for e in entries:
        sender, receiver = role_of(e.sender), role_of(e.receiver)
        allowed = LICENSED.get((sender, e.performative, e.protocol))
        if allowed is None:
            problems.append(f"round {e.round}: {e.sender} ({sender}) may not send "
                            f"{e.performative.value} under {e.protocol.value}")
        elif receiver not in allowed:
            problems.append(f"round {e.round}: {e.performative.value}/{e.protocol.value} from {sender} "
                            f"may not go to {e.receiver} ({receiver})")
    return problems
