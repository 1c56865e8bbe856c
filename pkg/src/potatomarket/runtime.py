"""Deterministic agent runtime.

Agents live inside a :class:`World`.  Time advances in scheduler rounds: at the
start of each round every message sent during the previous round is delivered,
then every live agent runs its due behaviors once, agents visited in
lexicographic order of their names.  Nothing here depends on wall-clock time or
thread scheduling, so two runs with the same inputs produce the same message log.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Optional

log = logging.getLogger(__name__)


class Performative(str, enum.Enum):
    REQUEST = "REQUEST"
    QUERY_IF = "QUERY_IF"
    PROPOSE = "PROPOSE"
    ACCEPT_PROPOSAL = "ACCEPT_PROPOSAL"
    REJECT_PROPOSAL = "REJECT_PROPOSAL"
    INFORM = "INFORM"
    INFORM_IF = "INFORM_IF"
    AGREE = "AGREE"
    REFUSE = "REFUSE"
    CFP = "CFP"
    CONFIRM = "CONFIRM"
    DISCONFIRM = "DISCONFIRM"
    REQUEST_WHEN = "REQUEST_WHEN"
    SUBSCRIBE = "SUBSCRIBE"


class Protocol(str, enum.Enum):
    OFFER = "Offer"
    SEED = "Seed"
    PLEDGE = "Pledge"
    DETAILED_YEAR = "DetailedYear"


SERVICES = ("produsen", "distributor", "konsumen")


class AgentRuntimeError(Exception):
    """Base class for runtime failures."""


class DuplicateAgentError(AgentRuntimeError):
    pass


class UnknownAgentError(AgentRuntimeError):
    pass


class SimulationError(AgentRuntimeError):
    """A behavior raised while being stepped."""

    def __init__(self, agent: str, cause: BaseException):
        super().__init__(f"behavior of agent {agent!r} failed: {cause!r}")
        self.agent = agent
        self.cause = cause


def validate_agent_id(name: str) -> str:
    if not isinstance(name, str) or not name or any(c.isspace() for c in name):
        raise ValueError(f"invalid agent id {name!r}: must be non-empty without whitespace")
    return name


# --- content serialization -------------------------------------------------

_CONTENT_TYPES: dict[str, type] = {}


def content_type(cls):
    """Class decorator registering a dataclass as a message payload type."""
    if not dataclasses.is_dataclass(cls):
        raise TypeError(f"{cls.__name__} is not a dataclass")
    _CONTENT_TYPES[cls.__name__] = cls
    return cls


def _to_tagged(value: Any) -> Any:
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        name = type(value).__name__
        if name not in _CONTENT_TYPES:
            raise TypeError(f"unregistered content type {name}")
        return {
            "type": name,
            "fields": {f.name: _to_tagged(getattr(value, f.name)) for f in dataclasses.fields(value)},
        }
    if isinstance(value, (list, tuple)):
        return [_to_tagged(v) for v in value]
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _from_tagged(value: Any) -> Any:
    if isinstance(value, dict):
        cls = _CONTENT_TYPES[value["type"]]
        return cls(**{k: _from_tagged(v) for k, v in value["fields"].items()})
    if isinstance(value, list):
        # sequences travel as JSON arrays and always come back as tuples
        return tuple(_from_tagged(v) for v in value)
    return value


def encode_content(content: Any) -> str:
    """Serialize a payload to its self-describing wire form (JSON text)."""
    return json.dumps(_to_tagged(content), sort_keys=True, separators=(",", ":"))


def decode_content(wire: str) -> Any:
    return _from_tagged(json.loads(wire))


# --- messages ---------------------------------------------------------------


@dataclass(frozen=True)
class AclMessage:
    sender: str
    receivers: tuple[str, ...]
    performative: Performative
    protocol: Protocol
    conversation_id: str
    content: Any = None
    in_reply_to: Optional[str] = None

    def __post_init__(self):
        if not self.receivers:
            raise ValueError("message needs at least one receiver")
        object.__setattr__(self, "receivers", tuple(self.receivers))
        object.__setattr__(self, "performative", Performative(self.performative))
        object.__setattr__(self, "protocol", Protocol(self.protocol))

    def reply(self, performative: Performative, content: Any = None, protocol: Optional[Protocol] = None,
              sender: Optional[str] = None) -> "AclMessage":
        """Build a reply addressed to this message's sender."""
        if sender is None:
            if len(self.receivers) != 1:
                raise ValueError("sender must be given when replying to a multicast message")
            sender = self.receivers[0]
        return AclMessage(
            sender=sender,
            receivers=(self.sender,),
            performative=performative,
            protocol=protocol or self.protocol,
            conversation_id=self.conversation_id,
            content=content,
            in_reply_to=self.conversation_id,
        )


@dataclass(frozen=True)
class _Envelope:
    """One in-flight copy of a message for a single receiver."""

    seq: int
    round: int
    sender: str
    receiver: str
    performative: Performative
    protocol: Protocol
    conversation_id: str
    in_reply_to: Optional[str]
    wire: str

    def open(self) -> AclMessage:
        return AclMessage(
            sender=self.sender,
            receivers=(self.receiver,),
            performative=self.performative,
            protocol=self.protocol,
            conversation_id=self.conversation_id,
            content=decode_content(self.wire),
            in_reply_to=self.in_reply_to,
        )


@dataclass(frozen=True)
class LogEntry:
    round: int
    sender: str
    receiver: str
    performative: Performative
    protocol: Protocol
    conversation_id: str

    def to_line(self) -> str:
        return "\t".join(
            [str(self.round), self.sender, self.receiver, self.performative.value,
             self.protocol.value, self.conversation_id]
        )


# --- behaviors and agents ---------------------------------------------------


class BehaviorKind(enum.Enum):
    ONE_SHOT = "one-shot"
    CYCLIC = "cyclic"
    DELAYED = "delayed"


@dataclass
class Behavior:
    """A unit of agent activity.

    ``step`` is called as ``step(world, agent)``.  One-shot behaviors run once,
    cyclic behaviors run every round, delayed behaviors run on every
    ``period``-th round counted from the round they were enqueued in.
    """

    name: str
    step: Callable[["World", "Agent"], None]
    kind: BehaviorKind = BehaviorKind.CYCLIC
    period: int = 1
    enqueued_round: int = 0

    def __post_init__(self):
        if self.kind is BehaviorKind.DELAYED and self.period < 1:
            raise ValueError("delayed behavior period must be >= 1")

    def due(self, round_no: int) -> bool:
        if self.kind is BehaviorKind.DELAYED:
            return (round_no - self.enqueued_round) % self.period == 0
        return True


@dataclass
class Agent:
    name: str
    service: Optional[str]
    behaviors: list[Behavior] = field(default_factory=list)
    mailbox: deque = field(default_factory=deque)
    state: Any = None

    def pending(self) -> int:
        return len(self.mailbox)


@dataclass
class RoundStats:
    round: int = 0
    delivered: int = 0
    behaviors_run: int = 0
    sent: int = 0

    def is_idle(self) -> bool:
        return self.delivered == 0 and self.behaviors_run == 0 and self.sent == 0


class World:
    """Container for agents, their mailboxes and the service directory."""

    def __init__(self, keep_log: bool = True):
        self.round = 0
        self._agents: dict[str, Agent] = {}
        self._directory: dict[str, str] = {}
        self._pending: list[_Envelope] = []
        self._seq = 0
        self.keep_log = keep_log
        self.message_log: list[LogEntry] = []
        self.total_sent = 0
        self.total_delivered = 0
        self.total_received = 0
        self.dropped = 0
        self.peak_in_flight = 0
        self.history: list[RoundStats] = []
        self._sent_this_round = 0

    # lifecycle

    def spawn_agent(self, name: str, service: Optional[str], behaviors: Iterable[Behavior] = (),
                    state: Any = None) -> Agent:
        validate_agent_id(name)
        if name in self._agents:
            raise DuplicateAgentError(f"agent {name!r} already exists")
        if service is not None and service not in SERVICES:
            raise ValueError(f"unknown service {service!r}")
        agent = Agent(name=name, service=service, state=state)
        self._agents[name] = agent
        if service is not None:
            self._directory[name] = service
        for b in behaviors:
            self.add_behavior(agent, b)
        log.debug("spawned %s (%s)", name, service)
        return agent

    def add_behavior(self, agent: Agent, behavior: Behavior) -> None:
        behavior.enqueued_round = self.round
        agent.behaviors.append(behavior)

    def kill_agent(self, name: str) -> None:
        agent = self._agents.pop(name, None)
        if agent is None:
            raise UnknownAgentError(name)
        self._directory.pop(name, None)
        self.dropped += len(agent.mailbox)
        kept = [e for e in self._pending if e.receiver != name]
        self.dropped += len(self._pending) - len(kept)
        self._pending = kept

    def agent(self, name: str) -> Agent:
        try:
            return self._agents[name]
        except KeyError:
            raise UnknownAgentError(name) from None

    def agents(self) -> list[Agent]:
        return [self._agents[n] for n in sorted(self._agents)]

    def __contains__(self, name: str) -> bool:
        return name in self._agents

    # yellow pages

    def search_service(self, service: str) -> list[str]:
        return sorted(n for n, s in self._directory.items() if s == service)

    def directory(self) -> list[tuple[str, str]]:
        return sorted(self._directory.items())

    # messaging

    def send(self, msg: AclMessage) -> None:
        missing = [r for r in msg.receivers if r not in self._agents]
        if missing:
            raise UnknownAgentError(f"unknown receiver(s): {', '.join(missing)}")
        wire = encode_content(msg.content)
        for receiver in msg.receivers:
            self._seq += 1
            env = _Envelope(self._seq, self.round, msg.sender, receiver, msg.performative,
                            msg.protocol, msg.conversation_id, msg.in_reply_to, wire)
            self._pending.append(env)
            if self.keep_log:
                self.message_log.append(LogEntry(self.round, msg.sender, receiver, msg.performative,
                                                 msg.protocol, msg.conversation_id))
        self.total_sent += len(msg.receivers)
        self._sent_this_round += len(msg.receivers)

    def receive(self, name: str, performative: Optional[Performative] = None,
                protocol: Optional[Protocol] = None) -> Optional[AclMessage]:
        """Remove and return the oldest delivered message matching the pattern."""
        box = self.agent(name).mailbox
        for i, env in enumerate(box):
            if performative is not None and env.performative is not Performative(performative):
                continue
            if protocol is not None and env.protocol is not Protocol(protocol):
                continue
            del box[i]
            self.total_received += 1
            return env.open()
        return None

    def drain(self, name: str) -> Iterator[AclMessage]:
        while True:
            msg = self.receive(name)
            if msg is None:
                return
            yield msg

    def in_flight(self) -> list[AclMessage]:
        """Sent-but-undelivered messages and delivered-but-unread mailbox contents."""
        out = [e.open() for e in self._pending]
        for agent in self.agents():
            out.extend(e.open() for e in agent.mailbox)
        return out

    def pending_count(self) -> int:
        return len(self._pending)

    # scheduling

    def run_round(self) -> RoundStats:
        stats = RoundStats(round=self.round)
        self.peak_in_flight = max(self.peak_in_flight, len(self._pending))
        pending, self._pending = self._pending, []
        for env in pending:
            self._agents[env.receiver].mailbox.append(env)
        stats.delivered = len(pending)
        self.total_delivered += len(pending)
        self._sent_this_round = 0
        for name in sorted(self._agents):
            agent = self._agents.get(name)
            if agent is None:
                continue
            for behavior in list(agent.behaviors):
                if not behavior.due(self.round):
                    continue
                try:
                    behavior.step(self, agent)
                except SimulationError:
                    raise
                except Exception as exc:
                    raise SimulationError(name, exc) from exc
                stats.behaviors_run += 1
                if behavior.kind is BehaviorKind.ONE_SHOT:
                    agent.behaviors.remove(behavior)
        stats.sent = self._sent_this_round
        self.history.append(stats)
        self.round += 1
        return stats

    def dump_log(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.message_log)
