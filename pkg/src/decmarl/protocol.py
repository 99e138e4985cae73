"""Peer-to-peer Share -> Reason -> Aggregate sessions between agents in range.

An agent broadcasts its goal to whoever is within its observation radius.
Contacts with the same goal are peers: they send their known map plus
their network parameters.  Contacts with another goal that have seen the
requester's goal cell are advisors: they plan a path over their own known
cells and send only those records.  The requester then Jaccard-gates the
peers' parameters on its pre-merge map, merges every record set
(freshest wins), and blends the selected parameters into its own.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import ClassVar, NamedTuple, Sequence

import numpy as np

from .gridworld import Cell, GridWorld, MaskLabel, bfs_path, contacts_in_range
from .learner import AgentBrain
from .mental_state import MentalState, Records

TRAVERSABLE = (int(MaskLabel.EMPTY), int(MaskLabel.AGENT), int(MaskLabel.OBJECT))


class ProtocolError(ValueError):
    pass


class Role(enum.Enum):
    PEER = "peer"
    ADVISOR = "advisor"


Params = tuple[np.ndarray, np.ndarray]  # (actor, critic) flat vectors


@dataclass(frozen=True)
class KnowledgePacket:
    sender: int
    sender_goal: Cell
    role: Role
    records: Records
    params: Params | None = None

    constructed: ClassVar[int] = 0

    def __post_init__(self) -> None:
        if self.role is Role.ADVISOR and self.params is not None:
            raise ProtocolError("advisor packets never carry learning parameters")
        if self.role is Role.PEER and self.params is None:
            raise ProtocolError("peer packets must carry learning parameters")
        if len(self.records) and float(self.records.durations.min()) < 0:
            raise ProtocolError("record durations must be non-negative")
        KnowledgePacket.constructed += 1


class AgentView(NamedTuple):
    """Immutable snapshot of another agent as seen by the protocol."""

    index: int
    goal: Cell
    ms: MentalState
    params: Params


@dataclass
class SessionOutcome:
    agent: int
    contacts: list[int] = field(default_factory=list)
    peers: list[int] = field(default_factory=list)
    advisors: list[int] = field(default_factory=list)
    j_values: dict[int, float] = field(default_factory=dict)
    merged_cells: int = 0
    selected_peers: list[int] = field(default_factory=list)
    aggregation_applied: bool = False
    packets: int = 0


@dataclass
class ProtocolStats:
    sessions: int = 0
    packets: int = 0
    peer_packets: int = 0
    advisor_packets: int = 0
    merged_cells: int = 0
    aggregations: int = 0
    advisor_param_violations: int = 0

    def record(self, outcome: SessionOutcome, peer_packets: int, advisor_packets: int) -> None:
        self.sessions += 1
        self.packets += peer_packets + advisor_packets
        self.peer_packets += peer_packets
        self.advisor_packets += advisor_packets
        self.merged_cells += outcome.merged_cells
        self.aggregations += int(outcome.aggregation_applied)


def classify_contacts(self_goal: Cell, contacts: Sequence[AgentView]) -> tuple[list[AgentView], list[AgentView]]:
    """Split contacts into same-goal peers and advisors that know the requester's goal cell."""
    peers, advisors = [], []
    for c in contacts:
        if c.goal == self_goal:
            peers.append(c)
        elif c.ms.is_known(self_goal):
            advisors.append(c)
    return peers, advisors


def advisor_plan(advisor_ms: MentalState, start: Cell, goal: Cell) -> Records:
    """The advisor's records along a shortest known-traversable path, or empty records."""
    passable = np.isin(advisor_ms.mask, TRAVERSABLE)
    path = bfs_path(passable, start, goal)
    if path is None:
        return Records.empty()
    return advisor_ms.records(path)


def share(requester_pos: Cell, requester_goal: Cell, peers: Sequence[AgentView],
          advisors: Sequence[AgentView], goal_filtered: bool = False) -> list[KnowledgePacket]:
    packets = []
    for p in peers:
        if goal_filtered:
            records = advisor_plan(p.ms, requester_pos, requester_goal)
        else:
            records = p.ms.records()
        packets.append(KnowledgePacket(p.index, p.goal, Role.PEER, records, p.params))
    for a in advisors:
        records = advisor_plan(a.ms, requester_pos, requester_goal)
        if len(records):
            packets.append(KnowledgePacket(a.index, a.goal, Role.ADVISOR, records))
    return packets


def share_unaware(contacts: Sequence[AgentView]) -> list[KnowledgePacket]:
    """Goal-unaware sharing: every contact acts as an advisor handing over its whole known map."""
    return [KnowledgePacket(c.index, c.goal, Role.ADVISOR, c.ms.records()) for c in contacts]


def reason(self_ms: MentalState, packets: Sequence[KnowledgePacket],
           j_threshold: float = 0.5) -> tuple[list[Params], int, dict[int, float]]:
    """Gate peer parameters on pre-merge Jaccard overlap, then merge every packet's records.

    Returns ``(selected peer params, merged cell count, {sender: J})``.
    """
    selected: list[Params] = []
    j_values: dict[int, float] = {}
    for pkt in packets:
        if pkt.role is Role.PEER:
            j = self_ms.jaccard(pkt.records)
            j_values[pkt.sender] = j
            if j <= j_threshold:
                selected.append(pkt.params)
    merged = self_ms.merge([pkt.records for pkt in packets])
    return selected, merged, j_values


def blend(own: np.ndarray, others: Sequence[np.ndarray], beta: float) -> np.ndarray:
    """(1 - beta) * own + beta * mean(others), written as own + beta * (mean - own)."""
    mean = others[0].copy() if len(others) == 1 else np.mean(np.stack(others), axis=0)
    return own + beta * (mean - own)


def aggregate(brain: AgentBrain, selected: Sequence[Params], beta: float) -> bool:
    """Blend selected peers' parameters into ``brain``; returns whether anything was applied."""
    if not 0.0 <= beta <= 1.0:
        raise ProtocolError("beta must lie in [0, 1]")
    if not selected:
        return False
    for actor, critic in selected:
        if actor.shape != brain.actor.params.shape or critic.shape != brain.critic.params.shape:
            raise ProtocolError("peer parameter snapshot does not match this agent's networks")
    actor = blend(brain.actor.params, [s[0] for s in selected], beta)
    critic = blend(brain.critic.params, [s[1] for s in selected], beta)
    brain.load_params(actor, critic, reset_targets=True)
    brain.actor_opt.reset()
    brain.critic_opt.reset()
    return True


def run_session(world: GridWorld, agent: int, ms: MentalState, brain: AgentBrain,
                views: Sequence[AgentView], *, goal_aware: bool = True, beta: float = 0.1,
                radius: int = 2, j_threshold: float = 0.5, goal_filtered: bool = False,
                stats: ProtocolStats | None = None, audit: bool = False) -> SessionOutcome:
    """One full session for ``agent`` against everyone currently in range.

    ``views`` holds tick-start snapshots of all agents, so an agent that
    merged earlier in the tick cannot leak that into its packets.  With
    ``audit`` on, the receiver's parameters are checked against a
    recomputation from peer packets alone.
    """
    outcome = SessionOutcome(agent)
    contact_ids = contacts_in_range(world, agent, radius)
    if not contact_ids:
        return outcome
    outcome.contacts = contact_ids
    contacts = [views[j] for j in contact_ids]
    pos = world.agent_positions[agent]
    goal = world.agent_goals[agent]

    if goal_aware:
        peers, advisors = classify_contacts(goal, contacts)
        packets = share(pos, goal, peers, advisors, goal_filtered)
    else:
        peers, advisors = [], list(contacts)
        packets = share_unaware(contacts)
    outcome.peers = [p.index for p in peers]
    outcome.advisors = [a.index for a in advisors]
    outcome.packets = len(packets)

    selected, merged, j_values = reason(ms, packets, j_threshold)
    outcome.merged_cells = merged
    outcome.j_values = j_values
    by_sender = {pkt.sender: pkt for pkt in packets}
    outcome.selected_peers = [s for s, j in j_values.items() if j <= j_threshold]

    before = brain.snapshot() if audit else None
    if goal_aware:
        outcome.aggregation_applied = aggregate(brain, selected, beta)

    n_peer = sum(pkt.role is Role.PEER for pkt in packets)
    if stats is not None:
        stats.record(outcome, n_peer, len(packets) - n_peer)
        if audit:
            peer_params = [by_sender[s].params for s in outcome.selected_peers]
            if peer_params and goal_aware:
                expected = (blend(before[0], [p[0] for p in peer_params], beta),
                            blend(before[1], [p[1] for p in peer_params], beta))
            else:
                expected = before
            after = brain.snapshot()
            if not (np.array_equal(after[0], expected[0]) and np.array_equal(after[1], expected[1])):
                stats.advisor_param_violations += 1
    return outcome
