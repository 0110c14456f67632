"""The 5G system as a configurable black box.

An :class:`Embodiment` picks the multi-path technique, :func:`theta` gives the
average redundant path count it offers, :func:`establish_sessions` walks the
abstract control-plane flow, and :func:`build_path_graph` expands the 5G
system into the element graph the simulator and the oracle operate on.
"""

from __future__ import annotations

import dataclasses
import enum
import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import StructuralMismatch
from .graph import EXTERNAL, Category, Element, ElementGraph, Group, Routing


class Variant(str, enum.Enum):
    NO_REDUNDANCY = "NoRedundancy"
    MULTI_PDU_MULTI_UE = "MultiPduMultiUe"
    MULTI_PDU_SINGLE_UE = "MultiPduSingleUe"
    SINGLE_PDU_N3 = "SinglePduN3"
    SINGLE_PDU_SDAP = "SinglePduSdap"
    SINGLE_PDU_PDCP = "SinglePduPdcp"

    @property
    def is_multi_pdu(self) -> bool:
        return self in (Variant.MULTI_PDU_MULTI_UE, Variant.MULTI_PDU_SINGLE_UE)


class Direction(str, enum.Enum):
    UPLINK = "uplink"
    DOWNLINK = "downlink"


# (paths between UE and RAN, paths between RAN and core)
_PATHS = {
    Variant.NO_REDUNDANCY: (1, 1),
    Variant.MULTI_PDU_MULTI_UE: (2, 2),
    Variant.MULTI_PDU_SINGLE_UE: (2, 2),
    Variant.SINGLE_PDU_N3: (1, 2),
    Variant.SINGLE_PDU_SDAP: (2, 1),
    Variant.SINGLE_PDU_PDCP: (2, 1),
}


@dataclass(frozen=True)
class Embodiment:
    """One variant, or a combination of several (``Combined``)."""

    components: tuple[Variant, ...]

    def __post_init__(self) -> None:
        comps = tuple(Variant(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("an embodiment needs at least one variant")
        if len(comps) > 1:
            if len(set(comps)) != len(comps):
                raise ValueError("Combined variants must be distinct")
            if Variant.NO_REDUNDANCY in comps:
                raise ValueError("NoRedundancy cannot be combined")
            if sum(c.is_multi_pdu for c in comps) > 1:
                raise ValueError("Combined may contain at most one multi-PDU variant")

    @classmethod
    def of(cls, variant: Variant | str) -> Embodiment:
        return cls((Variant(variant),))

    @classmethod
    def combined(cls, *variants: Variant | str) -> Embodiment:
        if len(variants) < 2:
            raise ValueError("Combined needs at least two variants")
        return cls(tuple(Variant(v) for v in variants))

    @classmethod
    def parse(cls, value: str | Sequence[str]) -> Embodiment:
        """Accept ``"SinglePduN3"``, ``"Combined(SinglePduN3, SinglePduPdcp)"`` or a list."""
        if isinstance(value, str):
            m = re.fullmatch(r"\s*Combined\s*\((.*)\)\s*", value)
            if m:
                return cls.combined(*[v.strip() for v in m.group(1).split(",") if v.strip()])
            return cls.of(value.strip())
        values = list(value)
        return cls.of(values[0]) if len(values) == 1 else cls.combined(*values)

    @property
    def is_combined(self) -> bool:
        return len(self.components) > 1

    @property
    def multi_pdu(self) -> Variant | None:
        return next((c for c in self.components if c.is_multi_pdu), None)

    def __contains__(self, variant: object) -> bool:
        return variant in self.components

    def __str__(self) -> str:
        if self.is_combined:
            return "Combined(" + ",".join(c.value for c in self.components) + ")"
        return self.components[0].value


@dataclass(frozen=True)
class FiveGSegment:
    ues: tuple[str, ...]
    gnbs: tuple[str, ...]
    upfs: tuple[str, ...]
    segment_id: str = "5gs"
    link_probs: dict[str, float] = field(default_factory=dict)  # keys: air, n3, xn
    node_probs: dict[str, float] = field(default_factory=dict)  # keys: ue, gnb, upf

    def __post_init__(self) -> None:
        for name in ("ues", "gnbs", "upfs"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for table in (self.link_probs, self.node_probs):
            for key, p in table.items():
                if not 0.0 <= p <= 1.0:
                    raise ValueError(f"probability {key}={p} outside [0, 1]")
        ids = self.ues + self.gnbs + self.upfs
        if len(set(ids)) != len(ids):
            raise ValueError("5G node ids must be unique")

    @property
    def node_ids(self) -> tuple[str, ...]:
        return self.ues + self.gnbs + self.upfs


class Phase(enum.IntEnum):
    IDLE = 0
    SCHEDULE_PUBLISHED = 1
    POLICY_SET = 2
    ESTABLISHING = 3
    FIRST_SESSION_UP = 4
    SECOND_SESSION_TRIGGERED = 5
    ALL_SESSIONS_UP = 6


@dataclass(frozen=True)
class PduSession:
    ue_id: str
    upf_id: str
    dnn_label: str


@dataclass(frozen=True)
class SessionState:
    phase: Phase = Phase.IDLE
    sessions: tuple[PduSession, ...] = ()
    trace: tuple[Phase, ...] = (Phase.IDLE,)

    def advance(self, phase: Phase, *new_sessions: PduSession) -> SessionState:
        if phase <= self.phase:
            raise ValueError(f"phase {phase.name} does not follow {self.phase.name}")
        return SessionState(phase, self.sessions + new_sessions, self.trace + (phase,))


def theta(embodiment: Embodiment) -> Fraction:
    """Average number of redundant paths the 5G system offers TSN traffic."""
    ue_ran = max(_PATHS[c][0] for c in embodiment.components)
    ran_core = max(_PATHS[c][1] for c in embodiment.components)
    return Fraction(ue_ran + ran_core, 2)


def required_sessions(embodiment: Embodiment) -> int:
    return 2 if embodiment.multi_pdu else 1


def check_structure(embodiment: Embodiment, segment: FiveGSegment) -> None:
    problems = []
    if not segment.ues or not segment.gnbs or not segment.upfs:
        problems.append("segment needs at least one UE, one gNB and one UPF")
    if Variant.MULTI_PDU_MULTI_UE in embodiment:
        if len(segment.ues) < 2:
            problems.append("MultiPduMultiUe needs 2 UEs")
        if len(segment.upfs) < 2:
            problems.append("MultiPduMultiUe needs 2 UPFs")
    for v in (Variant.SINGLE_PDU_N3, Variant.SINGLE_PDU_PDCP):
        if v in embodiment and len(segment.gnbs) < 2:
            problems.append(f"{v.value} needs a master and a secondary gNB")
    if problems:
        raise StructuralMismatch("; ".join(problems))


def _plan_sessions(embodiment: Embodiment, segment: FiveGSegment) -> list[PduSession]:
    ue0, upf0 = segment.ues[0], segment.upfs[0]
    multi = embodiment.multi_pdu
    if multi is Variant.MULTI_PDU_MULTI_UE:
        # paired UE, different UPF
        return [PduSession(ue0, upf0, "dnnA"), PduSession(segment.ues[1], segment.upfs[1], "dnnA")]
    if multi is Variant.MULTI_PDU_SINGLE_UE:
        upf1 = segment.upfs[1] if len(segment.upfs) > 1 else upf0
        return [PduSession(ue0, upf0, "dnnA"), PduSession(ue0, upf1, "dnnB")]
    return [PduSession(ue0, upf0, "dnnA")]


def establish_sessions(embodiment: Embodiment, segment: FiveGSegment) -> SessionState:
    """Run the abstract control-plane flow to completion (all or nothing).

    CNC publishes the schedule to the AF, the AF sets the redundancy policy at
    the PCF, the AMF/SMF bring up the first session and pick a UPF; multi-PDU
    variants then have the network trigger the redundant session.
    """
    check_structure(embodiment, segment)
    planned = _plan_sessions(embodiment, segment)
    state = SessionState()
    state = state.advance(Phase.SCHEDULE_PUBLISHED)
    state = state.advance(Phase.POLICY_SET)
    state = state.advance(Phase.ESTABLISHING)
    state = state.advance(Phase.FIRST_SESSION_UP, planned[0])
    if len(planned) > 1:
        state = state.advance(Phase.SECOND_SESSION_TRIGGERED)
        state = state.advance(Phase.ALL_SESSIONS_UP, *planned[1:])
    else:
        state = state.advance(Phase.ALL_SESSIONS_UP)
    return state


_LOCAL_HOP = {
    Direction.UPLINK: {Category.UE: 0, Category.AIR: 1, Category.GNB: 1, Category.XN: 1, Category.N3: 2, Category.UPF: 2},
    Direction.DOWNLINK: {Category.UPF: 0, Category.N3: 1, Category.GNB: 1, Category.XN: 1, Category.AIR: 2, Category.UE: 2},
}


class _Builder:
    def __init__(self, segment: FiveGSegment):
        self.segment = segment
        self.elements: dict[str, Element] = {}
        self.groups: dict[str, list[Group]] = defaultdict(list)

    def node(self, node_id: str, category: Category) -> str:
        if node_id not in self.elements:
            prob = self.segment.node_probs.get(category.value)
            self.elements[node_id] = Element(node_id, category, failure_prob=prob)
        return node_id

    def link(self, link_id: str, category: Category, src: str, dst: str) -> str:
        if link_id in self.elements:
            raise AssertionError(f"link {link_id} built twice")
        prob = self.segment.link_probs.get(category.value)
        self.elements[link_id] = Element(link_id, category, src=src, dst=dst, failure_prob=prob)
        return link_id

    def group(self, node_id: str, ins: Iterable[str], outs: Iterable[str]) -> None:
        self.groups[node_id].append(Group(tuple(ins), tuple(outs)))


def _uplink_graph(embodiment: Embodiment, segment: FiveGSegment) -> ElementGraph:
    b = _Builder(segment)
    sessions = _plan_sessions(embodiment, segment)
    multi = len(sessions) > 1
    mgnb = b.node(segment.gnbs[0], Category.GNB)
    sgnb = segment.gnbs[1] if len(segment.gnbs) > 1 else None
    sdap = Variant.SINGLE_PDU_SDAP in embodiment
    pdcp = Variant.SINGLE_PDU_PDCP in embodiment
    n3dup = Variant.SINGLE_PDU_N3 in embodiment

    ue_outs: dict[str, list[str]] = defaultdict(list)
    upf_ins: dict[str, list[str]] = defaultdict(list)
    first_legs, last_legs = [], []

    for i, sess in enumerate(sessions):
        sfx = f".{i + 1}" if multi else ""
        ue = b.node(sess.ue_id, Category.UE)
        upf = b.node(sess.upf_id, Category.UPF)

        # air stage: every leg ends at the master gNB (directly or via Xn)
        anchor_ins, legs = [], []
        if sdap:
            for name in ("drb1", "drb2"):
                legs.append(b.link(name + sfx, Category.AIR, ue, mgnb))
            anchor_ins += legs
        if pdcp:
            if not sdap:
                legs.append(b.link("air_m" + sfx, Category.AIR, ue, mgnb))
                anchor_ins.append(legs[-1])
            leg = b.link("air_s" + sfx, Category.AIR, ue, b.node(sgnb, Category.GNB))
            legs.append(leg)
        if not (sdap or pdcp):
            legs.append(b.link("air" + sfx, Category.AIR, ue, mgnb))
            anchor_ins += legs
        ue_outs[ue] += legs
        first_legs.append(legs[0])

        # core stage
        anchor_outs = []
        if n3dup:
            anchor_outs.append(b.link("n3a" + sfx, Category.N3, mgnb, upf))
            n3b = "n3b" + sfx
            upf_ins[upf] += [anchor_outs[-1], n3b]
            # the second tunnel leaves the master anchor, so any PDCP legs are merged first
            xn_t = b.link("xn_t" + sfx, Category.XN, mgnb, b.node(sgnb, Category.GNB))
            anchor_outs.append(xn_t)
            b.link(n3b, Category.N3, sgnb, upf)
            b.group(sgnb, [xn_t], [n3b])
            last_legs.append(anchor_outs[0])
        else:
            anchor_outs.append(b.link("n3" + sfx, Category.N3, mgnb, upf))
            upf_ins[upf].append(anchor_outs[-1])
            last_legs.append(anchor_outs[0])
        if pdcp:
            xn = "xn" + sfx
            b.group(sgnb, ["air_s" + sfx], [xn])
            b.link(xn, Category.XN, sgnb, mgnb)
            anchor_ins.append(xn)
        b.group(mgnb, anchor_ins, anchor_outs)

    for ue, outs in ue_outs.items():
        b.group(ue, [EXTERNAL], outs)
    for upf, ins in upf_ins.items():
        b.group(upf, ins, [EXTERNAL])

    egress = tuple(dict.fromkeys(s.upf_id for s in sessions))
    ingress = tuple(dict.fromkeys(s.ue_id for s in sessions))
    # order elements: nodes and links in build order is fine, but keep the listing stable
    routing = {
        n: Routing(tuple(gs), merge_replicas=False) for n, gs in b.groups.items()
    }
    return ElementGraph(
        elements=tuple(b.elements.values()),
        routing=routing,
        ingress=ingress,
        egress=egress,
        edge_replication=tuple(first_legs) if len(ingress) > 1 else (),
        edge_elimination=tuple(last_legs) if len(egress) > 1 else (),
        meta={"segment_id": segment.segment_id, "embodiment": str(embodiment)},
    )


def build_path_graph(
    embodiment: Embodiment, segment: FiveGSegment, direction: Direction | str
) -> ElementGraph:
    """Expand the 5G segment into its internal element graph.

    Hops are local: 0 is the ingress node, 1 the radio stage, 2 the far side.
    Downlink is the edge reversal of uplink.
    """
    direction = Direction(direction)
    check_structure(embodiment, segment)
    graph = _uplink_graph(embodiment, segment)
    if direction is Direction.DOWNLINK:
        graph = graph.reversed()
    table = _LOCAL_HOP[direction]
    graph = graph.with_hops({e.id: table[e.category] for e in graph.elements})
    return dataclasses.replace(graph, meta={**graph.meta, "direction": direction.value})
