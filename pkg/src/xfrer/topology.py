"""End-to-end composition of a TSN topology with an expanded 5G segment."""

from __future__ import annotations

import dataclasses
import enum
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import ConfigInvalid
from .fiveg import Direction, Embodiment, FiveGSegment, build_path_graph
from .graph import EXTERNAL, Category, Element, ElementGraph, Group, Routing


class Stream(str, enum.Enum):
    STREAM1 = "Stream1"
    STREAM2 = "Stream2"


@dataclass(frozen=True)
class FailureProbs:
    tsn_bridge_node: float = 1e-5
    ue_node: float = 1e-4
    gnb_node: float = 1e-4
    upf_node: float = 1e-4
    tsn_link: float = 1e-4
    air_link: float = 1e-2
    n3_link: float = 1e-3
    xn_link: float = 0.0
    end_station_node: float = 0.0

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise ConfigInvalid(f"failure_probs.{f.name}={value!r} outside [0, 1]")
            object.__setattr__(self, f.name, float(value))

    def for_category(self, category: Category) -> float:
        return {
            Category.END_STATION: self.end_station_node,
            Category.TSN_BRIDGE: self.tsn_bridge_node,
            Category.UE: self.ue_node,
            Category.GNB: self.gnb_node,
            Category.UPF: self.upf_node,
            Category.TSN_LINK: self.tsn_link,
            Category.AIR: self.air_link,
            Category.N3: self.n3_link,
            Category.XN: self.xn_link,
        }[category]

    def of(self, element: Element) -> float:
        if element.failure_prob is not None:
            return element.failure_prob
        return self.for_category(element.category)

    @classmethod
    def zero(cls) -> FailureProbs:
        return cls(**{f.name: 0.0 for f in dataclasses.fields(cls)})


@dataclass(frozen=True)
class TsnNode:
    id: str
    category: Category = Category.TSN_BRIDGE


@dataclass(frozen=True)
class TsnLink:
    """A TSN link, oriented talker-to-listener for Stream1."""

    id: str
    a: str
    b: str
    failure_prob: float | None = None


@dataclass(frozen=True)
class Topology:
    nodes: tuple[TsnNode, ...]
    links: tuple[TsnLink, ...]
    talker: str
    listener: str


@dataclass(frozen=True)
class Enhancements:
    """Where the probabilistic X-FRER gates sit (TSN node ids)."""

    replication: tuple[str, ...] = ()
    elimination: tuple[str, ...] = ()

    @property
    def enabled(self) -> bool:
        return bool(self.replication or self.elimination)


def default_enhancements(topology: Topology, segment: FiveGSegment, stream: Stream) -> Enhancements:
    """Replication gates on every TSN node that forwards into the 5G segment."""
    fiveg = set(segment.node_ids)
    senders = []
    for link in _oriented(topology, stream):
        if link.a not in fiveg and link.b in fiveg and link.a not in senders:
            senders.append(link.a)
    return Enhancements(replication=tuple(senders))


def segment_neighbours(topology: Topology, segment: FiveGSegment) -> tuple[str, ...]:
    """TSN nodes with a direct link to a 5G node; the recipients of a Theta advertisement."""
    fiveg = set(segment.node_ids)
    out: list[str] = []
    for link in topology.links:
        for a, b in ((link.a, link.b), (link.b, link.a)):
            if b in fiveg and a not in fiveg and a not in out:
                out.append(a)
    return tuple(out)


def _oriented(topology: Topology, stream: Stream) -> list[TsnLink]:
    if stream is Stream.STREAM1:
        return list(topology.links)
    return [dataclasses.replace(l, a=l.b, b=l.a) for l in topology.links]


def fiveg_direction(topology: Topology, segment: FiveGSegment, stream: Stream) -> Direction:
    ues = set(segment.ues)
    into_ue = any(l.b in ues for l in topology.links)
    uplink_for_stream1 = into_ue
    if (stream is Stream.STREAM1) == uplink_for_stream1:
        return Direction.UPLINK
    return Direction.DOWNLINK


def compose(
    topology: Topology,
    embodiment: Embodiment,
    segment: FiveGSegment,
    stream: Stream | str,
    enhancements: Enhancements = Enhancements(),
    theta: Fraction | None = None,
) -> ElementGraph:
    """Splice the 5G path graph into the oriented TSN topology and number hops.

    Each hop holds the links it crosses plus the nodes they lead into; the
    talker sits at hop 0.
    """
    stream = Stream(stream)
    direction = fiveg_direction(topology, segment, stream)
    fg = build_path_graph(embodiment, segment, direction)
    problems: list[str] = []

    tsn_ids = [n.id for n in topology.nodes]
    if len(set(tsn_ids)) != len(tsn_ids):
        problems.append("duplicate TSN node ids")
    clash = set(tsn_ids) & set(segment.node_ids)
    if clash:
        problems.append(f"ids used by both TSN and 5G nodes: {sorted(clash)}")
    known = set(tsn_ids) | {e.id for e in fg.nodes}
    links = _oriented(topology, stream)
    link_ids = [l.id for l in links]
    if len(set(link_ids)) != len(link_ids):
        problems.append("duplicate TSN link ids")
    for l in links:
        for end in (l.a, l.b):
            if end not in known:
                problems.append(f"link {l.id} references undefined node {end!r}")
        if l.id in fg:
            problems.append(f"link id {l.id!r} collides with a 5G element")
    source, sink = (
        (topology.talker, topology.listener)
        if stream is Stream.STREAM1
        else (topology.listener, topology.talker)
    )
    for end in (source, sink):
        if end not in tsn_ids:
            problems.append(f"talker/listener {end!r} is not a TSN node")
    if problems:
        raise ConfigInvalid("; ".join(problems))

    fg_nodes = {e.id for e in fg.nodes}
    ext_in: dict[str, list[str]] = defaultdict(list)
    ext_out: dict[str, list[str]] = defaultdict(list)
    for l in links:
        if l.b in fg_nodes:
            if l.b not in fg.ingress:
                problems.append(f"link {l.id} enters 5G node {l.b} which is not an ingress for this stream")
            ext_in[l.b].append(l.id)
        if l.a in fg_nodes:
            if l.a not in fg.egress:
                problems.append(f"link {l.id} leaves 5G node {l.a} which is not an egress for this stream")
            ext_out[l.a].append(l.id)
    for n in fg.ingress:
        if not ext_in[n]:
            problems.append(f"5G ingress {n} has no TSN link feeding it")
    for n in fg.egress:
        if not ext_out[n]:
            problems.append(f"5G egress {n} has no TSN link leaving it")

    elements: list[Element] = []
    routing: dict[str, Routing] = {}
    categories = {n.id: n.category for n in topology.nodes}
    for node in topology.nodes:
        if node.category not in (Category.END_STATION, Category.TSN_BRIDGE):
            problems.append(f"TSN node {node.id} has non-TSN category {node.category.value}")
        elements.append(Element(node.id, node.category))
        ins = tuple(l.id for l in links if l.b == node.id)
        outs = tuple(l.id for l in links if l.a == node.id)
        routing[node.id] = Routing((Group(ins, outs),), merge_replicas=True)
    for l in links:
        elements.append(Element(l.id, Category.TSN_LINK, src=l.a, dst=l.b, failure_prob=l.failure_prob))
    for e in fg.elements:
        elements.append(e)
    for n, r in fg.routing.items():
        groups = []
        for g in r.groups:
            ins = _expand(g.ins, ext_in[n])
            outs = _expand(g.outs, ext_out[n])
            groups.append(Group(ins, outs))
        routing[n] = dataclasses.replace(r, groups=tuple(groups))

    if enhancements.enabled:
        if theta is None:
            raise ConfigInvalid("enhancement gates need the advertised theta")
        both = set(enhancements.replication) & set(enhancements.elimination)
        if both:
            problems.append(f"nodes carry both gate types: {sorted(both)}")
        for node_id in enhancements.replication + enhancements.elimination:
            if node_id not in categories:
                problems.append(f"enhancement gate on {node_id!r}, which is not a TSN node")
        for node_id in enhancements.replication:
            if node_id in routing:
                routing[node_id] = dataclasses.replace(routing[node_id], replication_theta=theta)
        for node_id in enhancements.elimination:
            if node_id in routing:
                routing[node_id] = dataclasses.replace(routing[node_id], elimination_theta=theta)
    if problems:
        raise ConfigInvalid("; ".join(problems))

    graph = ElementGraph(
        elements=tuple(elements),
        routing=routing,
        source=source,
        sink=sink,
        meta={
            "stream": stream.value,
            "direction": direction.value,
            "embodiment": str(embodiment),
            "segment_id": segment.segment_id,
        },
    )
    graph = graph.with_hops(_assign_hops(graph, fg, set(categories)))
    _check_reachability(graph)
    return graph


def _expand(ids: Sequence[str], external: list[str]) -> tuple[str, ...]:
    out: list[str] = []
    for i in ids:
        out.extend(external if i == EXTERNAL else [i])
    return tuple(out)


def _assign_hops(graph: ElementGraph, fg: ElementGraph, tsn_nodes: set[str]) -> dict[str, int]:
    try:
        order = graph.topological_nodes()
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from None
    local = {e.id: e.hop for e in fg.elements}
    hops: dict[str, int] = {}
    base: int | None = None
    for node_id in order:
        ins = graph.in_links(node_id)
        if node_id == graph.source:
            hops[node_id] = 0
        elif node_id in tsn_nodes or node_id in fg.ingress:
            candidates = {hops[l.id] for l in ins}
            if len(candidates) != 1:
                raise ConfigInvalid(
                    f"node {node_id} is reached at different hop depths {sorted(candidates)}"
                )
            hops[node_id] = candidates.pop()
            if node_id in fg.ingress:
                offset = hops[node_id] - local[node_id]
                if base is not None and base != offset:
                    raise ConfigInvalid("5G ingress nodes sit at different hop depths")
                base = offset
        else:
            if base is None:
                raise ConfigInvalid(f"5G node {node_id} is reachable without passing an ingress")
            hops[node_id] = base + local[node_id]
        for l in graph.out_links(node_id):
            if l.id in local:
                if base is None:
                    raise ConfigInvalid(f"5G link {l.id} precedes the ingress")
                hops[l.id] = base + local[l.id]
            else:
                hops[l.id] = hops[node_id] + 1
    # 5G internal nodes also need their in-links to agree with the local layout
    for l in graph.links:
        if l.id not in local and l.dst not in tsn_nodes and l.dst not in fg.ingress:
            raise ConfigInvalid(f"TSN link {l.id} ends inside the 5G segment")
    return hops


def _check_reachability(graph: ElementGraph) -> None:
    seen = {graph.source}
    frontier = [graph.source]
    while frontier:
        n = frontier.pop()
        for l in graph.out_links(n):
            if l.dst not in seen:
                seen.add(l.dst)
                frontier.append(l.dst)
    missing = [n.id for n in graph.nodes if n.id not in seen]
    if missing:
        raise ConfigInvalid(f"nodes unreachable from {graph.source}: {missing}")
    dead = [n.id for n in graph.nodes if n.id != graph.sink and not graph.out_links(n.id)]
    if dead:
        raise ConfigInvalid(f"nodes with no way onward to {graph.sink}: {dead}")
