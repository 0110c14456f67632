"""Element graphs: nodes and links with per-node forwarding groups.

A node forwards copies according to its *groups*.  Each group names the
links it listens on and the links it sends on.  Copies arriving on the links
of one group are merged (compound recovery); the surviving copy is split over
the group's outgoing links.  ``merge_replicas`` decides whether temporal
duplicates (same member path, different ``replica`` index) are merged too:
TSN nodes do, 5G-internal nodes keep them apart.

The pseudo link id ``"*"`` stands for "whatever attaches to this node outside
the graph"; it is resolved when a 5G path graph is spliced into a TSN
topology.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable

EXTERNAL = "*"


class ElementKind(str, enum.Enum):
    NODE = "node"
    LINK = "link"


class Category(str, enum.Enum):
    END_STATION = "end_station"
    TSN_BRIDGE = "tsn_bridge"
    UE = "ue"
    GNB = "gnb"
    UPF = "upf"
    TSN_LINK = "tsn_link"
    AIR = "air"
    N3 = "n3"
    XN = "xn"

    @property
    def kind(self) -> ElementKind:
        if self in _LINK_CATEGORIES:
            return ElementKind.LINK
        return ElementKind.NODE

    @property
    def is_tsn(self) -> bool:
        return self in (Category.END_STATION, Category.TSN_BRIDGE, Category.TSN_LINK)


_LINK_CATEGORIES = {Category.TSN_LINK, Category.AIR, Category.N3, Category.XN}


@dataclass(frozen=True)
class Element:
    id: str
    category: Category
    hop: int = 0
    src: str | None = None
    dst: str | None = None
    failure_prob: float | None = None  # explicit override of the category default

    @property
    def kind(self) -> ElementKind:
        return self.category.kind


@dataclass(frozen=True)
class Group:
    ins: tuple[str, ...]
    outs: tuple[str, ...]


@dataclass(frozen=True)
class Routing:
    groups: tuple[Group, ...]
    merge_replicas: bool = True
    replication_theta: Fraction | None = None
    elimination_theta: Fraction | None = None


@dataclass(frozen=True)
class ElementGraph:
    """Immutable element graph; also the serialised form of a 5G path graph."""

    elements: tuple[Element, ...]
    routing: dict[str, Routing]
    ingress: tuple[str, ...] = ()
    egress: tuple[str, ...] = ()
    source: str | None = None
    sink: str | None = None
    edge_replication: tuple[str, ...] = ()  # member labels replicated at the graph boundary
    edge_elimination: tuple[str, ...] = ()  # member labels left for a node outside the graph to merge
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_id", {e.id: e for e in self.elements})
        if len(self._by_id) != len(self.elements):
            raise ValueError("duplicate element ids")

    def __getitem__(self, element_id: str) -> Element:
        return self._by_id[element_id]

    def __contains__(self, element_id: object) -> bool:
        return element_id in self._by_id

    @property
    def external_elimination(self) -> bool:
        return bool(self.edge_elimination)

    @property
    def nodes(self) -> list[Element]:
        return [e for e in self.elements if e.kind is ElementKind.NODE]

    @property
    def links(self) -> list[Element]:
        return [e for e in self.elements if e.kind is ElementKind.LINK]

    @property
    def edges(self) -> list[tuple[str, str]]:
        out = []
        for link in self.links:
            out.append((link.src, link.id))
            out.append((link.id, link.dst))
        return out

    def out_links(self, node_id: str) -> list[Element]:
        return [l for l in self.links if l.src == node_id]

    def in_links(self, node_id: str) -> list[Element]:
        return [l for l in self.links if l.dst == node_id]

    @property
    def replication_points(self) -> list[tuple[str, tuple[str, ...]]]:
        points = []
        if self.edge_replication:
            points.append((EXTERNAL, self.edge_replication))
        for node_id, routing in self.routing.items():
            for g in routing.groups:
                outs = tuple(o for o in g.outs if o != EXTERNAL)
                if len(outs) > 1:
                    points.append((node_id, outs))
        return points

    @property
    def elimination_points(self) -> list[str]:
        points = [EXTERNAL] if self.edge_elimination else []
        for node_id, routing in self.routing.items():
            for g in routing.groups:
                if len([i for i in g.ins if i != EXTERNAL]) > 1 and node_id not in points:
                    points.append(node_id)
        return points

    @property
    def hop_boundaries(self) -> dict[int, frozenset[str]]:
        hops: dict[int, set[str]] = {}
        for e in self.elements:
            hops.setdefault(e.hop, set()).add(e.id)
        return {h: frozenset(ids) for h, ids in sorted(hops.items())}

    @property
    def hop_count(self) -> int:
        return max(e.hop for e in self.elements)

    def topological_groups(self) -> list[tuple[str, int]]:
        """Forwarding groups ``(node, group index)`` in dependency order.

        Ordering is per group rather than per node, so a node may forward
        through another node and later receive from it (e.g. two Xn legs in
        opposite directions) as long as no copy can loop.
        """
        units = [(n.id, gi) for n in self.nodes for gi in range(len(self.routing[n.id].groups))]
        consumer: dict[str, list[tuple[str, int]]] = {}
        for node_id, gi in units:
            for link_id in self.routing[node_id].groups[gi].ins:
                consumer.setdefault(link_id, []).append((node_id, gi))
        succ: dict[tuple[str, int], list[tuple[str, int]]] = {u: [] for u in units}
        indeg = {u: 0 for u in units}
        for node_id, gi in units:
            for link_id in self.routing[node_id].groups[gi].outs:
                for v in consumer.get(link_id, []):
                    succ[(node_id, gi)].append(v)
                    indeg[v] += 1
        ready = [u for u in units if indeg[u] == 0]
        order = []
        while ready:
            u = ready.pop(0)
            order.append(u)
            for v in succ[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
        if len(order) != len(units):
            raise ValueError("element graph contains a forwarding cycle")
        return order

    def topological_nodes(self) -> list[str]:
        """Nodes in order of their first forwarding group."""
        return list(dict.fromkeys(n for n, _ in self.topological_groups()))

    def reversed(self) -> ElementGraph:
        """Edge reversal with group directions (hence replication/elimination) exchanged."""
        elements = tuple(
            dataclasses.replace(e, src=e.dst, dst=e.src) if e.kind is ElementKind.LINK else e
            for e in self.elements
        )
        routing = {
            n: dataclasses.replace(r, groups=tuple(Group(g.outs, g.ins) for g in r.groups))
            for n, r in self.routing.items()
        }
        return dataclasses.replace(
            self,
            elements=elements,
            routing=routing,
            ingress=self.egress,
            egress=self.ingress,
            source=self.sink,
            sink=self.source,
            edge_replication=self.edge_elimination,
            edge_elimination=self.edge_replication,
        )

    def with_hops(self, hops: dict[str, int]) -> ElementGraph:
        return dataclasses.replace(
            self, elements=tuple(dataclasses.replace(e, hop=hops[e.id]) for e in self.elements)
        )

    def to_json(self) -> dict[str, Any]:
        def elem(e: Element) -> dict[str, Any]:
            d: dict[str, Any] = {"id": e.id, "kind": e.kind.value, "category": e.category.value, "hop": e.hop}
            if e.kind is ElementKind.LINK:
                d["src"], d["dst"] = e.src, e.dst
            if e.failure_prob is not None:
                d["failure_prob"] = e.failure_prob
            return d

        def route(r: Routing) -> dict[str, Any]:
            d: dict[str, Any] = {
                "groups": [{"ins": list(g.ins), "outs": list(g.outs)} for g in r.groups],
                "merge_replicas": r.merge_replicas,
            }
            if r.replication_theta is not None:
                d["replication_theta"] = str(r.replication_theta)
            if r.elimination_theta is not None:
                d["elimination_theta"] = str(r.elimination_theta)
            return d

        return {
            "elements": [elem(e) for e in self.elements],
            "edges": [list(e) for e in self.edges],
            "routing": {n: route(r) for n, r in sorted(self.routing.items())},
            "replication_points": [[n, list(labels)] for n, labels in self.replication_points],
            "elimination_points": list(self.elimination_points),
            "hop_boundaries": {str(h): sorted(ids) for h, ids in self.hop_boundaries.items()},
            "ingress": list(self.ingress),
            "egress": list(self.egress),
            "source": self.source,
            "sink": self.sink,
            "external_elimination": self.external_elimination,
            "edge_replication": list(self.edge_replication),
            "edge_elimination": list(self.edge_elimination),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> ElementGraph:
        elements = tuple(
            Element(
                id=d["id"],
                category=Category(d["category"]),
                hop=d.get("hop", 0),
                src=d.get("src"),
                dst=d.get("dst"),
                failure_prob=d.get("failure_prob"),
            )
            for d in data["elements"]
        )
        routing = {}
        for node, r in data["routing"].items():
            routing[node] = Routing(
                groups=tuple(Group(tuple(g["ins"]), tuple(g["outs"])) for g in r["groups"]),
                merge_replicas=r.get("merge_replicas", True),
                replication_theta=Fraction(r["replication_theta"]) if "replication_theta" in r else None,
                elimination_theta=Fraction(r["elimination_theta"]) if "elimination_theta" in r else None,
            )
        return cls(
            elements=elements,
            routing=routing,
            ingress=tuple(data.get("ingress", ())),
            egress=tuple(data.get("egress", ())),
            source=data.get("source"),
            sink=data.get("sink"),
            edge_replication=tuple(data.get("edge_replication", ())),
            edge_elimination=tuple(data.get("edge_elimination", ())),
            meta=dict(data.get("meta", {})),
        )


def restrict(ids: Iterable[str]) -> tuple[str, ...]:
    return tuple(i for i in ids if i != EXTERNAL)
