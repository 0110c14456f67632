"""Unfold a composed element graph into a copy-instance DAG.

Every vertex of the DAG is one copy position: a node group handling one
replica, or one link instance carrying one copy.  A vertex is *reached* when
every state variable it depends on is up and at least ``threshold`` of its
predecessors are reached.  State variables are the independent random
quantities of a frame trial: one per node (shared by all copies crossing
it), one per link traversal, and one per probabilistic gate draw.

The variable order doubles as the draw-slot layout used by the simulator.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .graph import ElementGraph
from .topology import FailureProbs


class VarKind(str, enum.Enum):
    NODE = "node"
    LINK = "link"
    GATE = "gate"


@dataclass(frozen=True)
class Var:
    name: str
    kind: VarKind
    p_fail: float = 0.0  # element vars: Down iff draw < p_fail
    gate_p: Fraction | None = None  # gate vars: up iff draw < gate_p

    @property
    def p_up(self) -> float:
        if self.kind is VarKind.GATE:
            return float(self.gate_p)
        return 1.0 - self.p_fail

    @property
    def constant(self) -> bool | None:
        """True/False when the variable cannot vary, else None."""
        if self.kind is VarKind.GATE:
            return True if self.gate_p >= 1 else (False if self.gate_p <= 0 else None)
        return True if self.p_fail <= 0 else (False if self.p_fail >= 1 else None)


@dataclass(frozen=True)
class Vertex:
    element: str
    replica: int
    vars: tuple[int, ...]
    preds: tuple[int, ...]
    threshold: int
    hop: int
    is_node: bool


@dataclass(frozen=True)
class InstanceDag:
    vars: tuple[Var, ...]
    vertices: tuple[Vertex, ...]
    boundaries: tuple[tuple[int, ...], ...]  # boundaries[h] -> vertex indices, h = 0..H
    node_slot: dict[str, int]
    link_slot: dict[tuple[str, int], int]
    gate_slot: dict[tuple[str, int], int]

    @property
    def hop_count(self) -> int:
        return len(self.boundaries) - 1

    def free_vars(self) -> list[int]:
        return [i for i, v in enumerate(self.vars) if v.constant is None]

    def vertices_upto(self, hop: int) -> Iterator[int]:
        return (i for i, v in enumerate(self.vertices) if v.hop <= hop)


def gate_threshold(p: Fraction) -> float:
    """Smallest double ``t`` with ``u < t  <=>  u < p`` for every double ``u``."""
    t = float(p)
    if Fraction(t) < p:
        t = math.nextafter(t, math.inf)
    return t


REPLICATION_GATE_RANK = 0


def unfold(graph: ElementGraph, probs: FailureProbs) -> InstanceDag:
    vars_: list[Var] = []
    vertices: list[Vertex] = []
    node_slot: dict[str, int] = {}
    link_slot: dict[tuple[str, int], int] = {}
    gate_slot: dict[tuple[str, int], int] = {}
    link_insts: dict[str, list[tuple[int, int]]] = {}  # link -> [(replica, vertex)]

    def add_var(v: Var) -> int:
        vars_.append(v)
        return len(vars_) - 1

    def add_vertex(v: Vertex) -> int:
        vertices.append(v)
        return len(vertices) - 1

    for node_id, gi in graph.topological_groups():
        node = graph[node_id]
        routing = graph.routing[node_id]
        if node_id not in node_slot:
            node_slot[node_id] = add_var(Var(node_id, VarKind.NODE, probs.of(node)))
        nv = node_slot[node_id]
        group = routing.groups[gi]
        arriving = [inst for l in group.ins for inst in link_insts.get(l, [])]
        produced: dict[int, int] = {}
        if node_id == graph.source:
            produced[0] = add_vertex(Vertex(node_id, 0, (nv,), (), 0, node.hop, True))
        elif routing.merge_replicas:
            preds = tuple(v for _, v in arriving)
            produced[0] = add_vertex(Vertex(node_id, 0, (nv,), preds, 1, node.hop, True))
            if routing.elimination_theta is not None:
                p = 1 / Fraction(routing.elimination_theta)
                for rank in range(2, len(arriving) + 1):
                    key = (node_id, rank)
                    if key not in gate_slot:
                        gate_slot[key] = add_var(Var(f"{node_id}:elim{rank}", VarKind.GATE, gate_p=p))
                    produced[rank - 1] = add_vertex(
                        Vertex(node_id, rank - 1, (nv, gate_slot[key]), preds, rank, node.hop, True)
                    )
        else:
            for rep in sorted({r for r, _ in arriving}):
                preds = tuple(v for r, v in arriving if r == rep)
                produced[rep] = add_vertex(Vertex(node_id, rep, (nv,), preds, 1, node.hop, True))

        rep_gate = None
        if routing.replication_theta is not None and group.outs:
            key = (node_id, REPLICATION_GATE_RANK)
            if key not in gate_slot:
                p = 1 / Fraction(routing.replication_theta)
                gate_slot[key] = add_var(Var(f"{node_id}:rep", VarKind.GATE, gate_p=p))
            rep_gate = gate_slot[key]
        width = max(produced) + 1 if produced else 0
        for j, link_id in enumerate(group.outs):
            link = graph[link_id]
            insts = link_insts.setdefault(link_id, [])
            plan = []  # (replica, producer vertex, extra vars)
            for rep, pv in sorted(produced.items()):
                extra = (rep_gate,) if rep_gate is not None and j >= 1 else ()
                plan.append((rep, pv, extra))
                if rep_gate is not None and len(group.outs) == 1:
                    plan.append((rep + width, pv, (rep_gate,)))
            for rep, pv, extra in plan:
                lv = link_slot[(link_id, rep)] = add_var(
                    Var(f"{link_id}#{rep}", VarKind.LINK, probs.of(link))
                )
                vi = add_vertex(Vertex(link_id, rep, (lv,) + extra, (pv,), 1, link.hop, False))
                insts.append((rep, vi))

    hop_count = graph.hop_count
    boundaries: list[list[int]] = [[] for _ in range(hop_count + 1)]
    for i, v in enumerate(vertices):
        if not v.is_node:
            continue
        onward = graph.out_links(v.element)
        if v.element == graph.sink or any(graph[l.id].hop > v.hop for l in onward):
            boundaries[v.hop].append(i)
    for h, b in enumerate(boundaries):
        if not b:
            raise ValueError(f"hop {h} has no boundary vertex")
    return InstanceDag(
        vars=tuple(vars_),
        vertices=tuple(vertices),
        boundaries=tuple(tuple(b) for b in boundaries),
        node_slot=node_slot,
        link_slot=link_slot,
        gate_slot=gate_slot,
    )


