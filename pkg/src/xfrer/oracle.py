"""Exact per-hop delivery probabilities by exhaustive state enumeration.

The composed graph is unfolded into its copy DAG; every non-constant state
variable (node, link traversal, gate draw) doubles the state space.  States
are enumerated in chunks: the low ``CHUNK_BITS`` variables form a vector of
``2**CHUNK_BITS`` states, the remaining ones are fixed per chunk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dag import InstanceDag, unfold
from .errors import HopOutOfRange, TooManyElements
from .graph import ElementGraph
from .topology import FailureProbs

DEFAULT_MAX_ENUMERABLE = 24
CHUNK_BITS = 18
_ACC = np.longdouble


@dataclass
class RelVertex:
    vars: list[int]
    preds: list[int]
    threshold: int


@dataclass
class RelDag:
    """Reliability DAG: vertex reached iff all its vars are up and >= threshold preds reached."""

    p_up: list[float]
    vertices: dict[int, RelVertex]
    boundaries: list[list[int]]
    stats: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_instance(cls, dag: InstanceDag) -> RelDag:
        p_up: list[float] = []
        remap: dict[int, int] = {}
        never = None
        vertices = {}
        for i, v in enumerate(dag.vertices):
            vars_ = []
            for vi in v.vars:
                var = dag.vars[vi]
                if var.constant is True:
                    continue
                if var.constant is False:
                    if never is None:
                        never = len(p_up)
                        p_up.append(0.0)
                    vars_.append(never)
                    continue
                if vi not in remap:
                    remap[vi] = len(p_up)
                    p_up.append(var.p_up)
                vars_.append(remap[vi])
            vertices[i] = RelVertex(vars_, list(v.preds), v.threshold)
        rel = cls(p_up, vertices, [list(b) for b in dag.boundaries])
        rel.stats = {"vertices": len(vertices), "vars": rel.free_var_count}
        return rel

    @property
    def free_var_count(self) -> int:
        used = {x for v in self.vertices.values() for x in v.vars}
        return sum(1 for x in used if 0.0 < self.p_up[x] < 1.0)

    @property
    def hop_count(self) -> int:
        return len(self.boundaries) - 1

    def successors(self) -> dict[int, list[int]]:
        succ: dict[int, list[int]] = {i: [] for i in self.vertices}
        for i, v in self.vertices.items():
            for p in v.preds:
                succ[p].append(i)
        return succ


def _order(rel: RelDag) -> list[int]:
    indeg = {i: len(v.preds) for i, v in rel.vertices.items()}
    succ = rel.successors()
    ready = sorted(i for i, d in indeg.items() if d == 0)
    out = []
    while ready:
        i = ready.pop()
        out.append(i)
        for s in succ[i]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    return out


def enumerate_curve(rel: RelDag, max_enumerable: int = DEFAULT_MAX_ENUMERABLE) -> tuple[list[float], float]:
    """Exact survival probabilities for hops ``1..H`` plus the total state weight."""
    used = sorted({x for v in rel.vertices.values() for x in v.vars})
    free = [x for x in used if 0.0 < rel.p_up[x] < 1.0]
    if len(free) > max_enumerable:
        raise TooManyElements(
            f"{len(free)} free state variables exceed the enumeration limit of {max_enumerable}; "
            "apply series_parallel_reduce first or raise max_enumerable"
        )
    low = free[:CHUNK_BITS]
    high = free[CHUNK_BITS:]
    n_low = 1 << len(low)
    idx = np.arange(n_low, dtype=np.int64)
    low_up = {x: ((idx >> j) & 1).astype(bool) for j, x in enumerate(low)}
    w_low = np.ones(n_low, dtype=_ACC)
    for x in low:
        p = _ACC(rel.p_up[x])
        w_low *= np.where(low_up[x], p, _ACC(1) - p)
    order = _order(rel)
    hop_sums: list[list[_ACC]] = [[] for _ in rel.boundaries]
    total = []
    wl_sum = w_low.sum()

    for combo in range(1 << len(high)):
        ups: dict[int, object] = dict(low_up)
        w_high = _ACC(1)
        for j, x in enumerate(high):
            bit = bool(combo >> j & 1)
            ups[x] = bit
            p = _ACC(rel.p_up[x])
            w_high *= p if bit else _ACC(1) - p
        for x in used:
            if x not in ups:
                ups[x] = rel.p_up[x] >= 1.0
        total.append(w_high * wl_sum)
        reached: dict[int, object] = {}
        for i in order:
            v = rel.vertices[i]
            r: object = True
            for x in v.vars:
                r = r & ups[x]
            if v.threshold >= 1:
                if not v.preds:
                    r = False
                elif v.threshold == 1:
                    acc: object = False
                    for p in v.preds:
                        acc = acc | reached[p]
                    r = r & acc
                else:
                    cnt: object = 0
                    for p in v.preds:
                        cnt = cnt + np.asarray(reached[p], dtype=np.int32)
                    r = r & (cnt >= v.threshold)
            reached[i] = r
        for h, b in enumerate(rel.boundaries):
            alive: object = False
            for i in b:
                alive = alive | reached[i]
            mask = np.broadcast_to(np.asarray(alive, dtype=bool), (n_low,))
            hop_sums[h].append(w_high * w_low[mask].sum())
    curve = [float(math.fsum(float(x) for x in sums)) for sums in hop_sums[1:]]
    # fsum keeps the chunk accumulation exact up to double rounding
    return curve, float(math.fsum(float(x) for x in total))


def _as_rel(graph_or_dag, probs: FailureProbs | None) -> RelDag:
    if isinstance(graph_or_dag, RelDag):
        return graph_or_dag
    if isinstance(graph_or_dag, InstanceDag):
        return RelDag.from_instance(graph_or_dag)
    if probs is None:
        raise ValueError("failure probabilities are required for an element graph")
    return RelDag.from_instance(unfold(graph_or_dag, probs))


def per_hop_curve(
    composed_graph: ElementGraph | InstanceDag | RelDag,
    failure_probs: FailureProbs | None = None,
    reduce: bool = False,
    max_enumerable: int = DEFAULT_MAX_ENUMERABLE,
) -> list[float]:
    rel = _as_rel(composed_graph, failure_probs)
    if reduce:
        rel = series_parallel_reduce(rel)
    curve, _ = enumerate_curve(rel, max_enumerable)
    return curve


def exact_pdr(
    composed_graph: ElementGraph | InstanceDag | RelDag,
    failure_probs: FailureProbs | None,
    hop: int,
    reduce: bool = False,
    max_enumerable: int = DEFAULT_MAX_ENUMERABLE,
) -> float:
    """Probability that at least one copy is alive after ``hop`` (1-based)."""
    rel = _as_rel(composed_graph, failure_probs)
    if not 1 <= hop <= rel.hop_count:
        raise HopOutOfRange(f"hop {hop} outside 1..{rel.hop_count}")
    return per_hop_curve(rel, reduce=reduce, max_enumerable=max_enumerable)[hop - 1]


def total_weight(rel: RelDag, max_enumerable: int = DEFAULT_MAX_ENUMERABLE) -> float:
    return enumerate_curve(rel, max_enumerable)[1]


# -- series-parallel reduction ----------------------------------------------

def series_parallel_reduce(
    composed_graph: ElementGraph | InstanceDag | RelDag, failure_probs: FailureProbs | None = None
) -> RelDag:
    """Merge series chains and parallel twins until nothing changes.

    Boundary vertices are never absorbed, and only variables private to one
    vertex are folded together, so every per-hop probability is preserved.
    """
    src = _as_rel(composed_graph, failure_probs)
    rel = RelDag(
        list(src.p_up),
        {i: RelVertex(list(v.vars), list(v.preds), v.threshold) for i, v in src.vertices.items()},
        [list(b) for b in src.boundaries],
    )
    protected = {i for b in rel.boundaries for i in b}
    steps = {"series": 0, "parallel": 0, "collapsed": 0, "pruned": 0}
    changed = True
    while changed:
        changed = False
        succ = rel.successors()

        for i in list(rel.vertices):
            if i not in protected and not succ.get(i):
                del rel.vertices[i]
                steps["pruned"] += 1
                changed = True
        if changed:
            continue

        for vi, v in list(rel.vertices.items()):
            if v.threshold != 1 or len(v.preds) != 1:
                continue
            u = v.preds[0]
            if u in protected or len(succ[u]) != 1:
                continue
            uv = rel.vertices.pop(u)
            v.vars = uv.vars + v.vars
            v.preds = uv.preds
            v.threshold = uv.threshold
            for p in uv.preds:
                succ[p] = [vi if s == u else s for s in succ[p]]
            steps["series"] += 1
            changed = True
            break
        if changed:
            continue

        usage: dict[int, int] = {}
        for v in rel.vertices.values():
            for x in set(v.vars):
                usage[x] = usage.get(x, 0) + 1
        for v in rel.vertices.values():
            private = [x for x in v.vars if usage[x] == 1]
            if len(private) > 1 and len(set(private)) == len(private):
                p = math.prod(rel.p_up[x] for x in private)
                rel.p_up.append(p)
                v.vars = [x for x in v.vars if x not in private] + [len(rel.p_up) - 1]
                steps["collapsed"] += 1
                changed = True
        if changed:
            continue

        seen: dict[tuple, int] = {}
        for vi, v in list(rel.vertices.items()):
            if vi in protected or v.threshold != 1 or len(v.vars) != 1 or usage[v.vars[0]] != 1:
                continue
            if any(rel.vertices[s].threshold != 1 for s in succ[vi]):
                continue
            key = (tuple(sorted(v.preds)), tuple(sorted(succ[vi])))
            if key not in seen:
                seen[key] = vi
                continue
            keep = rel.vertices[seen[key]]
            q = (1.0 - rel.p_up[keep.vars[0]]) * (1.0 - rel.p_up[v.vars[0]])
            rel.p_up.append(1.0 - q)
            keep.vars = [len(rel.p_up) - 1]
            del rel.vertices[vi]
            for s in succ[vi]:
                rel.vertices[s].preds = [p for p in rel.vertices[s].preds if p != vi]
            steps["parallel"] += 1
            changed = True
            break

    rel.stats = {**steps, "vertices": len(rel.vertices), "vars": rel.free_var_count,
                 "vertices_before": len(src.vertices), "vars_before": src.free_var_count}
    return rel


def reduction_summary(rel: RelDag) -> dict[str, int]:
    return dict(rel.stats)


def hop_values(curve: Sequence[float]) -> dict[int, float]:
    return {h + 1: p for h, p in enumerate(curve)}
