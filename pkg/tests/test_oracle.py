from __future__ import annotations

import dataclasses
import math
import random

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from xfrer.dag import VarKind, unfold
from xfrer.errors import HopOutOfRange, TooManyElements
from xfrer.oracle import (
    RelDag,
    enumerate_curve,
    exact_pdr,
    per_hop_curve,
    series_parallel_reduce,
    total_weight,
)
from xfrer.scenarios import BUILTINS, load_scenario
from xfrer.topology import FailureProbs

from graphs import chain, layered, parallel, random_layered

# frozen oracle curves (percent, 4 decimals) for the built-ins at default probabilities;
# produced once by raw enumeration and cross-checked by hand for the single-path cases
FROZEN = {
    "paper-stream1-vanilla": [100.0, 99.99, 98.9802, 98.8713, 98.8605, 98.8605, 98.8604],
    "paper-stream1-2pdu-2ue": [100.0, 100.0, 99.9794, 99.977, 99.9758, 99.9758, 99.9758],
    "paper-stream1-2pdu-1ue": [100.0, 99.99, 99.97, 99.9579, 99.9469, 99.9469, 99.9469],
    "paper-stream1-1pdu-n3": [100.0, 99.99, 98.9802, 98.9702, 98.9593, 98.9593, 98.9593],
    "paper-stream1-1pdu-sdap": [100.0, 99.99, 99.97, 99.86, 99.8491, 99.8491, 99.8491],
    "paper-stream1-1pdu-pdcp": [100.0, 99.99, 99.9699, 99.8599, 99.849, 99.849, 99.849],
    "paper-stream2-vanilla": [100.0, 99.999, 99.979, 99.869, 98.8605, 98.8605, 98.8604],
    "paper-stream2-enhanced": [100.0, 99.999, 99.989, 99.9789, 99.9567, 99.9567, 99.9567],
}

probs_st = st.builds(
    FailureProbs,
    tsn_bridge_node=st.floats(0, 0.3),
    tsn_link=st.floats(0, 0.3),
)


def test_single_link():
    assert per_hop_curve(chain(1), FailureProbs(tsn_link=1e-2)) == [0.99]
    assert exact_pdr(chain(1), FailureProbs(tsn_link=1e-2), 1) == 0.99


def test_two_parallel_links():
    assert per_hop_curve(parallel(2), FailureProbs(tsn_link=1e-2)) == [pytest.approx(0.9999, abs=1e-15)]


def test_hand_calculated_vanilla_stream1():
    """Closed form for the single-path Stream 1 chain."""
    nb, nu, lt, lu, l3 = 1e-5, 1e-4, 1e-4, 1e-2, 1e-3
    # each hop covers its links plus their destination nodes
    ub = 1 - nb
    h1 = 1 - (1 - (1 - lt) * ub) ** 2
    h2 = (1 - (1 - (1 - lt) ** 2 * ub) ** 2) * (1 - nu)  # either bridge side, then the UE
    h3 = h2 * (1 - lu) * (1 - nu)  # air, gNB
    h4 = h3 * (1 - l3) * (1 - nu)  # N3, UPF
    h5 = h4 * (1 - lt) * ub  # into C
    h6 = h5 * (1 - (1 - (1 - lt) * ub) ** 2)
    h7 = h5 * (1 - (1 - (1 - lt) ** 2 * ub) ** 2)
    got = per_hop_curve(load_scenario("paper-stream1-vanilla").graph(), FailureProbs())
    assert got == pytest.approx([h1, h2, h3, h4, h5, h6, h7], abs=1e-12)
    assert got[6] == pytest.approx(0.98860, abs=1e-5)


@pytest.mark.parametrize("sid", list(BUILTINS))
def test_builtin_curves_frozen(sid):
    c = load_scenario(sid)
    curve = per_hop_curve(c.graph(), c.failure_probs)
    assert [round(100 * p, 4) for p in curve] == FROZEN[sid]
    assert all(b <= a + 1e-15 for a, b in zip(curve, curve[1:]))


def test_stream2_vanilla_quoted_hops():
    curve = per_hop_curve(load_scenario("paper-stream2-vanilla").graph(), FailureProbs())
    assert abs(curve[3] - 0.9987) < 5e-4
    assert abs(curve[4] - 0.9885) < 5e-4


@pytest.mark.parametrize("sid", list(BUILTINS))
def test_normalisation(sid):
    c = load_scenario(sid)
    rel = RelDag.from_instance(unfold(c.graph(), c.failure_probs))
    assert abs(total_weight(rel) - 1.0) < 1e-12


@pytest.mark.parametrize("sid", list(BUILTINS))
def test_zero_probabilities_give_ones(sid):
    c = load_scenario(sid)
    assert per_hop_curve(c.graph(), FailureProbs.zero()) == [1.0] * 7


@pytest.mark.parametrize("sid", list(BUILTINS))
def test_reduction_exact_on_builtins(sid):
    c = load_scenario(sid)
    raw = per_hop_curve(c.graph(), c.failure_probs)
    red = series_parallel_reduce(c.graph(), c.failure_probs)
    assert red.free_var_count <= RelDag.from_instance(unfold(c.graph(), c.failure_probs)).free_var_count
    assert max(abs(a - b) for a, b in zip(raw, per_hop_curve(red))) <= 1e-12


def test_series_rule():
    # three elements inside one hop: link, bridge, link
    g = layered([1, 1, 1], [(0, 0, 1, 0), (1, 0, 2, 0)], hops=[0, 1, 1])
    probs = FailureProbs(tsn_link=1e-4, tsn_bridge_node=1e-4, end_station_node=0)
    red = series_parallel_reduce(g, probs)
    assert red.free_var_count == 1
    (p,) = [red.p_up[x] for v in red.vertices.values() for x in v.vars]
    assert p == pytest.approx((1 - 1e-4) ** 3, abs=1e-15)
    assert per_hop_curve(red) == pytest.approx(per_hop_curve(g, probs), abs=1e-15)


def test_parallel_rule():
    red = series_parallel_reduce(parallel(2), FailureProbs(tsn_link=1e-2))
    assert red.free_var_count == 1
    (p,) = {red.p_up[x] for v in red.vertices.values() for x in v.vars}
    assert 1 - p == pytest.approx(1e-4, rel=1e-9)


def test_errors():
    c = load_scenario("paper-stream1-2pdu-2ue")
    with pytest.raises(TooManyElements):
        per_hop_curve(c.graph(), c.failure_probs, max_enumerable=10)
    with pytest.raises(HopOutOfRange):
        exact_pdr(c.graph(), c.failure_probs, 8)
    with pytest.raises(HopOutOfRange):
        exact_pdr(c.graph(), c.failure_probs, 0)


def test_degenerate_gate_equals_no_gate():
    """Theta = 1 gate variables are constant-up, so keeping them as free
    Bernoulli(1) variables or dropping them gives the same curve."""
    c = load_scenario("paper-stream2-enhanced")
    dag = unfold(c.graph(), c.failure_probs)
    assert dag.gate_slot, "enhanced scenario must carry gate variables"
    gates = {i for i, v in enumerate(dag.vars) if v.kind is VarKind.GATE}
    assert all(dag.vars[i].gate_p == 1 for i in gates)
    with_gates = RelDag.from_instance(dag)
    # force the gate variables into the state space as explicit p_up = 1 entries
    explicit = RelDag.from_instance(dag)
    extra = len(explicit.p_up)
    explicit.p_up.append(1.0)
    for i, v in explicit.vertices.items():
        if any(x in gates for x in dag.vertices[i].vars):
            v.vars.append(extra)
    assert enumerate_curve(explicit)[0] == enumerate_curve(with_gates)[0]


def test_probabilistic_gate_marginal():
    """An elimination gate at theta = 2 in a diamond: exact value by hand."""
    g = layered([1, 2, 1, 1], [(0, 0, 1, 0), (0, 0, 1, 1), (1, 0, 2, 0), (1, 1, 2, 0), (2, 0, 3, 0)])
    mid = "n2_0"
    routing = dict(g.routing)
    routing[mid] = dataclasses.replace(routing[mid], elimination_theta=2)
    g = dataclasses.replace(g, routing=routing)
    q = 0.1
    probs = FailureProbs(tsn_link=q, tsn_bridge_node=0)
    a = (1 - q) ** 2  # one branch of the diamond
    both, one = a * a, 2 * a * (1 - a)
    # after the gate: two copies with probability both/2, else one copy (if any arrived)
    expected = both * 0.5 * (1 - q**2) + (both * 0.5 + one) * (1 - q)
    assert per_hop_curve(g, probs)[2] == pytest.approx(expected, abs=1e-14)


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**9), probs_st)
def test_random_graph_curves(seed, probs):
    g = random_layered(random.Random(seed))
    rel = RelDag.from_instance(unfold(g, probs))
    curve, total = enumerate_curve(rel)
    assert abs(total - 1) < 1e-12
    assert all(0 <= p <= 1 + 1e-15 for p in curve)
    assert all(b <= a + 1e-15 for a, b in zip(curve, curve[1:]))
    reduced = per_hop_curve(series_parallel_reduce(rel))
    assert max(abs(a - b) for a, b in zip(curve, reduced)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9), probs_st)
def test_random_graph_brute_force(seed, probs):
    """Cross-check against a direct path search over element states (no DAG involved)."""
    g = random_layered(random.Random(seed), max_layers=3, max_width=2)
    elements = [e for e in g.elements if 0 < probs.of(e) < 1]
    curve = per_hop_curve(g, probs)
    for h in range(1, g.hop_count + 1):
        total = 0.0
        for mask in range(1 << len(elements)):
            up = {e.id for k, e in enumerate(elements) if mask >> k & 1}
            up |= {e.id for e in g.elements if probs.of(e) == 0}
            w = math.prod(1 - probs.of(e) if e.id in up else probs.of(e) for e in elements)
            # reachable set restricted to hops <= h
            reach = {g.source} if g.source in up else set()
            for node in g.topological_nodes():
                for link in g.out_links(node):
                    if node in reach and link.id in up and g[link.dst].hop <= h and link.dst in up:
                        reach.add(link.dst)
            if any(g[n].hop == h for n in reach):
                total += w
        assert curve[h - 1] == pytest.approx(total, abs=1e-12)
