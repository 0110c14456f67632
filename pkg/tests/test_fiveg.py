from __future__ import annotations

import itertools
import json
from fractions import Fraction

import networkx as nx
import pytest

from xfrer.errors import StructuralMismatch
from xfrer.fiveg import (
    Direction,
    Embodiment,
    FiveGSegment,
    Phase,
    Variant,
    build_path_graph,
    establish_sessions,
    theta,
)
from xfrer.graph import EXTERNAL, ElementGraph, ElementKind
from xfrer.scenarios import BUILTINS, hop_labels, load_scenario

ONE = FiveGSegment(("UE",), ("gNB",), ("UPF",))
DUAL_GNB = FiveGSegment(("UE",), ("MgNB", "SgNB"), ("UPF",))
TWO_UE = FiveGSegment(("UE1", "UE2"), ("gNB",), ("UPF1", "UPF2"))
FULL = FiveGSegment(("UE1", "UE2"), ("MgNB", "SgNB"), ("UPF1", "UPF2"))

SEGMENT_FOR = {
    Variant.NO_REDUNDANCY: ONE,
    Variant.MULTI_PDU_MULTI_UE: TWO_UE,
    Variant.MULTI_PDU_SINGLE_UE: ONE,
    Variant.SINGLE_PDU_N3: DUAL_GNB,
    Variant.SINGLE_PDU_SDAP: ONE,
    Variant.SINGLE_PDU_PDCP: DUAL_GNB,
}

COMBINED = [
    Embodiment.combined("SinglePduN3", "SinglePduPdcp"),
    Embodiment.combined("SinglePduN3", "SinglePduSdap"),
    Embodiment.combined("MultiPduSingleUe", "SinglePduSdap"),
]


def all_cases():
    for v, seg in SEGMENT_FOR.items():
        yield Embodiment.of(v), seg
    for e in COMBINED:
        yield e, FULL if Variant.MULTI_PDU_MULTI_UE in e else DUAL_GNB


CASES = list(all_cases())
IDS = [str(e) for e, _ in CASES]


# -- theta -------------------------------------------------------------------

def test_theta_values():
    assert theta(Embodiment.of("MultiPduMultiUe")) == 2
    assert theta(Embodiment.of("MultiPduSingleUe")) == 2
    assert theta(Embodiment.of("SinglePduPdcp")) == Fraction(3, 2)
    assert theta(Embodiment.of("SinglePduSdap")) == Fraction(3, 2)
    assert theta(Embodiment.of("SinglePduN3")) == Fraction(3, 2)
    assert theta(Embodiment.of("NoRedundancy")) == 1
    assert isinstance(theta(Embodiment.of("NoRedundancy")), Fraction)


def test_theta_in_enumerated_set():
    assert {theta(Embodiment.of(v)) for v in Variant} == {1, Fraction(3, 2), 2}


def test_theta_combined_uses_interface_maxima():
    assert theta(Embodiment.combined("SinglePduN3", "SinglePduPdcp")) == 2
    assert theta(Embodiment.combined("SinglePduSdap", "SinglePduPdcp")) == Fraction(3, 2)


def test_combined_validation():
    with pytest.raises(ValueError):
        Embodiment.combined("SinglePduN3")
    with pytest.raises(ValueError):
        Embodiment.combined("MultiPduMultiUe", "MultiPduSingleUe")
    with pytest.raises(ValueError):
        Embodiment.combined("SinglePduN3", "SinglePduN3")
    assert Embodiment.parse("Combined(SinglePduN3, SinglePduPdcp)") == COMBINED[0]
    assert Embodiment.parse(str(COMBINED[1])) == COMBINED[1]


# -- sessions ----------------------------------------------------------------

def test_sessions_multi_ue():
    s = establish_sessions(Embodiment.of("MultiPduMultiUe"), TWO_UE)
    assert s.phase is Phase.ALL_SESSIONS_UP
    (a, b) = s.sessions
    assert a.ue_id != b.ue_id and a.upf_id != b.upf_id
    assert a.dnn_label == b.dnn_label


def test_sessions_single_ue():
    s = establish_sessions(Embodiment.of("MultiPduSingleUe"), ONE)
    (a, b) = s.sessions
    assert a.ue_id == b.ue_id and a.dnn_label != b.dnn_label


def test_sessions_structural_mismatch():
    with pytest.raises(StructuralMismatch):
        establish_sessions(Embodiment.of("MultiPduMultiUe"), ONE)
    with pytest.raises(StructuralMismatch):
        establish_sessions(Embodiment.of("SinglePduPdcp"), ONE)
    with pytest.raises(StructuralMismatch):
        build_path_graph(Embodiment.of("SinglePduN3"), ONE, Direction.UPLINK)


@pytest.mark.parametrize("emb,seg", CASES, ids=IDS)
def test_sessions_deterministic_and_monotone(emb, seg):
    a, b = establish_sessions(emb, seg), establish_sessions(emb, seg)
    assert a == b
    assert list(a.trace) == sorted(a.trace)
    assert a.phase is Phase.ALL_SESSIONS_UP


def test_phase_cannot_go_back():
    s = establish_sessions(Embodiment.of("NoRedundancy"), ONE)
    with pytest.raises(ValueError):
        s.advance(Phase.POLICY_SET)


# -- path graphs -------------------------------------------------------------

def as_nx(g: ElementGraph) -> nx.DiGraph:
    d = nx.DiGraph()
    d.add_nodes_from(e.id for e in g.elements)
    d.add_edges_from(g.edges)
    return d


def test_no_redundancy_chain():
    g = build_path_graph(Embodiment.of("NoRedundancy"), ONE, Direction.UPLINK)
    kinds = sorted((e.kind.value, e.category.value) for e in g.elements)
    assert len(g.elements) == 5
    assert kinds == sorted([("node", "ue"), ("link", "air"), ("node", "gnb"), ("link", "n3"), ("node", "upf")])
    assert g.replication_points == [] and g.elimination_points == []


def test_pdcp_shape():
    g = build_path_graph(Embodiment.of("SinglePduPdcp"), DUAL_GNB, Direction.UPLINK)
    cats = [e.category.value for e in g.elements]
    assert cats.count("air") == 2 and cats.count("xn") == 1 and cats.count("n3") == 1
    assert cats.count("gnb") == 2 and cats.count("upf") == 1
    assert [n for n, _ in g.replication_points] == ["UE"]
    assert g.elimination_points == ["MgNB"]


def test_sdap_shape():
    g = build_path_graph(Embodiment.of("SinglePduSdap"), ONE, Direction.UPLINK)
    assert [e.category.value for e in g.links].count("air") == 2
    assert g.elimination_points == ["gNB"]


def test_n3_shape():
    g = build_path_graph(Embodiment.of("SinglePduN3"), DUAL_GNB, Direction.UPLINK)
    assert [e.category.value for e in g.links].count("n3") == 2
    assert g.elimination_points == ["UPF"]
    down = build_path_graph(Embodiment.of("SinglePduN3"), DUAL_GNB, Direction.DOWNLINK)
    assert down.elimination_points == ["MgNB"]


def test_multi_pdu_multi_ue_disjoint_except_gnb():
    g = build_path_graph(Embodiment.of("MultiPduMultiUe"), TWO_UE, Direction.UPLINK)
    assert g.external_elimination
    # split every element into in/out halves; gNB may not be cut
    flow = nx.DiGraph()
    for e in g.elements:
        flow.add_edge((e.id, "in"), (e.id, "out"), capacity=float("inf") if e.id == "gNB" else 1)
    for a, b in g.edges:
        flow.add_edge((a, "out"), (b, "in"))
    for n in g.ingress:
        flow.add_edge("S", (n, "in"))
    for n in g.egress:
        flow.add_edge((n, "out"), "T")
    cut, _ = nx.minimum_cut(flow, "S", "T")
    assert cut >= 2
    # session chains (by routing) share only the gNB
    chains = [{e.id for e in g.elements if e.id.endswith(f".{i}") or e.id in (g.ingress[i - 1], g.egress[i - 1])}
              for i in (1, 2)]
    assert chains[0].isdisjoint(chains[1])
    assert {e.id for e in g.elements} - chains[0] - chains[1] == {"gNB"}


@pytest.mark.parametrize("emb,seg", CASES, ids=IDS)
@pytest.mark.parametrize("direction", list(Direction))
def test_every_walk_crosses_each_hop_once(emb, seg, direction):
    g = build_path_graph(emb, seg, direction)
    d = as_nx(g)
    H = g.hop_count
    for src, dst in itertools.product(g.ingress, g.egress):
        for walk in nx.all_simple_paths(d, src, dst):
            hops = [g[x].hop for x in walk]
            assert hops[0] == 0 and hops[-1] == H
            steps = [b - a for a, b in zip(hops, hops[1:])]
            assert all(s in (0, 1) for s in steps), walk
            # a hop is entered only through a link
            for x, y in zip(walk, walk[1:]):
                if g[y].hop > g[x].hop:
                    assert g[y].kind is ElementKind.LINK


@pytest.mark.parametrize("emb,seg", CASES, ids=IDS)
def test_downlink_is_reversed_uplink(emb, seg):
    up = build_path_graph(emb, seg, Direction.UPLINK)
    down = build_path_graph(emb, seg, Direction.DOWNLINK)
    rev = up.reversed()
    assert {e.id: (e.src, e.dst) for e in down.elements} == {e.id: (e.src, e.dst) for e in rev.elements}
    assert set(down.elimination_points) == {n for n, _ in up.replication_points}
    assert {n for n, _ in down.replication_points} == set(up.elimination_points)
    assert down.external_elimination == bool(up.edge_replication)


@pytest.mark.parametrize("emb,seg", CASES, ids=IDS)
@pytest.mark.parametrize("direction", list(Direction))
def test_replication_dominates_elimination(emb, seg, direction):
    g = build_path_graph(emb, seg, direction)
    d = as_nx(g)
    d.add_edges_from(("S", n) for n in g.ingress)
    dom = nx.immediate_dominators(d, "S")

    def dominates(a, b):
        while b != "S":
            if b == a:
                return True
            b = dom[b]
        return a == "S"

    reps = [n for n, _ in g.replication_points if n != EXTERNAL]
    elims = [n for n in g.elimination_points if n != EXTERNAL]
    for _, labels in g.replication_points:
        assert len(set(labels)) == len(labels)
    # each replication point has a matching elimination point it dominates, and vice versa
    for r in reps:
        assert any(dominates(r, e) for e in elims) or g.external_elimination
    for e in elims:
        assert any(dominates(r, e) for r in reps) or g.edge_replication


@pytest.mark.parametrize("emb,seg", CASES, ids=IDS)
def test_graph_json_roundtrip(emb, seg):
    g = build_path_graph(emb, seg, Direction.UPLINK)
    text = json.dumps(g.to_json())
    assert ElementGraph.from_json(json.loads(text)) == g


def test_hop_labels():
    assert hop_labels("Stream1")[2] == "UE to RAN/gNB"
    assert hop_labels("Stream2")[4] == "RAN/gNB to UE"
    assert len(hop_labels("Stream1")) == len(hop_labels("Stream2")) == 7


@pytest.mark.parametrize("sid", list(BUILTINS))
def test_builtin_graphs_have_seven_hops(sid):
    g = load_scenario(sid).graph()
    assert g.hop_count == 7
    assert set(g.hop_boundaries) == set(range(8))
