from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xfrer.dag import gate_threshold
from xfrer.enhancements import (
    GateAction,
    GateLog,
    advertise_theta,
    enhanced_elimination_gate,
    enhanced_replication_gate,
    replication_decision,
)
from xfrer.errors import EmptyPathSet, InvalidTheta
from xfrer.fiveg import Embodiment, FiveGSegment, Variant, theta
from xfrer.frer import Frame, RTag
from xfrer.scenarios import load_scenario
from xfrer.topology import segment_neighbours

N = 1_000_000
FRAME = Frame("s", RTag(9))


def draws(seed: int, n: int = N) -> np.ndarray:
    return np.random.default_rng(seed).random(n)


def within_4_sigma(hits: int, p: float, n: int) -> bool:
    return abs(hits / n - p) <= 4 * math.sqrt(p * (1 - p) / n)


def test_elimination_gate_examples():
    assert enhanced_elimination_gate(2, 1, 0.99).action is GateAction.FORWARD
    for d in (0.0, 0.4, 0.999999):
        assert enhanced_elimination_gate(1, 2, d).action is GateAction.FORWARD
    assert enhanced_elimination_gate(2, 2, 0.5).action is GateAction.ELIMINATE
    assert enhanced_elimination_gate(2, 2, 0.4999).action is GateAction.FORWARD


def test_gates_reject_bad_theta():
    with pytest.raises(InvalidTheta):
        enhanced_elimination_gate(2, Fraction(1, 2), 0.1)
    with pytest.raises(InvalidTheta):
        enhanced_replication_gate(FRAME, ["P1"], 0.9, 0.1)
    with pytest.raises(EmptyPathSet):
        enhanced_replication_gate(FRAME, [], 1, 0.1)


def test_elimination_frequency():
    # the 4 sigma band at p = 0.5, N = 1e6 is exactly the +-0.002 of the example
    d = draws(11)
    fwd = sum(enhanced_elimination_gate(2, 2, x).action is GateAction.FORWARD for x in d.tolist())
    assert abs(fwd / N - 0.5) <= 0.002
    assert within_4_sigma(fwd, 0.5, N)


def test_replication_examples():
    for d in (0.0, 0.5, 0.999):
        copies = enhanced_replication_gate(FRAME, ["P1", "P2"], 1, d)
        assert [c.member_path for c in copies] == ["P1", "P2"]
    dup = enhanced_replication_gate(FRAME, ["P1"], 1, 0.7)
    assert [c.member_path for c in dup] == ["P1", "P1"]
    assert [c.rtag.sequence_number for c in dup] == [9, 9]
    assert dup[0].replica != dup[1].replica
    single = enhanced_replication_gate(FRAME, ["P1", "P2"], 2, 0.9)
    assert [c.member_path for c in single] == ["P1"]


def test_replication_mean_copy_count():
    d = draws(12)
    copies = [len(enhanced_replication_gate(FRAME, ["P1", "P2"], 2, x)) for x in d[:200_000].tolist()]
    n = len(copies)
    mean = sum(copies) / n
    # Bernoulli(0.5) mixture of 1 and 2 copies: 4 sigma = 4 * 0.5 / sqrt(n)
    assert abs(mean - 1.5) <= 4 * 0.5 / math.sqrt(n)
    # full 1e6 draws via the decision function alone
    rep = sum(replication_decision(2, x).action is GateAction.REPLICATE for x in d.tolist())
    assert abs((N + rep) / N - 1.5) <= 0.005
    assert within_4_sigma(rep, 0.5, N)


@pytest.mark.parametrize("th", [Fraction(3, 2), Fraction(7, 3)])
def test_frequency_law_other_thetas(th):
    d = draws(13, 200_000)
    p = float(1 / th)
    fwd = sum(enhanced_elimination_gate(3, th, x).action is GateAction.FORWARD for x in d.tolist())
    assert within_4_sigma(fwd, p, len(d))


@given(st.integers(1, 5), st.fractions(min_value=1, max_value=10, max_denominator=50),
       st.floats(0, 1, exclude_max=True))
def test_gates_pure(rank, th, draw):
    assert enhanced_elimination_gate(rank, th, draw) == enhanced_elimination_gate(rank, th, draw)
    assert replication_decision(th, draw) == replication_decision(th, draw)
    # forward iff draw < 1/theta, and the float threshold used by the vectorised engine agrees
    expected = rank == 1 or Fraction(draw) < 1 / th
    assert (enhanced_elimination_gate(rank, th, draw).action is GateAction.FORWARD) == expected
    assert (draw < gate_threshold(1 / th)) == (Fraction(draw) < 1 / th)


@given(st.integers(1, 6), st.floats(0, 1, exclude_max=True))
def test_theta_one_is_deterministic(rank, draw):
    assert enhanced_elimination_gate(rank, 1, draw).action is GateAction.FORWARD
    assert replication_decision(1, draw).action is GateAction.REPLICATE


@pytest.mark.parametrize("variant", list(Variant))
def test_advertisement_matches_theta(variant):
    seg = FiveGSegment(("UE1", "UE2"), ("MgNB", "SgNB"), ("UPF1", "UPF2"), segment_id="cell-7")
    adv = advertise_theta(Embodiment.of(variant), seg, ["C"])
    assert adv.theta == theta(Embodiment.of(variant))
    assert adv.source == "CNC" and adv.segment_id == "cell-7"


def test_advertisement_recipients_from_topology():
    c = load_scenario("paper-stream1-2pdu-2ue")
    recipients = segment_neighbours(c.topology, c.segment)
    assert set(recipients) == {"A", "B", "C"}
    assert advertise_theta(c.embodiment, c.segment, recipients).theta == 2
    assert advertise_theta(Embodiment.of("NoRedundancy"), c.segment).theta == 1


def test_gate_log_csv():
    log = GateLog()
    log.record(0, "replication", "C", 1, replication_decision(1, 0.25))
    log.record(1, "elimination", "C", Fraction(3, 2), enhanced_elimination_gate(2, Fraction(3, 2), 0.9))
    assert log.to_csv() == (
        "frame,gate,node,theta,draw,action\n"
        "0,replication,C,1,0.25,replicate\n"
        "1,elimination,C,3/2,0.9,eliminate\n"
    )
