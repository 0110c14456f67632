"""Theta-driven probabilistic elimination and replication at TSN nodes bordering a 5G system."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

from .errors import EmptyPathSet, InvalidTheta
from .fiveg import Embodiment, FiveGSegment, theta as fiveg_theta
from .frer import Frame, split_stream


class GateAction(str, enum.Enum):
    FORWARD = "forward"
    ELIMINATE = "eliminate"
    REPLICATE = "replicate"
    PASS_SINGLE = "pass_single"


@dataclass(frozen=True)
class GateDecision:
    action: GateAction
    draw: float


@dataclass(frozen=True)
class ThetaAdvertisement:
    segment_id: str
    theta: Fraction
    recipients: tuple[str, ...] = ()
    source: str = "CNC"


def _pass_probability(theta: Fraction | float | int) -> Fraction:
    theta = Fraction(theta)
    if theta < 1:
        raise InvalidTheta(f"theta must be >= 1, got {theta}")
    return 1 / theta


def _check_draw(draw: float) -> None:
    if not 0.0 <= draw < 1.0:
        raise ValueError(f"draw {draw} outside [0, 1)")


def enhanced_elimination_gate(replica_rank: int, theta, draw: float) -> GateDecision:
    """Decide whether a received replica may continue toward the 5G system.

    The first copy of a sequence number always passes; later copies pass with
    probability ``1/theta``.
    """
    p = _pass_probability(theta)
    _check_draw(draw)
    if replica_rank < 1:
        raise ValueError("replica_rank starts at 1")
    if replica_rank == 1 or draw < p:
        return GateDecision(GateAction.FORWARD, draw)
    return GateDecision(GateAction.ELIMINATE, draw)


def replication_decision(theta, draw: float) -> GateDecision:
    p = _pass_probability(theta)
    _check_draw(draw)
    return GateDecision(GateAction.REPLICATE if draw < p else GateAction.PASS_SINGLE, draw)


def enhanced_replication_gate(
    frame: Frame, k_paths: Sequence[str], theta, draw: float
) -> list[Frame]:
    """Replicate over ``k_paths`` with probability ``1/theta``.

    With a single available path the replica is a temporal duplicate on that
    same path, told apart by its ``replica`` index.
    """
    if not k_paths:
        raise EmptyPathSet("replication needs at least one path")
    decision = replication_decision(theta, draw)
    if decision.action is GateAction.PASS_SINGLE:
        return split_stream(frame, [k_paths[0]])
    if len(k_paths) == 1:
        (first,) = split_stream(frame, [k_paths[0]])
        return [first, replace(first, replica=frame.replica + 1)]
    return split_stream(frame, list(k_paths))


def advertise_theta(
    embodiment: Embodiment, segment: FiveGSegment, recipients: Sequence[str] = ()
) -> ThetaAdvertisement:
    return ThetaAdvertisement(segment.segment_id, fiveg_theta(embodiment), tuple(recipients))


class GateLog:
    """Collects gate decisions; rendered as CSV ``frame,gate,node,theta,draw,action``."""

    header = ("frame", "gate", "node", "theta", "draw", "action")

    def __init__(self) -> None:
        self.rows: list[tuple] = []

    def record(self, frame: int, gate: str, node: str, theta, decision: GateDecision) -> None:
        self.rows.append((frame, gate, node, str(Fraction(theta)), repr(decision.draw), decision.action.value))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()
