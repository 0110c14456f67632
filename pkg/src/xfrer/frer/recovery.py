"""Sequence recovery (compound and individual) for FRER elimination points.

Two algorithms are provided.  ``MATCH`` remembers only the last accepted
sequence number and drops an exact repeat of it.  ``VECTOR`` keeps a sliding
window of ``history_window`` sequence numbers ending at the highest accepted
one and drops anything already marked, or anything outside the window
(a "rogue" frame).
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field

from ..errors import MemberMismatch, MissingRTag
from .frames import SEQ_MODULUS, Frame

MAX_HISTORY_WINDOW = 4096
_HALF = SEQ_MODULUS // 2


class RecoveryAlgorithm(str, enum.Enum):
    MATCH = "match"
    VECTOR = "vector"


class Decision(str, enum.Enum):
    ACCEPT = "accept"
    DISCARD = "discard"


@dataclass(frozen=True)
class RecoveryCounters:
    passed: int = 0
    discarded: int = 0
    out_of_order: int = 0
    rogue: int = 0

    @property
    def offered(self) -> int:
        return self.passed + self.discarded


@dataclass(frozen=True)
class RecoveryState:
    algorithm: RecoveryAlgorithm = RecoveryAlgorithm.VECTOR
    history_window: int = 32
    recov_seq: int = 0
    seen: int = 0
    take_any: bool = True
    counters: RecoveryCounters = field(default_factory=RecoveryCounters)
    frames_since_reset: int = 0
    reset_threshold: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "algorithm", RecoveryAlgorithm(self.algorithm))
        if not 1 <= self.history_window <= MAX_HISTORY_WINDOW:
            raise ValueError(f"history_window must lie in 1..{MAX_HISTORY_WINDOW}")
        if self.reset_threshold is not None and self.reset_threshold < 1:
            raise ValueError("reset_threshold must be >= 1 (or None for never)")

    @property
    def seen_bitmap(self) -> tuple[bool, ...]:
        """Occupancy of the window; index ``i`` is sequence ``recov_seq - i``."""
        if self.algorithm is RecoveryAlgorithm.MATCH:
            return ()
        return tuple(bool(self.seen >> i & 1) for i in range(self.history_window))


@dataclass(frozen=True)
class MemberRecoveryState:
    member_path: str
    inner: RecoveryState = field(default_factory=RecoveryState)


def _signed_delta(seq: int, anchor: int) -> int:
    return (seq - anchor + _HALF) % SEQ_MODULUS - _HALF


def _count(counters: RecoveryCounters, accepted: bool, **extra: int) -> RecoveryCounters:
    if accepted:
        updates = {"passed": counters.passed + 1}
    else:
        updates = {"discarded": counters.discarded + 1}
    for name, inc in extra.items():
        updates[name] = getattr(counters, name) + inc
    return dataclasses.replace(counters, **updates)


def recover_compound(state: RecoveryState, frame: Frame) -> tuple[Decision, RecoveryState]:
    if frame.rtag is None:
        raise MissingRTag("recovery requires an R-TAG")
    seq = frame.rtag.sequence_number
    window_mask = (1 << state.history_window) - 1

    if state.take_any:
        new = dataclasses.replace(
            state,
            recov_seq=seq,
            seen=1,
            take_any=False,
            counters=_count(state.counters, True),
            frames_since_reset=0,
        )
        return Decision.ACCEPT, new

    delta = _signed_delta(seq, state.recov_seq)

    if state.algorithm is RecoveryAlgorithm.MATCH:
        if delta == 0:
            return Decision.DISCARD, dataclasses.replace(
                state, counters=_count(state.counters, False), frames_since_reset=0
            )
        return Decision.ACCEPT, dataclasses.replace(
            state,
            recov_seq=seq,
            counters=_count(state.counters, True, out_of_order=int(delta < 0)),
            frames_since_reset=0,
        )

    if 0 < delta <= state.history_window:
        return Decision.ACCEPT, dataclasses.replace(
            state,
            recov_seq=seq,
            seen=((state.seen << delta) | 1) & window_mask,
            counters=_count(state.counters, True),
            frames_since_reset=0,
        )
    if -state.history_window < delta <= 0:
        bit = 1 << -delta
        if state.seen & bit:
            return Decision.DISCARD, dataclasses.replace(
                state, counters=_count(state.counters, False), frames_since_reset=0
            )
        return Decision.ACCEPT, dataclasses.replace(
            state,
            seen=state.seen | bit,
            counters=_count(state.counters, True, out_of_order=int(delta < 0)),
            frames_since_reset=0,
        )
    return Decision.DISCARD, dataclasses.replace(
        state, counters=_count(state.counters, False, rogue=1), frames_since_reset=0
    )


def recover_individual(
    state: MemberRecoveryState, frame: Frame
) -> tuple[Decision, MemberRecoveryState]:
    if frame.member_path != state.member_path:
        raise MemberMismatch(
            f"frame on member path {frame.member_path!r} offered to {state.member_path!r}"
        )
    decision, inner = recover_compound(state.inner, frame)
    return decision, dataclasses.replace(state, inner=inner)


def reset_recovery(state: RecoveryState) -> RecoveryState:
    """Clear history and arm take-any; counters survive."""
    return dataclasses.replace(state, seen=0, take_any=True, frames_since_reset=0)


def tick_silence(state: RecoveryState) -> RecoveryState:
    """Account for one frame slot in which nothing was offered.

    Once ``reset_threshold`` consecutive silent slots accumulate the state is reset.
    """
    ticks = state.frames_since_reset + 1
    if state.reset_threshold is not None and ticks >= state.reset_threshold:
        return reset_recovery(state)
    return dataclasses.replace(state, frames_since_reset=ticks)
