"""Stream identification, sequence generation, R-TAG handling and stream splitting."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

from ..errors import (
    AlreadyTagged,
    DuplicatePathLabel,
    EmptyPathSet,
    MissingRTag,
    SeqOutOfRange,
    UnknownStream,
)

SEQ_MODULUS = 1 << 16


def parse_mac(value: str | bytes) -> bytes:
    """Normalise ``01:00:5e:00:00:01`` / ``01-00-5E-...`` / raw bytes to 6 octets."""
    if isinstance(value, (bytes, bytearray)):
        raw = bytes(value)
    else:
        digits = value.replace(":", "").replace("-", "").replace(".", "")
        try:
            raw = bytes.fromhex(digits)
        except ValueError as exc:
            raise ValueError(f"malformed MAC address {value!r}") from exc
    if len(raw) != 6:
        raise ValueError(f"MAC address must be 6 octets, got {len(raw)}")
    return raw


def format_mac(raw: bytes) -> str:
    return ":".join(f"{b:02X}" for b in raw)


@dataclass(frozen=True)
class StreamIdentity:
    dst_mac: bytes
    src_mac: bytes
    vlan_id: int = 0
    priority: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "dst_mac", parse_mac(self.dst_mac))
        object.__setattr__(self, "src_mac", parse_mac(self.src_mac))
        if not 0 <= self.vlan_id <= 4095:
            raise ValueError(f"vlan_id {self.vlan_id} outside 0..4095")
        if not 0 <= self.priority <= 7:
            raise ValueError(f"priority {self.priority} outside 0..7")

    def __str__(self) -> str:
        return (
            f"{format_mac(self.dst_mac)}<-{format_mac(self.src_mac)}"
            f" vlan={self.vlan_id} prio={self.priority}"
        )


@dataclass(frozen=True)
class RTag:
    sequence_number: int
    reserved: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.sequence_number < SEQ_MODULUS:
            raise SeqOutOfRange(f"sequence number {self.sequence_number} outside 0..65535")


@dataclass(frozen=True)
class Frame:
    """One copy of a TSN frame.

    ``replica`` distinguishes temporal duplicates that share both sequence
    number and member path (see :func:`xfrer.enhancements.enhanced_replication_gate`).
    """

    stream_handle: Hashable
    rtag: RTag | None = None
    member_path: str | None = None
    payload_len: int = 0
    hop_trace: tuple[int, ...] = ()
    replica: int = 0

    def visit(self, hop: int) -> Frame:
        """Record traversal of ``hop``; repeated visits within one hop are folded."""
        if self.hop_trace and hop <= self.hop_trace[-1]:
            if hop == self.hop_trace[-1]:
                return self
            raise ValueError(f"hop {hop} would break the increasing hop trace {self.hop_trace}")
        return dataclasses.replace(self, hop_trace=self.hop_trace + (hop,))


@dataclass(frozen=True)
class SequenceGeneratorState:
    stream_handle: Hashable
    next_seq: int = 0


def identify_stream(
    dst_mac: str | bytes,
    src_mac: str | bytes,
    vlan_id: int,
    priority: int,
    ident_table: Mapping[StreamIdentity, Hashable],
) -> Hashable:
    """Exact-match lookup of the 4-tuple; raises :class:`UnknownStream` when absent."""
    if not ident_table:
        raise ValueError("identification table is empty")
    key = StreamIdentity(dst_mac, src_mac, vlan_id, priority)
    try:
        return ident_table[key]
    except KeyError:
        raise UnknownStream(str(key)) from None


def generate_sequence(state: SequenceGeneratorState) -> tuple[int, SequenceGeneratorState]:
    seq = state.next_seq
    return seq, dataclasses.replace(state, next_seq=(seq + 1) % SEQ_MODULUS)


def encode_rtag(frame: Frame, seq: int) -> Frame:
    if frame.rtag is not None:
        raise AlreadyTagged(f"frame already carries sequence {frame.rtag.sequence_number}")
    if not 0 <= seq < SEQ_MODULUS:
        raise SeqOutOfRange(f"sequence number {seq} outside 0..65535")
    return dataclasses.replace(frame, rtag=RTag(seq))


def decode_rtag(frame: Frame) -> int:
    if frame.rtag is None:
        raise MissingRTag("frame carries no R-TAG")
    return frame.rtag.sequence_number


def split_stream(frame: Frame, path_set: Sequence[str]) -> list[Frame]:
    """One copy per path label, all sharing the input's sequence number."""
    if frame.rtag is None:
        raise MissingRTag("only tagged frames can be split")
    if not path_set:
        raise EmptyPathSet("path set is empty")
    if len(set(path_set)) != len(path_set):
        raise DuplicatePathLabel(f"duplicate labels in {list(path_set)}")
    return [dataclasses.replace(frame, member_path=label) for label in path_set]

