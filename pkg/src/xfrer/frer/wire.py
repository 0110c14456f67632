"""On-wire R-TAG layout and hex-dump helpers used by golden-frame vectors.

Layout: TPID ``0xF1C1``, two reserved octets (zero), 16-bit sequence number,
all big-endian, placed after the source MAC or after an 802.1Q/802.1ad tag.
"""

from __future__ import annotations

import re
import struct

from ..errors import AlreadyTagged, MissingRTag, SeqOutOfRange, WireFormatError
from .frames import SEQ_MODULUS

RTAG_ETHERTYPE = 0xF1C1
RTAG_LEN = 6
VLAN_TPIDS = (0x8100, 0x88A8)
_RTAG = struct.Struct(">HHH")
_ADDR_LEN = 12


def pack_rtag(seq: int) -> bytes:
    if not 0 <= seq < SEQ_MODULUS:
        raise SeqOutOfRange(f"sequence number {seq} outside 0..65535")
    return _RTAG.pack(RTAG_ETHERTYPE, 0, seq)


def unpack_rtag(raw: bytes) -> int:
    if len(raw) < RTAG_LEN:
        raise WireFormatError("truncated R-TAG")
    tpid, _reserved, seq = _RTAG.unpack_from(raw)
    if tpid != RTAG_ETHERTYPE:
        raise MissingRTag(f"expected tag type 0x{RTAG_ETHERTYPE:04X}, found 0x{tpid:04X}")
    return seq


def _tag_offset(image: bytes) -> int:
    if len(image) < _ADDR_LEN + 2:
        raise WireFormatError("frame shorter than the address header")
    offset = _ADDR_LEN
    (tpid,) = struct.unpack_from(">H", image, offset)
    while tpid in VLAN_TPIDS:
        offset += 4
        if len(image) < offset + 2:
            raise WireFormatError("truncated VLAN tag")
        (tpid,) = struct.unpack_from(">H", image, offset)
    return offset


def insert_rtag(image: bytes, seq: int) -> bytes:
    offset = _tag_offset(image)
    (tpid,) = struct.unpack_from(">H", image, offset)
    if tpid == RTAG_ETHERTYPE:
        raise AlreadyTagged("frame image already carries an R-TAG")
    return image[:offset] + pack_rtag(seq) + image[offset:]


def extract_rtag(image: bytes) -> tuple[int, bytes]:
    """Return ``(sequence_number, image_without_rtag)``."""
    offset = _tag_offset(image)
    seq = unpack_rtag(image[offset : offset + RTAG_LEN])
    return seq, image[:offset] + image[offset + RTAG_LEN :]


def to_hexdump(data: bytes, width: int = 16) -> str:
    lines = []
    for off in range(0, len(data), width):
        chunk = data[off : off + width]
        lines.append(f"{off:04x}  " + " ".join(f"{b:02x}" for b in chunk))
    return "\n".join(lines) + "\n"


_OFFSET = re.compile(r"^[0-9a-fA-F]{4,8}\s{2}")


def from_hexdump(text: str) -> bytes:
    """Parse :func:`to_hexdump` output; ``#`` comments and blank lines are skipped."""
    out = bytearray()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _OFFSET.match(line)
        if m is None:
            raise WireFormatError(f"line {lineno}: missing offset column")
        if int(m.group(0), 16) != len(out):
            raise WireFormatError(f"line {lineno}: offset does not match byte count")
        try:
            out.extend(bytes.fromhex(line[m.end() :]))
        except ValueError as exc:
            raise WireFormatError(f"line {lineno}: {exc}") from None
    return bytes(out)
