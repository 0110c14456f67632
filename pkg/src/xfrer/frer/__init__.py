"""IEEE 802.1CB functions: identification, sequencing, tagging, splitting, recovery."""

from .frames import (
    SEQ_MODULUS,
    Frame,
    RTag,
    SequenceGeneratorState,
    StreamIdentity,
    decode_rtag,
    encode_rtag,
    generate_sequence,
    identify_stream,
    split_stream,
)
from .recovery import (
    Decision,
    MemberRecoveryState,
    RecoveryAlgorithm,
    RecoveryCounters,
    RecoveryState,
    recover_compound,
    recover_individual,
    reset_recovery,
    tick_silence,
)
from .wire import extract_rtag, from_hexdump, insert_rtag, pack_rtag, to_hexdump, unpack_rtag

__all__ = [
    "SEQ_MODULUS",
    "Decision",
    "Frame",
    "MemberRecoveryState",
    "RTag",
    "RecoveryAlgorithm",
    "RecoveryCounters",
    "RecoveryState",
    "SequenceGeneratorState",
    "StreamIdentity",
    "decode_rtag",
    "encode_rtag",
    "extract_rtag",
    "from_hexdump",
    "generate_sequence",
    "identify_stream",
    "insert_rtag",
    "pack_rtag",
    "recover_compound",
    "recover_individual",
    "reset_recovery",
    "split_stream",
    "tick_silence",
    "to_hexdump",
    "unpack_rtag",
]
