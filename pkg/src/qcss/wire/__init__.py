"""Datagram codec and UDP transport."""
from .codec import (
    MAGIC,
    MAX_DATAGRAM,
    VERSION,
    DecodeError,
    Error,
    ErrorCode,
    Join,
    JoinAck,
    MatchEnd,
    Message,
    MessageType,
    ProposalMsg,
    Reality,
    decode,
    encode,
)

__all__ = [
    "MAGIC",
    "MAX_DATAGRAM",
    "VERSION",
    "DecodeError",
    "Error",
    "ErrorCode",
    "Join",
    "JoinAck",
    "MatchEnd",
    "Message",
    "MessageType",
    "ProposalMsg",
    "Reality",
    "decode",
    "encode",
]
