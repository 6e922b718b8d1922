"""Binary datagram codec.

Every message starts with the magic ``b"QCSS"``, a version byte and a type
byte, followed by a fixed-size little-endian payload. See docs/protocol.md.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..model import N_COORDS, N_SHIRTS, AgentId, Role, StateVector, Team

MAGIC = b"QCSS"
VERSION = 1
MAX_DATAGRAM = 512

_HEADER = struct.Struct("<4sBB")
_STATE = struct.Struct(f"<{N_COORDS}dBB")
_U32 = struct.Struct("<I")
_JOIN = struct.Struct("<BBB")
_JOIN_ACK = struct.Struct("<IdII")
_F64 = struct.Struct("<d")
_U8 = struct.Struct("<B")


class MessageType(enum.IntEnum):
    JOIN = 1
    JOIN_ACK = 2
    REALITY = 3
    PROPOSAL = 4
    MATCH_END = 5
    ERROR = 6


class ErrorCode(enum.IntEnum):
    ROSTER_FULL = 1
    DUPLICATE_SHIRT = 2
    MATCH_ALREADY_STARTED = 3
    BAD_REQUEST = 4
    UNKNOWN_AGENT = 5


class DecodeError(ValueError):
    """``reason`` is one of BadMagic, UnknownVersion, UnknownType, Truncated,
    TrailingBytes, BadEnum, NonFiniteField."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


class _Message:
    # equal iff the wire bytes are equal, which keeps -0.0 and 0.0 apart
    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return encode(self) == encode(other)  # type: ignore[arg-type]

    def __hash__(self) -> int:
        return hash(encode(self))  # type: ignore[arg-type]


@dataclass(frozen=True, eq=False)
class Join(_Message):
    role: Role
    team: Team
    shirt: Optional[int] = None


@dataclass(frozen=True, eq=False)
class JoinAck(_Message):
    agent_id: AgentId
    initial_w: float
    tick_period_ms: int
    proposal_deadline_ms: int


@dataclass(frozen=True, eq=False)
class Reality(_Message):
    tick: int
    state: StateVector
    will_of_recipient: float


@dataclass(frozen=True, eq=False)
class ProposalMsg(_Message):
    tick: int
    agent_id: AgentId
    state: StateVector


@dataclass(frozen=True, eq=False)
class MatchEnd(_Message):
    final_tick: int


@dataclass(frozen=True, eq=False)
class Error(_Message):
    code: ErrorCode


Message = Union[Join, JoinAck, Reality, ProposalMsg, MatchEnd, Error]


def _header(kind: MessageType) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, kind)


def _state_bytes(s: StateVector) -> bytes:
    return s.coords.astype("<f8").tobytes() + bytes([int(s.possessing_team), s.possessing_player])


def encode(m: Message) -> bytes:
    if isinstance(m, Reality):
        return _header(MessageType.REALITY) + _U32.pack(m.tick) + _state_bytes(m.state) + _F64.pack(m.will_of_recipient)
    if isinstance(m, ProposalMsg):
        return _header(MessageType.PROPOSAL) + _U32.pack(m.tick) + _U32.pack(m.agent_id) + _state_bytes(m.state)
    if isinstance(m, Join):
        return _header(MessageType.JOIN) + _JOIN.pack(int(m.role), int(m.team), m.shirt or 0)
    if isinstance(m, JoinAck):
        return _header(MessageType.JOIN_ACK) + _JOIN_ACK.pack(
            m.agent_id, m.initial_w, m.tick_period_ms, m.proposal_deadline_ms
        )
    if isinstance(m, MatchEnd):
        return _header(MessageType.MATCH_END) + _U32.pack(m.final_tick)
    if isinstance(m, Error):
        return _header(MessageType.ERROR) + _U8.pack(int(m.code))
    raise TypeError(f"not a message: {type(m).__name__}")


_PAYLOAD_SIZE = {
    MessageType.JOIN: _JOIN.size,
    MessageType.JOIN_ACK: _JOIN_ACK.size,
    MessageType.REALITY: _U32.size + _STATE.size + _F64.size,
    MessageType.PROPOSAL: 2 * _U32.size + _STATE.size,
    MessageType.MATCH_END: _U32.size,
    MessageType.ERROR: _U8.size,
}


def _finite(value: float, name: str) -> float:
    if not math.isfinite(value):
        raise DecodeError("NonFiniteField", name)
    return value


def _decode_state(buf: bytes, offset: int) -> StateVector:
    coords = np.frombuffer(buf, dtype="<f8", count=N_COORDS, offset=offset)
    if not np.isfinite(coords).all():
        raise DecodeError("NonFiniteField", "state coordinate")
    team, player = buf[offset + 8 * N_COORDS], buf[offset + 8 * N_COORDS + 1]
    if team > 1:
        raise DecodeError("BadEnum", f"possessing team byte {team}")
    if not 1 <= player <= N_SHIRTS:
        raise DecodeError("BadEnum", f"possessing player byte {player}")
    return StateVector(coords.astype(np.float64), Team(team), player)


def decode(buf: bytes) -> Message:
    buf = bytes(buf)
    if len(buf) < _HEADER.size:
        if MAGIC[: len(buf)] != buf:
            raise DecodeError("BadMagic")
        raise DecodeError("Truncated", f"{len(buf)} header bytes")
    magic, version, kind = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise DecodeError("BadMagic")
    if version != VERSION:
        raise DecodeError("UnknownVersion", str(version))
    try:
        kind = MessageType(kind)
    except ValueError:
        raise DecodeError("UnknownType", str(kind)) from None
    expected = _HEADER.size + _PAYLOAD_SIZE[kind]
    if len(buf) < expected:
        raise DecodeError("Truncated", f"{kind.name} needs {expected} bytes, got {len(buf)}")
    if len(buf) > expected:
        raise DecodeError("TrailingBytes", f"{kind.name} needs {expected} bytes, got {len(buf)}")
    off = _HEADER.size

    if kind is MessageType.REALITY:
        (tick,) = _U32.unpack_from(buf, off)
        state = _decode_state(buf, off + 4)
        (will,) = _F64.unpack_from(buf, off + 4 + _STATE.size)
        return Reality(tick, state, _finite(will, "will_of_recipient"))
    if kind is MessageType.PROPOSAL:
        tick, agent = struct.unpack_from("<II", buf, off)
        return ProposalMsg(tick, agent, _decode_state(buf, off + 8))
    if kind is MessageType.JOIN:
        role, team, shirt = _JOIN.unpack_from(buf, off)
        if role > 1:
            raise DecodeError("BadEnum", f"role byte {role}")
        if team > 1:
            raise DecodeError("BadEnum", f"team byte {team}")
        if shirt > N_SHIRTS or (role == Role.SUPPORTER and shirt != 0):
            raise DecodeError("BadEnum", f"shirt byte {shirt}")
        return Join(Role(role), Team(team), shirt or None)
    if kind is MessageType.JOIN_ACK:
        agent, w, period, deadline = _JOIN_ACK.unpack_from(buf, off)
        return JoinAck(agent, _finite(w, "initial_w"), period, deadline)
    if kind is MessageType.MATCH_END:
        (final_tick,) = _U32.unpack_from(buf, off)
        return MatchEnd(final_tick)
    (code,) = _U8.unpack_from(buf, off)
    try:
        return Error(ErrorCode(code))
    except ValueError:
        raise DecodeError("BadEnum", f"error code {code}") from None
