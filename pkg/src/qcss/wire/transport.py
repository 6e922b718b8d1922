"""UDP plumbing for the scheduler (stadium side) and for agents (connection side)."""
from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass
from typing import Optional

from ..model import AgentId, Role, RosterError, StateVector
from ..scheduler import Proposal, Scheduler
from .codec import (
    MAX_DATAGRAM,
    DecodeError,
    Error,
    ErrorCode,
    Join,
    JoinAck,
    MatchEnd,
    Message,
    ProposalMsg,
    Reality,
    decode,
    encode,
)

log = logging.getLogger(__name__)

_ERROR_CODES = {
    "RosterFull": ErrorCode.ROSTER_FULL,
    "DuplicateShirt": ErrorCode.DUPLICATE_SHIRT,
    "MatchAlreadyStarted": ErrorCode.MATCH_ALREADY_STARTED,
}


@dataclass
class _Datagram:
    received_ns: int
    data: bytes
    addr: tuple


class StadiumServer:
    """Datagram front end of a :class:`Scheduler`.

    A receiver thread timestamps every datagram on arrival and drops it in a
    mailbox; the owning thread drains the mailbox for joins in the lobby and
    for proposals once per tick.
    """

    def __init__(self, scheduler: Scheduler, host: str = "127.0.0.1", port: int = 0):
        self.scheduler = scheduler
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 4 << 20)
        self.sock.bind((host, port))
        self.sock.settimeout(0.05)
        self.address = self.sock.getsockname()
        self.peers: dict[AgentId, tuple] = {}
        self._by_addr: dict[tuple, AgentId] = {}
        self._mailbox: "queue.Queue[_Datagram]" = queue.Queue()
        self._running = True
        self.dropped = 0
        self._rx = threading.Thread(target=self._receive, name="qcss-stadium-rx", daemon=True)
        self._rx.start()

    def _receive(self) -> None:
        while self._running:
            try:
                data, addr = self.sock.recvfrom(MAX_DATAGRAM * 2)
            except socket.timeout:
                continue
            except OSError:
                break
            self._mailbox.put(_Datagram(time.monotonic_ns(), data, addr))

    def close(self) -> None:
        self._running = False
        self._rx.join(timeout=1.0)
        self.sock.close()

    def __enter__(self) -> "StadiumServer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _send(self, m: Message, addr: tuple) -> None:
        try:
            self.sock.sendto(encode(m), addr)
        except OSError as exc:  # a vanished peer must not stop the match
            log.debug("send to %s failed: %s", addr, exc)

    def _handle_join(self, msg: Join, addr: tuple) -> None:
        if addr in self._by_addr:
            agent = self._by_addr[addr]
        else:
            try:
                agent = self.scheduler.register_agent(msg.role, msg.team, msg.shirt)
            except RosterError as exc:
                self._send(Error(_ERROR_CODES.get(exc.code, ErrorCode.BAD_REQUEST)), addr)
                return
            self.peers[agent] = addr
            self._by_addr[addr] = agent
        cfg = self.scheduler.config
        ack = JoinAck(agent, self.scheduler.registration(agent)[1], cfg.tick_period_ms, cfg.proposal_deadline_ms)
        self._send(ack, addr)

    def serve_lobby(self, until_agents: int, timeout: float) -> None:
        """Process joins until ``until_agents`` are registered or raise TimeoutError."""
        end = time.monotonic() + timeout
        while len(self.peers) < until_agents:
            remaining = end - time.monotonic()
            if remaining <= 0:
                raise TimeoutError(f"only {len(self.peers)}/{until_agents} agents joined")
            try:
                dgram = self._mailbox.get(timeout=min(remaining, 0.05))
            except queue.Empty:
                continue
            self._dispatch_lobby(dgram)

    def _dispatch_lobby(self, dgram: _Datagram) -> None:
        try:
            msg = decode(dgram.data)
        except DecodeError:
            self.dropped += 1
            return
        if isinstance(msg, Join):
            self._handle_join(msg, dgram.addr)
        else:
            self.dropped += 1

    def broadcast(self, tick: int, reality: StateVector) -> None:
        will = self.scheduler.will
        for agent, addr in self.peers.items():
            self._send(Reality(tick, reality, will[agent]), addr)

    def collect(self, tick: int, tick_start_ns: int, deadline_ns: int) -> list[Proposal]:
        """Drain the mailbox until ``deadline_ns`` and return this tick's proposals.

        Arrivals are stamped by the receiver thread. Anything stamped at or
        after the deadline is still returned so the scheduler can classify it
        as late.
        """
        out: list[Proposal] = []
        while True:
            wait = (deadline_ns - time.monotonic_ns()) / 1e9
            try:
                dgram = self._mailbox.get(timeout=wait) if wait > 0 else self._mailbox.get_nowait()
            except queue.Empty:
                break
            try:
                msg = decode(dgram.data)
            except DecodeError:
                self.dropped += 1
                continue
            if isinstance(msg, ProposalMsg):
                if msg.tick != tick or self.peers.get(msg.agent_id) != dgram.addr:
                    self.dropped += 1
                    continue
                arrival_us = (dgram.received_ns - tick_start_ns) // 1000
                out.append(Proposal(msg.agent_id, msg.state, int(arrival_us)))
            elif isinstance(msg, Join):
                self._send(Error(ErrorCode.MATCH_ALREADY_STARTED), dgram.addr)
            else:
                self.dropped += 1
            if dgram.received_ns >= deadline_ns:
                break
        return out

    def end_match(self, final_tick: int, repeats: int = 3) -> None:
        for _ in range(repeats):
            for addr in self.peers.values():
                self._send(MatchEnd(final_tick), addr)


class UdpConnection:
    """Agent-side datagram connection to a stadium."""

    def __init__(self, host: str, port: int):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 20)
        self.sock.connect((host, port))

    def join(self, role: Role, team, shirt: Optional[int] = None, timeout: float = 5.0, retry: float = 0.25) -> JoinAck:
        end = time.monotonic() + timeout
        join = Join(Role(role), team, shirt)
        while time.monotonic() < end:
            self.send(join)
            deadline = min(end, time.monotonic() + retry)
            while time.monotonic() < deadline:
                msg = self.recv(timeout=max(0.0, deadline - time.monotonic()))
                if isinstance(msg, JoinAck):
                    return msg
                if isinstance(msg, Error):
                    raise RosterError(msg.code.name.title().replace("_", ""), "join refused")
        raise TimeoutError("no JoinAck from scheduler")

    def send(self, m: Message) -> None:
        try:
            self.sock.send(encode(m))
        except OSError as exc:
            log.debug("send failed: %s", exc)

    def recv(self, timeout: Optional[float]) -> Optional[Message]:
        """Next decodable message, or None once ``timeout`` seconds pass."""
        end = None if timeout is None else time.monotonic() + timeout
        while True:
            if end is not None:
                left = end - time.monotonic()
                if left <= 0:
                    return None
                self.sock.settimeout(left)
            else:
                self.sock.settimeout(None)
            try:
                data = self.sock.recv(MAX_DATAGRAM * 2)
            except socket.timeout:
                return None
            except OSError:
                # ICMP port unreachable surfaces here once the stadium is gone
                time.sleep(0.01)
                continue
            try:
                return decode(data)
            except DecodeError:
                continue

    def close(self) -> None:
        self.sock.close()
