"""Reliable ordered channels between a coordinator and its workers.

Endpoints address each other by worker id; the coordinator is ``COORD``.
Both transports move encoded frames, so the simulated one exercises the same
wire format as the socket one.
"""

from __future__ import annotations

import logging
import queue
import socket
import struct
import subprocess
import sys
import threading
import time

from ..errors import ProtocolError
from . import messages as m

log = logging.getLogger(__name__)

COORD = -1
DEFAULT_TIMEOUT = 600.0
_POLL = 0.05


class Endpoint:
    """One role's view of the transport."""

    me: int

    def send(self, dest: int, msg):
        raise NotImplementedError

    def recv(self, src: int, timeout: float | None = None):
        raise NotImplementedError

    def close(self):
        pass


# ----------------------------------------------------------------------
# in-process simulation


class SimTransport:
    """Per-direction FIFO queues; workers run as threads in this process."""

    def __init__(self, n_workers: int, timeout: float = DEFAULT_TIMEOUT):
        self.n = n_workers
        self.timeout = timeout
        self._queues: dict[tuple[int, int], queue.Queue] = {}
        self._lock = threading.Lock()
        self.failures: dict[int, BaseException] = {}
        self.frames_sent = 0
        self.bytes_sent = 0

    def channel(self, src: int, dst: int) -> queue.Queue:
        key = (src, dst)
        with self._lock:
            q = self._queues.get(key)
            if q is None:
                q = self._queues[key] = queue.Queue()
            return q

    def endpoint(self, me: int) -> "SimEndpoint":
        return SimEndpoint(self, me)

    def inject(self, src: int, dst: int, msg):
        """Push a message as if ``src`` had sent it (used to test reordering)."""
        self.channel(src, dst).put(m.encode(msg))

    def fail(self, worker: int, exc: BaseException):
        self.failures[worker] = exc


class SimEndpoint(Endpoint):
    def __init__(self, transport: SimTransport, me: int):
        self.t = transport
        self.me = me

    def send(self, dest: int, msg):
        frame = m.encode(msg)
        self.t.frames_sent += 1
        self.t.bytes_sent += len(frame)
        self.t.channel(self.me, dest).put(frame)

    def recv(self, src: int, timeout: float | None = None):
        timeout = self.t.timeout if timeout is None else timeout
        q = self.t.channel(src, self.me)
        deadline = time.monotonic() + timeout
        while True:
            try:
                return m.decode(q.get(timeout=_POLL))
            except queue.Empty:
                pass
            if self.me == COORD and self.t.failures:
                wid, exc = next(iter(self.t.failures.items()))
                raise ProtocolError(f"worker {wid} failed: {exc}") from exc
            if time.monotonic() > deadline:
                who = "coordinator" if src == COORD else f"worker {src}"
                raise ProtocolError(f"timed out after {timeout:.0f}s waiting for {who}")


# ----------------------------------------------------------------------
# sockets


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    parts, got = [], 0
    while got < n:
        chunk = sock.recv(min(n - got, 1 << 20))
        if not chunk:
            raise ProtocolError("connection closed mid-frame")
        parts.append(chunk)
        got += len(chunk)
    return b"".join(parts)


def read_frame(sock: socket.socket, timeout: float | None):
    sock.settimeout(timeout)
    try:
        head = _recv_exact(sock, 4)
        (n,) = struct.unpack(">I", head)
        if n > m.MAX_FRAME:
            raise ProtocolError(f"frame of {n} bytes exceeds limit")
        return m.decode_body(_recv_exact(sock, n))
    except socket.timeout as e:
        raise ProtocolError(f"timed out after {timeout}s waiting for a frame") from e


def write_frame(sock: socket.socket, msg):
    sock.settimeout(None)
    sock.sendall(m.encode(msg))


class SocketCoordinator(Endpoint):
    """Listens on localhost, spawns one worker process per id, then relays."""

    me = COORD

    def __init__(self, n_workers: int, timeout: float = DEFAULT_TIMEOUT, host: str = "127.0.0.1"):
        self.timeout = timeout
        self.listener = socket.create_server((host, 0))
        port = self.listener.getsockname()[1]
        boot = "import sys; from nevo.distrib.worker import main; main(sys.argv[1:])"
        self.procs = [subprocess.Popen([sys.executable, "-c", boot, host, str(port), str(i)])
                      for i in range(n_workers)]
        self.conns: dict[int, socket.socket] = {}
        addresses: list = [None] * n_workers
        self.listener.settimeout(timeout)
        try:
            while len(self.conns) < n_workers:
                conn, _ = self.listener.accept()
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                hello = read_frame(conn, timeout)
                if not isinstance(hello, m.Hello):
                    raise ProtocolError(f"expected Hello, got {type(hello).__name__}")
                self.conns[hello.worker] = conn
                addresses[hello.worker] = [hello.host, hello.port]
        except socket.timeout as e:
            self.close()
            raise ProtocolError("workers did not connect in time") from e
        for conn in self.conns.values():
            write_frame(conn, m.PeerTable(0, addresses))

    def send(self, dest: int, msg):
        write_frame(self.conns[dest], msg)

    def recv(self, src: int, timeout: float | None = None):
        proc = self.procs[src]
        if proc.poll() not in (None, 0):
            raise ProtocolError(f"worker {src} exited with status {proc.returncode}")
        return read_frame(self.conns[src], self.timeout if timeout is None else timeout)

    def close(self):
        for conn in self.conns.values():
            conn.close()
        self.listener.close()
        for p in self.procs:
            try:
                p.wait(timeout=10)
            except subprocess.TimeoutExpired:
                p.kill()
                p.wait()


class SocketWorker(Endpoint):
    """Worker side: one coordinator link plus lazily opened peer links."""

    def __init__(self, host: str, port: int, me: int, timeout: float = DEFAULT_TIMEOUT):
        self.me = me
        self.timeout = timeout
        self.peer_listener = socket.create_server((host, 0))
        self.coord = socket.create_connection((host, port), timeout=timeout)
        self.coord.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        write_frame(self.coord, m.Hello(0, me, host, self.peer_listener.getsockname()[1]))
        table = read_frame(self.coord, timeout)
        if not isinstance(table, m.PeerTable):
            raise ProtocolError(f"expected PeerTable, got {type(table).__name__}")
        self.addresses = table.addresses
        self.out: dict[int, socket.socket] = {}
        self.inbound: dict[int, socket.socket] = {}

    def send(self, dest: int, msg):
        if dest == COORD:
            write_frame(self.coord, msg)
            return
        sock = self.out.get(dest)
        if sock is None:
            host, port = self.addresses[dest]
            sock = socket.create_connection((host, port), timeout=self.timeout)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            write_frame(sock, m.Hello(0, self.me))
            self.out[dest] = sock
        write_frame(sock, msg)

    def recv(self, src: int, timeout: float | None = None):
        timeout = self.timeout if timeout is None else timeout
        if src == COORD:
            return read_frame(self.coord, timeout)
        deadline = time.monotonic() + timeout
        while src not in self.inbound:
            left = deadline - time.monotonic()
            if left <= 0:
                raise ProtocolError(f"timed out waiting for a connection from worker {src}")
            self.peer_listener.settimeout(left)
            try:
                conn, _ = self.peer_listener.accept()
            except socket.timeout:
                continue
            hello = read_frame(conn, timeout)
            self.inbound[hello.worker] = conn
        return read_frame(self.inbound[src], max(deadline - time.monotonic(), 0.001))

    def close(self):
        for s in list(self.out.values()) + list(self.inbound.values()) + [self.coord, self.peer_listener]:
            s.close()
