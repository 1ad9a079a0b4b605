"""Message transports: an in-process queue pair and a TCP socket pair.

Both carry already-encoded JSON lines. The TCP framing is a 4-byte big-endian
length prefix followed by the UTF-8 bytes of the line.
"""
from __future__ import annotations

import queue
import socket
import struct
import threading


class TransportError(RuntimeError):
    pass


DEFAULT_TIMEOUT = 60.0


class Channel:
    def send(self, line: str) -> None:
        raise NotImplementedError

    def recv(self, timeout: float = DEFAULT_TIMEOUT) -> str:
        raise NotImplementedError

    def close(self) -> None:
        pass


class QueueChannel(Channel):
    def __init__(self, outbox: queue.Queue, inbox: queue.Queue):
        self.outbox, self.inbox = outbox, inbox

    def send(self, line: str) -> None:
        self.outbox.put(line)

    def recv(self, timeout: float = DEFAULT_TIMEOUT) -> str:
        try:
            return self.inbox.get(timeout=timeout)
        except queue.Empty as exc:
            raise TransportError("timed out waiting for a message") from exc


class QueueTransport:
    """Two in-order queues; ``open()`` returns (client_end, server_end)."""

    name = "queue"

    def open(self) -> tuple[Channel, Channel]:
        a, b = queue.Queue(), queue.Queue()
        return QueueChannel(a, b), QueueChannel(b, a)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise TransportError("connection closed")
        buf += chunk
    return buf


class SocketChannel(Channel):
    def __init__(self, sock: socket.socket):
        self.sock = sock

    def send(self, line: str) -> None:
        data = line.encode("utf-8")
        try:
            self.sock.sendall(struct.pack(">I", len(data)) + data)
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def recv(self, timeout: float = DEFAULT_TIMEOUT) -> str:
        self.sock.settimeout(timeout)
        try:
            (size,) = struct.unpack(">I", _recv_exact(self.sock, 4))
            return _recv_exact(self.sock, size).decode("utf-8")
        except (OSError, struct.error) as exc:
            raise TransportError(str(exc)) from exc

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class TcpTransport:
    """Listen on (host, port), connect a client, return both ends. Port 0 picks a free port."""

    name = "tcp"

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self.host, self.port = host, port

    def open(self) -> tuple[Channel, Channel]:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((self.host, self.port))
            listener.listen(1)
            addr = listener.getsockname()
            accepted: list = []

            def accept():
                conn, _ = listener.accept()
                accepted.append(conn)

            t = threading.Thread(target=accept, daemon=True)
            t.start()
            client = socket.create_connection(addr, timeout=DEFAULT_TIMEOUT)
            t.join(DEFAULT_TIMEOUT)
            if not accepted:
                raise TransportError("server side never accepted the connection")
        except OSError as exc:
            raise TransportError(f"cannot open TCP transport on {self.host}:{self.port}: {exc}") from exc
        finally:
            listener.close()
        return SocketChannel(client), SocketChannel(accepted[0])


def parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise TransportError(f"expected host:port, got {text!r}")
    return host, int(port)
