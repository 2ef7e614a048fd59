"""HTTP transport for hard-label oracles.

Wire protocol: ``POST /classify`` with a PFT1 tensor body (normalized-space
image); ``200 {"label": k}`` on success, ``400`` for a malformed body or
wrong shape, ``413`` for bodies over 64 MiB.
"""
import json
import logging
import threading
import time
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import requests

from ..errors import BindFailure, BudgetExhausted, PfflError, ProtocolError, RemoteUnavailable
from ..tensor_io import decode_tensor, encode_tensor
from .base import HardLabelOracle

log = logging.getLogger(__name__)

MAX_BODY = 64 * 1024 * 1024


class RemoteOracle(HardLabelOracle):
    """Client for a served oracle.  Queries are counted locally."""

    def __init__(self, url, input_shape=None, budget=None, retries=3, backoff=0.05, timeout=10.0):
        super().__init__(budget)
        self.url = url.rstrip("/")
        if not self.url.endswith("/classify"):
            self.url += "/classify"
        self.input_shape = tuple(input_shape) if input_shape is not None else None
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._local = threading.local()

    def _session(self):
        s = getattr(self._local, "session", None)
        if s is None:
            s = self._local.session = requests.Session()
        return s

    def _predict(self, img):
        body = encode_tensor(img)
        delay = self.backoff
        for attempt in range(self.retries + 1):
            try:
                resp = self._session().post(self.url, data=body, timeout=self.timeout,
                                            headers={"Content-Type": "application/octet-stream"})
                break
            except (requests.ConnectionError, requests.Timeout) as exc:
                if attempt == self.retries:
                    raise RemoteUnavailable(f"{self.url}: {exc}") from exc
                time.sleep(delay)
                delay *= 2
        if resp.status_code != 200:
            raise ProtocolError(f"{self.url} answered {resp.status_code}: {resp.text[:200]}")
        try:
            label = resp.json()["label"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed response {resp.text[:200]!r}") from exc
        if not isinstance(label, int) or isinstance(label, bool) or label < 0:
            raise ProtocolError(f"bad label {label!r}")
        return label

    def peek(self, img):
        raise NotImplementedError("remote oracles cannot be queried off the ledger")

    def fork(self, budget=None):
        return RemoteOracle(self.url, self.input_shape, budget, self.retries, self.backoff, self.timeout)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    # headers and body go out in separate writes; without TCP_NODELAY each
    # keep-alive reply waits on the peer's delayed ACK
    disable_nagle_algorithm = True

    def log_message(self, fmt, *args):
        log.debug("%s - " + fmt, self.address_string(), *args)

    def _reply(self, status, payload):
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        if self.path.rstrip("/") != "/classify":
            self._reply(HTTPStatus.NOT_FOUND, {"error": "unknown path"})
            return
        try:
            length = int(self.headers.get("Content-Length", ""))
        except ValueError:
            self.close_connection = True
            self._reply(HTTPStatus.BAD_REQUEST, {"error": "missing Content-Length"})
            return
        if length > MAX_BODY:
            self.close_connection = True
            self._reply(HTTPStatus.REQUEST_ENTITY_TOO_LARGE, {"error": "body over 64 MiB"})
            return
        body = self.rfile.read(length)
        oracle = self.server.oracle
        try:
            img = decode_tensor(body)
            label = oracle.classify(img)
        except BudgetExhausted as exc:
            self._reply(HTTPStatus.TOO_MANY_REQUESTS, {"error": str(exc)})
            return
        except (PfflError, ValueError) as exc:
            self._reply(HTTPStatus.BAD_REQUEST, {"error": str(exc)})
            return
        self._reply(HTTPStatus.OK, {"label": label})


class OracleServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, oracle, address):
        self.oracle = oracle
        super().__init__(address, _Handler)
        self._thread = None

    @property
    def url(self):
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()


def parse_bind(address):
    host, _, port = address.rpartition(":")
    return (host or "127.0.0.1", int(port))


def serve(oracle, address=("127.0.0.1", 0), background=True):
    """Start serving ``oracle``; returns the running OracleServer."""
    if isinstance(address, str):
        address = parse_bind(address)
    try:
        server = OracleServer(oracle, address)
    except OSError as exc:
        raise BindFailure(f"cannot bind {address}: {exc}") from exc
    if background:
        server.start()
    return server
