"""HTTP transport abstraction.

Protocol clients never talk to the network directly; they take a transport
object so every test runs against recorded fixtures. The real transport
enforces a per-host politeness delay and a request timeout.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from .errors import TransportError


@dataclass
class HttpResponse:
    status: int
    body: bytes = b""
    headers: dict[str, str] = field(default_factory=dict)

    def header(self, name: str) -> str | None:
        for key, value in self.headers.items():
            if key.lower() == name.lower():
                return value
        return None


class Transport:
    """Abstract GET-only client. Implementations raise TransportError on
    network-level failures; HTTP error statuses come back as responses."""

    def get(self, url: str) -> HttpResponse:
        raise NotImplementedError


class UrllibTransport(Transport):
    """Live transport with timeout and per-host politeness delay."""

    def __init__(self, timeout_s: float = 30.0, politeness_delay_ms: int = 500):
        self.timeout_s = timeout_s
        self.politeness_delay_s = politeness_delay_ms / 1000.0
        self._lock = threading.Lock()
        self._last_request: dict[str, float] = {}

    def _wait_turn(self, host: str) -> None:
        with self._lock:
            last = self._last_request.get(host, 0.0)
            wait = last + self.politeness_delay_s - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_request[host] = time.monotonic()

    def get(self, url: str) -> HttpResponse:
        import urllib.error
        import urllib.request
        from urllib.parse import urlsplit

        self._wait_turn(urlsplit(url).hostname or "")
        request = urllib.request.Request(url, headers={"User-Agent": "webarc/0.1"})
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_s) as resp:
                return HttpResponse(resp.status, resp.read(), dict(resp.headers.items()))
        except urllib.error.HTTPError as exc:
            return HttpResponse(exc.code, exc.read() or b"", dict(exc.headers.items()))
        except OSError as exc:
            raise TransportError(f"GET {url}: {exc}") from exc


class StubTransport(Transport):
    """Fixture transport: maps exact URLs to canned responses.

    A value of ``TransportError`` (class or instance) simulates a network
    failure; unknown URLs return 404 unless ``strict`` is set.
    """

    def __init__(self, responses: dict[str, HttpResponse | TransportError | type] | None = None,
                 strict: bool = False):
        self.responses = dict(responses or {})
        self.strict = strict
        self.requests: list[str] = []

    def add(self, url: str, response: HttpResponse | TransportError | type) -> None:
        self.responses[url] = response

    def get(self, url: str) -> HttpResponse:
        self.requests.append(url)
        if url not in self.responses:
            if self.strict:
                raise AssertionError(f"unexpected request: {url}")
            return HttpResponse(404)
        canned = self.responses[url]
        if isinstance(canned, TransportError):
            raise canned
        if isinstance(canned, type) and issubclass(canned, TransportError):
            raise canned(f"stubbed failure for {url}")
        return canned
