"""HTTP downloading with redirect, size and time limits, plus politeness.

:func:`fetch` never raises for network or HTTP trouble; failures come back
as an ``error`` kind on the :class:`FetchOutcome`.
"""
from __future__ import annotations

import http.client
import logging
import socket
import ssl
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, Optional, Tuple
from urllib.robotparser import RobotFileParser

from .errors import MalformedUrl
from .urlkit import DEFAULT_PORTS, CanonicalUrl, canonicalize, domain_of

logger = logging.getLogger(__name__)

DEFAULT_USER_AGENT = "yesql-crawler/0.1 (+https://example.org/yesql-crawler)"
REDIRECT_CODES = frozenset({301, 302, 303, 307, 308})

DNS_FAILURE = "dns_failure"
CONNECT_TIMEOUT = "connect_timeout"
CONNECT_ERROR = "connect_error"
READ_TIMEOUT = "read_timeout"
TOO_MANY_REDIRECTS = "too_many_redirects"
TLS_FAILURE = "tls_failure"
BAD_REDIRECT = "bad_redirect"
PROTOCOL_ERROR = "protocol_error"
ROBOTS_DISALLOWED = "robots_disallowed"
UNSUPPORTED_SCHEME = "unsupported_scheme"

Resolver = Callable[[str, int], Tuple[str, int]]


@dataclass(frozen=True)
class FetchLimits:
    timeout: float = 30.0
    max_redirects: int = 5
    max_body_bytes: int = 4 * 1024 * 1024

    def __post_init__(self):
        if self.timeout <= 0 or self.max_redirects < 0 or self.max_body_bytes <= 0:
            raise ValueError(f"invalid fetch limits {self}")


@dataclass
class FetchOutcome:
    requested: CanonicalUrl
    final: CanonicalUrl
    http_status: int = 0
    content_type: Optional[str] = None
    body: bytes = b""
    truncated: bool = False
    elapsed: float = 0.0
    error: Optional[str] = None
    redirects: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None


def route_all(address: str, port: int) -> Resolver:
    """Resolver sending every host to one address, e.g. a local mock web."""
    return lambda host, p: (address, port)


class _RoutedHTTPConnection(http.client.HTTPConnection):
    def __init__(self, host, port, timeout, resolver: Optional[Resolver]):
        super().__init__(host, port, timeout=timeout)
        self._resolver = resolver

    def connect(self):
        target = self._resolver(self.host, self.port) if self._resolver else (self.host, self.port)
        self.sock = socket.create_connection(target, self.timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)


class _RoutedHTTPSConnection(http.client.HTTPSConnection):
    def __init__(self, host, port, timeout, resolver: Optional[Resolver]):
        super().__init__(host, port, timeout=timeout, context=ssl.create_default_context())
        self._resolver = resolver

    def connect(self):
        target = self._resolver(self.host, self.port) if self._resolver else (self.host, self.port)
        sock = socket.create_connection(target, self.timeout)
        self.sock = self._context.wrap_socket(sock, server_hostname=self.host)


class _Failure(Exception):
    def __init__(self, kind: str):
        super().__init__(kind)
        self.kind = kind


@dataclass
class _Response:
    status: int
    headers: http.client.HTTPMessage
    body: bytes
    truncated: bool


def _host_for_request(url: CanonicalUrl) -> str:
    return url.host[1:-1] if url.host.startswith("[") else url.host


def _request(url: CanonicalUrl, limits: FetchLimits, user_agent: str,
             resolver: Optional[Resolver], max_bytes: int) -> _Response:
    port = url.port or DEFAULT_PORTS[url.scheme]
    cls = _RoutedHTTPSConnection if url.scheme == "https" else _RoutedHTTPConnection
    conn = cls(_host_for_request(url), port, limits.timeout, resolver)
    try:
        try:
            conn.connect()
        except socket.gaierror as exc:
            raise _Failure(DNS_FAILURE) from exc
        except (socket.timeout, TimeoutError) as exc:
            raise _Failure(CONNECT_TIMEOUT) from exc
        except ssl.SSLError as exc:
            raise _Failure(TLS_FAILURE) from exc
        except OSError as exc:
            raise _Failure(CONNECT_ERROR) from exc
        target = url.path + (f"?{url.query}" if url.query else "")
        try:
            conn.request("GET", target, headers={
                "User-Agent": user_agent,
                "Accept": "*/*",
                "Accept-Encoding": "identity",
                "Connection": "close",
            })
            resp = conn.getresponse()
            chunks = []
            remaining = max_bytes + 1
            while remaining > 0:
                chunk = resp.read(min(65536, remaining))
                if not chunk:
                    break
                chunks.append(chunk)
                remaining -= len(chunk)
            body = b"".join(chunks)
        except (socket.timeout, TimeoutError) as exc:
            raise _Failure(READ_TIMEOUT) from exc
        except ssl.SSLError as exc:
            raise _Failure(TLS_FAILURE) from exc
        except (http.client.HTTPException, OSError) as exc:
            raise _Failure(PROTOCOL_ERROR) from exc
        truncated = len(body) > max_bytes
        return _Response(resp.status, resp.headers, body[:max_bytes], truncated)
    finally:
        conn.close()


class RobotsCache:
    """Per-host robots.txt rules, cached in memory for ``ttl`` seconds."""

    def __init__(self, user_agent: str, limits: FetchLimits, resolver: Optional[Resolver] = None,
                 ttl: float = 3600.0, clock: Callable[[], float] = time.monotonic):
        self.user_agent = user_agent
        self.limits = limits
        self.resolver = resolver
        self.ttl = ttl
        self.clock = clock
        self._cache: Dict[str, Tuple[float, RobotFileParser]] = {}
        self._locks: Dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _origin(self, url: CanonicalUrl) -> str:
        port = f":{url.port}" if url.port else ""
        return f"{url.scheme}://{url.host}{port}"

    def rules(self, url: CanonicalUrl) -> RobotFileParser:
        origin = self._origin(url)
        with self._guard:
            lock = self._locks.setdefault(origin, threading.Lock())
        with lock:
            hit = self._cache.get(origin)
            if hit and hit[0] > self.clock():
                return hit[1]
            parser = RobotFileParser()
            robots_url = canonicalize(origin + "/robots.txt")
            try:
                resp = _request(robots_url, self.limits, self.user_agent, self.resolver, 512 * 1024)
                if resp.status in (401, 403):
                    parser.disallow_all = True
                elif 200 <= resp.status < 300:
                    parser.parse(resp.body.decode("utf-8", "replace").splitlines())
                else:
                    parser.allow_all = True
            except _Failure:
                parser.allow_all = True
            self._cache[origin] = (self.clock() + self.ttl, parser)
            return parser

    def allowed(self, url: CanonicalUrl) -> bool:
        return self.rules(url).can_fetch(self.user_agent, str(url))


def fetch(url, limits: FetchLimits = FetchLimits(), user_agent: str = DEFAULT_USER_AGENT,
          resolver: Optional[Resolver] = None, robots: Optional[RobotsCache] = None) -> FetchOutcome:
    """GET ``url`` following up to ``limits.max_redirects`` redirects."""
    started = time.monotonic()
    try:
        url = canonicalize(url)
    except MalformedUrl:
        bad = CanonicalUrl("http", "invalid", None, "/")
        return FetchOutcome(bad, bad, error=UNSUPPORTED_SCHEME)
    outcome = FetchOutcome(requested=url, final=url)
    current = url
    try:
        while True:
            if robots is not None and not robots.allowed(current):
                raise _Failure(ROBOTS_DISALLOWED)
            resp = _request(current, limits, user_agent, resolver, limits.max_body_bytes)
            outcome.http_status = resp.status
            location = resp.headers.get("Location")
            if resp.status in REDIRECT_CODES and location:
                if outcome.redirects >= limits.max_redirects:
                    raise _Failure(TOO_MANY_REDIRECTS)
                try:
                    current = canonicalize(location, base=current)
                except MalformedUrl as exc:
                    raise _Failure(BAD_REDIRECT) from exc
                outcome.redirects += 1
                outcome.final = current
                continue
            outcome.content_type = resp.headers.get("Content-Type")
            outcome.body = resp.body
            outcome.truncated = resp.truncated
            break
    except _Failure as failure:
        outcome.error = failure.kind
        outcome.body = b""
        outcome.truncated = False
        outcome.content_type = None
    outcome.elapsed = time.monotonic() - started
    return outcome


@dataclass
class PolitenessPolicy:
    min_interval: float = 1.0
    max_concurrent: int = 2

    def __post_init__(self):
        if self.min_interval < 0 or self.max_concurrent < 1:
            raise ValueError(f"invalid politeness policy {self}")


@dataclass
class _DomainState:
    in_flight: int = 0
    next_start: float = 0.0


class PolitenessGate:
    """Thread-safe per-domain admission control for one crawler instance.

    A permit is granted when the domain has fewer than ``max_concurrent``
    fetches in flight and at least ``min_interval`` seconds have passed since
    the previous permit for that domain was granted.
    """

    def __init__(self, policy: PolitenessPolicy = PolitenessPolicy(),
                 clock: Callable[[], float] = time.monotonic):
        self.policy = policy
        self.clock = clock
        self._cond = threading.Condition()
        self._domains: Dict[str, _DomainState] = {}

    @contextmanager
    def permit(self, domain) -> Iterator[float]:
        key = str(domain)
        granted = self.acquire(key)
        try:
            yield granted
        finally:
            self.release(key)

    def acquire(self, domain: str) -> float:
        with self._cond:
            state = self._domains.setdefault(domain, _DomainState())
            while True:
                now = self.clock()
                if state.in_flight < self.policy.max_concurrent and now >= state.next_start:
                    state.in_flight += 1
                    state.next_start = now + self.policy.min_interval
                    return now
                if state.in_flight < self.policy.max_concurrent:
                    self._cond.wait(state.next_start - now)
                else:
                    self._cond.wait()

    def release(self, domain: str) -> None:
        with self._cond:
            state = self._domains[domain]
            state.in_flight -= 1
            self._cond.notify_all()


def politeness_gate(domain, policy: PolitenessPolicy, gate: Optional[PolitenessGate] = None):
    """Context manager granting one fetch slot for ``domain``."""
    gate = gate or PolitenessGate(policy)
    return gate.permit(domain)


@dataclass
class Fetcher:
    """Bundles limits, routing, robots handling and politeness for a runtime."""

    limits: FetchLimits = field(default_factory=FetchLimits)
    user_agent: str = DEFAULT_USER_AGENT
    resolver: Optional[Resolver] = None
    honor_robots: bool = True
    politeness: PolitenessPolicy = field(default_factory=PolitenessPolicy)

    def __post_init__(self):
        self.gate = PolitenessGate(self.politeness)
        self.robots = RobotsCache(self.user_agent, self.limits, self.resolver) if self.honor_robots else None

    def __call__(self, url: CanonicalUrl) -> FetchOutcome:
        url = canonicalize(url)
        with self.gate.permit(domain_of(url)):
            return fetch(url, self.limits, self.user_agent, self.resolver, self.robots)
