"""A deterministic synthetic web for desk-scale crawl experiments.

:func:`generate` turns a :class:`MockWebSpec` into a :class:`SiteBundle`:
rendered pages, the link graph, and a ground-truth manifest (seed pages,
BFS depths, keyword pages). :func:`serve` puts a bundle behind a local HTTP
server that dispatches on the ``Host`` header, so many domains share one
loopback port.

Randomness comes from ``random.Random`` (MT19937) seeded with ``spec.seed``,
and only its ``random()`` floats are consumed, so bundles are stable across
Python releases.

On-disk formats written by :func:`write_bundle`:

``seeds.txt``
    one seed URL per line.
``edges.tsv``
    ``source<TAB>target`` per line, unique edges, generation order.
``manifest.tsv``
    ``#``-prefixed header lines (``# prng MT19937``, ``# seed N``, ...), then
    ``url<TAB>depth<TAB>status<TAB>keywords`` per page; depth is ``-`` for
    pages unreachable from the seeds, keywords is comma-separated or ``-``.
"""
from __future__ import annotations

import configparser
import errno
import html
import random
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .errors import AddressInUse, InvalidSpec
from .urlkit import canonicalize

PRNG_NAME = "MT19937"
REDIRECT_PREFIX = "/go/"

FILLER = (
    "actualite politique campagne debat vote electeurs programme reforme "
    "economie emploi sante education europe region ville citoyens "
    "journal article analyse tribune opinion blog commentaire video "
    "interview meeting discours sondage resultat semaine annonce projet"
).split()


@dataclass(frozen=True)
class KeywordRegion:
    keyword: str
    fraction: float
    tld: str


@dataclass
class MockWebSpec:
    seed: int = 1
    page_count: int = 100
    domain_count: int = 10
    seed_pages: int = 1
    out_degree_min: int = 2
    out_degree_max: int = 6
    locality: float = 0.5
    tlds: Tuple[str, ...] = ("fr", "com", "org", "net")
    keyword_regions: Tuple[KeywordRegion, ...] = ()
    redirect_chains: Tuple[int, ...] = ()
    error_pages: Dict[int, float] = field(default_factory=dict)
    relative_link_fraction: float = 0.3
    latency: float = 0.0

    def validate(self) -> None:
        if self.page_count < 1:
            raise InvalidSpec("page_count must be >= 1")
        if not 1 <= self.domain_count <= self.page_count:
            raise InvalidSpec("domain_count must be in [1, page_count]")
        if not 1 <= self.seed_pages <= self.page_count:
            raise InvalidSpec("seed_pages must be in [1, page_count]")
        if not 0 <= self.out_degree_min <= self.out_degree_max:
            raise InvalidSpec("need 0 <= out_degree_min <= out_degree_max")
        for name in ("locality", "relative_link_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidSpec(f"{name} must be in [0, 1]")
        if not self.tlds:
            raise InvalidSpec("at least one tld required")
        total = 0.0
        for region in self.keyword_regions:
            if not 0.0 <= region.fraction <= 1.0:
                raise InvalidSpec(f"keyword fraction out of range: {region}")
            if region.tld not in self.tlds:
                raise InvalidSpec(f"no domains under tld {region.tld!r}")
            total += region.fraction
        if total > 1.0 + 1e-9:
            raise InvalidSpec("keyword fractions sum above 1")
        err_total = 0.0
        for status, frac in self.error_pages.items():
            if not 400 <= int(status) <= 599 or not 0.0 <= frac <= 1.0:
                raise InvalidSpec(f"bad error page entry {status}: {frac}")
            err_total += frac
        if err_total > 1.0 + 1e-9:
            raise InvalidSpec("error fractions sum above 1")
        if any(length < 1 for length in self.redirect_chains):
            raise InvalidSpec("redirect chain lengths must be >= 1")
        if self.latency < 0:
            raise InvalidSpec("latency must be >= 0")


@dataclass
class Page:
    url: str
    status: int = 200
    body: bytes = b""
    content_type: str = "text/html; charset=utf-8"
    location: Optional[str] = None
    text: str = ""
    keywords: Tuple[str, ...] = ()


@dataclass
class SiteBundle:
    spec: Optional[MockWebSpec]
    pages: Dict[str, Page]
    edges: List[Tuple[str, str]]
    seeds: List[str]
    depths: Dict[str, int]
    keyword_pages: Dict[str, List[str]]
    nodes: List[str]

    @property
    def reachable(self) -> set:
        return set(self.depths)

    def route(self, host: str, target: str) -> Optional[Page]:
        return self.pages.get(f"http://{host}{target}")

    def add_page(self, page: Page) -> None:
        """Serve an extra resource that is not part of the link graph."""
        self.pages[str(canonicalize(page.url))] = page


class _Rng:
    def __init__(self, seed: int):
        self._r = random.Random(seed)

    def random(self) -> float:
        return self._r.random()

    def below(self, n: int) -> int:
        return min(int(self._r.random() * n), n - 1)

    def between(self, lo: int, hi: int) -> int:
        return lo + self.below(hi - lo + 1)

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items: Sequence):
        return items[self.below(len(items))]

    def words(self, n: int) -> List[str]:
        return [self.choice(FILLER) for _ in range(n)]


def bfs_depths(edges: Iterable[Tuple[str, str]], seeds: Iterable[str]) -> Dict[str, int]:
    adj: Dict[str, List[str]] = {}
    for s, t in edges:
        adj.setdefault(s, []).append(t)
    depths: Dict[str, int] = {}
    queue = deque()
    for s in seeds:
        if s not in depths:
            depths[s] = 0
            queue.append(s)
    while queue:
        node = queue.popleft()
        for nxt in adj.get(node, ()):
            if nxt not in depths:
                depths[nxt] = depths[node] + 1
                queue.append(nxt)
    return depths


def _render(title: str, blocks: List[List[Tuple[str, Optional[str]]]]) -> Tuple[bytes, str]:
    """Render paragraphs of (text, href-or-None) runs; return HTML bytes and its plain text."""
    out = [
        "<!DOCTYPE html>",
        '<html><head><meta charset="utf-8">',
        f"<title>{html.escape(title)}</title>",
        "</head><body>",
        f"<h1>{html.escape(title)}</h1>",
    ]
    words = [title, title]
    for block in blocks:
        parts = []
        for text, href in block:
            if href is None:
                parts.append(html.escape(text))
            else:
                parts.append(f'<a href="{html.escape(href, quote=True)}">{html.escape(text)}</a>')
            words.append(text)
        out.append("<p>" + " ".join(parts) + "</p>")
    out.append("</body></html>")
    return ("\n".join(out) + "\n").encode("utf-8"), " ".join(" ".join(words).split())


def _href(source: str, target: str, relative: bool) -> str:
    if relative:
        s, t = canonicalize(source), canonicalize(target)
        if s.host == t.host and s.scheme == t.scheme and s.port == t.port:
            return t.path + (f"?{t.query}" if t.query else "")
    return target


def _error_body(status: int) -> bytes:
    return f"<html><body><h1>{status}</h1></body></html>\n".encode("ascii")


def generate(spec: MockWebSpec) -> SiteBundle:
    """Deterministically build pages, graph and manifest from ``spec``."""
    spec.validate()
    rng = _Rng(spec.seed)
    n = spec.page_count

    hosts = [f"www.site{i}.{spec.tlds[i % len(spec.tlds)]}" for i in range(spec.domain_count)]
    by_tld: Dict[str, List[int]] = {}
    for i, h in enumerate(hosts):
        by_tld.setdefault(h.rsplit(".", 1)[1], []).append(i)

    order = list(range(n))
    rng.shuffle(order)
    page_keyword: Dict[int, KeywordRegion] = {}
    cursor = 0
    for region in spec.keyword_regions:
        count = round(region.fraction * n)
        for j in order[cursor:cursor + count]:
            page_keyword[j] = region
        cursor += count

    page_host: List[int] = []
    for j in range(n):
        if j in page_keyword:
            page_host.append(rng.choice(by_tld[page_keyword[j].tld]))
        elif j < spec.domain_count:
            page_host.append(j)  # every domain hosts at least one page
        else:
            page_host.append(rng.below(spec.domain_count))

    urls = []
    for j in range(n):
        region = page_keyword.get(j)
        slug = f"{region.keyword}-{j}.html" if region else f"p{j}.html"
        urls.append(f"http://{hosts[page_host[j]]}/{slug}")
    host_pages: Dict[int, List[int]] = {}
    for j in range(n):
        host_pages.setdefault(page_host[j], []).append(j)

    seed_idx = list(range(spec.seed_pages))

    error_status: Dict[int, int] = {}
    candidates = [j for j in range(spec.seed_pages, n)]
    rng.shuffle(candidates)
    cursor = 0
    for status in sorted(spec.error_pages):
        count = round(spec.error_pages[status] * n)
        for j in candidates[cursor:cursor + count]:
            error_status[j] = int(status)
        cursor += count

    out_links: Dict[int, List[int]] = {}
    for j in range(n):
        if j in error_status:
            out_links[j] = []
            continue
        targets = []
        for _ in range(rng.between(spec.out_degree_min, spec.out_degree_max)):
            if rng.random() < spec.locality and len(host_pages[page_host[j]]) > 1:
                targets.append(rng.choice(host_pages[page_host[j]]))
            else:
                targets.append(rng.below(n))
        out_links[j] = targets

    # redirect heads: extra URLs that bounce through a chain to a real page
    redirects: List[Tuple[str, List[str], int, int]] = []  # head, chain, final idx, linking page
    for c, length in enumerate(spec.redirect_chains):
        final = rng.below(n)
        host = hosts[page_host[final]]
        chain = [f"http://{host}{REDIRECT_PREFIX}{c}/{h}" for h in range(length)]
        linker = rng.below(n)
        while linker in error_status:
            linker = (linker + 1) % n
        redirects.append((chain[0], chain, final, linker))

    pages: Dict[str, Page] = {}
    edges: List[Tuple[str, str]] = []
    seen_edges = set()

    def add_edge(s: str, t: str):
        if (s, t) not in seen_edges:
            seen_edges.add((s, t))
            edges.append((s, t))

    url_region = {urls[j]: region for j, region in page_keyword.items()}
    extra_links: Dict[int, List[str]] = {}
    for head, chain, final, linker in redirects:
        extra_links.setdefault(linker, []).append(head)

    for j in range(n):
        url = urls[j]
        region = page_keyword.get(j)
        if j in error_status:
            pages[url] = Page(url, error_status[j], _error_body(error_status[j]),
                              text=str(error_status[j]), keywords=(region.keyword,) if region else ())
            continue
        title = f"{region.keyword} page {j}" if region else f"page {j}"
        blocks = []
        link_urls = [urls[t] for t in out_links[j]] + extra_links.get(j, [])
        for target_url in link_urls:
            target_region = url_region.get(target_url)
            anchor = rng.words(rng.between(1, 3))
            if target_region is not None:
                anchor.insert(rng.below(len(anchor) + 1), target_region.keyword)
            relative = rng.random() < spec.relative_link_fraction
            blocks.append([
                (" ".join(rng.words(rng.between(2, 6))), None),
                (" ".join(anchor), _href(url, target_url, relative)),
                (" ".join(rng.words(rng.between(2, 6))), None),
            ])
            add_edge(url, target_url)
        if not blocks:
            blocks.append([(" ".join(rng.words(8)), None)])
        body, text = _render(title, blocks)
        pages[url] = Page(url, 200, body, text=text, keywords=(region.keyword,) if region else ())

    nodes = list(urls)
    for head, chain, final, linker in redirects:
        for hop, nxt in zip(chain, chain[1:] + [urls[final]]):
            pages[hop] = Page(hop, 302, b"", location=nxt, text="")
        nodes.append(head)
        # the crawler records links found after the redirect under the head URL
        for s, t in list(edges):
            if s == urls[final]:
                add_edge(head, t)

    seeds = [urls[j] for j in seed_idx]
    depths = bfs_depths(edges, seeds)
    keyword_pages: Dict[str, List[str]] = {}
    for j, region in sorted(page_keyword.items()):
        keyword_pages.setdefault(region.keyword, []).append(urls[j])
    return SiteBundle(spec, pages, edges, seeds, depths, keyword_pages, nodes)


def bundle_from_graph(edges: Sequence[Tuple[str, str]], seeds: Sequence[str],
                      contexts: Optional[Dict[Tuple[str, str], str]] = None) -> SiteBundle:
    """Build a bundle with an explicit topology; every node is a 200 HTML page."""
    contexts = contexts or {}
    nodes: List[str] = []
    out: Dict[str, List[str]] = {}
    for s, t in list(edges):
        for u in (s, t):
            if u not in out:
                out[u] = []
                nodes.append(u)
        out[s].append(t)
    for s in seeds:
        if s not in out:
            out[s] = []
            nodes.append(s)
    pages = {}
    for u in nodes:
        blocks = [[(contexts.get((u, t), "link"), t)] for t in out[u]] or [[("leaf", None)]]
        body, text = _render(u, blocks)
        pages[str(canonicalize(u))] = Page(u, 200, body, text=text)
    return SiteBundle(None, pages, list(edges), list(seeds), bfs_depths(edges, seeds), {}, nodes)


# -- spec files -------------------------------------------------------------


def parse_spec(text: str) -> MockWebSpec:
    """Read an INI ``[mockweb]`` section.

    ``keyword_regions = keyword1:0.10:fr, keyword2:0.05:fr``,
    ``redirect_chains = 1, 2, 3``, ``error_pages = 404:0.02, 500:0.01``,
    ``tlds = fr, com``; the rest are plain scalars named like the fields.
    """
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InvalidSpec(str(exc)) from exc
    if not cp.has_section("mockweb"):
        raise InvalidSpec("missing [mockweb] section")
    sec = cp["mockweb"]
    spec = MockWebSpec()
    known = set(spec.__dataclass_fields__)
    try:
        for key, value in sec.items():
            if key not in known:
                raise InvalidSpec(f"unknown key {key!r}")
            if key in ("latency", "locality", "relative_link_fraction"):
                setattr(spec, key, float(value))
            elif key == "tlds":
                spec.tlds = tuple(v.strip().lower() for v in value.split(",") if v.strip())
            elif key == "keyword_regions":
                regions = []
                for item in filter(None, (v.strip() for v in value.split(","))):
                    kw, frac, tld = item.split(":")
                    regions.append(KeywordRegion(kw.strip(), float(frac), tld.strip().lower()))
                spec.keyword_regions = tuple(regions)
            elif key == "redirect_chains":
                spec.redirect_chains = tuple(int(v) for v in value.split(",") if v.strip())
            elif key == "error_pages":
                spec.error_pages = {}
                for item in filter(None, (v.strip() for v in value.split(","))):
                    status, frac = item.split(":")
                    spec.error_pages[int(status)] = float(frac)
            else:
                setattr(spec, key, int(value))
    except ValueError as exc:
        if isinstance(exc, InvalidSpec):
            raise
        raise InvalidSpec(str(exc)) from exc
    spec.validate()
    return spec


def load_spec(path: Union[str, Path]) -> MockWebSpec:
    return parse_spec(Path(path).read_text(encoding="utf-8"))


def write_bundle(bundle: SiteBundle, directory: Union[str, Path]) -> Path:
    """Write seeds, edge list and manifest; return the manifest path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "seeds.txt").write_text("".join(f"{s}\n" for s in bundle.seeds), encoding="utf-8")
    (d / "edges.tsv").write_text("".join(f"{s}\t{t}\n" for s, t in bundle.edges), encoding="utf-8")
    lines = [f"# prng {PRNG_NAME}"]
    if bundle.spec is not None:
        lines.append(f"# seed {bundle.spec.seed}")
        lines.append(f"# page_count {bundle.spec.page_count}")
    lines.append(f"# reachable {len(bundle.depths)}")
    lines.append("# url\tdepth\tstatus\tkeywords")
    for url in bundle.nodes:
        page = bundle.pages.get(url)
        depth = bundle.depths.get(url)
        kws = ",".join(page.keywords) if page and page.keywords else "-"
        lines.append(f"{url}\t{'-' if depth is None else depth}\t{page.status if page else 0}\t{kws}")
    path = d / "manifest.tsv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(path: Union[str, Path]) -> Dict[str, int]:
    depths = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        url, depth, *_ = line.split("\t")
        if depth != "-":
            depths[url] = int(depth)
    return depths


def read_edges(path: Union[str, Path]) -> List[Tuple[str, str]]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line and not line.startswith("#"):
            s, t = line.split("\t")[:2]
            out.append((s, t))
    return out


# -- serving ----------------------------------------------------------------


@dataclass(frozen=True)
class AccessRecord:
    start: float
    end: float
    host: str
    path: str
    status: int


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.0"
    server: "MockWebServer"

    def log_message(self, format, *args):
        pass

    def do_GET(self):
        srv = self.server
        start = srv.enter()
        host = (self.headers.get("Host") or "").split(":")[0].lower()
        status = 500
        try:
            if srv.latency:
                time.sleep(srv.latency)
            if self.path == "/robots.txt":
                page = srv.bundle.route(host, self.path) or Page(
                    self.path, 200, b"User-agent: *\nDisallow: /private/\n", "text/plain")
            else:
                page = srv.bundle.route(host, self.path)
                if page is None:
                    page = Page(self.path, 404, _error_body(404))
            status = page.status
            self.send_response(page.status)
            if page.location:
                self.send_header("Location", page.location)
            self.send_header("Content-Type", page.content_type)
            self.send_header("Content-Length", str(len(page.body)))
            self.end_headers()
            self.wfile.write(page.body)
        finally:
            srv.leave(start, host, self.path, status)


class MockWebServer(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 256
    allow_reuse_address = False

    def __init__(self, bundle: SiteBundle, address: Tuple[str, int], latency: float = 0.0):
        self.bundle = bundle
        self.latency = latency
        self._lock = threading.Lock()
        self.in_flight = 0
        self.gauge_max = 0
        self.access_log: List[AccessRecord] = []
        super().__init__(address, _Handler)

    def enter(self) -> float:
        with self._lock:
            self.in_flight += 1
            self.gauge_max = max(self.gauge_max, self.in_flight)
        return time.monotonic()

    def leave(self, start: float, host: str, path: str, status: int) -> None:
        end = time.monotonic()
        with self._lock:
            self.in_flight -= 1
            self.access_log.append(AccessRecord(start, end, host, path, status))

    def reset_stats(self) -> None:
        with self._lock:
            self.gauge_max = self.in_flight
            self.access_log = []


class MockWebHandle:
    """A running server; use as a context manager or call :meth:`close`."""

    def __init__(self, server: MockWebServer):
        self.server = server
        self.thread = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
        self.thread.start()

    @property
    def address(self) -> Tuple[str, int]:
        return self.server.server_address[:2]

    @property
    def port(self) -> int:
        return self.server.server_address[1]

    @property
    def access_log(self) -> List[AccessRecord]:
        return self.server.access_log

    @property
    def gauge_max(self) -> int:
        return self.server.gauge_max

    def resolver(self):
        addr = self.address
        return lambda host, port: addr

    def close(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(bundle: SiteBundle, bind: Tuple[str, int] = ("127.0.0.1", 0), latency: Optional[float] = None) -> MockWebHandle:
    if latency is None:
        latency = bundle.spec.latency if bundle.spec is not None else 0.0
    try:
        server = MockWebServer(bundle, bind, latency)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise AddressInUse(f"{bind[0]}:{bind[1]} already in use") from exc
        raise
    return MockWebHandle(server)


class InProcessFetcher:
    """Fetch straight from a bundle without sockets; same redirect rules as the real fetcher."""

    def __init__(self, bundle: SiteBundle, max_redirects: int = 5, delay: float = 0.0):
        self.bundle = bundle
        self.max_redirects = max_redirects
        self.delay = delay

    def __call__(self, url):
        from .fetcher import TOO_MANY_REDIRECTS, FetchOutcome

        requested = canonicalize(url)
        outcome = FetchOutcome(requested, requested)
        current = requested
        if self.delay:
            time.sleep(self.delay)
        while True:
            page = self.bundle.pages.get(str(current))
            if page is None:
                outcome.http_status, outcome.body = 404, _error_body(404)
                outcome.content_type = "text/html; charset=utf-8"
                return outcome
            if page.location:
                if outcome.redirects >= self.max_redirects:
                    outcome.http_status, outcome.error = page.status, TOO_MANY_REDIRECTS
                    return outcome
                current = canonicalize(page.location, base=current)
                outcome.redirects += 1
                outcome.final = current
                continue
            outcome.http_status = page.status
            outcome.content_type = page.content_type
            outcome.body = page.body
            return outcome
