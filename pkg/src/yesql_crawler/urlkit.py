"""URL and text canonicalization.

Every URL entering the frontier goes through :func:`canonicalize`, so that
two spellings of the same resource share one row. Keyword scoring runs on
:func:`normalize_text` output only.
"""
from __future__ import annotations

import ipaddress
import re
import string
import unicodedata
from dataclasses import dataclass
from typing import Optional, Union
from urllib.parse import urljoin, urlsplit

from .errors import MalformedUrl, UnsupportedScheme

DEFAULT_PORTS = {"http": 80, "https": 443}

_UNRESERVED = frozenset(string.ascii_letters + string.digits + "-._~")
_SUB_DELIMS = "!$&'()*+,;="
_PATH_SAFE = frozenset(_UNRESERVED | set(_SUB_DELIMS) | set(":@/"))
_QUERY_SAFE = frozenset(_PATH_SAFE | set("?"))
_HEX = frozenset(string.hexdigits)
_HOST_RE = re.compile(r"^[a-z0-9_](?:[a-z0-9_-]*[a-z0-9_])?(?:\.[a-z0-9_](?:[a-z0-9_-]*[a-z0-9_])?)*$")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class CanonicalUrl:
    scheme: str
    host: str
    port: Optional[int]
    path: str
    query: str = ""

    def __str__(self) -> str:
        netloc = self.host
        if self.port is not None:
            netloc = f"{netloc}:{self.port}"
        url = f"{self.scheme}://{netloc}{self.path}"
        if self.query:
            url = f"{url}?{self.query}"
        return url

    @property
    def domain(self) -> "DomainName":
        return domain_of(self)


@dataclass(frozen=True)
class DomainName:
    registrable_domain: str
    tld: str

    def __str__(self) -> str:
        return self.registrable_domain


# only these are trimmed from the ends; other Unicode whitespace is data
_C0_AND_SPACE = "".join(map(chr, range(0x21)))


def _percent_normalize(component: str, safe: frozenset) -> str:
    out = []
    data = component.encode("utf-8", "surrogatepass")
    i = 0
    n = len(data)
    while i < n:
        ch = chr(data[i])
        if ch == "%" and i + 2 < n and chr(data[i + 1]) in _HEX and chr(data[i + 2]) in _HEX:
            decoded = chr(int(data[i + 1 : i + 3], 16))
            if decoded in _UNRESERVED:
                out.append(decoded)
            else:
                out.append("%" + data[i + 1 : i + 3].decode("ascii").upper())
            i += 3
            continue
        if data[i] < 0x80 and ch in safe:
            out.append(ch)
        else:
            out.append("%%%02X" % data[i])
        i += 1
    return "".join(out)


def remove_dot_segments(path: str) -> str:
    """RFC 3986 section 5.2.4 dot-segment removal."""
    inp = path
    out: list[str] = []
    while inp:
        if inp.startswith("../"):
            inp = inp[3:]
        elif inp.startswith("./"):
            inp = inp[2:]
        elif inp.startswith("/./"):
            inp = "/" + inp[3:]
        elif inp == "/.":
            inp = "/"
        elif inp.startswith("/../"):
            inp = "/" + inp[4:]
            if out:
                out.pop()
        elif inp == "/..":
            inp = "/"
            if out:
                out.pop()
        elif inp in (".", ".."):
            inp = ""
        else:
            start = 1 if inp.startswith("/") else 0
            cut = inp.find("/", start)
            if cut == -1:
                cut = len(inp)
            out.append(inp[:cut])
            inp = inp[cut:]
    return "".join(out)


def _canonical_host(raw_host: str) -> str:
    host = raw_host.strip(_C0_AND_SPACE)
    if not host:
        raise MalformedUrl("empty host")
    if host.startswith("[") and host.endswith("]"):
        try:
            addr = ipaddress.IPv6Address(host[1:-1])
        except ValueError as exc:
            raise MalformedUrl(f"bad IPv6 literal {host!r}") from exc
        return f"[{addr.compressed}]"
    host = host.rstrip(".")
    if not host:
        raise MalformedUrl("empty host")
    try:
        host = host.encode("idna").decode("ascii")
    except UnicodeError as exc:
        raise MalformedUrl(f"bad host {raw_host!r}") from exc
    host = host.lower()
    if not _HOST_RE.match(host):
        raise MalformedUrl(f"bad host {raw_host!r}")
    return host


def canonicalize(raw: Union[str, CanonicalUrl], base: Optional[Union[str, CanonicalUrl]] = None) -> CanonicalUrl:
    """Return the canonical form of ``raw``, resolved against ``base`` if relative.

    Raises MalformedUrl for unparseable input and UnsupportedScheme for
    anything other than http/https.
    """
    if isinstance(raw, CanonicalUrl):
        return raw
    if not isinstance(raw, str):
        raise MalformedUrl(f"not a string: {raw!r}")
    text = raw.strip(_C0_AND_SPACE)
    text = text.replace("\t", "").replace("\n", "").replace("\r", "")
    if not text:
        raise MalformedUrl("empty URL")

    try:
        parts = urlsplit(text)
    except ValueError as exc:
        raise MalformedUrl(str(exc)) from exc

    if parts.scheme:
        scheme = parts.scheme.lower()
        if scheme not in DEFAULT_PORTS:
            raise UnsupportedScheme(f"unsupported scheme {scheme!r} in {raw!r}")
    if not parts.scheme or not parts.netloc:
        if base is None:
            raise MalformedUrl(f"relative URL without base: {raw!r}")
        try:
            parts = urlsplit(urljoin(str(base), text))
        except ValueError as exc:
            raise MalformedUrl(str(exc)) from exc
        if parts.scheme.lower() not in DEFAULT_PORTS:
            raise UnsupportedScheme(f"unsupported scheme {parts.scheme!r}")

    scheme = parts.scheme.lower()
    netloc = parts.netloc.rpartition("@")[2]
    if not netloc:
        raise MalformedUrl(f"missing host in {raw!r}")

    if netloc.startswith("["):
        end = netloc.find("]")
        if end == -1:
            raise MalformedUrl(f"unterminated IPv6 literal in {raw!r}")
        host_part, port_part = netloc[: end + 1], netloc[end + 1 :]
        if port_part and not port_part.startswith(":"):
            raise MalformedUrl(f"garbage after IPv6 literal in {raw!r}")
        port_part = port_part[1:]
    else:
        host_part, _, port_part = netloc.partition(":")
    host = _canonical_host(host_part)

    port: Optional[int] = None
    if port_part:
        if not port_part.isdigit() or not port_part.isascii():
            raise MalformedUrl(f"bad port in {raw!r}")
        port = int(port_part)
        if port > 65535:
            raise MalformedUrl(f"port out of range in {raw!r}")
        if port == DEFAULT_PORTS[scheme]:
            port = None

    # decode %2E before dot-segment removal so the result is a fixed point
    path = remove_dot_segments(_percent_normalize(parts.path, _PATH_SAFE))
    if not path.startswith("/"):
        path = "/" + path
    query = _percent_normalize(parts.query, _QUERY_SAFE)
    return CanonicalUrl(scheme=scheme, host=host, port=port, path=path, query=query)


def url_top(url: Union[CanonicalUrl, str]) -> str:
    """Final dot-separated label of the host (``lemonde.fr`` -> ``fr``)."""
    host = url.host if isinstance(url, CanonicalUrl) else canonicalize(url).host
    return host.rsplit(".", 1)[-1]


def domain_of(url: Union[CanonicalUrl, str]) -> DomainName:
    """Last two host labels; no public-suffix awareness."""
    host = url.host if isinstance(url, CanonicalUrl) else canonicalize(url).host
    if host.startswith("["):
        return DomainName(host, host)
    labels = host.split(".")
    if len(labels) == 4 and all(label.isdigit() for label in labels):
        return DomainName(host, labels[-1])
    return DomainName(".".join(labels[-2:]), labels[-1])


def normalize_text(s: Union[str, bytes]) -> str:
    """Lowercase, strip diacritics, collapse whitespace runs to single spaces."""
    if isinstance(s, (bytes, bytearray)):
        s = bytes(s).decode("utf-8", "replace")
    s = unicodedata.normalize("NFKD", s).lower()
    s = unicodedata.normalize("NFKD", s)
    s = "".join(ch for ch in s if not unicodedata.combining(ch))
    return _WS_RE.sub(" ", s).strip()
