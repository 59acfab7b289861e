"""Offline crawl analysis: exact depths and tweeted-URL coverage.

Depth is the minimum number of links from any seed (seeds are depth 0).
Coverage of a target set at depth ``d`` is the share of targets crawled at
depth ``<= d``; counts and percentages are therefore cumulative and
non-decreasing in depth.

Input file formats (all UTF-8, one record per line, ``#`` lines ignored):

tweets
    ``timestamp<TAB>author<TAB>text``; URLs are found in ``text``.
shortener mapping
    ``short_url<TAB>effective_url``; the short side may omit its scheme.
targets
    ``url<TAB>tweet_count``.
crawled
    ``url<TAB>depth``.
"""
from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import EmptyTargets, MalformedUrl
from .urlkit import canonicalize, domain_of

_URL_RE = re.compile(r"https?://[^\s<>\"']+", re.I)
_TRAILING_PUNCT = ".,;:!?)]}…"


def exact_depths(edges: Iterable[Tuple[str, str]], seeds: Iterable[str]) -> Dict[str, int]:
    """Multi-source BFS; nodes unreachable from the seeds are left out."""
    adjacency: Dict[str, List[str]] = {}
    for source, target in edges:
        adjacency.setdefault(source, []).append(target)
    depth: Dict[str, int] = {s: 0 for s in seeds}
    frontier = deque(depth)
    while frontier:
        node = frontier.popleft()
        d = depth[node] + 1
        for target in adjacency.get(node, ()):
            if target not in depth:
                depth[target] = d
                frontier.append(target)
    return depth


# -- targets ----------------------------------------------------------------


@dataclass
class TweetUrlSet:
    entries: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for url, count in self.entries.items():
            if count < 1:
                raise ValueError(f"tweet_count must be positive for {url}")

    def __len__(self):
        return len(self.entries)

    def ranked(self) -> List[Tuple[str, int]]:
        """Most tweeted first; equal counts in URL order."""
        return sorted(self.entries.items(), key=lambda kv: (-kv[1], kv[0]))

    def top(self, k: int) -> List[str]:
        return [url for url, _ in self.ranked()[:k]]


@dataclass
class IngestReport:
    targets: TweetUrlSet
    tweets: int = 0
    tweets_with_url: int = 0
    unique_short_urls: int = 0
    unresolved: int = 0
    parse_errors: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def url_bearing_rate(self) -> float:
        return 100.0 * self.tweets_with_url / self.tweets if self.tweets else 0.0


def _clean(url: str) -> str:
    return url.rstrip(_TRAILING_PUNCT)


def _short_key(raw: str) -> str:
    """Canonical lookup key; shortener links are often posted without a scheme."""
    if "://" not in raw:
        raw = "http://" + raw
    return str(canonicalize(raw))


def read_mapping(path: Union[str, Path]) -> Dict[str, str]:
    mapping = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected short<TAB>effective")
        try:
            mapping[_short_key(parts[0].strip())] = parts[1].strip()
        except MalformedUrl:
            continue
    return mapping


def ingest_tweets(tweet_lines: Iterable[str], mapping: Mapping[str, str]) -> IngestReport:
    """Count tweets per effective URL.

    Each URL in a tweet is looked up (canonicalized) in ``mapping``; hits are
    replaced by their effective URL, misses are counted as unresolved and
    dropped. A tweet counts once per distinct effective URL it carries.
    """
    counts: Dict[str, int] = {}
    report = IngestReport(TweetUrlSet())
    shorts = set()
    unresolved = set()
    for lineno, line in enumerate(tweet_lines, 1):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t", 2)
        if len(parts) != 3:
            report.parse_errors.append((lineno, "expected timestamp<TAB>author<TAB>text"))
            continue
        report.tweets += 1
        found = [_clean(u) for u in _URL_RE.findall(parts[2])]
        # bare tokens count only when they name a known short link
        for token in parts[2].split():
            token = _clean(token)
            if "://" in token or "." not in token:
                continue
            try:
                if _short_key(token) in mapping:
                    found.append(token)
            except MalformedUrl:
                pass
        if not found:
            continue
        report.tweets_with_url += 1
        effective = set()
        for raw in found:
            try:
                short = _short_key(raw)
            except MalformedUrl:
                report.parse_errors.append((lineno, f"bad URL {raw!r}"))
                continue
            shorts.add(short)
            target = mapping.get(short)
            if target is None:
                unresolved.add(short)
                continue
            try:
                effective.add(str(canonicalize(target)))
            except MalformedUrl:
                unresolved.add(short)
        for url in effective:
            counts[url] = counts.get(url, 0) + 1
    report.targets = TweetUrlSet(counts)
    report.unique_short_urls = len(shorts)
    report.unresolved = len(unresolved)
    return report


def ingest_tweet_files(tweets: Union[str, Path], mapping: Union[str, Path]) -> IngestReport:
    with open(tweets, encoding="utf-8", errors="replace") as fh:
        return ingest_tweets(fh, read_mapping(mapping))


def read_targets(path: Union[str, Path]) -> TweetUrlSet:
    entries: Dict[str, int] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        url, count = line.split("\t")[:2]
        key = str(canonicalize(url.strip()))
        entries[key] = entries.get(key, 0) + int(count)
    return TweetUrlSet(entries)


def read_crawled(path: Union[str, Path]) -> Dict[str, int]:
    crawled: Dict[str, int] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        url, depth = line.split("\t")[:2]
        key = str(canonicalize(url.strip()))
        d = int(depth)
        crawled[key] = min(d, crawled.get(key, d))
    return crawled


# -- coverage -----------------------------------------------------------------


@dataclass(frozen=True)
class CoverageRow:
    depth: int
    cumulative_crawled_count: int
    pct_covered_all: float
    pct_covered_topk: float


@dataclass
class CoverageReport:
    rows: List[CoverageRow]
    k: int
    unit: str
    targets: int = 0
    topk_targets: int = 0


def _domain(url: str) -> str:
    return domain_of(url).registrable_domain


def _pct(hit: int, total: int) -> float:
    return 100.0 * hit / total if total else 0.0


def coverage_by_depth(crawled: Mapping[str, int], targets: TweetUrlSet, k: int,
                      unit: str = "url") -> CoverageReport:
    """Cumulative coverage of ``targets`` (and of their top ``k``) per crawl depth.

    With ``unit="domain"`` crawled URLs collapse to their domain at the
    smallest depth any of its URLs reached, and the target sets (all, top-k
    URLs) collapse to their distinct domains.
    """
    if not targets.entries:
        raise EmptyTargets("no target URLs")
    if unit not in ("url", "domain"):
        raise ValueError(f"unit must be 'url' or 'domain', not {unit!r}")
    if not 0 <= k <= len(targets):
        raise ValueError(f"k={k} outside [0, {len(targets)}]")

    crawled_keys = {str(canonicalize(u)): d for u, d in crawled.items()}
    all_targets = [str(canonicalize(u)) for u in targets.entries]
    top = [str(canonicalize(u)) for u in targets.top(k)]
    if unit == "domain":
        by_domain: Dict[str, int] = {}
        for url, d in crawled_keys.items():
            dom = _domain(url)
            by_domain[dom] = min(d, by_domain.get(dom, d))
        crawled_keys = by_domain
        all_set = {_domain(u) for u in all_targets}
        top_set = {_domain(u) for u in top}
    else:
        all_set, top_set = set(all_targets), set(top)

    rows = []
    for depth in sorted(set(crawled_keys.values())):
        within = {u for u, d in crawled_keys.items() if d <= depth}
        rows.append(CoverageRow(
            depth,
            len(within),
            _pct(len(all_set & within), len(all_set)),
            _pct(len(top_set & within), len(top_set)),
        ))
    return CoverageReport(rows, k, unit, len(all_set), len(top_set))


@dataclass(frozen=True)
class FrequencyBucket:
    low: int
    high: Optional[int]  # exclusive; None = unbounded
    targets: int
    covered: int

    @property
    def pct_covered(self) -> Optional[float]:
        return _pct(self.covered, self.targets) if self.targets else None

    @property
    def label(self) -> str:
        return f"[{self.low},{'inf' if self.high is None else self.high})"


def coverage_by_frequency(crawled: Iterable[str], targets: TweetUrlSet,
                          buckets: Sequence[int]) -> List[FrequencyBucket]:
    """Per tweet-count bucket, the share of its targets that were crawled.

    ``buckets`` are strictly increasing lower edges: ``[1, 5]`` means
    ``[1, 5)`` and ``[5, inf)``. Targets below the first edge are ignored.
    Empty buckets report ``pct_covered`` of ``None``, not zero.
    """
    if not targets.entries:
        raise EmptyTargets("no target URLs")
    edges = list(buckets)
    if not edges or any(b >= a for a, b in zip(edges[1:], edges)):
        raise ValueError("bucket edges must be non-empty and strictly increasing")
    crawled_set = {str(canonicalize(u)) for u in crawled}
    out = []
    for i, low in enumerate(edges):
        high = edges[i + 1] if i + 1 < len(edges) else None
        members = [str(canonicalize(u)) for u, c in targets.entries.items()
                   if c >= low and (high is None or c < high)]
        out.append(FrequencyBucket(low, high, len(members), sum(u in crawled_set for u in members)))
    return out


# -- rendering ----------------------------------------------------------------


def format_depth_table(report: CoverageReport) -> str:
    noun = "URLs" if report.unit == "url" else "domains"
    header = ("Depth", f"# crawled {noun}", f"% {noun} covered (a)", f"% {noun} covered (b)")
    body = [(str(r.depth), str(r.cumulative_crawled_count), f"{r.pct_covered_all:.2f}", f"{r.pct_covered_topk:.2f}")
            for r in report.rows]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(4)]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)).rstrip() for row in [header] + body]
    lines.append(f"(a): all {report.targets} tweeted {noun}; (b): top {report.k} most tweeted URLs"
                 + (f" ({report.topk_targets} {noun})" if report.unit == "domain" else ""))
    return "\n".join(lines) + "\n"


def depth_records(report: CoverageReport) -> str:
    return "".join(json.dumps({
        "unit": report.unit, "k": report.k, "depth": r.depth,
        "crawled": r.cumulative_crawled_count,
        "pct_all": round(r.pct_covered_all, 2), "pct_topk": round(r.pct_covered_topk, 2),
    }, sort_keys=True) + "\n" for r in report.rows)


def format_frequency_table(buckets: Sequence[FrequencyBucket]) -> str:
    header = ("Tweets", "# URLs", "# covered", "% covered")
    body = [(b.label, str(b.targets), str(b.covered),
             "no-data" if b.pct_covered is None else f"{b.pct_covered:.2f}") for b in buckets]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(4)]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(row, widths)).rstrip()
                     for row in [header] + body) + "\n"


def frequency_records(buckets: Sequence[FrequencyBucket]) -> str:
    return "".join(json.dumps({
        "low": b.low, "high": b.high, "targets": b.targets, "covered": b.covered,
        "pct": None if b.pct_covered is None else round(b.pct_covered, 2),
    }, sort_keys=True) + "\n" for b in buckets)


def frequency_plot_data(buckets: Sequence[FrequencyBucket]) -> str:
    """``x<TAB>y`` pairs: bucket lower edge and percent covered, empty buckets omitted."""
    return "".join(f"{b.low}\t{b.pct_covered:.2f}\n" for b in buckets if b.pct_covered is not None)


def format_stats_table(stats: Mapping[str, int]) -> str:
    keys = ["pending", "claimed", "fetched", "failed", "max_depth", "links"]
    width = max(len(k) for k in keys)
    return "".join(f"{k.ljust(width)}  {stats.get(k, 0)}\n" for k in keys)


def depth_disagreements(stored: Mapping[str, int], exact: Mapping[str, int]) -> Dict[str, Tuple[int, Optional[int]]]:
    """URLs whose stored depth differs from the exact BFS depth."""
    return {u: (d, exact.get(u)) for u, d in stored.items() if exact.get(u) != d}
