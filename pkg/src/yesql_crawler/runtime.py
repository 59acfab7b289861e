"""The per-instance crawl loop.

Each instance repeats: claim a batch from the frontier, fetch it on a pool of
``parallel_fetches`` workers, extract links, and submit the batch back in one
transaction. The next batch is claimed while the previous one is still
fetching (one batch of lookahead). Instances share nothing but the store.
"""
from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Union

from .errors import ClaimError, ExpiredClaim, StoreUnavailable
from .extractor import extract_links
from .fetcher import FetchLimits, FetchOutcome, Fetcher, PolitenessPolicy
from .frontier import DEFAULT_LEASE, CrawlBatch, Frontier, SourceResult
from .scoring import KeywordStrategy
from .urlkit import canonicalize

logger = logging.getLogger(__name__)
events = logging.getLogger("yesql_crawler.events")

INTERNAL_ERROR = "internal_error"


def log_event(event: str, **fields) -> None:
    events.info(event, extra={"event": event, "fields": fields})


class JsonLineFormatter(logging.Formatter):
    """One JSON object per record: ``{"ts", "level", "event", ...fields}``."""

    def format(self, record: logging.LogRecord) -> str:
        doc = {
            "ts": round(record.created, 3),
            "level": record.levelname.lower(),
            "event": getattr(record, "event", "log"),
        }
        doc.update(getattr(record, "fields", {}) or {})
        if not hasattr(record, "event"):
            doc["message"] = record.getMessage()
        return json.dumps(doc, default=str, sort_keys=False)


@dataclass
class InstanceConfig:
    instance_id: str = "crawler-1"
    batch_size: int = 50
    parallel_fetches: int = 20
    lease: float = DEFAULT_LEASE
    stop_after: Optional[int] = None
    idle_shutdown: float = 5.0
    poll_interval: float = 0.05
    limits: FetchLimits = field(default_factory=FetchLimits)
    politeness: PolitenessPolicy = field(default_factory=PolitenessPolicy)
    store_retries: int = 3
    content_dir: Optional[Union[str, Path]] = None

    def __post_init__(self):
        if self.parallel_fetches < 1 or self.batch_size < 1:
            raise ValueError("parallel_fetches and batch_size must be >= 1")
        if self.stop_after is not None and self.stop_after < 0:
            raise ValueError("stop_after must be >= 0")
        if self.batch_size < self.parallel_fetches:
            logger.warning("batch_size %d < parallel_fetches %d leaves workers idle",
                           self.batch_size, self.parallel_fetches)


@dataclass
class RunSummary:
    instance_id: str
    fetched: int = 0
    failed: int = 0
    discovered: int = 0
    batches: int = 0
    released: int = 0
    expired_batches: int = 0
    reclaimed_leases: int = 0
    aborted: bool = False
    wall_time: float = 0.0
    fetch_log: List[str] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc.pop("fetch_log")
        doc["wall_time"] = round(self.wall_time, 3)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class _InFlight:
    batch: CrawlBatch
    futures: List[Future]


class CrawlerInstance:
    """One crawler instance bound to one frontier connection."""

    def __init__(self, config: InstanceConfig, frontier: Frontier, strategy: KeywordStrategy,
                 fetcher: Optional[Callable[..., FetchOutcome]] = None):
        self.config = config
        self.frontier = frontier
        self.strategy = strategy
        self.fetcher = fetcher or Fetcher(limits=config.limits, politeness=config.politeness)
        self._stop = threading.Event()
        self.summary = RunSummary(config.instance_id)
        self.active_tokens: set = set()

    # -- shutdown ----------------------------------------------------------

    def graceful_shutdown(self, signum=None, frame=None) -> None:
        """Stop claiming; finish in-flight fetches, submit them, release the rest."""
        self._stop.set()

    @property
    def stopping(self) -> bool:
        return self._stop.is_set()

    # -- workers -------------------------------------------------------------

    def _work(self, url: str) -> SourceResult:
        try:
            outcome = self.fetcher(canonicalize(url))
        except Exception as exc:  # a worker must never take the instance down
            logger.exception("fetch crashed for %s", url)
            c = canonicalize(url)
            outcome = FetchOutcome(c, c, error=INTERNAL_ERROR)
            log_event("error", instance=self.config.instance_id, url=url, error=repr(exc))
        links = []
        if outcome.error is None:
            try:
                links = [(l.target_raw, l.context) for l in extract_links(outcome.body, outcome.content_type)]
            except Exception:
                logger.exception("extraction crashed for %s", url)
            if self.config.content_dir is not None and outcome.body:
                self._store_body(url, outcome.body)
        log_event("fetch", instance=self.config.instance_id, url=url, status=outcome.http_status,
                  error=outcome.error, bytes=len(outcome.body), links=len(links),
                  elapsed=round(outcome.elapsed, 4))
        return SourceResult(url, outcome, links)

    def _store_body(self, url: str, body: bytes) -> None:
        d = Path(self.config.content_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / hashlib.sha256(url.encode("utf-8")).hexdigest()).write_bytes(body)

    # -- store calls with bounded retry --------------------------------------

    def _store(self, fn, *args, **kwargs):
        delay = 0.1
        for attempt in range(self.config.store_retries + 1):
            try:
                return fn(*args, **kwargs)
            except StoreUnavailable:
                if attempt == self.config.store_retries:
                    raise
                logger.warning("store unavailable, retrying in %.1fs", delay)
                time.sleep(delay)
                delay *= 2

    def _claim_limit(self, outstanding: int) -> int:
        limit = self.config.batch_size
        if self.config.stop_after is not None:
            limit = min(limit, self.config.stop_after - self.summary.fetched - outstanding)
        return limit

    def _claim(self, outstanding: int) -> Optional[_InFlight]:
        limit = self._claim_limit(outstanding)
        if limit <= 0:
            return None
        batch = self._store(self.frontier.claim_batch, limit, self.config.lease, self.config.instance_id)
        if not batch.urls:
            return None
        self.active_tokens.add(batch.claim_token)
        self.summary.batches += 1
        log_event("claim", instance=self.config.instance_id, token=batch.claim_token, size=len(batch))
        return _InFlight(batch, [self._pool.submit(self._work, rec.url) for rec in batch])

    def _finish(self, inflight: _InFlight, cancel: bool = False) -> None:
        """Wait for a batch's fetches, submit what completed, release the remainder."""
        if cancel:
            # cancel everything still queued before waiting on anything
            for fut in inflight.futures:
                fut.cancel()
        results = [fut.result() for fut in inflight.futures if not fut.cancelled()]
        token = inflight.batch.claim_token
        try:
            self._store(self.frontier.submit_discoveries, token, results, self.strategy,
                        instance_id=self.config.instance_id)
        except ExpiredClaim:
            self.summary.expired_batches += 1
            log_event("error", instance=self.config.instance_id, token=token, error="expired_claim")
            results = []
        except ClaimError as exc:
            log_event("error", instance=self.config.instance_id, token=token, error=repr(exc))
            results = []
        for res in results:
            self.summary.fetch_log.append(str(res.source))
            if res.fetch.error is None:
                self.summary.fetched += 1
            else:
                self.summary.failed += 1
            self.summary.discovered += len(res.discovered)
        if len(results) < len(inflight.batch):
            released = self._store(self.frontier.release, token)
            self.summary.released += released
        self.active_tokens.discard(token)
        log_event("submit", instance=self.config.instance_id, token=token, submitted=len(results))

    def _frontier_idle(self) -> bool:
        """True when nothing is pending or claimed anywhere; reclaims dead leases."""
        self.summary.reclaimed_leases += self._store(self.frontier.expire_leases)
        stats = self._store(self.frontier.frontier_stats)
        return stats["pending"] == 0 and stats["claimed"] == 0

    def _done(self) -> bool:
        return self.config.stop_after is not None and self.summary.fetched >= self.config.stop_after

    def run(self) -> RunSummary:
        started = time.monotonic()
        prev: Optional[_InFlight] = None
        cur: Optional[_InFlight] = None
        idle_since: Optional[float] = None
        self._pool = ThreadPoolExecutor(self.config.parallel_fetches,
                                        thread_name_prefix=f"fetch-{self.config.instance_id}")
        try:
            while True:
                cur = None
                if not self.stopping and not self._done():
                    cur = self._claim(len(prev.batch) if prev else 0)
                if prev is not None:
                    self._finish(prev, cancel=self.stopping)
                    prev = None
                if cur is not None:
                    idle_since = None
                    prev, cur = cur, None
                    continue
                if self.stopping or self._done():
                    break
                if self._frontier_idle():
                    now = time.monotonic()
                    idle_since = idle_since if idle_since is not None else now
                    if now - idle_since >= self.config.idle_shutdown:
                        break
                else:
                    idle_since = None
                time.sleep(self.config.poll_interval)
            if prev is not None:
                self._finish(prev, cancel=True)
                prev = None
        except StoreUnavailable as exc:
            self.summary.aborted = True
            log_event("error", instance=self.config.instance_id, error=f"store unavailable: {exc}")
        finally:
            for inflight in (prev, cur):
                if inflight is not None:
                    for fut in inflight.futures:
                        fut.cancel()
            self._pool.shutdown(wait=True, cancel_futures=True)
            for token in list(self.active_tokens):
                try:
                    self.summary.released += self.frontier.release(token)
                except Exception:
                    logger.exception("could not release claim %s", token)
            self.active_tokens.clear()
            self.summary.wall_time = time.monotonic() - started
        log_event("summary", **self.summary.to_dict())
        return self.summary


def run_instance(config: InstanceConfig, frontier: Frontier, strategy: KeywordStrategy,
                 fetcher: Optional[Callable[..., FetchOutcome]] = None) -> RunSummary:
    return CrawlerInstance(config, frontier, strategy, fetcher).run()


def run_instances(configs: List[InstanceConfig], dsn, strategy: KeywordStrategy,
                  fetcher_factory: Callable[[InstanceConfig], Callable[..., FetchOutcome]]) -> List[RunSummary]:
    """Run several instances concurrently in threads, each with its own connection."""
    summaries: List[Optional[RunSummary]] = [None] * len(configs)
    errors: list = []

    def go(i: int, cfg: InstanceConfig):
        try:
            with Frontier(dsn) as frontier:
                summaries[i] = run_instance(cfg, frontier, strategy, fetcher_factory(cfg))
        except BaseException as exc:  # surfaced to the caller below
            errors.append(exc)

    threads = [threading.Thread(target=go, args=(i, c), name=c.instance_id) for i, c in enumerate(configs)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    return summaries  # type: ignore[return-value]
