"""SQL-coordinated crawl frontier.

The database is the only thing crawler instances share. Rows in ``urls`` are
unique by canonical URL and rows in ``links`` are unique by (source, target);
both constraints live in the schema, not in application code. New data enters
through a single view, ``discoveries``, whose INSTEAD OF trigger fans each
insertion out into ``urls`` and ``links``; an AFTER INSERT trigger on ``links``
keeps ``priority = url_score + link_score_sum`` incrementally.

Scoring runs store-side: the active strategy is installed as the SQL
functions ``score_url`` and ``score_link`` on each connection before writes.

The reference backend here is SQLite (WAL mode). Claims take the database
write lock with ``BEGIN IMMEDIATE``, which serializes claimers so two batches
can never overlap.
"""
from __future__ import annotations

import logging
import sqlite3
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

from .errors import (
    ExpiredClaim,
    InsufficientPrivilege,
    MalformedUrl,
    SchemaTooNew,
    StoreUnavailable,
    UnknownToken,
)
from .scoring import KeywordStrategy, install_sqlite
from .urlkit import CanonicalUrl, canonicalize, domain_of

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_LEASE = 600.0
STATUSES = ("pending", "claimed", "fetched", "failed")

SCHEMA = """
CREATE TABLE IF NOT EXISTS schema_meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS urls (
    id             INTEGER PRIMARY KEY AUTOINCREMENT,
    url            TEXT    NOT NULL UNIQUE,
    host           TEXT    NOT NULL,
    domain         TEXT    NOT NULL,
    tld            TEXT    NOT NULL,
    url_score      INTEGER NOT NULL,
    link_score_sum INTEGER NOT NULL DEFAULT 0,
    priority       INTEGER NOT NULL,
    depth          INTEGER NOT NULL CHECK (depth >= 0),
    is_seed        INTEGER NOT NULL DEFAULT 0,
    status         TEXT    NOT NULL DEFAULT 'pending'
                   CHECK (status IN ('pending', 'claimed', 'fetched', 'failed')),
    claim_token    TEXT,
    claim_expiry   REAL,
    http_status    INTEGER,
    final_url      TEXT,
    error          TEXT,
    fetched_at     REAL,
    fetched_by     TEXT
);

CREATE INDEX IF NOT EXISTS urls_claim_order ON urls (status, priority DESC, id);
CREATE INDEX IF NOT EXISTS urls_claim_token ON urls (claim_token);

CREATE TABLE IF NOT EXISTS links (
    source_id     INTEGER NOT NULL REFERENCES urls (id),
    target_id     INTEGER NOT NULL REFERENCES urls (id),
    context       TEXT    NOT NULL,
    context_score INTEGER NOT NULL,
    PRIMARY KEY (source_id, target_id)
);

CREATE INDEX IF NOT EXISTS links_target ON links (target_id);

CREATE TABLE IF NOT EXISTS claims (
    token        TEXT PRIMARY KEY,
    instance_id  TEXT NOT NULL,
    claimed_at   REAL NOT NULL,
    lease_expiry REAL NOT NULL
);

CREATE TRIGGER IF NOT EXISTS links_accumulate AFTER INSERT ON links
BEGIN
    UPDATE urls
       SET link_score_sum = link_score_sum + NEW.context_score,
           priority = priority + NEW.context_score
     WHERE id = NEW.target_id;
END;

CREATE VIEW IF NOT EXISTS discoveries AS
    SELECT NULL AS source_id, NULL AS target_url, NULL AS target_host,
           NULL AS target_domain, NULL AS target_tld, NULL AS context
     WHERE 0;

CREATE TRIGGER IF NOT EXISTS discoveries_insert INSTEAD OF INSERT ON discoveries
BEGIN
    INSERT OR IGNORE INTO urls (url, host, domain, tld, url_score, priority, depth)
    SELECT NEW.target_url, NEW.target_host, NEW.target_domain, NEW.target_tld,
           score_url(NEW.target_url), score_url(NEW.target_url), src.depth + 1
      FROM urls AS src
     WHERE src.id = NEW.source_id;

    -- a link already on record carried its depth when it was first inserted;
    -- sending it again is the same discovery, not a new path
    UPDATE urls
       SET depth = (SELECT depth + 1 FROM urls WHERE id = NEW.source_id)
     WHERE url = NEW.target_url
       AND depth > (SELECT depth + 1 FROM urls WHERE id = NEW.source_id)
       AND NOT EXISTS (SELECT 1 FROM links
                        WHERE links.source_id = NEW.source_id AND links.target_id = urls.id);

    INSERT OR IGNORE INTO links (source_id, target_id, context, context_score)
    SELECT NEW.source_id, id, NEW.context, score_link(NEW.context)
      FROM urls
     WHERE url = NEW.target_url;
END;
"""


@dataclass
class UrlRecord:
    id: int
    url: str
    domain: str
    tld: str
    url_score: int
    link_score_sum: int
    priority: int
    depth: int
    status: str
    claim_token: Optional[str] = None
    claim_expiry: Optional[float] = None
    http_status: Optional[int] = None
    fetched_at: Optional[float] = None
    is_seed: bool = False

    @property
    def canonical(self) -> CanonicalUrl:
        return canonicalize(self.url)


@dataclass
class LinkRecord:
    source_id: int
    target_id: int
    context: str
    context_score: int


@dataclass
class CrawlBatch:
    claim_token: Optional[str]
    lease_expiry: Optional[float]
    urls: list = field(default_factory=list)

    def __len__(self):
        return len(self.urls)

    def __iter__(self) -> Iterator[UrlRecord]:
        return iter(self.urls)


@dataclass
class SourceResult:
    """One fetched source and the raw links found on it."""

    source: Union[CanonicalUrl, str]
    fetch: object
    discovered: Sequence[tuple] = ()


@dataclass
class SeedReport:
    inserted: int = 0
    skipped: int = 0
    errors: list = field(default_factory=list)

    def __int__(self):
        return self.inserted


_URL_COLUMNS = (
    "id, url, domain, tld, url_score, link_score_sum, priority, depth, status, "
    "claim_token, claim_expiry, http_status, fetched_at, is_seed"
)


def _record(row) -> UrlRecord:
    rec = UrlRecord(*row)
    rec.is_seed = bool(rec.is_seed)
    return rec


def _dsn_to_uri(dsn: Union[str, Path], create: bool, readonly: bool = False) -> str:
    dsn = str(dsn)
    if dsn.startswith("sqlite:///"):
        dsn = dsn[len("sqlite:///"):]
    elif dsn.startswith("sqlite://"):
        dsn = dsn[len("sqlite://"):]
    if dsn.startswith("file:"):
        return dsn
    path, _, params = dsn.partition("?")
    mode = "ro" if readonly else ("rwc" if create else "rw")
    query = params or f"mode={mode}"
    if "mode=" not in query:
        query += f"&mode={mode}"
    return f"file:{Path(path).absolute()}?{query}"


def _translate(exc: sqlite3.Error) -> Exception:
    msg = str(exc).lower()
    if "readonly" in msg or "read-only" in msg or "not authorized" in msg:
        return InsufficientPrivilege(str(exc))
    if isinstance(exc, sqlite3.OperationalError):
        return StoreUnavailable(str(exc))
    return exc


def connect(dsn: Union[str, Path], create: bool = False, readonly: bool = False, timeout: float = 30.0) -> sqlite3.Connection:
    """Open an autocommit connection; transactions are issued explicitly."""
    uri = _dsn_to_uri(dsn, create, readonly)
    try:
        conn = sqlite3.connect(uri, uri=True, timeout=timeout, isolation_level=None, check_same_thread=False)
        conn.execute("PRAGMA foreign_keys = ON")
        if "mode=ro" not in uri:
            conn.execute("PRAGMA journal_mode = WAL")
            conn.execute("PRAGMA synchronous = NORMAL")
    except sqlite3.Error as exc:
        raise _translate(exc) from exc
    return conn


def init_schema(dsn: Union[str, Path]) -> None:
    """Create tables, constraints, indexes and the insertion view. Idempotent."""
    conn = connect(dsn, create=True)
    try:
        try:
            row = conn.execute(
                "SELECT value FROM schema_meta WHERE key = 'version'"
            ).fetchone()
        except sqlite3.OperationalError:
            row = None
        if row is not None and int(row[0]) > SCHEMA_VERSION:
            raise SchemaTooNew(f"store schema v{row[0]} is newer than supported v{SCHEMA_VERSION}")
        if row is not None and int(row[0]) == SCHEMA_VERSION:
            return
        conn.execute("BEGIN IMMEDIATE")
        for stmt in _split_sql(SCHEMA):
            conn.execute(stmt)
        conn.execute(
            "INSERT OR REPLACE INTO schema_meta (key, value) VALUES ('version', ?)",
            (str(SCHEMA_VERSION),),
        )
        conn.execute("COMMIT")
    except sqlite3.Error as exc:
        if conn.in_transaction:
            conn.execute("ROLLBACK")
        raise _translate(exc) from exc
    finally:
        conn.close()


def _split_sql(script: str) -> list[str]:
    stmts, buf = [], []
    for line in script.splitlines():
        buf.append(line)
        candidate = "\n".join(buf).strip()
        if candidate and sqlite3.complete_statement(candidate):
            stmts.append(candidate)
            buf = []
    return stmts


class Frontier:
    """One connection's view of the shared frontier.

    Not shareable across threads doing concurrent work; give each worker
    (or each crawler instance) its own ``Frontier``.
    """

    def __init__(self, dsn: Union[str, Path], clock: Callable[[], float] = time.time,
                 timeout: float = 30.0, readonly: bool = False):
        self.dsn = dsn
        self.clock = clock
        self.conn = connect(dsn, readonly=readonly, timeout=timeout)
        self._strategy: Optional[KeywordStrategy] = None

    def close(self) -> None:
        self.conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- plumbing --------------------------------------------------------

    def _use(self, strategy: KeywordStrategy) -> None:
        if self._strategy is not strategy:
            install_sqlite(self.conn, strategy)
            self._strategy = strategy

    def _begin(self) -> None:
        try:
            self.conn.execute("BEGIN IMMEDIATE")
        except sqlite3.Error as exc:
            raise _translate(exc) from exc

    def _rollback(self) -> None:
        if self.conn.in_transaction:
            self.conn.execute("ROLLBACK")

    def _run(self, fn):
        self._begin()
        try:
            result = fn()
            self.conn.execute("COMMIT")
            return result
        except sqlite3.Error as exc:
            self._rollback()
            raise _translate(exc) from exc
        except BaseException:
            self._rollback()
            raise

    @property
    def total_changes(self) -> int:
        return self.conn.total_changes

    # -- operations ------------------------------------------------------

    def insert_seeds(self, urls: Iterable[str], strategy: KeywordStrategy) -> SeedReport:
        """Insert seeds at depth 0; duplicates are skipped, bad URLs reported."""
        self._use(strategy)
        report = SeedReport()
        canon: list[CanonicalUrl] = []
        for raw in urls:
            try:
                canon.append(canonicalize(raw))
            except MalformedUrl as exc:
                report.errors.append((raw, str(exc)))
                logger.warning("skipping seed %r: %s", raw, exc)

        def tx():
            for url in canon:
                dom = domain_of(url)
                cur = self.conn.execute(
                    "INSERT OR IGNORE INTO urls"
                    " (url, host, domain, tld, url_score, priority, depth, is_seed)"
                    " VALUES (?1, ?2, ?3, ?4, score_url(?1), score_url(?1), 0, 1)",
                    (str(url), url.host, dom.registrable_domain, dom.tld),
                )
                if cur.rowcount:
                    report.inserted += 1
                else:
                    report.skipped += 1

        self._run(tx)
        return report

    def claim_batch(self, limit: int, lease: float = DEFAULT_LEASE, instance_id: str = "") -> CrawlBatch:
        """Atomically claim up to ``limit`` pending URLs, best priority first."""
        if limit <= 0:
            raise ValueError("limit must be positive")
        token = uuid.uuid4().hex
        now = self.clock()
        expiry = now + lease

        def tx():
            rows = self.conn.execute(
                "UPDATE urls SET status = 'claimed', claim_token = ?, claim_expiry = ?"
                " WHERE id IN (SELECT id FROM urls WHERE status = 'pending'"
                "              ORDER BY priority DESC, id LIMIT ?)"
                f" RETURNING {_URL_COLUMNS}",
                (token, expiry, limit),
            ).fetchall()
            if rows:
                self.conn.execute(
                    "INSERT INTO claims (token, instance_id, claimed_at, lease_expiry)"
                    " VALUES (?, ?, ?, ?)",
                    (token, instance_id, now, expiry),
                )
            return rows

        rows = self._run(tx)
        if not rows:
            return CrawlBatch(None, None, [])
        records = sorted((_record(r) for r in rows), key=lambda r: (-r.priority, r.id))
        return CrawlBatch(token, expiry, records)

    def insert_discoveries(self, source_id: int, discovered: Iterable[tuple],
                           base: Union[CanonicalUrl, str], strategy: KeywordStrategy) -> int:
        """Push (raw target, context) pairs through the insertion view.

        Must run inside a transaction owned by the caller, or standalone (then
        it opens its own). Returns the number of targets that canonicalized.
        """
        self._use(strategy)
        rows = []
        for raw, context in discovered:
            try:
                target = canonicalize(raw, base)
            except MalformedUrl:
                continue
            dom = domain_of(target)
            rows.append((source_id, str(target), target.host, dom.registrable_domain, dom.tld, context or ""))
        if not rows:
            return 0
        sql = (
            "INSERT INTO discoveries"
            " (source_id, target_url, target_host, target_domain, target_tld, context)"
            " VALUES (?, ?, ?, ?, ?, ?)"
        )
        if self.conn.in_transaction:
            self.conn.executemany(sql, rows)
        else:
            self._run(lambda: self.conn.executemany(sql, rows))
        return len(rows)

    def submit_discoveries(self, claim_token: str, results: Iterable[SourceResult],
                           strategy: KeywordStrategy, instance_id: str = "") -> int:
        """Record fetch outcomes and discovered links for claimed sources.

        Sources no longer claimed under ``claim_token`` (already submitted, or
        re-claimed elsewhere after expiry) are skipped. Returns the number of
        sources recorded.
        """
        self._use(strategy)
        results = list(results)
        now = self.clock()
        expired = False

        def tx():
            nonlocal expired
            claim = self.conn.execute(
                "SELECT lease_expiry FROM claims WHERE token = ?", (claim_token,)
            ).fetchone()
            if claim is None:
                raise UnknownToken(claim_token)
            if claim[0] < now:
                self.conn.execute(
                    "UPDATE urls SET status = 'pending', claim_token = NULL, claim_expiry = NULL"
                    " WHERE claim_token = ? AND status = 'claimed'",
                    (claim_token,),
                )
                expired = True
                return 0
            recorded = 0
            for res in results:
                source = canonicalize(res.source)
                row = self.conn.execute(
                    "SELECT id FROM urls WHERE url = ? AND claim_token = ? AND status = 'claimed'",
                    (str(source), claim_token),
                ).fetchone()
                if row is None:
                    continue
                fetch = res.fetch
                error = getattr(fetch, "error", None)
                final = getattr(fetch, "final", None)
                self.conn.execute(
                    "UPDATE urls SET status = ?, http_status = ?, final_url = ?, error = ?,"
                    " fetched_at = ?, fetched_by = ?, claim_token = NULL, claim_expiry = NULL"
                    " WHERE id = ?",
                    (
                        "failed" if error else "fetched",
                        getattr(fetch, "http_status", None),
                        str(final) if final is not None else None,
                        error,
                        now,
                        instance_id,
                        row[0],
                    ),
                )
                if not error and res.discovered:
                    self.insert_discoveries(row[0], res.discovered, final or source, strategy)
                recorded += 1
            return recorded

        recorded = self._run(tx)
        if expired:
            raise ExpiredClaim(claim_token)
        return recorded

    def release(self, claim_token: str) -> int:
        """Return this token's still-claimed URLs to pending immediately."""
        return self._run(lambda: self.conn.execute(
            "UPDATE urls SET status = 'pending', claim_token = NULL, claim_expiry = NULL"
            " WHERE claim_token = ? AND status = 'claimed'",
            (claim_token,),
        ).rowcount)

    def expire_leases(self, now: Optional[float] = None) -> int:
        """Revert every claim whose lease ended before ``now``."""
        now = self.clock() if now is None else now
        return self._run(lambda: self.conn.execute(
            "UPDATE urls SET status = 'pending', claim_token = NULL, claim_expiry = NULL"
            " WHERE status = 'claimed' AND claim_expiry < ?",
            (now,),
        ).rowcount)

    def frontier_stats(self) -> dict:
        try:
            self.conn.execute("BEGIN")
            stats = {s: 0 for s in STATUSES}
            for status, n in self.conn.execute("SELECT status, COUNT(*) FROM urls GROUP BY status"):
                stats[status] = n
            stats["max_depth"] = self.conn.execute("SELECT COALESCE(MAX(depth), 0) FROM urls").fetchone()[0]
            stats["links"] = self.conn.execute("SELECT COUNT(*) FROM links").fetchone()[0]
            self.conn.execute("COMMIT")
        except sqlite3.Error as exc:
            self._rollback()
            raise _translate(exc) from exc
        return stats

    # -- read helpers ----------------------------------------------------

    def get(self, url: Union[CanonicalUrl, str]) -> Optional[UrlRecord]:
        row = self.conn.execute(
            f"SELECT {_URL_COLUMNS} FROM urls WHERE url = ?", (str(canonicalize(url)),)
        ).fetchone()
        return _record(row) if row else None

    def records(self, status: Optional[str] = None) -> list[UrlRecord]:
        sql = f"SELECT {_URL_COLUMNS} FROM urls"
        args: tuple = ()
        if status is not None:
            sql += " WHERE status = ?"
            args = (status,)
        return [_record(r) for r in self.conn.execute(sql + " ORDER BY id", args)]

    def links(self) -> list[LinkRecord]:
        return [LinkRecord(*r) for r in self.conn.execute(
            "SELECT source_id, target_id, context, context_score FROM links ORDER BY source_id, target_id"
        )]

    def edges(self) -> list[tuple[str, str]]:
        return self.conn.execute(
            "SELECT s.url, t.url FROM links JOIN urls s ON s.id = links.source_id"
            " JOIN urls t ON t.id = links.target_id ORDER BY links.source_id, links.target_id"
        ).fetchall()

    def seeds(self) -> list[str]:
        return [r[0] for r in self.conn.execute("SELECT url FROM urls WHERE is_seed ORDER BY id")]

    def depths(self, status: Optional[str] = "fetched") -> dict[str, int]:
        sql = "SELECT url, depth FROM urls"
        args: tuple = ()
        if status is not None:
            sql += " WHERE status = ?"
            args = (status,)
        return dict(self.conn.execute(sql, args).fetchall())

    def fetched_by(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for url, inst in self.conn.execute(
            "SELECT url, fetched_by FROM urls WHERE status IN ('fetched', 'failed') ORDER BY id"
        ):
            out.setdefault(inst or "", []).append(url)
        return out

    def snapshot(self) -> tuple:
        """Full table contents, for before/after comparisons."""
        urls = self.conn.execute("SELECT * FROM urls ORDER BY id").fetchall()
        links = self.conn.execute("SELECT * FROM links ORDER BY source_id, target_id").fetchall()
        return urls, links
