"""Command-line entry point: ``yesql-crawler <command> ...``.

Exit codes: 0 success, 2 usage or configuration error, 3 environment error
(store unreachable, port busy), 64 unknown report subcommand.
"""
from __future__ import annotations

import argparse
import logging
import os
import signal
import sys
import tempfile
import threading
from pathlib import Path
from typing import List, Optional

from . import analytics, mockweb
from .errors import AddressInUse, InsufficientPrivilege, InvalidSpec, SchemaTooNew, StoreUnavailable
from .fetcher import DEFAULT_USER_AGENT, FetchLimits, Fetcher, PolitenessPolicy, route_all
from .frontier import DEFAULT_LEASE, Frontier, init_schema
from .runtime import CrawlerInstance, InstanceConfig, JsonLineFormatter
from .scoring import ZERO_STRATEGY, StrategyFormatError, load_strategy, to_plpgsql

DB_ENV = "YESQL_CRAWLER_DB"
EXIT_OK, EXIT_USAGE, EXIT_ENV, EXIT_UNKNOWN_SUBCOMMAND = 0, 2, 3, 64
REPORTS = ("depth-coverage", "frequency-coverage", "stats")


class ConfigError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"yesql-crawler: {msg}", file=sys.stderr)


def _db(args) -> str:
    dsn = args.db or os.environ.get(DB_ENV)
    if not dsn:
        raise ConfigError(f"no store given: pass --db or set {DB_ENV}")
    return dsn


def _strategy(args):
    if not getattr(args, "strategy", None):
        return ZERO_STRATEGY
    path = Path(args.strategy)
    if not path.is_file():
        raise ConfigError(f"strategy file not found: {path}")
    try:
        return load_strategy(path)
    except StrategyFormatError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _existing(path: Optional[str], what: str) -> Optional[Path]:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _host_port(text: str, default_host: str = "127.0.0.1"):
    host, _, port = text.rpartition(":")
    try:
        return host or default_host, int(port)
    except ValueError as exc:
        raise ConfigError(f"expected HOST:PORT, got {text!r}") from exc


def _setup_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLineFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, level.upper()))


# -- commands ---------------------------------------------------------------


def cmd_init(args) -> int:
    init_schema(_db(args))
    print("schema ready")
    return EXIT_OK


def cmd_seed(args) -> int:
    strategy = _strategy(args)
    path = _existing(args.urls, "seed file")
    lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    urls = [line for line in lines if line and not line.startswith("#")]
    with Frontier(_db(args)) as frontier:
        report = frontier.insert_seeds(urls, strategy)
    for raw, why in report.errors:
        _err(f"warning: skipped malformed seed {raw!r}: {why}")
    print(f"inserted {report.inserted}")
    print(f"skipped {report.skipped}")
    return EXIT_OK


def _instance_config(args) -> InstanceConfig:
    return InstanceConfig(
        instance_id=args.instance_id,
        batch_size=args.batch_size,
        parallel_fetches=args.parallel,
        lease=args.lease,
        stop_after=args.stop_after,
        idle_shutdown=args.idle_shutdown,
        limits=FetchLimits(args.timeout, args.max_redirects, args.max_body_bytes),
        politeness=PolitenessPolicy(args.min_interval, args.per_domain),
        content_dir=args.content_dir,
    )


def cmd_crawl(args) -> int:
    strategy = _strategy(args)
    try:
        config = _instance_config(args)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    resolver = route_all(*_host_port(args.connect_to)) if args.connect_to else None
    fetcher = Fetcher(limits=config.limits, user_agent=args.user_agent, resolver=resolver,
                      honor_robots=not args.no_robots, politeness=config.politeness)
    with Frontier(_db(args)) as frontier:
        instance = CrawlerInstance(config, frontier, strategy, fetcher)
        if threading.current_thread() is threading.main_thread():
            signal.signal(signal.SIGTERM, instance.graceful_shutdown)
            signal.signal(signal.SIGINT, instance.graceful_shutdown)
        summary = instance.run()
    print(summary.to_json())
    return EXIT_ENV if summary.aborted else EXIT_OK


def _targets(args) -> analytics.TweetUrlSet:
    if args.targets:
        return analytics.read_targets(_existing(args.targets, "targets file"))
    if args.tweets and args.mapping:
        report = analytics.ingest_tweet_files(_existing(args.tweets, "tweet file"),
                                              _existing(args.mapping, "mapping file"))
        for lineno, why in report.parse_errors:
            _err(f"warning: tweets line {lineno}: {why}")
        _err(f"tweets {report.tweets}, with URL {report.tweets_with_url} "
             f"({report.url_bearing_rate:.1f}%), unique short URLs {report.unique_short_urls}, "
             f"unresolved {report.unresolved}, effective URLs {len(report.targets)}")
        return report.targets
    raise ConfigError("need --targets, or --tweets with --mapping")


def _crawled(args) -> dict:
    if args.crawled:
        return analytics.read_crawled(_existing(args.crawled, "crawled file"))
    with Frontier(_db(args), readonly=True) as frontier:
        stored = frontier.depths("fetched")
        if not args.exact:
            return stored
        exact = analytics.exact_depths(frontier.edges(), frontier.seeds())
    return {u: exact[u] for u in stored if u in exact}


def cmd_report(args) -> int:
    if args.report == "stats":
        with Frontier(_db(args), readonly=True) as frontier:
            stats = frontier.frontier_stats()
        sys.stdout.write(analytics.format_stats_table(stats))
        return EXIT_OK
    targets = _targets(args)
    crawled = _crawled(args)
    if args.report == "depth-coverage":
        k = min(args.k, len(targets)) if args.clamp_k else args.k
        if not 0 <= k <= len(targets):
            raise ConfigError(f"--k {k} exceeds the {len(targets)} targets")
        report = analytics.coverage_by_depth(crawled, targets, k, args.unit)
        out = analytics.depth_records(report) if args.format == "jsonl" else analytics.format_depth_table(report)
        sys.stdout.write(out)
        return EXIT_OK
    try:
        edges = [int(x) for x in args.buckets.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --buckets {args.buckets!r}") from exc
    try:
        buckets = analytics.coverage_by_frequency(crawled.keys(), targets, edges)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = analytics.frequency_records(buckets) if args.format == "jsonl" else analytics.format_frequency_table(buckets)
    sys.stdout.write(out)
    if args.plot_data:
        Path(args.plot_data).write_text(analytics.frequency_plot_data(buckets), encoding="utf-8")
    return EXIT_OK


def cmd_export(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with Frontier(_db(args), readonly=True) as frontier:
        depths = frontier.depths("fetched")
        edges = frontier.edges()
        seeds = frontier.seeds()
    (out / "crawled.tsv").write_text("".join(f"{u}\t{d}\n" for u, d in depths.items()), encoding="utf-8")
    (out / "edges.tsv").write_text("".join(f"{s}\t{t}\n" for s, t in edges), encoding="utf-8")
    (out / "seeds.txt").write_text("".join(f"{s}\n" for s in seeds), encoding="utf-8")
    print(out)
    return EXIT_OK


def cmd_mockweb(args) -> int:
    path = _existing(args.spec, "mock web spec")
    try:
        spec = mockweb.load_spec(path)
    except InvalidSpec as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    bundle = mockweb.generate(spec)
    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="mockweb-"))
    manifest = mockweb.write_bundle(bundle, out)
    handle = mockweb.serve(bundle, _host_port(args.bind))
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *a: stop.set())
    signal.signal(signal.SIGINT, lambda *a: stop.set())
    host, port = handle.address
    print(manifest, flush=True)
    print(f"serving {len(bundle.pages)} resources on {host}:{port}", file=sys.stderr, flush=True)
    try:
        while not stop.wait(0.2):
            pass
    finally:
        handle.close()
    return EXIT_OK


def cmd_compile_strategy(args) -> int:
    sys.stdout.write(to_plpgsql(_strategy(args)))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="yesql-crawler", description="SQL-coordinated focused web crawler")
    parser.add_argument("--log-level", default="info", choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    def with_db(p, strategy=False):
        p.add_argument("--db", help=f"store path or sqlite:/// URL (default ${DB_ENV})")
        if strategy:
            p.add_argument("--strategy", help="strategy file (default: all-zero weights)")
        return p

    p = with_db(sub.add_parser("init", help="create the frontier schema"))
    p.set_defaults(func=cmd_init)

    p = with_db(sub.add_parser("seed", help="insert seed URLs at depth 0"), strategy=True)
    p.add_argument("urls", help="file with one URL per line")
    p.set_defaults(func=cmd_seed)

    p = with_db(sub.add_parser("crawl", help="run one crawler instance"), strategy=True)
    p.add_argument("--instance-id", default=f"crawler-{os.getpid()}")
    p.add_argument("--batch-size", type=int, default=50)
    p.add_argument("--parallel", type=int, default=20, help="concurrent downloads (default 20)")
    p.add_argument("--lease", type=float, default=DEFAULT_LEASE, help="claim lease in seconds")
    p.add_argument("--stop-after", type=int, default=None, help="stop after this many fetched pages")
    p.add_argument("--idle-shutdown", type=float, default=5.0, help="exit after the frontier is empty this long")
    p.add_argument("--no-robots", action="store_true", help="ignore robots.txt (mock-web testing only)")
    p.add_argument("--user-agent", default=DEFAULT_USER_AGENT)
    p.add_argument("--content-dir", default=None, help="store raw bodies here, keyed by URL sha256")
    p.add_argument("--connect-to", default=None, metavar="HOST:PORT", help="send all requests to this address")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--max-redirects", type=int, default=5)
    p.add_argument("--max-body-bytes", type=int, default=4 * 1024 * 1024)
    p.add_argument("--min-interval", type=float, default=1.0, help="seconds between fetch starts per domain")
    p.add_argument("--per-domain", type=int, default=2, help="concurrent fetches per domain")
    p.set_defaults(func=cmd_crawl)

    p = sub.add_parser("report", help="analytics reports")
    rsub = p.add_subparsers(dest="report", required=True)
    for name in REPORTS:
        r = with_db(rsub.add_parser(name))
        if name == "stats":
            continue
        r.add_argument("--crawled", help="url<TAB>depth file (default: read the store)")
        r.add_argument("--exact", action="store_true", help="recompute BFS depths from stored links")
        r.add_argument("--targets", help="url<TAB>tweet_count file")
        r.add_argument("--tweets", help="timestamp<TAB>author<TAB>text file")
        r.add_argument("--mapping", help="short<TAB>effective URL file")
        r.add_argument("--format", choices=["table", "jsonl"], default="table")
        if name == "depth-coverage":
            r.add_argument("--k", type=int, default=100)
            r.add_argument("--clamp-k", action="store_true", help="use min(k, #targets)")
            r.add_argument("--unit", choices=["url", "domain"], default="url")
        else:
            r.add_argument("--buckets", default="1,2,5,10,20,50", help="increasing lower edges")
            r.add_argument("--plot-data", help="write x<TAB>y pairs here")
    p.set_defaults(func=cmd_report)

    p = with_db(sub.add_parser("export", help="dump crawled depths, edges and seeds as text files"))
    p.add_argument("out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("mockweb", help="generate and serve a synthetic web")
    p.add_argument("spec", help="INI file with a [mockweb] section")
    p.add_argument("--bind", default="127.0.0.1:8080")
    p.add_argument("--out", default=None, help="directory for manifest, edges and seeds")
    p.set_defaults(func=cmd_mockweb)

    p = sub.add_parser("compile-strategy", help="print the strategy as PL/pgSQL scoring functions")
    p.add_argument("--strategy", required=True)
    p.set_defaults(func=cmd_compile_strategy)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if argv and argv[0] == "report" and not {"-h", "--help"} & set(argv):
        rest = [a for a in argv[1:] if not a.startswith("-")]
        if not rest or rest[0] not in REPORTS:
            _err(f"unknown report; choose one of: {', '.join(REPORTS)}")
            print(f"usage: yesql-crawler report {{{','.join(REPORTS)}}} ...", file=sys.stderr)
            return EXIT_UNKNOWN_SUBCOMMAND
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging(args.log_level)
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (InsufficientPrivilege, SchemaTooNew) as exc:
        _err(f"store refused: {exc}")
        return EXIT_USAGE
    except StoreUnavailable as exc:
        _err(f"store unavailable: {exc}")
        return EXIT_ENV
    except AddressInUse as exc:
        _err(str(exc))
        return EXIT_ENV
    except analytics.EmptyTargets as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
