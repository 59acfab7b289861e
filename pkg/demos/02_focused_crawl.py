"""
A focused crawl against a synthetic web
=======================================

A seeded synthetic web is served on a local port. One tenth of its pages
(all under .fr) mention keyword1. We crawl it twice from the same seeds, once
with the keyword strategy and once with all weights at zero, and compare how
many keyword pages turn up in the first tenth of the fetches.
"""
import tempfile
from pathlib import Path

from yesql_crawler.fetcher import Fetcher, PolitenessPolicy
from yesql_crawler.frontier import Frontier, init_schema
from yesql_crawler.mockweb import KeywordRegion, MockWebSpec, generate, serve
from yesql_crawler.runtime import InstanceConfig, run_instance
from yesql_crawler.scoring import ZERO_STRATEGY, figure_strategy

web = generate(MockWebSpec(seed=4, page_count=1000, domain_count=20, seed_pages=32,
                           keyword_regions=(KeywordRegion("keyword1", 0.1, "fr"),)))
keyword_pages = set(web.keyword_pages["keyword1"])
print(f"{len(web.pages)} resources, {len(web.reachable)} reachable, {len(keyword_pages)} keyword pages")

# Politeness is relaxed because every host lives on the same local server.
polite = PolitenessPolicy(min_interval=0.0, max_concurrent=20)
workdir = Path(tempfile.mkdtemp())

with serve(web) as server:
    route = server.resolver()
    for name, strategy in [("keyword strategy", figure_strategy()), ("zero weights", ZERO_STRATEGY)]:
        db = workdir / f"{name.replace(' ', '_')}.db"
        init_schema(db)
        with Frontier(db) as frontier:
            frontier.insert_seeds(web.seeds, strategy)
            config = InstanceConfig(batch_size=20, parallel_fetches=20, idle_shutdown=0.2, politeness=polite)
            fetcher = Fetcher(resolver=route, honor_robots=True, politeness=polite)
            summary = run_instance(config, frontier, strategy, fetcher)
        head = summary.fetch_log[: len(summary.fetch_log) // 10]
        share = sum(url in keyword_pages for url in head) / len(head)
        print(f"{name:17} fetched {summary.fetched:4} in {summary.wall_time:4.1f}s, "
              f"keyword share of first {len(head)}: {share:.0%}")

    print(f"peak concurrent connections seen by the server: {server.gauge_max}")
