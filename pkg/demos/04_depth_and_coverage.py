"""
Crawl depth and tweet coverage
==============================

The frontier keeps a depth per URL: the fewest links followed from a seed
when the URL was found. It lowers a depth when a shorter path shows up, but
it does not push that improvement on to pages already discovered from it,
so a few stored depths can end up too large. The analytics module
recomputes exact depths from the stored link table and then measures how
much of a set of tweeted URLs the crawl covered at each depth, both per URL
and per domain.
"""
import random
import tempfile
from pathlib import Path

from yesql_crawler.analytics import (
    TweetUrlSet, coverage_by_depth, coverage_by_frequency, depth_disagreements, exact_depths,
    format_depth_table, format_frequency_table,
)
from yesql_crawler.frontier import Frontier, init_schema
from yesql_crawler.mockweb import InProcessFetcher, MockWebSpec, generate
from yesql_crawler.runtime import InstanceConfig, run_instance
from yesql_crawler.scoring import figure_strategy

web = generate(MockWebSpec(seed=21, page_count=1500, domain_count=30, seed_pages=3))
strategy = figure_strategy()
db = Path(tempfile.mkdtemp()) / "depth.db"
init_schema(db)
with Frontier(db) as frontier:
    frontier.insert_seeds(web.seeds, strategy)
    run_instance(InstanceConfig(idle_shutdown=0.2), frontier, strategy, InProcessFetcher(web))
    stored = frontier.depths()
    exact = exact_depths(frontier.edges(), frontier.seeds())

print("exact depths equal the generator's own BFS:", exact == web.depths)
off = depth_disagreements(stored, exact)
print(f"{len(off)} of {len(stored)} stored depths are too deep, e.g.", next(iter(off.items()), None))

# Pretend people tweeted pages from this web; popularity is heavy-tailed.
rng = random.Random(0)
tweeted = TweetUrlSet({url: max(1, int(rng.paretovariate(1.1))) for url in rng.sample(web.nodes, 200)})

# Only look at the part of the crawl within four links of the seeds.
shallow = {url: d for url, d in exact.items() if d <= 4}
print()
print(format_depth_table(coverage_by_depth(shallow, tweeted, k=20, unit="url")))
print(format_depth_table(coverage_by_depth(shallow, tweeted, k=20, unit="domain")))
print(format_frequency_table(coverage_by_frequency(shallow, tweeted, [1, 2, 5, 10])))
