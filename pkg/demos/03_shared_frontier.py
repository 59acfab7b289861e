"""
Several crawler instances, one frontier
=======================================

Instances never talk to each other. Each one claims batches of URLs from
the shared store under a lease, fetches them, and writes the results back.
Here three instances share a frontier; afterwards no page has been fetched
twice and the union of their logs is the whole reachable web.

The second half simulates a crash: a batch is claimed and never submitted.
Its lease runs out, the rows go back to pending, and a fresh instance
finishes the job.
"""
import tempfile
import time
from pathlib import Path

from yesql_crawler.frontier import Frontier, init_schema
from yesql_crawler.mockweb import InProcessFetcher, MockWebSpec, generate
from yesql_crawler.runtime import InstanceConfig, run_instance, run_instances
from yesql_crawler.scoring import figure_strategy

web = generate(MockWebSpec(seed=12, page_count=800, domain_count=16, seed_pages=4))
strategy = figure_strategy()
db = Path(tempfile.mkdtemp()) / "shared.db"
init_schema(db)
with Frontier(db) as frontier:
    frontier.insert_seeds(web.seeds, strategy)

configs = [InstanceConfig(instance_id=f"worker-{i}", idle_shutdown=0.2) for i in range(3)]
summaries = run_instances(configs, db, strategy, lambda cfg: InProcessFetcher(web))
for s in summaries:
    print(f"{s.instance_id}: fetched {s.fetched:4} in {s.batches} batches")
logs = [set(s.fetch_log) for s in summaries]
print("overlap between instances:", sum(map(len, logs)) - len(set().union(*logs)))
print("everything reachable fetched:", set().union(*logs) == web.reachable)

# -- a crash --------------------------------------------------------------------
db = Path(tempfile.mkdtemp()) / "crashed.db"
init_schema(db)
with Frontier(db) as frontier:
    frontier.insert_seeds(web.seeds, strategy)
    lost = frontier.claim_batch(4, lease=0.5, instance_id="doomed")
    print(f"\n'doomed' claimed {len(lost)} seeds and vanished;", frontier.frontier_stats()["claimed"], "rows stuck")

time.sleep(0.6)
with Frontier(db) as frontier:
    summary = run_instance(InstanceConfig(instance_id="rescuer", idle_shutdown=0.2), frontier, strategy,
                           InProcessFetcher(web))
    print(f"rescuer reclaimed {summary.reclaimed_leases} expired rows and fetched {summary.fetched}")
    print("final state:", {k: v for k, v in frontier.frontier_stats().items() if k in ("pending", "claimed", "fetched")})
