from yesql_crawler.fetcher import Fetcher, FetchLimits, PolitenessPolicy

FAST_POLITENESS = PolitenessPolicy(min_interval=0.0, max_concurrent=64)


def mock_fetcher(handle, **kw):
    kw.setdefault("honor_robots", False)
    kw.setdefault("politeness", FAST_POLITENESS)
    kw.setdefault("limits", FetchLimits(timeout=10))
    return Fetcher(resolver=handle.resolver(), **kw)


def serial_crawl(dsn, bundle, strategy, batch=1, limit=None):
    """Crawl ``bundle`` with one claimer and no threads; return URLs in fetch order."""
    from yesql_crawler.extractor import extract_links
    from yesql_crawler.frontier import Frontier, SourceResult
    from yesql_crawler.mockweb import InProcessFetcher

    fetch = InProcessFetcher(bundle)
    order = []
    with Frontier(dsn) as fr:
        if not fr.seeds():
            fr.insert_seeds(bundle.seeds, strategy)
        while limit is None or len(order) < limit:
            b = fr.claim_batch(batch)
            if not b.urls:
                break
            results = []
            for rec in b:
                out = fetch(rec.url)
                links = [tuple(l) for l in extract_links(out.body, out.content_type)] if out.error is None else []
                results.append(SourceResult(rec.url, out, links))
                order.append(rec.url)
            fr.submit_discoveries(b.claim_token, results, strategy)
    return order


def wait_for_log(handle, n, timeout=5.0):
    """Access records land when the handler returns, which can trail the client's read."""
    import time

    deadline = time.monotonic() + timeout
    while len(handle.access_log) < n and time.monotonic() < deadline:
        time.sleep(0.01)
    return list(handle.access_log)
