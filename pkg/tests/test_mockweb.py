import hashlib
import http.client
import socket
import threading

import networkx as nx
import pytest

from helpers import wait_for_log
from yesql_crawler.errors import AddressInUse, InvalidSpec
from yesql_crawler.mockweb import (
    KeywordRegion, MockWebSpec, bfs_depths, bundle_from_graph, generate, load_spec, parse_spec,
    read_edges, read_manifest, serve, write_bundle,
)


def get(handle, url):
    host, _, path = url.removeprefix("http://").partition("/")
    conn = http.client.HTTPConnection(*handle.address, timeout=10)
    try:
        conn.request("GET", "/" + path, headers={"Host": host})
        resp = conn.getresponse()
        return resp.status, resp.getheader("Location"), resp.read()
    finally:
        conn.close()


def test_same_spec_same_bundle():
    a = generate(MockWebSpec(seed=1, page_count=100))
    b = generate(MockWebSpec(seed=1, page_count=100))
    assert a.edges == b.edges and a.depths == b.depths and a.nodes == b.nodes
    assert {u: p.body for u, p in a.pages.items()} == {u: p.body for u, p in b.pages.items()}
    c = generate(MockWebSpec(seed=2, page_count=100))
    assert c.edges != a.edges


def test_pinned_output():
    # guards against silent changes in generation across releases
    b = generate(MockWebSpec(seed=1, page_count=100))
    assert len(b.edges) == 382
    assert b.seeds == ["http://www.site0.fr/p0.html"]
    assert len(b.reachable) == 98
    h = hashlib.sha256()
    for u in b.nodes:
        h.update(u.encode())
        h.update(b.pages[u].body)
    assert h.hexdigest() == "939b2c9a125c43060739a3fced79dd276c7eb848c7d270203291d97a50394d84"


def test_chain_topology():
    b = bundle_from_graph([("http://a.fr/", "http://b.fr/"), ("http://b.fr/", "http://c.fr/")], ["http://a.fr/"])
    assert b.depths == {"http://a.fr/": 0, "http://b.fr/": 1, "http://c.fr/": 2}


def test_keyword_share():
    spec = MockWebSpec(seed=5, page_count=1000, domain_count=20,
                       keyword_regions=(KeywordRegion("keyword1", 0.1, "fr"),))
    b = generate(spec)
    kw = b.keyword_pages["keyword1"]
    assert len(kw) == 100
    assert all(u.split("/")[2].endswith(".fr") and "keyword1" in u for u in kw)


def test_manifest_matches_independent_bfs():
    b = generate(MockWebSpec(seed=9, page_count=1000, domain_count=25, redirect_chains=(1, 3),
                             error_pages={404: 0.02, 500: 0.01}))
    g = nx.DiGraph(b.edges)
    g.add_nodes_from(b.seeds)
    oracle = {}
    for s in b.seeds:
        for n, d in nx.single_source_shortest_path_length(g, s).items():
            oracle[n] = min(d, oracle.get(n, d))
    assert b.depths == oracle


def test_error_pages_have_no_links():
    b = generate(MockWebSpec(seed=3, page_count=200, error_pages={404: 0.05}))
    errors = {u for u, p in b.pages.items() if p.status == 404}
    assert len(errors) == 10
    assert not any(s in errors for s, _ in b.edges)


def test_redirect_heads_inherit_final_links():
    b = generate(MockWebSpec(seed=4, page_count=60, redirect_chains=(2,)))
    head = next(u for u in b.pages if "/go/0/0" in u)
    hop = b.pages[head]
    assert hop.status == 302
    nxt = b.pages[hop.location]
    assert nxt.location is not None  # second hop
    final = nxt.location
    assert {t for s, t in b.edges if s == head} == {t for s, t in b.edges if s == final}


def test_write_and_read(tmp_path, small_web):
    manifest = write_bundle(small_web, tmp_path)
    assert read_manifest(manifest) == small_web.depths
    assert read_edges(tmp_path / "edges.tsv") == small_web.edges
    assert (tmp_path / "seeds.txt").read_text().split() == small_web.seeds
    text = manifest.read_text()
    assert "# prng MT19937" in text and "# seed 7" in text


def test_bfs_depths_diamond():
    edges = [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d"), ("d", "e")]
    assert bfs_depths(edges, ["a"]) == {"a": 0, "b": 1, "c": 1, "d": 2, "e": 3}


@pytest.mark.parametrize("kwargs", [
    dict(keyword_regions=(KeywordRegion("k", 1.5, "fr"),)),
    dict(keyword_regions=(KeywordRegion("k", 0.6, "fr"), KeywordRegion("j", 0.6, "fr"))),
    dict(keyword_regions=(KeywordRegion("k", 0.1, "xyz"),)),
    dict(error_pages={404: 1.2}),
    dict(error_pages={200: 0.1}),
    dict(page_count=0),
    dict(domain_count=500, page_count=10),
    dict(redirect_chains=(0,)),
])
def test_invalid_spec(kwargs):
    with pytest.raises(InvalidSpec):
        generate(MockWebSpec(**kwargs))


def test_spec_file(tmp_path):
    text = """[mockweb]
seed = 42
page_count = 300
domain_count = 12
seed_pages = 3
tlds = fr, com
keyword_regions = keyword1:0.10:fr, keyword2:0.05:com
redirect_chains = 1, 2
error_pages = 404:0.02, 500:0.01
latency = 0.001
"""
    path = tmp_path / "spec.ini"
    path.write_text(text)
    spec = load_spec(path)
    assert spec.seed == 42 and spec.tlds == ("fr", "com") and spec.error_pages == {404: 0.02, 500: 0.01}
    assert spec.keyword_regions[1] == KeywordRegion("keyword2", 0.05, "com")
    for bad in ["[other]\nseed=1", "[mockweb]\nbogus = 1", "[mockweb]\nseed = one",
                "[mockweb]\nkeyword_regions = k:2:fr", "not ini"]:
        with pytest.raises(InvalidSpec):
            parse_spec(bad)


# -- serving ------------------------------------------------------------------

def test_serves_exact_bytes(small_server, small_web):
    url = small_web.seeds[0]
    status, _, body = get(small_server, url)
    assert status == 200 and body == small_web.pages[url].body


def test_serves_errors_and_redirects(small_server, small_web):
    err = next(u for u, p in small_web.pages.items() if p.status == 404)
    assert get(small_server, err)[0] == 404
    assert get(small_server, "http://www.site0.fr/never-generated")[0] == 404
    head = next(u for u, p in small_web.pages.items() if p.location)
    status, location, body = get(small_server, head)
    assert status == 302 and location and body == b""
    status, _, robots = get(small_server, "http://www.site0.fr/robots.txt")
    assert status == 200 and b"Disallow: /private/" in robots


def test_access_log(small_web):
    with serve(small_web) as h:
        get(h, small_web.seeds[0])
        (rec,) = wait_for_log(h, 1)
        assert rec.host == small_web.seeds[0].split("/")[2] and rec.status == 200 and rec.end >= rec.start


def test_gauge_reads_twenty(small_web):
    with serve(small_web, latency=0.3) as h:
        barrier = threading.Barrier(20)

        def hit():
            barrier.wait()
            get(h, small_web.seeds[0])

        threads = [threading.Thread(target=hit) for _ in range(20)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert h.gauge_max == 20 and len(wait_for_log(h, 20)) == 20
        h.server.reset_stats()
        assert h.gauge_max == 0 and h.access_log == []


def test_address_in_use(small_web):
    holder = socket.socket()
    holder.bind(("127.0.0.1", 0))
    holder.listen(1)
    try:
        with pytest.raises(AddressInUse):
            serve(small_web, ("127.0.0.1", holder.getsockname()[1]))
    finally:
        holder.close()
