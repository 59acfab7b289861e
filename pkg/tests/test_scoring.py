from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from yesql_crawler.frontier import init_schema
from yesql_crawler.mockweb import KeywordRegion, MockWebSpec, generate
from yesql_crawler.scoring import (
    ZERO_STRATEGY, KeywordStrategy, Rule, StrategyFormatError, combine_priority, dump_strategy,
    figure_strategy, load_strategy, parse_strategy, score_link, score_url, to_plpgsql,
)

from helpers import serial_crawl

VECTORS = Path(__file__).parent / "fixtures" / "score_vectors.tsv"


def load_vectors():
    rows = []
    for line in VECTORS.read_text(encoding="utf-8").splitlines():
        if line.startswith("#") or not line.strip():
            continue
        kind, text, expected = line.split("\t")
        rows.append((kind, text, int(expected)))
    return rows


def test_vector_file_shape():
    rows = load_vectors()
    assert len(rows) == 20
    assert {k for k, _, _ in rows} == {"url", "link"}


@pytest.mark.parametrize("kind,text,expected", load_vectors())
def test_score_vectors(kind, text, expected):
    s = figure_strategy()
    got = score_url(text, s) if kind == "url" else score_link(text, s)
    assert got == expected


def test_score_url_examples():
    s = figure_strategy()
    assert score_url("http://site.fr/keyword1.html", s) == 3
    assert score_url("http://site.com/nothing", s) == 0
    assert score_url("http://site.fr/keyword1-keyword2", s) == 4


def test_score_link_examples():
    s = figure_strategy()
    assert score_link("read keyword1 and keyword2", s) == 2
    assert score_link("", s) == 0
    assert score_link("keyword1 keyword1 keyword1", s) == 1


def test_combine_priority_examples():
    assert combine_priority(3, [2, 1]).value == 6
    assert combine_priority(0, []).value == 0
    assert combine_priority(1, [0, 0, 0]).value == 1


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        Rule("x", -1, 0)
    with pytest.raises(ValueError):
        KeywordStrategy(tld_bonuses={"fr": -2})


def test_zero_strategy_scores_nothing():
    zero = KeywordStrategy([Rule("keyword1", 0, 0)], {"fr": 0})
    for s in (ZERO_STRATEGY, zero):
        assert score_url("http://keyword1.fr/keyword1", s) == 0
        assert score_link("keyword1", s) == 0


def test_regex_patterns():
    s = KeywordStrategy([Rule(r"elect(ion|oral)", 1, 3)])
    assert score_link("Campagne Électorale", s) == 3
    assert score_url("http://x.com/election", s) == 1


_words = st.lists(st.sampled_from(["keyword1", "keyword2", "news", "Élection", "KEYWORD1", "fr"]), max_size=6)


@settings(max_examples=100, deadline=None)
@given(_words, st.lists(st.integers(0, 5), max_size=5), st.integers(0, 5))
def test_monotone_in_inbound_links(words, links, extra):
    base = combine_priority(score_link(" ".join(words), figure_strategy()), links).value
    assert combine_priority(score_link(" ".join(words), figure_strategy()), links + [extra]).value >= base


@settings(max_examples=100, deadline=None)
@given(_words)
def test_case_and_diacritic_invariance(words):
    s = figure_strategy()
    text = " ".join(words)
    assert score_link(text.upper(), s) == score_link(text.lower(), s)
    accented = text.replace("e", "é")
    assert score_link(accented, s) == score_link(text, s)
    assert score_url("http://x.fr/" + text.replace(" ", "-").upper(), s) == \
        score_url("http://x.fr/" + text.replace(" ", "-").lower(), s)


@settings(max_examples=50, deadline=None)
@given(_words, st.integers(1, 7))
def test_scaling_scales_scores(words, factor):
    s = figure_strategy()
    text = " ".join(words)
    assert score_link(text, s.scaled(factor)) == factor * score_link(text, s)


@pytest.mark.parametrize("seed", [3, 11])
def test_argmax_invariance_of_fetch_order(tmp_path, seed):
    bundle = generate(MockWebSpec(seed=seed, page_count=120, domain_count=6, seed_pages=2,
                                  keyword_regions=(KeywordRegion("keyword1", 0.1, "fr"),
                                                   KeywordRegion("keyword2", 0.1, "com"))))
    orders = []
    for factor in (1, 3):
        db = tmp_path / f"f{factor}.db"
        init_schema(db)
        orders.append(serial_crawl(db, bundle, figure_strategy().scaled(factor)))
    assert orders[0] == orders[1]
    assert len(orders[0]) == len(bundle.reachable)


def test_strategy_file_roundtrip(tmp_path):
    text = "# focus\ntld fr 1\nrule 2 1 keyword1\nrule 1 1 keyword2\n\nrule 0 4 elect(ion|oral) x\n"
    s = parse_strategy(text)
    assert s.tld_bonuses == {"fr": 1}
    assert [r.pattern for r in s.rules] == ["keyword1", "keyword2", "elect(ion|oral) x"]
    assert parse_strategy(dump_strategy(s)) == s
    p = tmp_path / "s.txt"
    p.write_text(dump_strategy(figure_strategy()))
    assert load_strategy(p) == figure_strategy()


@pytest.mark.parametrize("bad", ["tld fr", "rule 1 keyword", "rule -1 1 x", "boost 3 x", "rule 1 1 (unclosed"])
def test_strategy_file_errors(bad):
    with pytest.raises(StrategyFormatError):
        parse_strategy(bad)


def test_plpgsql_output_mirrors_strategy():
    sql = to_plpgsql(figure_strategy())
    assert "ScoreURL(url url) RETURNS bigint" in sql
    assert "ScoreLink(context text) RETURNS int" in sql
    assert "IF CAST(url_top(url) AS TEXT) ='fr' THEN" in sql
    assert "substring(normurl, 'keyword1') IS NOT NULL" in sql
    assert "score=score+2;" in sql
    assert sql.count("IS NOT NULL") == 4
    assert "''" in to_plpgsql(KeywordStrategy([Rule("l'etat", 1, 1)]))
