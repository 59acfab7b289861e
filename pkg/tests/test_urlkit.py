import unicodedata

import pytest
from hypothesis import given, settings, strategies as st

from yesql_crawler.errors import MalformedUrl, UnsupportedScheme
from yesql_crawler.urlkit import (
    CanonicalUrl, canonicalize, domain_of, normalize_text, remove_dot_segments, url_top,
)


def test_canonicalize_examples():
    assert str(canonicalize("HTTP://Example.FR:80/a/../b#x")) == "http://example.fr/b"
    base = canonicalize("http://site.fr/dir/page1")
    assert str(canonicalize("/page2", base)) == "http://site.fr/page2"
    with pytest.raises(UnsupportedScheme):
        canonicalize("javascript:void(0)")


@pytest.mark.parametrize("raw", ["mailto:a@b.fr", "ftp://x.org/f", "data:text/html,hi"])
def test_other_schemes_rejected(raw):
    with pytest.raises(UnsupportedScheme):
        canonicalize(raw)


@pytest.mark.parametrize("raw", ["", "   ", "page2", "http://", "http://x.fr:99999/", "http://x.fr:ab/"])
def test_malformed(raw):
    with pytest.raises(MalformedUrl):
        canonicalize(raw)


def test_unsupported_is_a_malformed_subclass():
    # callers that only care about "unusable link" can catch one type
    assert issubclass(UnsupportedScheme, MalformedUrl)


def test_relative_forms():
    base = "http://site.fr/dir/page1?q=1"
    assert str(canonicalize("page3", base)) == "http://site.fr/dir/page3"
    assert str(canonicalize("../up", base)) == "http://site.fr/up"
    assert str(canonicalize("?q=2", base)) == "http://site.fr/dir/page1?q=2"
    assert str(canonicalize("//other.fr/x", base)) == "http://other.fr/x"
    assert str(canonicalize("#frag", base)) == "http://site.fr/dir/page1?q=1"


def test_ports_and_https():
    assert canonicalize("https://a.fr:443/").port is None
    assert canonicalize("https://a.fr:80/").port == 80
    assert str(canonicalize("http://a.fr:8080")) == "http://a.fr:8080/"


def test_trailing_slash_preserved():
    assert canonicalize("http://a.fr/dir") != canonicalize("http://a.fr/dir/")


def test_host_forms():
    assert canonicalize("http://user:pw@A.fr./x").host == "a.fr"
    assert canonicalize("http://bücher.de/").host == "xn--bcher-kva.de"
    assert canonicalize("http://[::1]:8000/").host == "[::1]"


def test_percent_normalization():
    u = canonicalize("http://a.fr/%7euser/%2e%2e/caf%c3%a9 x?q=%3d&r=é")
    # %7e and %2e decode (unreserved), so the ".." then consumes "~user"
    assert u.path == "/caf%C3%A9%20x"
    assert u.query == "q=%3D&r=%C3%A9"


def test_remove_dot_segments_rfc_examples():
    # RFC 3986 section 5.2.4 worked examples
    assert remove_dot_segments("/a/b/c/./../../g") == "/a/g"
    assert remove_dot_segments("mid/content=5/../6") == "mid/6"


def test_equivalent_forms_collapse():
    forms = ["http://EXAMPLE.fr/p", "http://example.fr:80/p", "http://example.fr/p#top", "HTTP://example.FR/p#"]
    assert len({canonicalize(f) for f in forms}) == 1


def test_url_top_examples():
    assert url_top(canonicalize("http://www.lemonde.fr/politique")) == "fr"
    assert url_top(canonicalize("http://example.com/")) == "com"
    assert url_top(canonicalize("http://a.co.uk/")) == "uk"


def test_domain_of():
    d = domain_of(canonicalize("http://www.lemonde.fr/politique"))
    assert (d.registrable_domain, d.tld) == ("lemonde.fr", "fr")
    assert domain_of("http://a.co.uk/").registrable_domain == "co.uk"
    assert domain_of("http://localhost/").registrable_domain == "localhost"
    assert domain_of("http://10.0.0.1/").registrable_domain == "10.0.0.1"


def test_normalize_text_examples():
    assert normalize_text("Élection Présidentielle") == "election presidentielle"
    assert normalize_text("") == ""
    assert normalize_text("ABC  \t def") == "abc def"
    assert normalize_text(b"caf\xc3\xa9 \xff") == "cafe �"


# -- properties ---------------------------------------------------------------

_label = st.from_regex(r"[A-Za-z0-9](?:[A-Za-z0-9-]{0,8}[A-Za-z0-9])?", fullmatch=True)
_seg = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc"), blacklist_characters="/?#\\"), max_size=8)


@st.composite
def raw_urls(draw):
    scheme = draw(st.sampled_from(["http", "HTTP", "https", "Https"]))
    host = ".".join(draw(st.lists(_label, min_size=1, max_size=3)))
    port = draw(st.sampled_from(["", ":80", ":443", ":8080"]))
    segs = draw(st.lists(st.one_of(_seg, st.sampled_from([".", "..", "%2e%2E", "%41"])), max_size=5))
    query = draw(st.one_of(st.just(""), st.text(max_size=10).map(lambda q: "?" + q.replace("#", ""))))
    frag = draw(st.sampled_from(["", "#", "#x"]))
    return f"{scheme}://{host}{port}/" + "/".join(segs) + query + frag


@settings(max_examples=300, deadline=None)
@given(raw_urls())
def test_canonicalize_idempotent(raw):
    try:
        once = canonicalize(raw)
    except MalformedUrl:
        return
    twice = canonicalize(str(once))
    assert twice == once
    assert once.scheme in ("http", "https")
    assert once.host and once.host == once.host.lower()
    assert "#" not in str(once)


@settings(max_examples=200, deadline=None)
@given(raw_urls(), st.sampled_from(["#a", "#"]))
def test_fragment_and_case_irrelevant(raw, frag):
    try:
        a = canonicalize(raw)
    except MalformedUrl:
        return
    head = raw.split("#", 1)[0]
    scheme, rest = head.split("://", 1)
    host, _, tail = rest.partition("/")
    assert canonicalize(f"{scheme.upper()}://{host.upper()}/{tail}{frag}") == a


@settings(max_examples=300, deadline=None)
@given(st.text())
def test_normalize_text_properties(s):
    out = normalize_text(s)
    assert normalize_text(out) == out
    assert out == out.lower()
    assert not any(unicodedata.combining(ch) for ch in out)
    assert "  " not in out and out == out.strip()


def test_canonical_url_is_hashable_value():
    a = CanonicalUrl("http", "a.fr", None, "/")
    assert a == canonicalize("http://a.fr") and hash(a) == hash(canonicalize("http://A.fr/"))


def test_only_c0_and_space_trimmed():
    # U+0085 is Unicode whitespace but not URL padding
    assert canonicalize("http://a.fr/?\x85").query == "%C2%85"
    assert str(canonicalize(" \x00http://a.fr/x\x1f ")) == "http://a.fr/x"
