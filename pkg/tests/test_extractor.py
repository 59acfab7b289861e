from hypothesis import given, settings, strategies as st

from yesql_crawler.extractor import MAX_CONTEXT_CHARS, decode_body, extract_links, page_text


def test_single_anchor():
    links = extract_links(b'<p><a href="/b">keyword1 news</a></p>', "text/html", "http://a.fr/")
    assert len(links) == 1
    target, context = links[0]
    assert target == "/b" and "keyword1 news" in context


def test_non_html_is_empty():
    assert extract_links(b"%PDF-1.4 <a href='/x'>x</a>", "application/pdf") == []
    assert page_text(b"<p>x</p>", "image/png") == ""


def test_repeated_href_not_deduplicated():
    body = b'<a href="/x">one</a> <a href="/x">two</a> <a href="/x">three</a>'
    assert [l.target_raw for l in extract_links(body)] == ["/x"] * 3


def test_document_order_and_skips():
    body = b"""<html><head><title>t</title><script>var a = '<a href="/js">no</a>';</script></head>
    <body><a href="/1">a</a><a name="anchor">no href</a><a href="">empty</a>
    <div><a href=/2>b</a></div><a href='/3'/></body></html>"""
    assert [l.target_raw for l in extract_links(body)] == ["/1", "/2", "/3"]


def test_context_window_ten_words_each_side():
    before = " ".join(f"b{i}" for i in range(15))
    after = " ".join(f"f{i}" for i in range(15))
    body = f"<p>{before} <a href='/t'>anchor text</a> {after}</p>".encode()
    (link,) = extract_links(body)
    words = link.context.split()
    assert words == [f"b{i}" for i in range(5, 15)] + ["anchor", "text"] + [f"f{i}" for i in range(10)]


def test_context_cap_keeps_contiguous_window():
    long_word = "w" * 300
    words = ["far", long_word, "near", "x", long_word + "y", "after", long_word + "z", "end"]
    body = f"<p>{' '.join(words[:3])} <a href='/t'>x</a> {' '.join(words[4:])}</p>".encode()
    (link,) = extract_links(body)
    assert len(link.context) <= MAX_CONTEXT_CHARS
    got = link.context.split()
    # nearest-first alternation takes "near" and the long word after; the long
    # word before then overflows, so nothing further left is ever spliced in
    assert got == ["near", "x", long_word + "y", "after"]
    start = words.index(got[0])
    assert words[start:start + len(got)] == got


def test_huge_anchor_text_is_capped():
    body = ("<a href='/t'>" + "word " * 400 + "</a>").encode()
    (link,) = extract_links(body)
    assert len(link.context) <= MAX_CONTEXT_CHARS


def test_context_does_not_cross_documents():
    first = extract_links(b"<p>alpha beta <a href='/1'>one</a></p>")
    second = extract_links(b"<p><a href='/2'>two</a> gamma</p>")
    assert first[0].context == "alpha beta one" and second[0].context == "two gamma"


def test_page_text_examples():
    assert page_text(b"<p>a&nbsp;b</p>") == "a b"
    assert page_text(b"") == ""
    assert page_text(b"<p>caf&eacute; &amp; <b>th\xc3\xa9</b></p>") == "café & thé"


def test_page_text_matches_generated_pages(small_web):
    checked = 0
    for page in small_web.pages.values():
        if page.status == 200 and page.text:
            assert page_text(page.body, page.content_type) == page.text
            checked += 1
    assert checked > 50


def test_charset_precedence():
    latin = "é".encode("latin-1")
    assert decode_body(latin, "text/html; charset=iso-8859-1") == "é"
    assert decode_body(b'<meta charset="iso-8859-1">' + latin) .endswith("é")
    assert decode_body(latin, "text/html; charset=bogus") == "�"
    assert decode_body("é".encode(), "text/html; charset=utf-8") == "é"


def test_missing_content_type_treated_as_html():
    assert len(extract_links(b"<a href='/x'>x</a>", None)) == 1


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=2000))
def test_never_throws_on_bytes(body):
    for link in extract_links(body, "text/html"):
        assert link.target_raw and len(link.context) <= MAX_CONTEXT_CHARS


_tag_soup = st.lists(st.sampled_from(["<a href='/x'>", "</a>", "<p>", "<script>", "</script>", "<!--", "-->",
                                      "text", " ", "&amp;", "&#x;", "<a href=\"", "<", ">", "keyword1"]), max_size=60)


@settings(max_examples=300, deadline=None)
@given(_tag_soup)
def test_never_throws_on_tag_soup(parts):
    body = "".join(parts).encode()
    for link in extract_links(body):
        assert link.target_raw and len(link.context) <= MAX_CONTEXT_CHARS
    page_text(body)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.from_regex(r"/[a-z0-9]{1,8}", fullmatch=True),
                          st.from_regex(r"[a-z]{1,6}( [a-z]{1,6}){0,2}", fullmatch=True)), max_size=12))
def test_every_href_once_in_order(anchors):
    body = "<html><body>" + " filler ".join(f'<a href="{h}">{t}</a>' for h, t in anchors) + "</body></html>"
    links = extract_links(body.encode())
    assert [l.target_raw for l in links] == [h for h, _ in anchors]
    for link, (_, text) in zip(links, anchors):
        assert text in link.context
