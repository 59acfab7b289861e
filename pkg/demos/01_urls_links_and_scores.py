"""
URLs, anchor contexts and keyword scores
========================================

Every URL the crawler sees is canonicalized first, so that spelling
variants of one page collapse into a single frontier row. Links are pulled
out of HTML together with the words around them, and both the URL and those
words are scored against a keyword strategy.
"""
from yesql_crawler.extractor import extract_links
from yesql_crawler.scoring import figure_strategy, parse_strategy, score_link, score_url
from yesql_crawler.urlkit import canonicalize, domain_of

# Case, default ports, dot segments and fragments all disappear.
for raw in ["HTTP://Example.FR:80/a/../b#x", "http://example.fr/b", "http://EXAMPLE.fr/./b#top"]:
    print(f"{raw:35} -> {canonicalize(raw)}")

# Relative links resolve against the page they came from.
base = canonicalize("http://site.fr/dir/page1")
print(canonicalize("/page2", base), canonicalize("page3", base))

print(domain_of("http://www.lemonde.fr/politique"))

# Links come with their anchor text plus up to ten words on each side.
html = b"""<html><body>
<p>Our newsroom has spent the whole week checking numbers. Read the keyword1
report on <a href="/report">the latest figures</a> before the debate tonight.</p>
<p>Sports, weather and every other topic we cover this season can be found
<a href="http://other.com/">elsewhere on the network</a> as usual, updated hourly by our staff.</p>
</body></html>"""
links = extract_links(html, "text/html; charset=utf-8")
for link in links:
    print(f"{link.target_raw:20} | {link.context}")

# The reference strategy: +1 for .fr hosts, keyword1 is worth 2 in a URL and
# 1 in link text, keyword2 is worth 1 in either place.
strategy = figure_strategy()
print("url scores ", [score_url(u, strategy) for u in
                      ["http://site.fr/keyword1.html", "http://site.com/keyword1", "http://site.fr/"]])
print("link scores", [score_link(link.context, strategy) for link in links])

# A term counts once however often it appears.
print("repeated   ", score_link("keyword1 keyword1 keyword1", strategy))

# Strategies can also be written as small text files.
custom = parse_strategy("tld fr 1\nrule 3 2 election\nrule 1 1 candidat\n")
print("custom     ", score_url("http://www.site.fr/election-2012/candidats", custom))

# URLs are scored as serialized, so a non-ASCII letter stays percent-encoded
# and no longer matches: only the .fr bonus is left here.
print("encoded    ", canonicalize("http://www.site.fr/Élection"), score_url("http://www.site.fr/Élection", custom))
