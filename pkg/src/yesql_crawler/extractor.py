"""Hyperlink and anchor-context extraction from HTML bodies."""
from __future__ import annotations

import codecs
import re
from dataclasses import dataclass
from email.message import Message
from html.parser import HTMLParser
from typing import Optional, Union

CONTEXT_WORDS = 10
MAX_CONTEXT_CHARS = 512
HTML_TYPES = frozenset({"text/html", "application/xhtml+xml"})
_SKIP_TAGS = frozenset({"script", "style", "noscript", "template"})
_META_CHARSET = re.compile(rb"""<meta[^>]+charset\s*=\s*["']?\s*([A-Za-z0-9_.:-]+)""", re.I)


@dataclass(frozen=True)
class ExtractedLink:
    target_raw: str
    context: str

    def __iter__(self):
        # lets callers unpack (target, context) pairs directly
        return iter((self.target_raw, self.context))


def _media_type(content_type: Optional[str]) -> tuple[Optional[str], Optional[str]]:
    if not content_type:
        return None, None
    msg = Message()
    msg["Content-Type"] = content_type
    return msg.get_content_type().lower(), msg.get_param("charset")


def _valid_codec(name) -> Optional[str]:
    if not name or not isinstance(name, str):
        return None
    try:
        return codecs.lookup(name.strip()).name
    except LookupError:
        return None


def decode_body(body: bytes, content_type: Optional[str] = None) -> str:
    """Header charset, then meta-declared charset, then UTF-8 with replacement."""
    _, charset = _media_type(content_type)
    codec = _valid_codec(charset)
    if codec is None:
        m = _META_CHARSET.search(body[:4096])
        if m:
            codec = _valid_codec(m.group(1).decode("ascii", "replace"))
    try:
        return body.decode(codec or "utf-8", "replace")
    except Exception:
        return body.decode("utf-8", "replace")


def is_html(content_type: Optional[str]) -> bool:
    media, _ = _media_type(content_type)
    return media is None or media in HTML_TYPES


class _LinkParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.words: list[str] = []
        self.anchors: list[list] = []  # [href, start_word, end_word]
        self._open: Optional[list] = None
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
            return
        if tag == "a":
            self._close_anchor()
            href = dict(attrs).get("href")
            if href is not None and href.strip():
                self._open = [href.strip(), len(self.words), None]
                self.anchors.append(self._open)

    def handle_startendtag(self, tag, attrs):
        if tag == "a":
            self.handle_starttag(tag, attrs)
            self._close_anchor()
        elif tag not in _SKIP_TAGS:
            self.handle_starttag(tag, attrs)

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag == "a":
            self._close_anchor()

    def handle_data(self, data):
        if not self._skip_depth:
            self.words.extend(data.split())

    def _close_anchor(self):
        if self._open is not None:
            self._open[2] = len(self.words)
            self._open = None

    def finish(self):
        try:
            self.close()
        except Exception:
            pass
        self._close_anchor()


def _parse(body: bytes, content_type: Optional[str]) -> Optional[_LinkParser]:
    if not body or not is_html(content_type):
        return None
    parser = _LinkParser()
    try:
        parser.feed(decode_body(body, content_type))
    except Exception:
        pass
    parser.finish()
    return parser


def _window(words: list[str], start: int, end: int) -> str:
    context = " ".join(words[start:end])[:MAX_CONTEXT_CHARS]
    before = words[max(0, start - CONTEXT_WORDS):start]
    after = words[end:end + CONTEXT_WORDS]
    # grow outward one word at a time, nearest first; a side stops at its first overflow
    grow_before, grow_after = True, True
    for i in range(max(len(before), len(after))):
        if grow_before and i < len(before):
            candidate = f"{before[-1 - i]} {context}" if context else before[-1 - i]
            grow_before = len(candidate) <= MAX_CONTEXT_CHARS
            if grow_before:
                context = candidate
        if grow_after and i < len(after):
            candidate = f"{context} {after[i]}" if context else after[i]
            grow_after = len(candidate) <= MAX_CONTEXT_CHARS
            if grow_after:
                context = candidate
    return context


def extract_links(body: Union[bytes, str], content_type: Optional[str] = "text/html", base=None) -> list[ExtractedLink]:
    """One :class:`ExtractedLink` per ``<a href>``, in document order.

    The context is the anchor text plus up to ten words either side, capped
    at 512 characters. Hrefs are returned as written; resolving them against
    ``base`` is the frontier's job.
    """
    if isinstance(body, str):
        body = body.encode("utf-8")
    parser = _parse(body, content_type)
    if parser is None:
        return []
    return [ExtractedLink(href, _window(parser.words, start, end))
            for href, start, end in parser.anchors]


def page_text(body: Union[bytes, str], content_type: Optional[str] = "text/html") -> str:
    """Tag-stripped, entity-decoded, whitespace-normalized text."""
    if isinstance(body, str):
        body = body.encode("utf-8")
    parser = _parse(body, content_type)
    if parser is None:
        return ""
    return " ".join(parser.words)
