"""Additive focus strategies.

A strategy is a list of keyword rules, each carrying one weight applied when
the pattern occurs in the (normalized) URL and one applied when it occurs in
a link's anchor context, plus per-TLD bonuses for the URL score. Each rule
fires at most once per text: presence, not occurrence count.

Strategy files are line oriented::

    # comment
    tld   fr 1
    rule  2 1 keyword1
    rule  1 1 keyword2

``rule <url_weight> <link_weight> <pattern>``: the pattern is the rest of the
line, a regular expression matched with ``re.search`` against
:func:`~yesql_crawler.urlkit.normalize_text` output, so write it in lowercase
without diacritics.
"""
from __future__ import annotations

import re
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Union

from .urlkit import CanonicalUrl, canonicalize, normalize_text, url_top


@dataclass(frozen=True)
class Rule:
    pattern: str
    url_weight: int
    link_weight: int

    def __post_init__(self):
        if self.url_weight < 0 or self.link_weight < 0:
            raise ValueError(f"negative weight in rule {self.pattern!r}")
        re.compile(self.pattern)


@dataclass(frozen=True)
class KeywordStrategy:
    rules: tuple[Rule, ...] = ()
    tld_bonuses: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "tld_bonuses", dict(self.tld_bonuses))
        for tld, bonus in self.tld_bonuses.items():
            if bonus < 0:
                raise ValueError(f"negative bonus for tld {tld!r}")
        object.__setattr__(self, "_compiled", tuple(re.compile(r.pattern) for r in self.rules))

    def __hash__(self):
        return hash((self.rules, tuple(sorted(self.tld_bonuses.items()))))

    def scaled(self, factor: int) -> "KeywordStrategy":
        """Same strategy with every weight multiplied by ``factor``."""
        if factor <= 0:
            raise ValueError("factor must be positive")
        return KeywordStrategy(
            rules=[Rule(r.pattern, r.url_weight * factor, r.link_weight * factor) for r in self.rules],
            tld_bonuses={t: b * factor for t, b in self.tld_bonuses.items()},
        )


ZERO_STRATEGY = KeywordStrategy()


def figure_strategy(weighted_tld: str = "fr") -> KeywordStrategy:
    """The two-keyword strategy: tld bonus 1, keyword1 2/1, keyword2 1/1."""
    return KeywordStrategy(
        rules=[Rule("keyword1", 2, 1), Rule("keyword2", 1, 1)],
        tld_bonuses={weighted_tld: 1},
    )


def score_url(url: Union[CanonicalUrl, str], strategy: KeywordStrategy) -> int:
    url = canonicalize(url)
    score = strategy.tld_bonuses.get(url_top(url), 0)
    text = normalize_text(str(url))
    for rule, rx in zip(strategy.rules, strategy._compiled):
        if rule.url_weight and rx.search(text):
            score += rule.url_weight
    return score


def score_link(context: str, strategy: KeywordStrategy) -> int:
    text = normalize_text(context or "")
    score = 0
    for rule, rx in zip(strategy.rules, strategy._compiled):
        if rule.link_weight and rx.search(text):
            score += rule.link_weight
    return score


@dataclass(frozen=True, order=True)
class Priority:
    value: int

    def __int__(self) -> int:
        return self.value


def combine_priority(url_score: int, link_scores: Iterable[int]) -> Priority:
    return Priority(url_score + sum(link_scores))


# -- strategy files ---------------------------------------------------------


class StrategyFormatError(ValueError):
    pass


def parse_strategy(text: str) -> KeywordStrategy:
    rules: list[Rule] = []
    bonuses: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        kind, _, rest = stripped.partition(" ")
        try:
            if kind == "tld":
                tld, bonus = rest.split()
                bonuses[tld.lower().lstrip(".")] = int(bonus)
            elif kind == "rule":
                uw, lw, pattern = rest.strip().split(None, 2)
                rules.append(Rule(pattern, int(uw), int(lw)))
            else:
                raise ValueError(f"unknown directive {kind!r}")
        except (ValueError, re.error) as exc:
            raise StrategyFormatError(f"line {lineno}: {exc}") from exc
    return KeywordStrategy(rules=rules, tld_bonuses=bonuses)


def load_strategy(path: Union[str, Path]) -> KeywordStrategy:
    return parse_strategy(Path(path).read_text(encoding="utf-8"))


def dump_strategy(strategy: KeywordStrategy) -> str:
    lines = [f"tld {tld} {bonus}" for tld, bonus in sorted(strategy.tld_bonuses.items())]
    lines += [f"rule {r.url_weight} {r.link_weight} {r.pattern}" for r in strategy.rules]
    return "\n".join(lines) + "\n"


# -- store-side installation -------------------------------------------------


def install_sqlite(conn: sqlite3.Connection, strategy: KeywordStrategy) -> None:
    """Register ``score_url(text)`` and ``score_link(text)`` SQL functions on ``conn``."""
    conn.create_function("score_url", 1, lambda u: score_url(u, strategy), deterministic=True)
    conn.create_function("score_link", 1, lambda c: score_link(c or "", strategy), deterministic=True)


def _sql_literal(s: str) -> str:
    return "'" + s.replace("'", "''") + "'"


def to_plpgsql(strategy: KeywordStrategy) -> str:
    """Emit equivalent PL/pgSQL ``ScoreURL``/``ScoreLink`` functions.

    Assumes a ``normalize(text)`` and ``url_top(url)`` already exist in the
    target database. PostgreSQL's ``substring(text, pattern)`` is NULL when
    the POSIX regex does not match, which gives the same presence test.
    """
    out = [
        "CREATE OR REPLACE FUNCTION",
        "ScoreURL(url url) RETURNS bigint AS",
        "$$",
        "DECLARE",
        "score INT;",
        "normurl TEXT;",
        "BEGIN",
        "normurl=normalize(CAST(url AS text));",
        "score=0;",
    ]
    for tld, bonus in sorted(strategy.tld_bonuses.items()):
        if bonus:
            out += [
                f"IF CAST(url_top(url) AS TEXT) ={_sql_literal(tld)} THEN",
                f"\tscore=score+{bonus};",
                "END IF;",
            ]
    for rule in strategy.rules:
        if rule.url_weight:
            out += [
                f"IF substring(normurl, {_sql_literal(rule.pattern)}) IS NOT NULL THEN",
                f"\tscore=score+{rule.url_weight};",
                "END IF;",
            ]
    out += ["RETURN score;", "END;", "$$ LANGUAGE plpgsql;", ""]
    out += [
        "CREATE OR REPLACE FUNCTION",
        "ScoreLink(context text) RETURNS int AS",
        "$$",
        "DECLARE",
        "score INT;",
        "normcontext TEXT;",
        "BEGIN",
        "normcontext=normalize(context);",
        "score=0;",
    ]
    for rule in strategy.rules:
        if rule.link_weight:
            out += [
                f"IF (substring(normcontext, {_sql_literal(rule.pattern)}) IS NOT NULL) THEN",
                f"\tscore = score +{rule.link_weight};",
                "END IF;",
            ]
    out += ["RETURN score;", "END;", "$$ LANGUAGE plpgsql;", ""]
    return "\n".join(out)

