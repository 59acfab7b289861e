"""A focused web crawler whose only coordination point is a SQL store."""

from .analytics import (
    CoverageReport,
    TweetUrlSet,
    coverage_by_depth,
    coverage_by_frequency,
    exact_depths,
    ingest_tweets,
)
from .errors import (
    AddressInUse,
    EmptyTargets,
    ExpiredClaim,
    InsufficientPrivilege,
    InvalidSpec,
    MalformedUrl,
    StoreUnavailable,
    UnknownToken,
    UnsupportedScheme,
)
from .extractor import ExtractedLink, extract_links, page_text
from .fetcher import FetchLimits, FetchOutcome, Fetcher, PolitenessGate, PolitenessPolicy, fetch
from .frontier import CrawlBatch, Frontier, SourceResult, init_schema
from .mockweb import MockWebSpec, KeywordRegion, generate, serve
from .runtime import CrawlerInstance, InstanceConfig, RunSummary, run_instance
from .scoring import KeywordStrategy, Rule, combine_priority, figure_strategy, score_link, score_url
from .urlkit import CanonicalUrl, DomainName, canonicalize, normalize_text, url_top

__version__ = "0.1.0"
