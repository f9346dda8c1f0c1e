"""Crawl snapshot data model and elementary link computations.

Crawl and interval indices are zero-based throughout: interval ``i`` spans
crawls ``i`` and ``i + 1``, so a series of ``n`` crawls has ``n - 1``
intervals and the last one (``n - 2``) is the default prediction target.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, NamedTuple, Optional
from urllib.parse import urlsplit

import numpy as np

from .errors import InvalidArgumentError, MalformedInputError, MissingDataError

SEMANTIC_NORM_TOL = 1e-6


class LinkScope(enum.Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"

    @property
    def index(self) -> int:
        return 0 if self is LinkScope.INTERNAL else 1

    @property
    def short(self) -> str:
        return "int" if self is LinkScope.INTERNAL else "ext"

    @classmethod
    def parse(cls, value) -> "LinkScope":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        if key in ("internal", "int"):
            return cls.INTERNAL
        if key in ("external", "ext"):
            return cls.EXTERNAL
        raise InvalidArgumentError(f"unknown link scope {value!r}")


SCOPES = (LinkScope.INTERNAL, LinkScope.EXTERNAL)


def normalize_url(url: str) -> str:
    """Drop the fragment and trailing slashes of the path; keep the query."""
    if "#" in url:
        url = url.split("#", 1)[0]
    query = ""
    if "?" in url:
        url, query = url.split("?", 1)
        query = "?" + query
    stripped = url.rstrip("/")
    if stripped.endswith(":") or not stripped:
        # bare "scheme://" - leave it for the parser to reject
        stripped = url
    return stripped + query


@lru_cache(maxsize=1 << 20)
def split_url(url: str) -> tuple[str, str, str]:
    """Return ``(scheme, host, path)`` with scheme and host lower-cased."""
    try:
        parts = urlsplit(url)
        host = parts.hostname
    except ValueError as exc:
        raise MalformedInputError(f"malformed URL {url!r}: {exc}") from None
    if not parts.scheme or not host:
        raise MalformedInputError(f"malformed URL {url!r}: missing scheme or host")
    return parts.scheme.lower(), host, parts.path


def classify_link(source_url: str, target_url: str) -> LinkScope:
    """Internal iff the target shares the source's scheme and host.

    Host comparison is on the full host string, so ``www.a.com`` and
    ``a.com`` are different domains; an ``http`` link from an ``https`` page
    is external even when the hosts match.
    """
    s_scheme, s_host, _ = split_url(source_url)
    t_scheme, t_host, _ = split_url(target_url)
    if s_scheme == t_scheme and s_host == t_host:
        return LinkScope.INTERNAL
    return LinkScope.EXTERNAL


def url_depths(url: str) -> tuple[int, int]:
    """Path depth (non-empty path segments) and domain depth (host labels).

    A missing scheme is tolerated, e.g. ``domain.com/en/news/a/`` -> (3, 2).
    """
    if "://" not in url:
        url = "http://" + url
    _, host, path = split_url(url)
    path_depth = sum(1 for seg in path.split("/") if seg)
    return path_depth, len(host.split("."))


class NewOutlinks(NamedTuple):
    internal: frozenset
    external: frozenset

    def count(self, scope: LinkScope) -> int:
        return len(self.internal if scope is LinkScope.INTERNAL else self.external)


def new_outlinks(prev: Iterable[str], curr: Iterable[str], source_url: str) -> NewOutlinks:
    """Links present in ``curr`` but not in ``prev``, split by scope."""
    prev_n = {normalize_url(u) for u in prev}
    fresh = {normalize_url(u) for u in curr} - prev_n
    internal, external = [], []
    for url in fresh:
        if classify_link(source_url, url) is LinkScope.INTERNAL:
            internal.append(url)
        else:
            external.append(url)
    return NewOutlinks(frozenset(internal), frozenset(external))


def content_changed(digest_prev: bytes, digest_curr: bytes) -> bool:
    if not digest_prev or not digest_curr:
        raise MissingDataError("content digest is empty")
    return bytes(digest_prev) != bytes(digest_curr)


@dataclass(frozen=True)
class PageId:
    url: str
    id: int

    def __post_init__(self):
        split_url(self.url)


@dataclass(frozen=True, eq=False)
class PageSnapshot:
    """One page at one crawl time.

    ``outlinks`` is stored normalized (see :func:`normalize_url`).
    """

    page: PageId
    fetch_time: datetime
    outlinks: frozenset
    content_digest: bytes
    content_size: int
    text_size: int
    text_quality: float
    inlinks_int: Optional[int] = None
    inlinks_ext: Optional[int] = None
    semantic_vector: Optional[np.ndarray] = None
    pagerank: Optional[float] = None
    trustrank: Optional[float] = None

    def __post_init__(self):
        if self.fetch_time.tzinfo is None:
            raise MalformedInputError(f"{self.page.url}: fetch_time must be timezone-aware")
        if self.fetch_time.utcoffset() != timezone.utc.utcoffset(None):
            object.__setattr__(self, "fetch_time", self.fetch_time.astimezone(timezone.utc))
        if not self.content_digest:
            raise MissingDataError(f"{self.page.url}: empty content digest")
        if self.content_size < 1:
            raise MalformedInputError(f"{self.page.url}: content_size must be >= 1")
        if self.text_size < 0:
            raise MalformedInputError(f"{self.page.url}: text_size must be >= 0")
        if not 0.0 <= self.text_quality <= 1.0:
            raise MalformedInputError(f"{self.page.url}: text_quality outside [0, 1]")
        for name in ("inlinks_int", "inlinks_ext"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise MalformedInputError(f"{self.page.url}: {name} must be >= 0")
        for name in ("pagerank", "trustrank"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise MalformedInputError(f"{self.page.url}: {name} must be >= 0")
        if self.semantic_vector is not None:
            vec = np.asarray(self.semantic_vector, dtype=np.float64)
            if vec.ndim != 1 or abs(np.linalg.norm(vec) - 1.0) > SEMANTIC_NORM_TOL:
                raise MalformedInputError(f"{self.page.url}: semantic vector is not unit-norm")
            object.__setattr__(self, "semantic_vector", vec)
        links = self.outlinks
        if not isinstance(links, frozenset) or any("#" in u or u.endswith("/") for u in links):
            object.__setattr__(self, "outlinks", frozenset(normalize_url(u) for u in links))

    @property
    def url(self) -> str:
        return self.page.url

    def outlink_counts(self) -> tuple[int, int]:
        n_int = sum(1 for u in self.outlinks if classify_link(self.url, u) is LinkScope.INTERNAL)
        return n_int, len(self.outlinks) - n_int


@dataclass(frozen=True, eq=False)
class CrawlSeries:
    """Aligned snapshots of one page set across ``n >= 2`` crawls.

    ``snapshots[c][p]`` is page ``p`` at crawl ``c``. Derived arrays are
    computed lazily and cached; the series itself never changes.
    """

    pages: tuple
    crawl_times: tuple
    snapshots: tuple
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "pages", tuple(self.pages))
        object.__setattr__(self, "crawl_times", tuple(self.crawl_times))
        object.__setattr__(self, "snapshots", tuple(tuple(row) for row in self.snapshots))
        object.__setattr__(self, "metadata", dict(self.metadata))
        n = len(self.crawl_times)
        if n < 2:
            raise InvalidArgumentError("a crawl series needs at least 2 crawls")
        if any(b <= a for a, b in zip(self.crawl_times, self.crawl_times[1:])):
            raise InvalidArgumentError("crawl times must be strictly increasing")
        if len(self.snapshots) != n:
            raise InvalidArgumentError("one snapshot row per crawl is required")
        if len({p.url for p in self.pages}) != len(self.pages):
            raise InvalidArgumentError("page URLs must be unique")
        for i, page in enumerate(self.pages):
            if page.id != i:
                raise InvalidArgumentError("page ids must be dense and ordered")
        for row in self.snapshots:
            if len(row) != len(self.pages):
                raise InvalidArgumentError("every page needs a snapshot at every crawl")
            for snap, page in zip(row, self.pages):
                if snap.page != page:
                    raise InvalidArgumentError(f"snapshot/page mismatch for {page.url}")

    @property
    def n_crawls(self) -> int:
        return len(self.crawl_times)

    @property
    def n_intervals(self) -> int:
        return self.n_crawls - 1

    @property
    def n_pages(self) -> int:
        return len(self.pages)

    @property
    def urls(self) -> list:
        return [p.url for p in self.pages]

    @cached_property
    def url_index(self) -> dict:
        return {p.url: p.id for p in self.pages}

    def snapshot(self, crawl: int, page: int) -> PageSnapshot:
        return self.snapshots[crawl][page]

    def new_outlinks_at(self, page: int, interval: int) -> NewOutlinks:
        self._check_interval(interval)
        prev = self.snapshots[interval][page]
        curr = self.snapshots[interval + 1][page]
        return new_outlinks(prev.outlinks, curr.outlinks, prev.url)

    def _check_interval(self, interval: int):
        if not 0 <= interval < self.n_intervals:
            raise InvalidArgumentError(f"interval {interval} outside 0..{self.n_intervals - 1}")

    @cached_property
    def new_link_counts(self) -> np.ndarray:
        """Int array ``(n_pages, n_intervals, 2)``; last axis is scope index."""
        out = np.zeros((self.n_pages, self.n_intervals, 2), dtype=np.int64)
        for i in range(self.n_intervals):
            for p in range(self.n_pages):
                prev = self.snapshots[i][p]
                fresh = self.snapshots[i + 1][p].outlinks - prev.outlinks
                for url in fresh:
                    out[p, i, classify_link(prev.url, url).index] += 1
        out.flags.writeable = False
        return out

    @cached_property
    def outlink_counts(self) -> np.ndarray:
        """Int array ``(n_crawls, n_pages, 2)`` of current outlinks by scope."""
        out = np.zeros((self.n_crawls, self.n_pages, 2), dtype=np.int64)
        for c, row in enumerate(self.snapshots):
            for p, snap in enumerate(row):
                out[c, p] = snap.outlink_counts()
        out.flags.writeable = False
        return out

    @cached_property
    def content_changes(self) -> np.ndarray:
        """Bool array ``(n_pages, n_intervals)`` of digest changes."""
        out = np.zeros((self.n_pages, self.n_intervals), dtype=bool)
        for i in range(self.n_intervals):
            for p in range(self.n_pages):
                out[p, i] = content_changed(self.snapshots[i][p].content_digest,
                                            self.snapshots[i + 1][p].content_digest)
        out.flags.writeable = False
        return out

    def field_array(self, name: str) -> np.ndarray:
        """Float array ``(n_crawls, n_pages)`` of a scalar snapshot field (NaN if absent)."""
        out = np.empty((self.n_crawls, self.n_pages))
        for c, row in enumerate(self.snapshots):
            for p, snap in enumerate(row):
                v = getattr(snap, name)
                out[c, p] = np.nan if v is None else v
        return out

    def semantic_matrix(self, crawl: int) -> np.ndarray:
        """``(n_pages, d)`` semantic vectors at one crawl; NaN rows where absent."""
        row = self.snapshots[crawl]
        dims = {s.semantic_vector.shape[0] for s in row if s.semantic_vector is not None}
        if not dims:
            raise MissingDataError(f"no semantic vectors at crawl {crawl}")
        if len(dims) > 1:
            raise MalformedInputError(f"mixed semantic vector dimensions at crawl {crawl}")
        out = np.full((self.n_pages, dims.pop()), np.nan)
        for p, snap in enumerate(row):
            if snap.semantic_vector is not None:
                out[p] = snap.semantic_vector
        return out
