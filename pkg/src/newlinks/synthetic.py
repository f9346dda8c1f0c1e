"""Synthetic evolving crawl series with known link-creation rates.

Pages live on hosts (about ``pages_per_host`` each) and every host belongs
to one topic. Each interval a page gains ``Poisson(rate)`` new outlinks per
scope. Internal targets are same-host pages or fresh same-host URLs;
external targets prefer in-series pages of other hosts in the same topic,
so the semantic neighbourhood of a page says something about its links.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .ingestion import fill_graph_fields
from .snapshot import SCOPES, CrawlSeries, PageId, PageSnapshot

RATE_MODES = ("fixed", "bursty")
GROUP_EDGES = {"int": (0, 1, 3, 11), "ext": (0, 1, 2)}
GROUP_LABELS = {"int": ("0", "1-2", "3-10", ">10"), "ext": ("0", "1", ">1")}
EPOCH = datetime(2020, 1, 6, tzinfo=timezone.utc)


@dataclass(frozen=True)
class GeneratorConfig:
    """Generator parameters; defaults are the calibrated setting.

    Rates follow a zero-inflated log-normal: with probability
    ``zero_inflation_<scope>`` a page never links in that scope, otherwise
    ``rate = rate_scale_<scope> * exp(N(rate_mu, rate_sigma^2))``.
    ``fixed_rate_<scope>`` overrides the mixture with one rate for all pages.
    """

    n_pages: int = 1000
    n_crawls: int = 10
    n_topics: int = 20
    semantic_dim: int = 32
    centroids: Optional[tuple] = None
    pages_per_host: int = 10
    semantic_noise: float = 0.6
    zero_inflation_int: float = 0.70
    zero_inflation_ext: float = 0.92
    rate_mu: float = 0.5
    rate_sigma: float = 1.2
    rate_scale_int: float = 2.5
    rate_scale_ext: float = 1.5
    fixed_rate_int: Optional[float] = None
    fixed_rate_ext: Optional[float] = None
    rate_mode: str = "fixed"
    burst_persistence: float = 0.8
    topic_coupled: bool = False
    topic_share: float = 0.8
    content_change_prob: float = 0.3
    link_removal_prob: float = 0.02
    initial_outlinks_int: float = 8.0
    initial_outlinks_ext: float = 3.0
    in_series_fraction: float = 0.3
    same_topic_external: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.centroids is not None:
            object.__setattr__(self, "centroids", tuple(tuple(float(x) for x in c)
                                                        for c in self.centroids))
        self.validate()

    def validate(self):
        def bad(msg):
            raise InvalidArgumentError(f"generator config: {msg}")

        if self.n_pages < 2:
            bad("n_pages must be >= 2")
        if self.n_crawls < 2:
            bad("n_crawls must be >= 2")
        if self.n_topics < 1 or self.semantic_dim < 2 or self.pages_per_host < 1:
            bad("n_topics, semantic_dim and pages_per_host must be positive (dim >= 2)")
        if self.rate_mode not in RATE_MODES:
            bad(f"rate_mode must be one of {RATE_MODES}")
        for name in ("zero_inflation_int", "zero_inflation_ext", "burst_persistence", "topic_share",
                     "content_change_prob", "link_removal_prob", "in_series_fraction",
                     "same_topic_external"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                bad(f"{name} must lie in [0, 1]")
        for name in ("rate_sigma", "rate_scale_int", "rate_scale_ext", "semantic_noise",
                     "initial_outlinks_int", "initial_outlinks_ext"):
            if not getattr(self, name) >= 0.0:
                bad(f"{name} must be >= 0")
        for name in ("fixed_rate_int", "fixed_rate_ext"):
            v = getattr(self, name)
            if v is not None and not (v >= 0.0 and math.isfinite(v)):
                bad(f"{name} must be a finite rate >= 0")
        if self.centroids is not None:
            c = np.asarray(self.centroids, dtype=np.float64)
            if c.shape != (self.n_topics, self.semantic_dim):
                bad("centroids must have shape (n_topics, semantic_dim)")
            if np.any(np.abs(np.linalg.norm(c, axis=1) - 1.0) > 1e-9):
                bad("topic centroids must be unit-norm")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["centroids"] is not None:
            d["centroids"] = [list(c) for c in d["centroids"]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidArgumentError(f"unknown generator config keys {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidArgumentError(f"generator config: {exc}") from None


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Generating rates. ``rate_*`` is ``(n_pages, n_intervals)``; ``lambda_*`` its row mean."""

    urls: tuple
    topic: np.ndarray
    host: np.ndarray
    rate_int: np.ndarray
    rate_ext: np.ndarray
    trusted: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def lambda_int(self) -> np.ndarray:
        return self.rate_int.mean(axis=1)

    @property
    def lambda_ext(self) -> np.ndarray:
        return self.rate_ext.mean(axis=1)

    def rate(self, scope) -> np.ndarray:
        from .snapshot import LinkScope
        return self.rate_int if LinkScope.parse(scope).index == 0 else self.rate_ext

    def to_text(self) -> str:
        lines = ["url\ttopic\tlambda_int\tlambda_ext"]
        for u, t, a, b in zip(self.urls, self.topic.tolist(), self.lambda_int.tolist(),
                              self.lambda_ext.tolist()):
            lines.append(f"{u}\t{t}\t{a!r}\t{b!r}")
        return "\n".join(lines) + "\n"


# --- generation ---------------------------------------------------------------

def _unit_rows(M):
    return M / np.linalg.norm(M, axis=1, keepdims=True)


def _draw_rates(cfg, rng, scope, topic):
    n, n_int = cfg.n_pages, cfg.n_crawls - 1
    fixed = cfg.fixed_rate_int if scope == "int" else cfg.fixed_rate_ext
    if fixed is not None:
        base = np.full(n, float(fixed))
    else:
        pi = cfg.zero_inflation_int if scope == "int" else cfg.zero_inflation_ext
        scale = cfg.rate_scale_int if scope == "int" else cfg.rate_scale_ext
        z_page = rng.standard_normal(n)
        if cfg.topic_coupled:
            z_topic = rng.standard_normal(cfg.n_topics)
            s = cfg.topic_share
            z = math.sqrt(s) * z_topic[topic] + math.sqrt(1.0 - s) * z_page
            # topics also differ in how many of their pages link at all
            logit = math.log(pi / (1 - pi)) if 0 < pi < 1 else 0.0
            shift = rng.standard_normal(cfg.n_topics)
            p_zero = pi if pi in (0.0, 1.0) else 1.0 / (1.0 + np.exp(-(logit + 1.5 * shift[topic])))
        else:
            z = z_page
            p_zero = pi
        structural_zero = rng.random(n) < p_zero
        base = np.where(structural_zero, 0.0, scale * np.exp(cfg.rate_mu + cfg.rate_sigma * z))
    rates = np.repeat(base[:, None], n_int, axis=1)
    if cfg.rate_mode == "bursty":
        # two-state regime chain per page; the active state doubles the rate
        active = np.empty((n, n_int), dtype=bool)
        active[:, 0] = rng.random(n) < 0.5
        for i in range(1, n_int):
            stay = rng.random(n) < cfg.burst_persistence
            active[:, i] = np.where(stay, active[:, i - 1], ~active[:, i - 1])
        rates = rates * 2.0 * active
    return rates


def _digest(url, version):
    return hashlib.sha256(f"{url}@{version}".encode()).digest()


def generate(config: GeneratorConfig) -> tuple[CrawlSeries, GroundTruth]:
    """Emit a fully valid crawl series and the rates that generated it."""
    cfg = config
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n, n_crawls = cfg.n_pages, cfg.n_crawls

    # hosts, topics and URLs
    n_hosts = max(1, math.ceil(n / cfg.pages_per_host))
    host = np.minimum(np.arange(n) // cfg.pages_per_host, n_hosts - 1)
    host_topic = rng.integers(0, cfg.n_topics, size=n_hosts)
    topic = host_topic[host]
    roots = [f"http://www.site{h:05d}.example.org" for h in range(n_hosts)]
    urls = []
    for p in range(n):
        slot = p - host[p] * cfg.pages_per_host
        if slot == 0:
            urls.append(roots[host[p]])
        else:
            section = "/".join(f"s{(slot + d) % 7}" for d in range(slot % 3))
            urls.append(f"{roots[host[p]]}/{section + '/' if section else ''}page{slot}")
    pages = tuple(PageId(u, i) for i, u in enumerate(urls))
    host_pages = [np.flatnonzero(host == h) for h in range(n_hosts)]
    topic_pages = [np.flatnonzero(topic == t) for t in range(cfg.n_topics)]

    # semantics
    if cfg.centroids is not None:
        centroids = np.asarray(cfg.centroids, dtype=np.float64)
    else:
        centroids = _unit_rows(rng.standard_normal((cfg.n_topics, cfg.semantic_dim)))
    noise = rng.standard_normal((n, cfg.semantic_dim)) * (cfg.semantic_noise / math.sqrt(cfg.semantic_dim))
    semantic = centroids[topic] + noise
    norms = np.linalg.norm(semantic, axis=1)
    semantic[norms == 0.0, 0] = 1.0
    semantic = _unit_rows(semantic)

    rate_int = _draw_rates(cfg, rng, "int", topic)
    rate_ext = _draw_rates(cfg, rng, "ext", topic)

    # static page attributes
    size = np.maximum(1, np.round(np.exp(rng.normal(9.0, 0.8, n)))).astype(np.int64)
    text_ratio = rng.uniform(0.1, 0.6, n)
    quality = rng.beta(5.0, 2.0, n)
    version = np.zeros(n, dtype=np.int64)
    n_ext_hosts = max(50, n // 20)

    def fresh_internal(p, c, k):
        return f"{roots[host[p]]}/new/c{c}/p{p}/{k}"

    def fresh_external(p, c, k):
        return f"http://ext{int(rng.integers(n_ext_hosts)):04d}.example.net/c{c}/p{p}/{k}"

    def add_links(links, p, c, n_new, scope, prev=frozenset()):
        k = 0
        for _ in range(n_new):
            target = None
            if rng.random() < cfg.in_series_fraction:
                if scope == "int":
                    pool = host_pages[host[p]]
                elif rng.random() < cfg.same_topic_external:
                    pool = topic_pages[topic[p]]
                else:
                    pool = None
                q = int(rng.choice(pool)) if pool is not None else int(rng.integers(n))
                if q != p and urls[q] not in links and urls[q] not in prev and (host[q] == host[p]) == (scope == "int"):
                    target = urls[q]
            if target is None:
                target = (fresh_internal if scope == "int" else fresh_external)(p, c, k)
                k += 1
            links.add(target)

    links = [set() for _ in range(n)]
    init_int = rng.poisson(cfg.initial_outlinks_int, n)
    init_ext = rng.poisson(cfg.initial_outlinks_ext, n)
    for p in range(n):
        add_links(links[p], p, 0, int(init_int[p]), "int")
        add_links(links[p], p, 0, int(init_ext[p]), "ext")

    crawl_times = tuple(EPOCH + timedelta(weeks=c) for c in range(n_crawls))
    grid = []
    for c in range(n_crawls):
        if c > 0:
            i = c - 1
            new_int = rng.poisson(rate_int[:, i])
            new_ext = rng.poisson(rate_ext[:, i])
            changed = rng.random(n) < cfg.content_change_prob
            drift = np.exp(rng.normal(0.0, 0.1, n))
            for p in range(n):
                prev = frozenset(links[p])
                if prev and cfg.link_removal_prob > 0:
                    old = sorted(prev)
                    drop = rng.random(len(old)) < cfg.link_removal_prob
                    links[p].difference_update(u for u, d in zip(old, drop) if d)
                # a removed link may return in a later interval and then counts as new
                add_links(links[p], p, c, int(new_int[p]), "int", prev)
                add_links(links[p], p, c, int(new_ext[p]), "ext", prev)
            version[changed] += 1
            size = np.where(changed, np.maximum(1, np.round(size * drift)).astype(np.int64), size)
        row = []
        for p in range(n):
            row.append(PageSnapshot(
                page=pages[p], fetch_time=crawl_times[c], outlinks=frozenset(links[p]),
                content_digest=_digest(urls[p], int(version[p])), content_size=int(size[p]),
                text_size=int(size[p] * text_ratio[p]), text_quality=float(quality[p]),
                semantic_vector=semantic[p]))
        grid.append(row)

    trusted = np.asarray([hp[0] for hp in host_pages if hp.size], dtype=np.int64)
    meta = {"generator": "newlinks.synthetic", "seed": cfg.seed, "digest": "sha256",
            "config_hash": config_hash(cfg.to_dict())}
    series = CrawlSeries(pages, crawl_times, grid, meta)
    series = fill_graph_fields(series, trusted=trusted)
    truth = GroundTruth(tuple(urls), topic.astype(np.int64), host.astype(np.int64),
                        rate_int, rate_ext, trusted)
    return series, truth


def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# --- calibration --------------------------------------------------------------

def group_of(counts, scope: str) -> np.ndarray:
    """Group index of each count with the 0 / 1-2 / 3-10 / >10 (int) or 0 / 1 / >1 (ext) edges."""
    edges = np.asarray(GROUP_EDGES[scope][1:])
    return np.searchsorted(edges, np.asarray(counts), side="right")


@dataclass(frozen=True, eq=False)
class CalibrationReport:
    """Summary statistics of new outlinks per scope.

    ``mean``/``std``/``zero_fraction`` are ``(n_intervals,)`` per scope;
    ``transitions[s][i]`` counts pages moving between groups from interval
    ``i`` to ``i + 1``; ``ccdf[s]`` is ``(values, P(X >= value))`` over
    all page-intervals; ``lcr_hist[s][j]`` counts pages with LCR ``j / n_intervals``.
    """

    n_pages: int
    mean: dict
    std: dict
    zero_fraction: dict
    ccdf: dict
    transitions: dict
    lcr_hist: dict

    def to_text(self) -> str:
        out = ["scope\tinterval\tmean\tstd\tzero_fraction"]
        for s in ("int", "ext"):
            for i, (m, d, z) in enumerate(zip(self.mean[s], self.std[s], self.zero_fraction[s])):
                out.append(f"{s}\t{i}\t{m:.6g}\t{d:.6g}\t{z:.6g}")
        out.append("")
        out.append("scope\tinterval\tfrom\tto\tpages")
        for s in ("int", "ext"):
            labels = GROUP_LABELS[s]
            for i, M in enumerate(self.transitions[s]):
                for a in range(M.shape[0]):
                    for b in range(M.shape[1]):
                        out.append(f"{s}\t{i}->{i + 1}\t{labels[a]}\t{labels[b]}\t{M[a, b]}")
        out.append("")
        out.append("scope\tlcr\tpages")
        for s in ("int", "ext"):
            h = self.lcr_hist[s]
            for j, c in enumerate(h.tolist()):
                out.append(f"{s}\t{j}/{h.size - 1}\t{c}")
        out.append("")
        out.append("scope\tvalue\tccdf")
        for s in ("int", "ext"):
            for v, f in zip(*self.ccdf[s]):
                out.append(f"{s}\t{v}\t{f:.6g}")
        return "\n".join(out) + "\n"


def calibration_report(series: CrawlSeries) -> CalibrationReport:
    counts = series.new_link_counts
    n_int = series.n_intervals
    mean, std, zero, ccdf, trans, hist = {}, {}, {}, {}, {}, {}
    for scope in SCOPES:
        s = scope.short
        c = counts[:, :, scope.index]
        mean[s] = c.mean(axis=0)
        std[s] = c.std(axis=0)
        zero[s] = (c == 0).mean(axis=0)
        pooled = np.sort(c.ravel())
        values = np.unique(pooled)
        ccdf[s] = (values, 1.0 - np.searchsorted(pooled, values, side="left") / pooled.size)
        g = group_of(c, s)
        n_groups = len(GROUP_LABELS[s])
        mats = []
        for i in range(n_int - 1):
            M = np.zeros((n_groups, n_groups), dtype=np.int64)
            np.add.at(M, (g[:, i], g[:, i + 1]), 1)
            mats.append(M)
        trans[s] = mats
        hist[s] = np.bincount(np.count_nonzero(c, axis=1), minlength=n_int + 1)
    return CalibrationReport(series.n_pages, mean, std, zero, ccdf, trans, hist)
