import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from newlinks.snapshot import CrawlSeries, PageId, PageSnapshot  # noqa: E402

T0 = datetime(2021, 3, 1, tzinfo=timezone.utc)


def make_series(outlinks, digests=None, vectors=None, urls=None):
    """Series from ``outlinks[c][p]`` (iterables of URLs).

    Digests default to one constant per page; vectors are optional
    ``(n_pages, d)`` arrays used at every crawl.
    """
    n_c, n_p = len(outlinks), len(outlinks[0])
    urls = urls or [f"https://h{p}.example.org/page" for p in range(n_p)]
    pages = [PageId(u, i) for i, u in enumerate(urls)]
    grid = []
    for c in range(n_c):
        row = []
        for p in range(n_p):
            d = b"d" if digests is None else digests[c][p].encode()
            vec = None if vectors is None else vectors[p]
            row.append(PageSnapshot(pages[p], T0 + timedelta(weeks=c), frozenset(outlinks[c][p]),
                                    d, 100 + c, 40, 0.5, semantic_vector=vec))
        grid.append(row)
    return CrawlSeries(pages, [T0 + timedelta(weeks=c) for c in range(n_c)], grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synthetic():
    from newlinks.synthetic import GeneratorConfig, generate
    return generate(GeneratorConfig(n_pages=300, n_crawls=6, seed=3))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
