"""Predict new outlinks on web pages from a series of crawl snapshots.

The modules follow the data flow: :mod:`snapshot` (data model),
:mod:`ingestion`, :mod:`graph`, :mod:`related`, :mod:`features`,
:mod:`learners`, :mod:`evaluation`, :mod:`synthetic` and :mod:`pipeline`.
"""
__version__ = "0.1.0"

from .errors import (ConvergenceError, DegenerateCorpusError, DegenerateVectorError,
                     EmptySeriesError, InvalidArgumentError, MalformedInputError,
                     MissingDataError, NewLinksError, SchemaError)
from .snapshot import (SCOPES, CrawlSeries, LinkScope, PageId, PageSnapshot, classify_link,
                       content_changed, new_outlinks, normalize_url)

__all__ = [
    "__version__", "ConvergenceError", "DegenerateCorpusError", "DegenerateVectorError",
    "EmptySeriesError", "InvalidArgumentError", "MalformedInputError", "MissingDataError",
    "NewLinksError", "SchemaError", "SCOPES", "CrawlSeries", "LinkScope", "PageId",
    "PageSnapshot", "classify_link", "content_changed", "new_outlinks", "normalize_url",
]
