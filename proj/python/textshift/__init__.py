"""Short-text classification across domains."""

from ._textshift import (
    Model,
    TextshiftError,
    compare_domains,
    crc32c,
    job_categories,
    run_cli,
    tokenize,
    tsne,
)

__all__ = [
    "Model",
    "TextshiftError",
    "compare_domains",
    "crc32c",
    "job_categories",
    "run_cli",
    "tokenize",
    "tsne",
]
