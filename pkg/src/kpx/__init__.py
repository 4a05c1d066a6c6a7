"""kpx: key-point extraction and matching for legal argument corpora."""

__version__ = "0.1.0"
