"""embedsvc: HTTP sidecar for embeddings, summaries, and quality scores."""

__version__ = "0.1.0"
