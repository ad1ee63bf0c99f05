"""Bidirectional video/text recognition over precomputed embeddings."""

__version__ = "0.1.0"
