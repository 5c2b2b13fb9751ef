"""One-shot export of review text embeddings to the binary vector file
consumed by the recommendation pipeline."""

__version__ = "0.1.0"
