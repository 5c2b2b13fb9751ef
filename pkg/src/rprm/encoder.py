"""Review embedding stores.

Embeddings either come from a precomputed binary file (typically produced
by the embed-export tool running a pretrained sentence encoder) or from
the built-in deterministic hashing encoder used in tests and offline runs.

Binary "RPEM" format (little-endian): magic "RPEM", u16 version=1,
u32 dimension, u64 record count, then per record u32 review_id followed
by dimension x f32.
"""
from __future__ import annotations

import hashlib
import struct

import numpy as np

MAGIC = b"RPEM"
VERSION = 1
MAX_TOKENS = 512  # encoder input truncation, shared with the export tool


class EmbeddingError(ValueError):
    pass


class EmbeddingStore:
    """Immutable review_id -> vector map with a uniform dimension."""

    def __init__(self, vectors, dim, source="unknown"):
        self.vectors = vectors
        self.dim = dim
        self.source = source

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, review_id):
        return review_id in self.vectors

    def get(self, review_id):
        try:
            return self.vectors[review_id]
        except KeyError:
            raise EmbeddingError(f"no embedding for review {review_id}")

    def matrix(self, review_ids):
        return np.stack([self.get(r) for r in review_ids])

    def validate_coverage(self, ds):
        missing = [r.review_id for r in ds.reviews if r.review_id not in self.vectors]
        if missing:
            raise EmbeddingError(
                f"embedding store missing {len(missing)} reviews, e.g. {missing[:10]}")


def write_embeddings(store, path):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", VERSION))
        f.write(struct.pack("<I", store.dim))
        f.write(struct.pack("<Q", len(store.vectors)))
        for rid in sorted(store.vectors):
            f.write(struct.pack("<I", rid))
            f.write(np.asarray(store.vectors[rid], dtype="<f4").tobytes())


def load_embeddings(path):
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 18 or data[:4] != MAGIC:
        raise EmbeddingError(f"{path}: bad magic, not an embedding file")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise EmbeddingError(f"{path}: unsupported version {version}")
    (dim,) = struct.unpack_from("<I", data, 6)
    (count,) = struct.unpack_from("<Q", data, 10)
    off = 18
    rec_size = 4 + 4 * dim
    if len(data) != off + count * rec_size:
        raise EmbeddingError(f"{path}: truncated or oversized record section")
    vectors = {}
    for _ in range(count):
        (rid,) = struct.unpack_from("<I", data, off)
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=off + 4)
        if rid in vectors:
            raise EmbeddingError(f"{path}: duplicate review_id {rid}")
        vectors[rid] = vec.astype(np.float64)
        off += rec_size
    return EmbeddingStore(vectors, dim, source=f"file:{path}")


def _token_hash(token, seed):
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8,
                             key=str(seed).encode("utf-8")).digest()
    return int.from_bytes(digest, "little")


def hash_encode(ds, dim=64, seed=0):
    """Signed feature hashing of whitespace tokens, L2-normalized.

    Deterministic given (text, dim, seed); an empty text maps to the zero
    vector. Texts are truncated to MAX_TOKENS tokens first.
    """
    if dim < 1:
        raise ValueError("embedding dimension must be >= 1")
    vectors = {}
    for r in ds.reviews:
        vec = np.zeros(dim)
        for token in r.text.split()[:MAX_TOKENS]:
            h = _token_hash(token, seed)
            bucket = h % dim
            sign = 1.0 if (h >> 32) & 1 else -1.0
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        vectors[r.review_id] = vec
    return EmbeddingStore(vectors, dim, source=f"hash:d={dim},seed={seed}")
