"""Dataset reading, sentence encoders and the binary embedding writer.

The input is the canonical review dataset (one JSON object per line with
at least `review_id` and `text`); the output is the "RPEM" binary format
(little-endian): magic "RPEM", u16 version=1, u32 dimension, u64 record
count, then per record u32 review_id followed by dimension x f32.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

MAGIC = b"RPEM"
VERSION = 1
MAX_TOKENS = 512  # encoder input truncation, shared with the consumer

POOLINGS = ("mean", "cls")


class ExportError(ValueError):
    pass


class EncoderError(RuntimeError):
    pass


@dataclass
class ExportJob:
    input_path: str
    model: str
    output_path: str
    batch_size: int = 32
    pooling: str = "mean"
    expect_dim: int = None
    device: str = "cpu"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ExportError("batch size must be >= 1")
        if self.pooling not in POOLINGS:
            raise ExportError(f"unknown pooling {self.pooling!r}, expected one of {POOLINGS}")


def read_reviews(path):
    """[(review_id, text)] from a canonical dataset file; every review_id
    must be unique."""
    out = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rid = int(obj["review_id"])
                text = str(obj["text"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ExportError(f"{path}:{lineno}: malformed review record: {e}")
            if rid < 0 or rid > 0xFFFFFFFF:
                raise ExportError(f"{path}:{lineno}: review_id {rid} out of u32 range")
            if rid in seen:
                raise ExportError(f"{path}:{lineno}: duplicate review_id {rid}")
            seen.add(rid)
            out.append((rid, text))
    if not out:
        raise ExportError(f"no reviews found in {path}")
    return out


class HashingEncoder:
    """Offline deterministic encoder: signed token hashing, L2-normalized.

    Selected with a model id of the form `hash:<dim>`; used where
    pretrained transformer weights are unavailable.
    """

    def __init__(self, dim, seed=0):
        if dim < 1:
            raise EncoderError("hashing encoder dimension must be >= 1")
        self.dim = dim
        self.seed = seed

    def encode(self, texts):
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        key = str(self.seed).encode("utf-8")
        for row, text in enumerate(texts):
            for token in text.split()[:MAX_TOKENS]:
                digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8,
                                         key=key).digest()
                h = int.from_bytes(digest, "little")
                sign = 1.0 if (h >> 32) & 1 else -1.0
                out[row, h % self.dim] += sign
            norm = np.linalg.norm(out[row])
            if norm > 0:
                out[row] /= norm
        return out


class TransformerEncoder:
    """Pretrained transformer encoder with mean or first-token pooling.

    Inference runs in deterministic evaluation mode (no dropout) with
    texts truncated to MAX_TOKENS tokens.
    """

    def __init__(self, model_id, pooling="mean", device="cpu"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as e:
            raise EncoderError(
                f"transformer backend needs the 'transformer' extra installed: {e}")
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as e:  # tokenizer/weights missing or undownloadable
            raise EncoderError(f"cannot load encoder {model_id!r}: {e}")
        self._torch = torch
        self.pooling = pooling
        self.device = device
        self.model.to(device)
        self.model.eval()
        self.dim = int(self.model.config.hidden_size)

    def encode(self, texts):
        torch = self._torch
        enc = self.tokenizer(list(texts), padding=True, truncation=True,
                             max_length=MAX_TOKENS, return_tensors="pt").to(self.device)
        with torch.no_grad():
            hidden = self.model(**enc).last_hidden_state
        if self.pooling == "cls":
            pooled = hidden[:, 0, :]
        else:
            mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)
        return pooled.cpu().numpy().astype(np.float32)


def build_encoder(job):
    if job.model.startswith("hash:"):
        spec = job.model[len("hash:"):]
        try:
            dim = int(spec)
        except ValueError:
            raise EncoderError(f"bad hashing encoder spec {job.model!r}, expected hash:<dim>")
        return HashingEncoder(dim)
    return TransformerEncoder(job.model, pooling=job.pooling, device=job.device)


def write_embedding_file(path, records, dim):
    """Atomic write (temp file + rename) of (review_id, vector) records."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".embed-export-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<H", VERSION))
            f.write(struct.pack("<I", dim))
            f.write(struct.pack("<Q", len(records)))
            for rid, vec in records:
                vec = np.asarray(vec, dtype="<f4")
                if vec.shape != (dim,):
                    raise ExportError(
                        f"vector for review {rid} has shape {vec.shape}, expected ({dim},)")
                f.write(struct.pack("<I", rid))
                f.write(vec.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export(job):
    """Run the full job; returns (record count, dimension)."""
    reviews = read_reviews(job.input_path)
    encoder = build_encoder(job)
    if job.expect_dim is not None and encoder.dim != job.expect_dim:
        raise ExportError(
            f"encoder dimension {encoder.dim} does not match --expect-dim {job.expect_dim}")
    records = []
    for start in range(0, len(reviews), job.batch_size):
        batch = reviews[start:start + job.batch_size]
        vectors = encoder.encode([text for _, text in batch])
        records.extend((rid, vec) for (rid, _), vec in zip(batch, vectors))
    write_embedding_file(job.output_path, records, encoder.dim)
    return len(records), encoder.dim
