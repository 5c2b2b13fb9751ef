"""Embedding store, binary embedding file format and the hashing encoder."""
import struct

import numpy as np
import pytest

from rprm.corpus import RawReview, k_core_filter
from rprm.encoder import (EmbeddingError, EmbeddingStore, hash_encode,
                          load_embeddings, write_embeddings)


def make_ds(texts):
    records = [RawReview(user_key="u", item_key=f"i{j}", rating=3, text=t,
                         timestamp_days=0, helpful_votes=0)
               for j, t in enumerate(texts)]
    return k_core_filter(records, k=1)


class TestStore:
    def test_lookup_and_matrix(self):
        store = EmbeddingStore({0: np.array([1.0, 2.0]), 1: np.array([3.0, 4.0])}, 2)
        assert len(store) == 2 and 1 in store and 7 not in store
        assert np.array_equal(store.matrix([1, 0]), [[3.0, 4.0], [1.0, 2.0]])
        with pytest.raises(EmbeddingError, match="review 9"):
            store.get(9)

    def test_coverage_validation(self):
        ds = make_ds(["a", "b", "c"])
        store = EmbeddingStore({0: np.zeros(4), 2: np.zeros(4)}, 4)
        with pytest.raises(EmbeddingError, match="missing 1 reviews"):
            store.validate_coverage(ds)


class TestHashEncode:
    def test_deterministic_and_text_dependent(self):
        ds = make_ds(["alpha beta", "alpha beta", "gamma delta"])
        a = hash_encode(ds, dim=32, seed=0)
        b = hash_encode(ds, dim=32, seed=0)
        assert np.array_equal(a.get(0), b.get(0))
        assert np.array_equal(a.get(0), a.get(1))      # same text, same vector
        assert not np.array_equal(a.get(0), a.get(2))  # different text differs

    def test_seed_changes_projection(self):
        ds = make_ds(["alpha beta gamma delta"])
        a = hash_encode(ds, dim=32, seed=0)
        b = hash_encode(ds, dim=32, seed=1)
        assert not np.array_equal(a.get(0), b.get(0))

    def test_unit_norm_or_zero(self):
        ds = make_ds(["some words here", ""])
        store = hash_encode(ds, dim=16, seed=0)
        assert np.linalg.norm(store.get(0)) == pytest.approx(1.0)
        assert np.array_equal(store.get(1), np.zeros(16))

    def test_token_order_irrelevant_counts_matter(self):
        ds = make_ds(["red blue green", "green red blue", "red red blue green"])
        store = hash_encode(ds, dim=64, seed=0)
        assert np.array_equal(store.get(0), store.get(1))
        assert not np.array_equal(store.get(0), store.get(2))

    def test_truncation_cap(self):
        long_text = " ".join(f"w{j}" for j in range(600))
        capped = " ".join(f"w{j}" for j in range(512))
        ds = make_ds([long_text, capped])
        store = hash_encode(ds, dim=32, seed=0)
        assert np.array_equal(store.get(0), store.get(1))

    def test_invalid_dim(self):
        with pytest.raises(ValueError):
            hash_encode(make_ds(["x"]), dim=0)


class TestBinaryFormat:
    def _store(self, n=10, dim=8, seed=0):
        rng = np.random.default_rng(seed)
        # float32-representable values so the round trip is exact
        vecs = {r: rng.normal(size=dim).astype(np.float32).astype(np.float64)
                for r in range(n)}
        return EmbeddingStore(vecs, dim)

    def test_round_trip(self, tmp_path):
        store = self._store()
        path = tmp_path / "emb.bin"
        write_embeddings(store, path)
        back = load_embeddings(path)
        assert back.dim == store.dim and len(back) == len(store)
        for rid in store.vectors:
            assert np.array_equal(back.get(rid), store.get(rid))

    def test_layout_header(self, tmp_path):
        store = self._store(n=3, dim=4)
        path = tmp_path / "emb.bin"
        write_embeddings(store, path)
        data = path.read_bytes()
        assert data[:4] == b"RPEM"
        assert struct.unpack_from("<H", data, 4)[0] == 1
        assert struct.unpack_from("<I", data, 6)[0] == 4
        assert struct.unpack_from("<Q", data, 10)[0] == 3
        assert len(data) == 18 + 3 * (4 + 4 * 4)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"XXXX" + b"\x00" * 30)
        with pytest.raises(EmbeddingError, match="magic"):
            load_embeddings(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v2.bin"
        path.write_bytes(b"RPEM" + struct.pack("<H", 2) + struct.pack("<I", 1)
                         + struct.pack("<Q", 0))
        with pytest.raises(EmbeddingError, match="version"):
            load_embeddings(path)

    def test_truncated_records(self, tmp_path):
        store = self._store(n=2, dim=4)
        path = tmp_path / "emb.bin"
        write_embeddings(store, path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(EmbeddingError, match="truncated"):
            load_embeddings(path)

    def test_duplicate_review_id(self, tmp_path):
        path = tmp_path / "dup.bin"
        rec = struct.pack("<I", 7) + struct.pack("<2f", 1.0, 2.0)
        path.write_bytes(b"RPEM" + struct.pack("<H", 1) + struct.pack("<I", 2)
                         + struct.pack("<Q", 2) + rec + rec)
        with pytest.raises(EmbeddingError, match="duplicate"):
            load_embeddings(path)
