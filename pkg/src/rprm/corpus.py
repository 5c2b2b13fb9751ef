"""Review corpus ingestion, k-core filtering and chronological splits."""
from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass, field


class DataError(ValueError):
    pass


@dataclass
class RawReview:
    user_key: str
    item_key: str
    rating: int
    text: str
    timestamp_days: int
    helpful_votes: int


@dataclass
class Review:
    review_id: int
    user_id: int
    item_id: int
    rating: int
    text: str
    timestamp_days: int
    helpful_votes: int


@dataclass
class Dataset:
    """Filtered, index-mapped review corpus.

    `per_user` / `per_item` hold review ids sorted by timestamp ascending
    (ties broken by input order, which review ids preserve).
    """
    users: list  # index -> original user key
    items: list  # index -> original item key
    reviews: list  # Review, contiguous review_id
    per_user: list = field(default_factory=list)
    per_item: list = field(default_factory=list)

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_items(self):
        return len(self.items)


@dataclass
class SplitDataset:
    """Per-user chronological train/valid/test partition (review ids)."""
    train: list  # user_id -> list of review ids
    valid: list
    test: list
    ratios: tuple = (0.8, 0.1, 0.1)

    def user_split(self, u):
        return self.train[u], self.valid[u], self.test[u]


def _parse_timestamp(value):
    """Timestamps are normalized to integer days since the unix epoch."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        # heuristics: large numbers are epoch seconds, small ones already days
        v = float(value)
        if abs(v) > 100000:
            return int(v // 86400)
        return int(v)
    if isinstance(value, str):
        s = value.strip()[:10]
        try:
            return _dt.date.fromisoformat(s).toordinal() - _dt.date(1970, 1, 1).toordinal()
        except ValueError:
            pass
        try:
            return int(float(value))
        except ValueError:
            raise DataError(f"unparseable timestamp: {value!r}")
    raise DataError(f"unparseable timestamp: {value!r}")


DEFAULT_FIELD_MAP = {
    "user": "user",
    "item": "item",
    "rating": "rating",
    "text": "text",
    "timestamp": "timestamp",
    "helpful_votes": "helpful_votes",
}


def ingest_jsonl(path, field_map=None):
    """Parse one review JSON object per line.

    Returns (records, skipped): lines missing a mapped field or failing to
    parse are skipped and tallied, a missing file is fatal.
    """
    fm = dict(DEFAULT_FIELD_MAP)
    if field_map:
        fm.update(field_map)
    records = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rating = int(obj[fm["rating"]])
                votes = int(obj.get(fm["helpful_votes"], 0) or 0)
                if rating < 1 or rating > 5 or votes < 0:
                    raise DataError("out-of-range rating or votes")
                records.append(RawReview(
                    user_key=str(obj[fm["user"]]),
                    item_key=str(obj[fm["item"]]),
                    rating=rating,
                    text=str(obj[fm["text"]]),
                    timestamp_days=_parse_timestamp(obj[fm["timestamp"]]),
                    helpful_votes=votes,
                ))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, DataError):
                skipped += 1
    return records, skipped


def k_core_filter(records, k=5):
    """Iteratively drop users/items with fewer than k reviews until both
    sides satisfy the bound, then index the survivors."""
    if k < 1:
        raise ValueError("k must be >= 1")
    alive = list(range(len(records)))
    while True:
        user_counts = {}
        item_counts = {}
        for idx in alive:
            r = records[idx]
            user_counts[r.user_key] = user_counts.get(r.user_key, 0) + 1
            item_counts[r.item_key] = item_counts.get(r.item_key, 0) + 1
        bad_users = {u for u, c in user_counts.items() if c < k}
        bad_items = {i for i, c in item_counts.items() if c < k}
        if not bad_users and not bad_items:
            break
        alive = [idx for idx in alive
                 if records[idx].user_key not in bad_users
                 and records[idx].item_key not in bad_items]
    if not alive:
        raise DataError(f"empty dataset after {k}-core filtering")

    users, items = [], []
    user_index, item_index = {}, {}
    reviews = []
    for idx in alive:  # first-appearance order, deterministic
        r = records[idx]
        if r.user_key not in user_index:
            user_index[r.user_key] = len(users)
            users.append(r.user_key)
        if r.item_key not in item_index:
            item_index[r.item_key] = len(items)
            items.append(r.item_key)
        reviews.append(Review(
            review_id=len(reviews),
            user_id=user_index[r.user_key],
            item_id=item_index[r.item_key],
            rating=r.rating,
            text=r.text,
            timestamp_days=r.timestamp_days,
            helpful_votes=r.helpful_votes,
        ))
    ds = Dataset(users=users, items=items, reviews=reviews)
    _build_indices(ds)
    return ds


def _build_indices(ds):
    ds.per_user = [[] for _ in ds.users]
    ds.per_item = [[] for _ in ds.items]
    for r in ds.reviews:
        ds.per_user[r.user_id].append(r.review_id)
        ds.per_item[r.item_id].append(r.review_id)
    key = lambda rid: (ds.reviews[rid].timestamp_days, rid)
    for lst in ds.per_user:
        lst.sort(key=key)
    for lst in ds.per_item:
        lst.sort(key=key)


def time_split(ds, ratios=(0.8, 0.1, 0.1)):
    """Per-user chronological split.

    The first ceil(r_train * n) reviews go to train and the next
    ceil(r_valid * n) to valid; when rounding leaves test (or valid) empty
    the boundary shifts back one review so both stay non-empty.
    """
    if not math.isclose(sum(ratios), 1.0):
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    train, valid, test = [], [], []
    for u, rids in enumerate(ds.per_user):
        n = len(rids)
        if n < 3:
            raise DataError(f"user {u} has {n} interactions; need >= 3 to split")
        a = math.ceil(ratios[0] * n)
        b = min(n, a + math.ceil(ratios[1] * n))
        while b >= n:  # keep test non-empty
            b -= 1
        while a >= b:  # keep valid non-empty
            a -= 1
        if a < 1:
            raise DataError(f"user {u}: cannot populate all splits from {n} interactions")
        train.append(list(rids[:a]))
        valid.append(list(rids[a:b]))
        test.append(list(rids[b:]))
    return SplitDataset(train=train, valid=valid, test=test, ratios=tuple(ratios))


def write_split(split, path, dataset_hash=None):
    payload = {
        "schema_version": 1,
        "ratios": list(split.ratios),
        "dataset_hash": dataset_hash,
        "train": split.train,
        "valid": split.valid,
        "test": split.test,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)


def read_split(path):
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    split = SplitDataset(train=payload["train"], valid=payload["valid"],
                         test=payload["test"], ratios=tuple(payload["ratios"]))
    return split, payload.get("dataset_hash")


def write_canonical(ds, path, stats_path=None):
    with open(path, "w", encoding="utf-8") as f:
        for r in ds.reviews:
            f.write(json.dumps({
                "review_id": r.review_id,
                "user_id": r.user_id,
                "item_id": r.item_id,
                "user_key": ds.users[r.user_id],
                "item_key": ds.items[r.item_id],
                "rating": r.rating,
                "timestamp_days": r.timestamp_days,
                "helpful_votes": r.helpful_votes,
                "text": r.text,
            }, ensure_ascii=False) + "\n")
    if stats_path:
        with open(stats_path, "w", encoding="utf-8") as f:
            json.dump({"users": ds.n_users, "items": ds.n_items,
                       "reviews": len(ds.reviews)}, f, indent=2)


def read_canonical(path):
    users, items = [], []
    user_index, item_index = {}, {}
    reviews = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            uk, ik = obj["user_key"], obj["item_key"]
            if uk not in user_index:
                user_index[uk] = len(users)
                users.append(uk)
            if ik not in item_index:
                item_index[ik] = len(items)
                items.append(ik)
            if obj["review_id"] != len(reviews):
                raise DataError("canonical file review ids must be contiguous")
            if user_index[uk] != obj["user_id"] or item_index[ik] != obj["item_id"]:
                raise DataError("canonical file indices inconsistent with first-appearance order")
            reviews.append(Review(
                review_id=obj["review_id"],
                user_id=obj["user_id"],
                item_id=obj["item_id"],
                rating=obj["rating"],
                text=obj["text"],
                timestamp_days=obj["timestamp_days"],
                helpful_votes=obj["helpful_votes"],
            ))
    if not reviews:
        raise DataError(f"no reviews in canonical file {path}")
    ds = Dataset(users=users, items=items, reviews=reviews)
    _build_indices(ds)
    return ds
