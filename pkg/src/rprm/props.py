"""Per-review property scores, each normalized into [0, 1].

The six properties describe a review's usefulness from different angles:
recency, verbosity, star rating, sentiment polarity strength, helpful
votes received, and predicted helpfulness probability. Sentiment and
helpfulness probabilities can be loaded from precomputed classifier
output files; bundled proxies keep runs self-contained.
"""
from __future__ import annotations

import csv
import enum

import numpy as np

from .corpus import DataError


class PropertyId(enum.IntEnum):
    AGE = 0
    LENGTH = 1
    RATING = 2
    POLAR_SENTI = 3
    HELPFUL = 4
    PROB_HELPFUL = 5


PROPERTY_NAMES = ["age", "length", "rating", "polar_senti", "helpful", "prob_helpful"]
NUM_PROPERTIES = len(PropertyId)

# Small sentiment lexicon for the self-contained polarity proxy.
POSITIVE_WORDS = frozenset("""
amazing awesome beautiful best brilliant charming clean comfortable cozy
delicious delightful enjoyable excellent fantastic fabulous favorite fresh
friendly fun good great happy helpful impressive incredible love loved
lovely nice outstanding perfect pleasant recommend refreshing reliable
satisfying solid superb tasty terrific wonderful worth
""".split())

NEGATIVE_WORDS = frozenset("""
awful bad bland broken cold dirty disappointed disappointing disgusting
dreadful expensive gross hate hated horrible mediocre mess messy nasty
overpriced poor rude sad slow stale terrible unfriendly unhelpful
unpleasant unreliable useless waste worst wrong
""".split())


def minmax_normalize(raw):
    """(x - min) / (max - min); a degenerate range maps everything to the
    neutral 0.5."""
    arr = np.asarray(raw, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("minmax_normalize needs a non-empty input")
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return np.full(arr.shape, 0.5)
    return (arr - lo) / (hi - lo)


def score_age(ds):
    """1 - d / max(D), with 'now' anchored at the newest review. All
    reviews on the same day degenerate to score 1."""
    ts = np.array([r.timestamp_days for r in ds.reviews], dtype=np.float64)
    now = ts.max()
    d = now - ts
    max_age = d.max()
    if max_age == 0:
        return np.ones(len(ts))
    return 1.0 - d / max_age


def score_length(ds):
    counts = [len(r.text.split()) for r in ds.reviews]
    return minmax_normalize(counts)


def score_rating(ds):
    return minmax_normalize([r.rating for r in ds.reviews])


def score_helpful(ds):
    return minmax_normalize([r.helpful_votes for r in ds.reviews])


def load_precomputed(path, ds):
    """CSV `review_id,score` covering every review; gaps are fatal."""
    scores = {}
    with open(path, newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            scores[int(rec["review_id"])] = float(rec["score"])
    missing = [r.review_id for r in ds.reviews if r.review_id not in scores]
    if missing:
        raise DataError(f"precomputed score file {path} missing review ids {missing[:20]}"
                        + ("..." if len(missing) > 20 else ""))
    out = np.array([scores[r.review_id] for r in ds.reviews])
    if out.min() < 0 or out.max() > 1:
        raise DataError(f"precomputed scores in {path} fall outside [0, 1]")
    return out


def score_polar_senti(ds, precomputed_path=None):
    """Polarity strength: |pos - neg| / (pos + neg) lexicon hits, with
    0.5 when the lexicon is silent. Precomputed classifier output takes
    precedence when supplied."""
    if precomputed_path:
        return load_precomputed(precomputed_path, ds)
    out = np.empty(len(ds.reviews))
    for i, r in enumerate(ds.reviews):
        words = [w.strip(".,!?;:()\"'").lower() for w in r.text.split()]
        pos = sum(1 for w in words if w in POSITIVE_WORDS)
        neg = sum(1 for w in words if w in NEGATIVE_WORDS)
        out[i] = abs(pos - neg) / (pos + neg) if pos + neg else 0.5
    return out


def score_prob_helpful(ds, precomputed_path=None):
    """Helpfulness probability. The proxy (a stand-in for an external
    helpfulness classifier, not a re-implementation of one) is the
    logistic of standardized log(1 + votes)."""
    if precomputed_path:
        return load_precomputed(precomputed_path, ds)
    x = np.log1p([float(r.helpful_votes) for r in ds.reviews])
    std = x.std()
    if std == 0:
        return np.full(len(x), 0.5)
    z = (x - x.mean()) / std
    return 1.0 / (1.0 + np.exp(-z))


def assemble(ds, polar_senti_path=None, prob_helpful_path=None):
    """Full reviews x 6 property matrix, columns in PropertyId order."""
    cols = [
        score_age(ds),
        score_length(ds),
        score_rating(ds),
        score_polar_senti(ds, polar_senti_path),
        score_helpful(ds),
        score_prob_helpful(ds, prob_helpful_path),
    ]
    matrix = np.column_stack(cols)
    if matrix.min() < 0 or matrix.max() > 1:
        raise DataError("property matrix entries must lie in [0, 1]")
    return matrix


def write_matrix(matrix, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["review_id"] + PROPERTY_NAMES)
        for rid, row in enumerate(matrix):
            w.writerow([rid] + [repr(float(v)) for v in row])


def read_matrix(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ["review_id"] + PROPERTY_NAMES:
            raise DataError(f"unexpected property matrix header in {path}")
        for rec in reader:
            if int(rec[0]) != len(rows):
                raise DataError("property matrix review ids must be contiguous")
            rows.append([float(v) for v in rec[1:]])
    return np.array(rows)
