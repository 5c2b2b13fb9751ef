"""Synthetic 50-user x 60-item review corpus with a planted property signal.

Users and items belong to one of four topics. Each topic has "warm" items
(interacted with early, so they land in every user's training split) and
"cold" items (interacted with late, landing in validation/test, with only
a handful of early training reviews). A review is either informative
(topic vocabulary, longer text, high rating, several helpful votes) or
misleading noise (another topic's vocabulary, short, low rating, zero
votes). Cold items' few training reviews are mostly noise, so recovering
their topic — which is exactly what ranking the held-out interactions
requires — depends on down-weighting useless reviews via their property
scores. That is the planted signal separating the property-aware model
from the property-blind ablation at desk scale.
"""
from __future__ import annotations

import json

import numpy as np

from .corpus import RawReview, k_core_filter

N_USERS = 50
N_ITEMS = 60
N_TOPICS = 4
WARM_PER_TOPIC = 10
COLD_PER_TOPIC = 5
COLD_TRAIN_REVIEWS = 3  # early reviews per cold item: 1 informative + 2 noise
WARM_NOISE_PROB = 0.4

TOPIC_VOCABS = [[f"topic{t}word{j}" for j in range(8)] for t in range(N_TOPICS)]
JUNK_VOCAB = [f"junk{j}" for j in range(20)]


def _review_payload(rng, informative, topic):
    if informative:
        n_words = int(rng.integers(8, 16))
        words = list(rng.choice(TOPIC_VOCABS[topic], size=n_words))
        rating = int(rng.integers(4, 6))
        votes = int(rng.integers(4, 11))
    else:
        # noise borrows another topic's vocabulary, actively misleading
        # any reader that cannot discount useless reviews
        wrong = (topic + int(rng.integers(1, N_TOPICS))) % N_TOPICS
        n_words = int(rng.integers(3, 6))
        words = list(rng.choice(TOPIC_VOCABS[wrong] + JUNK_VOCAB, size=n_words))
        rating = int(rng.integers(1, 4))
        votes = 0
    return words, rating, votes


def _record(rng, user, item, informative, topic, t_lo, t_hi):
    words, rating, votes = _review_payload(rng, informative, topic)
    return {
        "user": f"u{user:03d}",
        "item": f"i{item:03d}",
        "stars": rating,
        "text": " ".join(words),
        "date_days": int(rng.integers(t_lo, t_hi)),
        "useful": votes,
    }


def generate_records(seed=7):
    """Raw review dicts for the toy corpus (deterministic in the seed)."""
    rng = np.random.default_rng(seed)
    topic_users = [[u for u in range(N_USERS) if u % N_TOPICS == t]
                   for t in range(N_TOPICS)]
    # items 0..39 warm (10 per topic), 40..59 cold (5 per topic)
    warm_items = [[t * WARM_PER_TOPIC + j for j in range(WARM_PER_TOPIC)]
                  for t in range(N_TOPICS)]
    cold_items = [[N_TOPICS * WARM_PER_TOPIC + t * COLD_PER_TOPIC + j
                   for j in range(COLD_PER_TOPIC)]
                  for t in range(N_TOPICS)]

    records = []
    early_pairs = set()
    for t in range(N_TOPICS):
        # a few early (training-split) reviews per cold item, mostly noise
        for slot, c in enumerate(cold_items[t]):
            users = topic_users[t]
            for j in range(COLD_TRAIN_REVIEWS):
                u = users[(slot * COLD_TRAIN_REVIEWS + j) % len(users)]
                early_pairs.add((u, c))
                records.append(_record(rng, u, c, informative=(j == 0),
                                       topic=t, t_lo=0, t_hi=500))
        for u in topic_users[t]:
            # every warm item of the topic, early
            for w in warm_items[t]:
                informative = rng.random() >= WARM_NOISE_PROB
                records.append(_record(rng, u, w, informative, t, 0, 500))
            # two cold items of the topic, late (-> valid/test after split)
            fresh = [c for c in cold_items[t] if (u, c) not in early_pairs]
            for c in rng.choice(fresh, size=2, replace=False):
                informative = rng.random() >= 0.5
                records.append(_record(rng, u, int(c), informative, t, 600, 1000))

    # top up any item left below the 5-core threshold with extra late
    # interactions so k-core filtering keeps the full 50 x 60 grid
    counts = {}
    pairs = set(early_pairs)
    for r in records:
        counts[r["item"]] = counts.get(r["item"], 0) + 1
        pairs.add((int(r["user"][1:]), int(r["item"][1:])))
    for t in range(N_TOPICS):
        for c in cold_items[t]:
            while counts.get(f"i{c:03d}", 0) < 5:
                pool = [u for u in topic_users[t] if (u, c) not in pairs]
                u = int(rng.choice(pool))
                pairs.add((u, c))
                records.append(_record(rng, u, c, rng.random() >= 0.5, t, 600, 1000))
                counts[f"i{c:03d}"] = counts.get(f"i{c:03d}", 0) + 1

    order = rng.permutation(len(records))
    return [records[j] for j in order]


def write_fixture(path, seed=7):
    records = generate_records(seed)
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
    return len(records)


FIXTURE_FIELD_MAP = {
    "user": "user",
    "item": "item",
    "rating": "stars",
    "text": "text",
    "timestamp": "date_days",
    "helpful_votes": "useful",
}


def build_dataset(seed=7):
    """Filtered Dataset built directly from the generated records."""
    raws = [RawReview(
        user_key=r["user"], item_key=r["item"], rating=r["stars"],
        text=r["text"], timestamp_days=r["date_days"], helpful_votes=r["useful"],
    ) for r in generate_records(seed)]
    return k_core_filter(raws, k=5)
