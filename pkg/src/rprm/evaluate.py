"""Top-k ranking evaluation, paired significance testing and export of
learned property-importance distributions."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .props import PROPERTY_NAMES


@dataclass
class RankedList:
    user: int
    items: list       # candidate item ids, best first
    relevant: set     # item ids interacted with in the held-out phase


@dataclass
class UserMetrics:
    user: int
    ap: float
    p1: float
    p10: float
    r10: float


@dataclass
class MetricReport:
    per_user: list
    map: float = 0.0
    p1: float = 0.0
    p10: float = 0.0
    r10: float = 0.0
    n_users: int = 0

    def __post_init__(self):
        self.n_users = len(self.per_user)
        if self.per_user:
            self.map = float(np.mean([m.ap for m in self.per_user]))
            self.p1 = float(np.mean([m.p1 for m in self.per_user]))
            self.p10 = float(np.mean([m.p10 for m in self.per_user]))
            self.r10 = float(np.mean([m.r10 for m in self.per_user]))

    def summary(self):
        return {"MAP": self.map, "P@1": self.p1, "P@10": self.p10,
                "R@10": self.r10, "users": self.n_users}


def precision_at_k(ranked_items, relevant, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for it in ranked_items[:k] if it in relevant)
    return hits / k


def recall_at_k(ranked_items, relevant, k):
    if not relevant:
        raise ValueError("recall undefined without relevant items")
    hits = sum(1 for it in ranked_items[:k] if it in relevant)
    return hits / len(relevant)


def average_precision(ranked_items, relevant):
    if not relevant:
        raise ValueError("AP undefined without relevant items")
    hits = 0
    total = 0.0
    for rank, it in enumerate(ranked_items, start=1):
        if it in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def rank_items(ctx, u, exclude, relevant, item_matrix=None):
    """Rank every item outside `exclude` for user u, best first.

    Ties are broken by ascending item id so rankings are deterministic.
    """
    if item_matrix is None:
        item_matrix = ctx.item_matrix()
    scores = item_matrix @ ctx.user_vector(u)
    candidates = [i for i in range(ctx.ds.n_items) if i not in exclude]
    candidates.sort(key=lambda i: (-scores[i], i))
    return RankedList(user=u, items=candidates, relevant=set(relevant))


def _phase_sets(ds, split, u, phase):
    """(excluded item ids, relevant item ids) for one user and phase."""
    item_of = lambda rids: {ds.reviews[r].item_id for r in rids}
    train_items = item_of(split.train[u])
    valid_items = item_of(split.valid[u])
    if phase == "valid":
        return train_items, valid_items - train_items
    if phase == "test":
        exclude = train_items | valid_items
        return exclude, item_of(split.test[u]) - exclude
    raise ValueError(f"unknown phase {phase!r}")


def evaluate_split(ctx, split, phase="test"):
    """MetricReport over all users with at least one relevant held-out item."""
    item_matrix = ctx.item_matrix()
    per_user = []
    for u in range(ctx.ds.n_users):
        exclude, relevant = _phase_sets(ctx.ds, split, u, phase)
        if not relevant:
            continue  # nothing to score this user against
        ranked = rank_items(ctx, u, exclude, relevant, item_matrix=item_matrix)
        per_user.append(UserMetrics(
            user=u,
            ap=average_precision(ranked.items, ranked.relevant),
            p1=precision_at_k(ranked.items, ranked.relevant, 1),
            p10=precision_at_k(ranked.items, ranked.relevant, 10),
            r10=recall_at_k(ranked.items, ranked.relevant, 10),
        ))
    return MetricReport(per_user=per_user)


@dataclass
class TTestResult:
    t: float
    p: float
    degenerate: bool = False


def paired_ttest(per_user_a, per_user_b):
    """Two-sided paired t-test on per-user metric vectors."""
    a = np.asarray(per_user_a, dtype=np.float64)
    b = np.asarray(per_user_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("paired t-test needs two equal-length vectors of size >= 2")
    d = a - b
    sd = d.std(ddof=1)
    n = d.size
    if sd == 0.0:
        if d.mean() == 0.0:
            return TTestResult(t=0.0, p=1.0, degenerate=True)
        return TTestResult(t=float(np.inf) * np.sign(d.mean()), p=0.0, degenerate=True)
    t = d.mean() / (sd / np.sqrt(n))
    p = 2.0 * stats.t.sf(abs(t), df=n - 1)
    return TTestResult(t=float(t), p=float(p))


def _softplus_np(x):
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


def phi_distribution_np(phi_row):
    w = _softplus_np(phi_row)
    return w / w.sum()


def export_phi(params, cfg, ds, split=None):
    """Property-importance distributions for every user and item, plus
    each user's mean over the items they interacted with in training."""
    if not cfg.has_phi:
        raise ValueError(f"variant {cfg.variant!r} has no property weights to export")
    rows = []
    user_dists = np.array([phi_distribution_np(r) for r in params["phi_user"].value])
    item_dists = np.array([phi_distribution_np(r) for r in params["phi_item"].value])
    for u in range(ds.n_users):
        rows.append(("user", u, user_dists[u]))
    for i in range(ds.n_items):
        rows.append(("item", i, item_dists[i]))
    if split is not None:
        for u in range(ds.n_users):
            items = sorted({ds.reviews[r].item_id for r in split.train[u]})
            if items:
                rows.append(("user_items_mean", u, item_dists[items].mean(axis=0)))
    return rows


def write_phi_csv(rows, path, k_names=None):
    names = k_names or PROPERTY_NAMES
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["entity_type", "entity_id"] + list(names))
        for etype, eid, dist in rows:
            w.writerow([etype, eid] + [repr(float(v)) for v in dist])


def write_report(report, path, per_user_path=None, extra=None):
    import json
    payload = {"metrics": report.summary()}
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
    if per_user_path:
        with open(per_user_path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["user", "ap", "p1", "p10", "r10"])
            for m in report.per_user:
                w.writerow([m.user, repr(float(m.ap)), repr(float(m.p1)), repr(float(m.p10)), repr(float(m.r10))])


def read_per_user_csv(path):
    rows = {}
    with open(path, newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            rows[int(rec["user"])] = {k: float(rec[k]) for k in ("ap", "p1", "p10", "r10")}
    return rows
