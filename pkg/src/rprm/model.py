"""Review-property recommendation model and its ablation variants.

Per entity (user or item) the forward pass scales the entity's review
embeddings by each property's score, runs a shared convolution + ReLU +
max-pool over the review sequence per property channel, combines the
channel outputs with the entity's learned property weights, concatenates
the result with the entity's id embedding, and scores a user-item pair by
the dot product of the two concatenations.

Variants: "full" (all six properties), "single" (one property channel),
"noprop" (one unscaled channel, no property weights), "bprmf" (matrix
factorization with biases, no reviews).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .props import NUM_PROPERTIES, PROPERTY_NAMES

VARIANTS = ("full", "single", "noprop", "bprmf")

# stored value whose softplus is exactly 1, used to start property
# weights at uniform importance
PHI_INIT = float(np.log(np.e - 1.0))


@dataclass
class ModelConfig:
    variant: str = "full"
    single_property: str = "age"  # only used by the "single" variant
    d_id: int = 32
    m: int = 64
    window: int = 3
    max_reviews: int = 16
    init_sigma: float = 0.01

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.single_property not in PROPERTY_NAMES:
            raise ValueError(f"unknown property {self.single_property!r}")
        if self.max_reviews < 1:
            raise ValueError("max_reviews must be >= 1")

    @property
    def num_channels(self):
        if self.variant == "full":
            return NUM_PROPERTIES
        if self.variant in ("single", "noprop"):
            return 1
        return 0

    @property
    def property_cols(self):
        if self.variant == "full":
            return list(range(NUM_PROPERTIES))
        if self.variant == "single":
            return [PROPERTY_NAMES.index(self.single_property)]
        return []

    @property
    def has_phi(self):
        return self.variant in ("full", "single")


def init_params(cfg, n_users, n_items, d_e, seed=0):
    """Fresh parameter tensors: Gaussian id embeddings and conv filters,
    zero biases, property weights starting at uniform importance."""
    rng = np.random.default_rng(seed)
    s = cfg.init_sigma
    arrays = {}
    if cfg.variant == "bprmf":
        arrays["user_embed"] = rng.normal(0, s, (n_users, cfg.d_id))
        arrays["item_embed"] = rng.normal(0, s, (n_items, cfg.d_id))
        arrays["user_bias"] = np.zeros(n_users)
        arrays["item_bias"] = np.zeros(n_items)
        arrays["global_bias"] = np.zeros(1)
    else:
        arrays["user_embed"] = rng.normal(0, s, (n_users, cfg.d_id))
        arrays["item_embed"] = rng.normal(0, s, (n_items, cfg.d_id))
        arrays["conv_filters"] = rng.normal(0, s, (cfg.m, cfg.window, d_e))
        arrays["conv_bias"] = np.zeros(cfg.m)
        if cfg.has_phi:
            k = cfg.num_channels
            arrays["phi_user"] = np.full((n_users, k), PHI_INIT)
            arrays["phi_item"] = np.full((n_items, k), PHI_INIT)
    return {name: Tensor(a, requires_grad=True) for name, a in arrays.items()}


def encode_property_channels(X, prop_rows, cols):
    """Scale the (n, d_e) review embedding sequence by each property's
    per-review score, yielding one constant channel per property."""
    return [Tensor(X * prop_rows[:, [c]]) for c in cols]


def process_reviews(channel, filters, bias):
    """Shared conv + ReLU + max-pool over the review sequence axis."""
    return ad.maxpool0(ad.relu(ad.conv1d(channel, filters, bias)))


def attend_properties(channel_outs, phi_row):
    """Weighted channel combination: sum_t softplus(phi_t) * O_t / k."""
    k = len(channel_outs)
    w = ad.softplus(phi_row)
    acc = ad.mul(channel_outs[0], ad.index(w, 0))
    for t in range(1, k):
        acc = ad.add(acc, ad.mul(channel_outs[t], ad.index(w, t)))
    return ad.mul(acc, 1.0 / k)


@dataclass
class ModelContext:
    """Bundles everything a forward pass needs for a given split.

    Entity review lists come from the training split only, so evaluation
    never leaks validation/test review text into the representations.
    """
    cfg: ModelConfig
    params: dict
    ds: object
    embeds: object = None
    prop_matrix: object = None
    user_reviews: list = field(default_factory=list)  # train review ids per user
    item_reviews: list = field(default_factory=list)

    @classmethod
    def build(cls, cfg, params, ds, split, embeds=None, prop_matrix=None):
        if cfg.variant == "bprmf":
            return cls(cfg=cfg, params=params, ds=ds)
        if embeds is None:
            raise ValueError(f"variant {cfg.variant!r} needs an embedding store")
        embeds.validate_coverage(ds)
        if cfg.variant != "noprop" and prop_matrix is None:
            raise ValueError(f"variant {cfg.variant!r} needs a property matrix")
        if prop_matrix is not None and len(prop_matrix) != len(ds.reviews):
            raise ValueError("property matrix rows do not match the dataset")
        train_set = set()
        for rids in split.train:
            train_set.update(rids)
        user_reviews = [list(rids) for rids in split.train]
        item_reviews = [[rid for rid in rids if rid in train_set]
                        for rids in ds.per_item]
        return cls(cfg=cfg, params=params, ds=ds, embeds=embeds,
                   prop_matrix=prop_matrix, user_reviews=user_reviews,
                   item_reviews=item_reviews)

    def _entity_repr(self, side, idx):
        cfg, params = self.cfg, self.params
        rids = (self.user_reviews if side == "user" else self.item_reviews)[idx]
        rids = rids[-cfg.max_reviews:]  # most recent reviews
        if rids:
            X = self.embeds.matrix(rids)
        else:
            # entity with no training reviews: neutral zero sequence
            X = np.zeros((1, self.embeds.dim))
        if cfg.variant == "noprop":
            channels = [Tensor(X)]
        else:
            prop_rows = (self.prop_matrix[rids] if rids
                         else np.zeros((1, NUM_PROPERTIES)))
            channels = encode_property_channels(X, prop_rows, cfg.property_cols)
        outs = [process_reviews(ch, params["conv_filters"], params["conv_bias"])
                for ch in channels]
        if cfg.variant == "noprop":
            pooled = outs[0]
        else:
            phi_row = ad.row(params[f"phi_{side}"], idx)
            pooled = attend_properties(outs, phi_row)
        id_vec = ad.row(params[f"{side}_embed"], idx)
        return ad.concat([pooled, id_vec])

    def user_repr(self, u):
        return self._entity_repr("user", u)

    def item_repr(self, i):
        return self._entity_repr("item", i)

    def predict(self, u, i):
        """Preference score for a user-item pair as a scalar tensor."""
        if self.cfg.variant == "bprmf":
            p = self.params
            score = ad.dot(ad.row(p["user_embed"], u), ad.row(p["item_embed"], i))
            score = ad.add(score, ad.index(p["user_bias"], u))
            score = ad.add(score, ad.index(p["item_bias"], i))
            return ad.add(score, ad.index(p["global_bias"], 0))
        return ad.dot(self.user_repr(u), self.item_repr(i))

    def predict_from_user_repr(self, user_vec, i):
        """Scores reusing a precomputed user representation (training fast path)."""
        if self.cfg.variant == "bprmf":
            raise ValueError("bprmf has no review-based user representation")
        return ad.dot(user_vec, self.item_repr(i))

    def item_matrix(self):
        """All item representation values stacked, for bulk scoring."""
        if self.cfg.variant == "bprmf":
            p = self.params
            emb = p["item_embed"].value
            bias = p["item_bias"].value[:, None]
            return np.hstack([emb, bias, np.ones((emb.shape[0], 1))])
        return np.stack([self.item_repr(i).value for i in range(self.ds.n_items)])

    def user_vector(self, u):
        """User-side vector aligned with item_matrix for bulk scoring."""
        if self.cfg.variant == "bprmf":
            p = self.params
            return np.concatenate([
                p["user_embed"].value[u],
                np.ones(1),
                np.array([p["user_bias"].value[u] + p["global_bias"].value[0]]),
            ])
        return self.user_repr(u).value
