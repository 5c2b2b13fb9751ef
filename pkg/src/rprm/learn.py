"""Pairwise ranking losses, property-agreement losses, negative samplers
and the training loop with early stopping."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, backward
from .evaluate import evaluate_split, phi_distribution_np
from .model import ModelContext, init_params
from .optim import Adam, NumericError

PROP_LOSSES = ("none", "uu", "ui")
SIMILARITIES = ("cos", "kl")
SAMPLERS = ("uniform", "prop")


@dataclass
class LossConfig:
    prop: str = "none"        # none | uu | ui
    similarity: str = "kl"    # cos | kl
    alpha: float = 1.0        # weight on the BPR term

    def __post_init__(self):
        if self.prop not in PROP_LOSSES:
            raise ValueError(f"unknown prop loss {self.prop!r}")
        if self.similarity not in SIMILARITIES:
            raise ValueError(f"unknown similarity {self.similarity!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


@dataclass
class SamplerConfig:
    kind: str = "uniform"     # uniform | prop
    similarity: str = "kl"
    pool_size: int = 100

    def __post_init__(self):
        if self.kind not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.kind!r}")
        if self.similarity not in SIMILARITIES:
            raise ValueError(f"unknown similarity {self.similarity!r}")
        if self.pool_size < 2:
            raise ValueError("pool_size must be >= 2")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 16
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


def phi_distribution(phi_row):
    """Softplus then sum-normalize a stored weight row into a
    probability distribution (tensor-in, tensor-out)."""
    return ad.sum_normalize(ad.softplus(phi_row))


def sim(p, q, kind):
    """Similarity between two probability distributions in (0, 1].

    cos: cosine of the vectors. kl: 1 / (1 + KL(p || q)) with KL in nats,
    so identical distributions score exactly 1.
    """
    if p.value.shape != q.value.shape:
        raise ad.ShapeError(f"sim length mismatch: {p.value.shape} vs {q.value.shape}")
    if kind == "cos":
        denom = ad.mul(ad.sqrt(ad.dot(p, p)), ad.sqrt(ad.dot(q, q)))
        return ad.div(ad.dot(p, q), denom)
    if kind == "kl":
        kl = ad.tsum(ad.mul(p, ad.sub(ad.log(p), ad.log(q))))
        return ad.div(Tensor(1.0), ad.add(kl, 1.0))
    raise ValueError(f"unknown similarity {kind!r}")


def sim_np(p, q, kind):
    """Plain-numpy twin of sim() for samplers and analysis."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if kind == "cos":
        return float(np.dot(p, q) / (np.linalg.norm(p) * np.linalg.norm(q)))
    if kind == "kl":
        return float(1.0 / (1.0 + np.sum(p * (np.log(p) - np.log(q)))))
    raise ValueError(f"unknown similarity {kind!r}")


def bpr_loss(score_pos, score_neg):
    """-ln sigmoid(score_pos - score_neg), in the stable softplus form."""
    return ad.softplus(ad.sub(score_neg, score_pos))


def proploss_uu(dist_u, dist_pos, dist_neg, kind):
    return ad.sub(sim(dist_u, dist_neg, kind), sim(dist_u, dist_pos, kind))


def proploss_ui(dist_u, dist_pos, dist_neg, kind):
    return ad.sub(sim(dist_pos, dist_neg, kind), sim(dist_u, dist_pos, kind))


def combined_loss(ctx, u, i_pos, i_neg, cfg, user_vec=None):
    """alpha * BPR + (1 - alpha) * PropLoss for one triplet."""
    if user_vec is not None:
        s_pos = ctx.predict_from_user_repr(user_vec, i_pos)
        s_neg = ctx.predict_from_user_repr(user_vec, i_neg)
    else:
        s_pos = ctx.predict(u, i_pos)
        s_neg = ctx.predict(u, i_neg)
    base = bpr_loss(s_pos, s_neg)
    if cfg.prop == "none":
        return base
    if not ctx.cfg.has_phi:
        raise ValueError(f"prop loss {cfg.prop!r} needs a variant with property weights")
    dist_u = phi_distribution(ad.row(ctx.params["phi_user"], u))
    dist_pos = phi_distribution(ad.row(ctx.params["phi_item"], i_pos))
    dist_neg = phi_distribution(ad.row(ctx.params["phi_item"], i_neg))
    fn = proploss_uu if cfg.prop == "uu" else proploss_ui
    penalty = fn(dist_u, dist_pos, dist_neg, cfg.similarity)
    return ad.add(ad.mul(base, cfg.alpha), ad.mul(penalty, 1.0 - cfg.alpha))


def negative_candidates(ds, split):
    """Per-user array of item ids the user has no training interaction with."""
    out = []
    for u in range(ds.n_users):
        seen = {ds.reviews[r].item_id for r in split.train[u]}
        cand = np.array([i for i in range(ds.n_items) if i not in seen], dtype=np.int64)
        if cand.size == 0:
            raise ValueError(f"user {u} interacted with every item; cannot sample negatives")
        out.append(cand)
    return out


def sample_uniform(candidates, rng):
    return int(rng.choice(candidates))


def sample_prop(candidates, i_pos, phi_item_values, rng, cfg):
    """Draw a uniform candidate pool, then sample one negative with
    probability proportional to the similarity between its property
    distribution and the positive item's."""
    pool_size = min(cfg.pool_size, candidates.size)
    pool = rng.choice(candidates, size=pool_size, replace=False)
    dist_pos = phi_distribution_np(phi_item_values[i_pos])
    sims = np.array([sim_np(dist_pos, phi_distribution_np(phi_item_values[c]), cfg.similarity)
                     for c in pool])
    probs = sims / sims.sum()
    return int(rng.choice(pool, p=probs))


@dataclass
class TrainResult:
    params: dict          # best-validation parameter tensors
    log: list             # one dict per epoch
    best_epoch: int
    best_valid_map: float


def train(ds, split, model_cfg, loss_cfg, sampler_cfg, train_cfg,
          embeds=None, prop_matrix=None, params=None):
    """Run epochs of shuffled BPR triplets with Adam, validating MAP after
    each epoch and early-stopping after `patience` epochs without
    improvement. Returns the best-validation snapshot."""
    if params is None:
        d_e = embeds.dim if embeds is not None else 0
        params = init_params(model_cfg, ds.n_users, ds.n_items, d_e,
                             seed=train_cfg.seed)
    ctx = ModelContext.build(model_cfg, params, ds, split,
                             embeds=embeds, prop_matrix=prop_matrix)
    if sampler_cfg.kind == "prop" and not model_cfg.has_phi:
        raise ValueError("prop sampling needs a variant with property weights")
    rng = np.random.default_rng(train_cfg.seed)
    adam = Adam(params, lr=train_cfg.lr)
    pairs = [(u, ds.reviews[rid].item_id)
             for u in range(ds.n_users) for rid in split.train[u]]
    candidates = negative_candidates(ds, split)

    best_values = {k: p.value.copy() for k, p in params.items()}
    best_map = -1.0
    best_epoch = 0
    bad_epochs = 0
    log = []
    for epoch in range(1, train_cfg.max_epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(pairs))
        epoch_losses = []
        for start in range(0, len(order), train_cfg.batch_size):
            batch = order[start:start + train_cfg.batch_size]
            adam.zero_grad()
            scale = 1.0 / len(batch)
            for idx in batch:
                u, i_pos = pairs[idx]
                if sampler_cfg.kind == "uniform":
                    i_neg = sample_uniform(candidates[u], rng)
                else:
                    i_neg = sample_prop(candidates[u], i_pos,
                                        params["phi_item"].value, rng, sampler_cfg)
                user_vec = ctx.user_repr(u) if model_cfg.variant != "bprmf" else None
                loss = combined_loss(ctx, u, i_pos, i_neg, loss_cfg, user_vec=user_vec)
                lv = float(loss.value)
                if not np.isfinite(lv):
                    raise NumericError(
                        f"non-finite loss at epoch {epoch}, triplet "
                        f"(u={u}, pos={i_pos}, neg={i_neg}): {lv}")
                epoch_losses.append(lv)
                backward(ad.mul(loss, scale))
            adam.step()
        valid = evaluate_split(ctx, split, phase="valid")
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(epoch_losses)),
            "valid_map": valid.map,
            "valid_p1": valid.p1,
            "valid_p10": valid.p10,
            "valid_r10": valid.r10,
            "wall_seconds": time.perf_counter() - t0,
            "loss": {"prop": loss_cfg.prop, "similarity": loss_cfg.similarity,
                     "alpha": loss_cfg.alpha},
            "sampler": {"kind": sampler_cfg.kind,
                        "similarity": sampler_cfg.similarity},
        }
        log.append(entry)
        if valid.map > best_map:
            best_map = valid.map
            best_epoch = epoch
            best_values = {k: p.value.copy() for k, p in params.items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= train_cfg.patience:
                break
    for k, p in params.items():
        p.value = best_values[k]
    return TrainResult(params=params, log=log, best_epoch=best_epoch,
                       best_valid_map=best_map)
