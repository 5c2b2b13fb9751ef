import types

import numpy as np
import pytest

from rprm import encoder, fixture, props
from rprm.corpus import time_split
from rprm.encoder import EmbeddingStore
from rprm.model import ModelConfig, ModelContext, init_params
from rprm.props import NUM_PROPERTIES


@pytest.fixture(scope="session")
def toy_dataset():
    return fixture.build_dataset(seed=7)


@pytest.fixture(scope="session")
def toy_split(toy_dataset):
    return time_split(toy_dataset)


@pytest.fixture(scope="session")
def toy_props(toy_dataset):
    return props.assemble(toy_dataset)


@pytest.fixture(scope="session")
def toy_embeds(toy_dataset):
    return encoder.hash_encode(toy_dataset, dim=16, seed=0)


def make_micro_ctx(variant="full", seed=0, n_users=2, n_items=3, n_reviews=4,
                   d_e=6, d_id=3, m=2, window=3, loss_prop="none",
                   single_property="age"):
    """Hand-built tiny model context for gradient checks: fabricated review
    lists, random embeddings and property scores, random parameter values."""
    rng = np.random.default_rng(seed)
    store = EmbeddingStore({r: rng.normal(size=d_e) for r in range(n_reviews)}, d_e)
    prop_matrix = rng.uniform(0.05, 0.95, size=(n_reviews, NUM_PROPERTIES))
    user_reviews = [sorted(rng.choice(n_reviews, size=2, replace=False))
                    for _ in range(n_users)]
    item_reviews = [sorted(rng.choice(n_reviews, size=2, replace=False))
                    for _ in range(n_items)]
    cfg = ModelConfig(variant=variant, single_property=single_property,
                      d_id=d_id, m=m, window=window, max_reviews=8)
    params = init_params(cfg, n_users, n_items, d_e, seed=seed)
    # non-trivial parameter values so gradients are informative
    for p in params.values():
        p.value = rng.normal(scale=0.5, size=p.value.shape)
    ds = types.SimpleNamespace(n_users=n_users, n_items=n_items)
    ctx = ModelContext(cfg=cfg, params=params, ds=ds, embeds=store,
                       prop_matrix=prop_matrix, user_reviews=user_reviews,
                       item_reviews=item_reviews)
    return ctx
