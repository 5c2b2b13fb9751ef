"""Command-line pipeline: ingest -> split -> score-props -> embed-hash ->
train -> evaluate -> compare -> export-phi.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
Failures print a single machine-parseable line to stderr:
`RPRM_ERROR code=<CONFIG|DATA|NUMERIC> <human message>`.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import corpus, encoder, evaluate, fixture, props
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, file_sha256, load_run_config
from .corpus import DataError
from .encoder import EmbeddingError
from .learn import train
from .model import ModelConfig, ModelContext
from .optim import NumericError

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _fail(code, label, message):
    message = " ".join(str(message).split())
    print(f"RPRM_ERROR code={label} {message}", file=sys.stderr)
    sys.exit(code)


def cmd_ingest(args):
    field_map = None
    if args.field_map:
        with open(args.field_map, "r", encoding="utf-8") as f:
            field_map = json.load(f)
    records, skipped = corpus.ingest_jsonl(args.input, field_map)
    ds = corpus.k_core_filter(records, k=args.k_core)
    corpus.write_canonical(ds, args.out, stats_path=args.stats)
    print(f"ingested {len(records)} records ({skipped} skipped), "
          f"kept {len(ds.reviews)} reviews over {ds.n_users} users x {ds.n_items} items")


def cmd_split(args):
    ds = corpus.read_canonical(args.dataset)
    split = corpus.time_split(ds, ratios=tuple(args.ratios))
    corpus.write_split(split, args.out, dataset_hash=file_sha256(args.dataset))
    n = sum(len(x) for x in split.train)
    print(f"split {len(ds.reviews)} interactions: {n} train / "
          f"{sum(len(x) for x in split.valid)} valid / {sum(len(x) for x in split.test)} test")


def cmd_score_props(args):
    ds = corpus.read_canonical(args.dataset)
    matrix = props.assemble(ds, polar_senti_path=args.polar_senti,
                            prob_helpful_path=args.prob_helpful)
    props.write_matrix(matrix, args.out)
    print(f"wrote {matrix.shape[0]} x {matrix.shape[1]} property matrix to {args.out}")


def cmd_embed_hash(args):
    ds = corpus.read_canonical(args.dataset)
    store = encoder.hash_encode(ds, dim=args.dim, seed=args.seed)
    encoder.write_embeddings(store, args.out)
    print(f"wrote {len(store)} embeddings (dim {store.dim}) to {args.out}")


def _load_run_inputs(cfg):
    ds = corpus.read_canonical(cfg.dataset_path)
    split, split_hash = corpus.read_split(cfg.split_path)
    dataset_hash = file_sha256(cfg.dataset_path)
    if split_hash is not None and split_hash != dataset_hash:
        raise DataError(f"split file {cfg.split_path} was built from a different dataset")
    prop_matrix = props.read_matrix(cfg.props_path) if cfg.props_path else None
    if cfg.model.variant == "bprmf":
        embeds = None
    elif cfg.embeddings_path:
        embeds = encoder.load_embeddings(cfg.embeddings_path)
    else:
        embeds = encoder.hash_encode(ds, dim=cfg.hash_dim, seed=cfg.hash_seed)
    return ds, split, prop_matrix, embeds, dataset_hash


def cmd_train(args):
    cfg = load_run_config(args.config)
    ds, split, prop_matrix, embeds, dataset_hash = _load_run_inputs(cfg)
    result = train(ds, split, cfg.model, cfg.loss, cfg.sampler, cfg.optimizer,
                   embeds=embeds, prop_matrix=prop_matrix)
    metadata = {
        "config": cfg.resolved(),
        "config_hash": cfg.config_hash(),
        "dataset_hash": dataset_hash,
        "best_epoch": result.best_epoch,
        "best_valid_map": result.best_valid_map,
    }
    save_checkpoint(args.out, {k: p.value for k, p in result.params.items()}, metadata)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as f:
            for entry in result.log:
                f.write(json.dumps(entry) + "\n")
    print(f"trained {cfg.model.variant} for {len(result.log)} epochs, "
          f"best valid MAP {result.best_valid_map:.4f} at epoch {result.best_epoch}")


def _context_from_checkpoint(checkpoint_path, cfg, ds, split, prop_matrix, embeds,
                             dataset_hash):
    arrays, metadata = load_checkpoint(checkpoint_path)
    ckpt_hash = metadata.get("dataset_hash")
    if ckpt_hash is not None and ckpt_hash != dataset_hash:
        raise DataError(f"checkpoint {checkpoint_path} was trained on a different dataset")
    model_cfg = ModelConfig(**metadata["config"]["model"]) if "config" in metadata else cfg.model
    from .optim import make_params
    params = make_params(arrays)
    ctx = ModelContext.build(model_cfg, params, ds, split,
                             embeds=embeds, prop_matrix=prop_matrix)
    return ctx, metadata


def cmd_evaluate(args):
    cfg = load_run_config(args.config)
    ds, split, prop_matrix, embeds, dataset_hash = _load_run_inputs(cfg)
    ctx, metadata = _context_from_checkpoint(args.checkpoint, cfg, ds, split,
                                             prop_matrix, embeds, dataset_hash)
    report = evaluate.evaluate_split(ctx, split, phase=args.phase)
    evaluate.write_report(report, args.out, per_user_path=args.per_user, extra={
        "phase": args.phase,
        "config": metadata.get("config", cfg.resolved()),
        "config_hash": metadata.get("config_hash", cfg.config_hash()),
        "dataset_hash": dataset_hash,
        "tukey_hsd": None,  # reserved for external post-hoc results
    })
    print(json.dumps(report.summary()))


def cmd_compare(args):
    with open(args.report_a, encoding="utf-8") as f:
        rep_a = json.load(f)
    with open(args.report_b, encoding="utf-8") as f:
        rep_b = json.load(f)
    users_a = evaluate.read_per_user_csv(args.per_user_a)
    users_b = evaluate.read_per_user_csv(args.per_user_b)
    shared = sorted(set(users_a) & set(users_b))
    if len(shared) < 2:
        raise DataError("compare needs at least two users present in both reports")
    result = {"users": len(shared), "metrics": {}}
    for metric in ("ap", "p1", "p10", "r10"):
        a = [users_a[u][metric] for u in shared]
        b = [users_b[u][metric] for u in shared]
        tt = evaluate.paired_ttest(a, b)
        result["metrics"][metric] = {
            "mean_a": float(np.mean(a)), "mean_b": float(np.mean(b)),
            "t": tt.t, "p": tt.p, "degenerate": tt.degenerate,
        }
    result["report_a"] = rep_a.get("metrics")
    result["report_b"] = rep_b.get("metrics")
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(result, f, indent=2)
    print(json.dumps({m: round(v["p"], 6) for m, v in result["metrics"].items()}))


def cmd_export_phi(args):
    cfg = load_run_config(args.config)
    ds, split, prop_matrix, embeds, dataset_hash = _load_run_inputs(cfg)
    ctx, _ = _context_from_checkpoint(args.checkpoint, cfg, ds, split,
                                      prop_matrix, embeds, dataset_hash)
    rows = evaluate.export_phi(ctx.params, ctx.cfg, ds, split=split)
    names = ([props.PROPERTY_NAMES[c] for c in ctx.cfg.property_cols]
             if ctx.cfg.variant == "single" else props.PROPERTY_NAMES)
    evaluate.write_phi_csv(rows, args.out, k_names=names)
    print(f"wrote {len(rows)} property-importance rows to {args.out}")


def cmd_fixture(args):
    n = fixture.write_fixture(args.out, seed=args.seed)
    print(f"wrote {n} synthetic reviews to {args.out}")


def build_parser():
    p = argparse.ArgumentParser(prog="rprm",
                                description="Review-property recommendation pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse raw JSONL reviews and k-core filter")
    s.add_argument("--input", required=True)
    s.add_argument("--field-map", help="JSON file mapping canonical field names to input keys")
    s.add_argument("--k-core", type=int, default=5)
    s.add_argument("--out", required=True)
    s.add_argument("--stats")
    s.set_defaults(fn=cmd_ingest)

    s = sub.add_parser("split", help="chronological per-user train/valid/test split")
    s.add_argument("--dataset", required=True)
    s.add_argument("--ratios", type=float, nargs=3, default=[0.8, 0.1, 0.1])
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_split)

    s = sub.add_parser("score-props", help="compute the six review property scores")
    s.add_argument("--dataset", required=True)
    s.add_argument("--polar-senti", help="precomputed sentiment score CSV")
    s.add_argument("--prob-helpful", help="precomputed helpfulness score CSV")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_score_props)

    s = sub.add_parser("embed-hash", help="deterministic hashing review encoder")
    s.add_argument("--dataset", required=True)
    s.add_argument("--dim", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_embed_hash)

    s = sub.add_parser("train", help="train a model from a run config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--log", help="training log JSONL path")
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("evaluate", help="rank and score a trained checkpoint")
    s.add_argument("--config", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--phase", choices=["valid", "test"], default="test")
    s.add_argument("--out", required=True)
    s.add_argument("--per-user", help="per-user metric CSV sidecar")
    s.set_defaults(fn=cmd_evaluate)

    s = sub.add_parser("compare", help="paired t-tests between two metric reports")
    s.add_argument("--report-a", required=True)
    s.add_argument("--per-user-a", required=True)
    s.add_argument("--report-b", required=True)
    s.add_argument("--per-user-b", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_compare)

    s = sub.add_parser("export-phi", help="export learned property-importance scores")
    s.add_argument("--config", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_export_phi)

    s = sub.add_parser("fixture", help="write the bundled synthetic toy dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=7)
    s.set_defaults(fn=cmd_fixture)

    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except ConfigError as e:
        _fail(EXIT_CONFIG, "CONFIG", e)
    except (DataError, EmbeddingError, CheckpointError, FileNotFoundError) as e:
        _fail(EXIT_DATA, "DATA", e)
    except NumericError as e:
        _fail(EXIT_NUMERIC, "NUMERIC", e)
    except ValueError as e:
        _fail(EXIT_CONFIG, "CONFIG", e)
    return 0


if __name__ == "__main__":
    sys.exit(main())
