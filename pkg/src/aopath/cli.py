"""Command-line entry point: ``python -m aopath <subcommand> ...``.

Every subcommand exits 0 on success and 2 with a one-line diagnostic on
stderr for any library, data or configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .aoextractor import extract_records, extract_subtitle_words
from .checkpoint import load_checkpoint, save_checkpoint
from .classifier import PATHWAYS, forward_batch, predict
from .data import GenreSplit, load_dataset, save_dataset
from .errors import AOPathError, ConfigError, DataError
from .lexicon import build_lexicon
from .numerics import no_grad
from .pathway_network import VARIANTS, PathwayConfig, census, count_params
from .synthetic import DEFAULT_GENRES, SIGNALS, SyntheticSpec, generate_synthetic
from .training import (
    RunConfig,
    ablation_matrix,
    evaluate,
    format_table,
    prepare,
    run_ablation,
    run_split,
    train,
)

log = logging.getLogger("aopath")


def _add_lexicon_args(p):
    p.add_argument("--actions-dict", help="action label file (one label per line)")
    p.add_argument("--objects-dict", help="object label file (one label per line)")
    p.add_argument("--embeddings", help="binary token embedding table")


def _add_run_args(p):
    p.add_argument("--config", help="JSON run configuration; flags given explicitly override it")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--k", type=int, dest="K")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--train-genre")
    p.add_argument("--eval-genre")
    p.add_argument("--dataset", help="training record file (JSON lines)")
    p.add_argument("--eval-dataset", help="evaluation record file; defaults to --dataset")
    _add_lexicon_args(p)


def run_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    pathway = cfg.pathway
    if args.variant and args.variant != pathway.variant:
        pathway = PathwayConfig.preset(args.variant, K=pathway.K)
    if args.K is not None:
        pathway = dataclasses.replace(pathway, K=args.K)
    changes = {
        name: getattr(args, name)
        for name in ("epochs", "batch_size", "lr", "seed", "actions_dict", "objects_dict", "embeddings", "dataset")
        if getattr(args, name, None) is not None
    }
    return dataclasses.replace(cfg, pathway=pathway, **changes)


def lexicon_for(args, cfg: RunConfig | None = None):
    get = lambda name: getattr(args, name, None) or (getattr(cfg, name) if cfg else None)  # noqa: E731
    return build_lexicon(get("actions_dict"), get("objects_dict"), get("embeddings"))


def _need(value, flag):
    if value is None:
        raise ConfigError(f"{flag} is required")
    return value


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _split(args, cfg: RunConfig) -> GenreSplit:
    train_pool = load_dataset(_need(cfg.dataset, "--dataset"))
    eval_pool = load_dataset(args.eval_dataset) if args.eval_dataset else train_pool
    train_genre = _need(args.train_genre, "--train-genre")
    eval_genre = args.eval_genre or train_genre
    split = GenreSplit.from_pools(train_genre, eval_genre, train_pool, eval_pool)
    if not split.train_records:
        raise DataError(f"no records of genre {train_genre!r} in {cfg.dataset}")
    if not split.eval_records:
        raise DataError(f"no records of genre {eval_genre!r} to evaluate on")
    return split


def cmd_train(args) -> None:
    cfg = run_config(args)
    lexicon = lexicon_for(args, cfg)
    if args.eval_genre or args.eval_dataset:
        split = _split(args, cfg)
        params, metrics = run_split(cfg, split, lexicon)
        report = {"split": split.name, **metrics.to_dict()}
    else:
        records = load_dataset(_need(cfg.dataset, "--dataset"))
        if args.train_genre:
            records = [r for r in records if r.genre == args.train_genre]
        params, metrics = train(cfg, records, lexicon)
        report = {"loss_curve": metrics.loss_curve, "n_train": len(metrics.train_ids)}
    report["config"] = cfg.to_dict()
    report["params"] = count_params(cfg.pathway)
    if args.checkpoint:
        save_checkpoint(params, args.checkpoint)
    _write_json(report, args.out)


def cmd_eval(args) -> None:
    params = load_checkpoint(args.checkpoint)
    lexicon = lexicon_for(args)
    records = load_dataset(args.dataset)
    if args.eval_genre:
        records = [r for r in records if r.genre == args.eval_genre]
    metrics = evaluate(params, records, lexicon).to_dict()
    metrics.pop("loss_curve")
    _write_json({"checkpoint": str(args.checkpoint), **metrics}, args.out)


def cmd_ablate(args) -> None:
    base = run_config(args)
    lexicon = lexicon_for(args, base)
    train_genres = (args.train_genre or "").split(",")
    eval_genres = (args.eval_genre or "").split(",")
    if len(train_genres) != len(eval_genres):
        raise ConfigError("--train-genre and --eval-genre need the same number of comma-separated genres")
    train_pool = load_dataset(_need(base.dataset, "--dataset"))
    eval_pool = load_dataset(args.eval_dataset) if args.eval_dataset else train_pool
    splits = [GenreSplit.from_pools(a, b, train_pool, eval_pool) for a, b in zip(train_genres, eval_genres)]
    matrix = ablation_matrix(base)
    if args.rows:
        wanted = args.rows.split(",")
        names = [n for n, _ in matrix]
        missing = [w for w in wanted if w not in names]
        if missing:
            raise ConfigError(f"unknown ablation rows: {', '.join(missing)}; available: {', '.join(names)}")
        matrix = [(n, c) for n, c in matrix if n in wanted]
    rows = run_ablation(matrix, splits, lexicon)
    print(format_table(rows))
    if args.out:
        _write_json(rows, args.out)


def cmd_extract(args) -> None:
    lexicon = lexicon_for(args)
    records = load_dataset(args.dataset)
    if args.record:
        records = [r for r in records if r.id == args.record]
        if not records:
            raise DataError(f"record {args.record!r} not found in {args.dataset}")
    records = records[: args.limit]
    for rec, ext in zip(records, extract_records(records, lexicon, args.K)):
        print(f"# {rec.id} genre={rec.genre} gold={rec.gold}")
        verbs, nouns = extract_subtitle_words(rec.subtitle, lexicon)
        print(f"subtitle verbs: {' '.join(verbs) or '-'}")
        print(f"subtitle nouns: {' '.join(nouns) or '-'}")
        for n in range(len(rec.T)):
            for key, kind in (("DA", "action"), ("DO", "object"), ("TA", "action"), ("TO", "object")):
                labels = lexicon.dictionary(kind).labels
                names = ", ".join(labels[i] for i in ext.ids[key][n])
                print(f"candidate {n} {key}: {names}")


def cmd_explain(args) -> None:
    params = load_checkpoint(args.checkpoint)
    lexicon = lexicon_for(args)
    records = load_dataset(args.dataset)
    if args.record:
        records = [r for r in records if r.id == args.record]
        if not records:
            raise DataError(f"record {args.record!r} not found in {args.dataset}")
    rec = records[0]
    ext = prepare([rec], params.cfg, lexicon)[0]
    with no_grad():
        _, info = forward_batch([ext], params, lexicon, details=True)
    total = info["total"][0]
    print(f"record {rec.id}  genre={rec.genre}  gold={rec.gold}  predicted={int(predict(total))}")
    for n in range(len(rec.T)):
        print(f"\ncandidate {n}" + ("  (gold)" if n == rec.gold else ""))
        live = [p for p in PATHWAYS if f"{p}.term" in info]
        if live:
            print(f"  {'pathway':<16}{'alpha':>11}{'cosine':>11}{'term':>11}")
            for p in live:
                a, c, t = (info[f"{p}.{k}"][0][n] for k in ("alpha", "cos", "term"))
                print(f"  {p:<16}{a:>11.5f}{c:>11.5f}{t:>11.5f}")
        for key in ("audio-rep.score", "text-rep.score", "text_logit", "audio_logit"):
            if key in info:
                print(f"  {key:<16}{info[key][0][n]:>33.5f}")
        print(f"  {'total':<16}{total[n]:>33.5f}")


def cmd_count_params(args) -> None:
    if args.config:
        pathway = RunConfig.from_file(args.config).pathway
    else:
        pathway = PathwayConfig.preset(args.variant or "aopath-s")
    if args.K is not None:
        pathway = dataclasses.replace(pathway, K=args.K)
    rows = census(pathway)
    width = max(len(name) for name, _ in rows)
    for name, n in rows:
        print(f"{name:<{width}}  {n:>10,}")
    print(f"{'total':<{width}}  {count_params(pathway):>10,}")


def cmd_gen_synthetic(args) -> None:
    lexicon = lexicon_for(args)
    spec = SyntheticSpec(
        n_records=args.n,
        genres=tuple(args.genres.split(",")),
        seed=args.seed,
        signal=args.signal,
        pool_size=args.pool_size,
    )
    records = generate_synthetic(spec, lexicon)
    save_dataset(records, _need(args.out, "--out"))
    print(f"wrote {len(records)} records to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aopath", description="Action and object pathway QA classifier")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model, optionally evaluating on a genre split")
    _add_run_args(p)
    p.add_argument("--checkpoint", help="where to save the trained parameters")
    p.add_argument("--out", help="metrics JSON path (default: stdout)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a record file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--eval-genre")
    p.add_argument("--out")
    _add_lexicon_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the ablation matrix over genre splits")
    _add_run_args(p)
    p.add_argument("--rows", help="comma-separated subset of ablation rows")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("extract", help="print the selected labels for records")
    p.add_argument("--dataset", required=True)
    p.add_argument("--k", type=int, dest="K", default=15)
    p.add_argument("--record")
    p.add_argument("--limit", type=int, default=1)
    _add_lexicon_args(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("explain", help="per-candidate attention weights, cosines and logits")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--record")
    _add_lexicon_args(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("count-params", help="per-layer parameter census")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--config")
    p.add_argument("--k", type=int, dest="K")
    p.set_defaults(func=cmd_count_params)

    p = sub.add_parser("gen-synthetic", help="write a synthetic record file")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--genres", default=",".join(DEFAULT_GENRES))
    p.add_argument("--signal", choices=SIGNALS, default="pathway")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pool-size", type=int, default=SyntheticSpec.pool_size)
    p.add_argument("--out")
    _add_lexicon_args(p)
    p.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (AOPathError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"aopath {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0
