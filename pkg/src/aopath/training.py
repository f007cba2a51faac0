"""Training loop, evaluation and the ablation runner."""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aoextractor import ExtractedRecord, extract_records
from .classifier import forward_batch, predict
from .data import GenreSplit, QARecord
from .errors import ConfigError, DataError, NonFiniteError
from .lexicon import Lexicon
from .numerics import AdamState, adam_step, no_grad, softmax_cross_entropy
from .pathway_network import ModelParams, PathwayConfig, count_params, init_params

log = logging.getLogger(__name__)


class TrainingError(NonFiniteError):
    pass


@dataclass
class RunConfig:
    pathway: PathwayConfig = field(default_factory=PathwayConfig)
    epochs: int = 5
    batch_size: int = 32
    lr: float = 3e-4
    seed: int = 0
    shuffle_seed: int | None = None  # defaults to a stream derived from seed
    actions_dict: str | None = None
    objects_dict: str | None = None
    embeddings: str | None = None
    dataset: str | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr < 0:
            raise ConfigError("epochs >= 0, batch_size >= 1 and lr >= 0 required")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["pathway"] = self.pathway.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        d = dict(d)
        pathway = d.pop("pathway", {})
        if isinstance(pathway, str):
            pathway = {"variant": pathway}
        variant = pathway.get("variant", "aopath-s")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown run config keys: {', '.join(sorted(unknown))}")
        overrides = {k: v for k, v in pathway.items() if k != "variant"}
        return cls(pathway=PathwayConfig.preset(variant, **overrides), **d)

    @classmethod
    def from_file(cls, path) -> RunConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class Metrics:
    accuracy: float = float("nan")
    n_records: int = 0
    per_genre: dict[str, float] = field(default_factory=dict)
    loss_curve: list[float] = field(default_factory=list)
    eval_loss: float | None = None
    train_ids: list[str] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("train_ids")
        return d


def prepare(records, cfg: PathwayConfig, lexicon: Lexicon | None) -> list[ExtractedRecord]:
    """Run the (weight-free) extractor once; only pathway variants need it."""
    records = list(records)
    if cfg.kinds:
        return extract_records(records, lexicon, cfg.K)
    return [ExtractedRecord(r.id, r.D, r.T, r.gold, {}, {}) for r in records]


def _first_bad_record(batch, params, lexicon) -> str:
    for rec in batch:
        try:
            logits = forward_batch([rec], params, lexicon)
            softmax_cross_entropy(logits, [rec.gold])
        except NonFiniteError:
            return rec.record_id
    return batch[0].record_id


def train(cfg: RunConfig, split: GenreSplit | list[QARecord], lexicon: Lexicon | None, params: ModelParams | None = None):
    """Adam on the mean per-record cross-entropy of shuffled mini-batches.

    Returns ``(params, metrics)``; ``metrics.loss_curve`` holds the
    record-weighted mean loss of each epoch and ``metrics.train_ids`` every
    record id visited, for split audits.
    """
    records = split.train_records if isinstance(split, GenreSplit) else list(split)
    if not records:
        raise DataError("no training records")
    prepared = prepare(records, cfg.pathway, lexicon)
    params = init_params(cfg.pathway, cfg.seed) if params is None else params
    state = AdamState(lr=cfg.lr)
    shuffle_seed = cfg.shuffle_seed if cfg.shuffle_seed is not None else cfg.seed
    rng = np.random.default_rng([shuffle_seed, 0x5EED])
    metrics = Metrics()
    visited = set()

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(prepared))
        total, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [prepared[i] for i in order[start : start + cfg.batch_size]]
            visited.update(rec.record_id for rec in batch)
            try:
                logits = forward_batch(batch, params, lexicon)
                loss = softmax_cross_entropy(logits, [rec.gold for rec in batch])
                loss.backward()
            except NonFiniteError as exc:
                bad = _first_bad_record(batch, params, lexicon)
                raise TrainingError(f"epoch {epoch}: non-finite loss, first offending record {bad}") from exc
            adam_step(params, state)
            total += loss.item() * len(batch)
            seen += len(batch)
        metrics.loss_curve.append(total / seen)
        log.info("epoch %d mean loss %.6f", epoch + 1, metrics.loss_curve[-1])

    metrics.train_ids = sorted(visited)
    return params, metrics


def evaluate(params: ModelParams, records, lexicon: Lexicon | None, batch_size: int = 256) -> Metrics:
    """Exact-match accuracy of argmax(logits) against gold, overall and per genre."""
    records = list(records)
    if not records:
        raise DataError("no evaluation records")
    prepared = prepare(records, params.cfg, lexicon)
    correct = np.zeros(len(records), dtype=bool)
    loss_sum = 0.0
    with no_grad():
        for start in range(0, len(prepared), batch_size):
            batch = prepared[start : start + batch_size]
            logits = forward_batch(batch, params, lexicon)
            gold = np.array([rec.gold for rec in batch])
            correct[start : start + len(batch)] = predict(logits.data) == gold
            loss_sum += softmax_cross_entropy(logits, gold).item() * len(batch)
    per_genre = {}
    genres = np.array([r.genre for r in records])
    for g in sorted(set(genres)):
        per_genre[g] = float(correct[genres == g].mean())
    return Metrics(
        accuracy=float(correct.mean()),
        n_records=len(records),
        per_genre=per_genre,
        eval_loss=loss_sum / len(records),
    )


def run_split(cfg: RunConfig, split: GenreSplit, lexicon: Lexicon | None):
    """Train on the split's source genre, evaluate on its target genre."""
    params, train_metrics = train(cfg, split, lexicon)
    leaked = set(train_metrics.train_ids) & {r.id for r in split.eval_records}
    if leaked:
        raise DataError(f"split {split.name}: training visited {len(leaked)} evaluation records")
    metrics = evaluate(params, split.eval_records, lexicon)
    metrics.loss_curve = train_metrics.loss_curve
    metrics.train_ids = train_metrics.train_ids
    return params, metrics


def describe(cfg: PathwayConfig) -> dict:
    """Row descriptors of a configuration: labels, feature size, pathways, inputs and outputs."""
    pathways = {(True, True): "actions+objects", (True, False): "actions", (False, True): "objects"}
    outputs = [name for name, on in (("audio", cfg.use_audio_head), ("text", cfg.use_text_head)) if on]
    if cfg.kinds:
        outputs.append("pathways")
    return {
        "variant": cfg.variant,
        "labels": cfg.K,
        "feature_size": cfg.proj_dim,
        "pathways": pathways.get((cfg.use_actions, cfg.use_objects), "none") if cfg.kinds else "none",
        "outputs": "+".join(outputs),
        "attention": cfg.use_attention if cfg.kinds else None,
        "params": count_params(cfg),
    }


def run_ablation(matrix, splits, lexicon: Lexicon | None) -> list[dict]:
    """Train and evaluate every ``(name, RunConfig)`` on every split.

    Each cell starts from its own config seed, so cells can be rerun alone.
    """
    rows = []
    for name, cfg in matrix:
        for split in splits:
            _, metrics = run_split(cfg, split, lexicon)
            rows.append(
                {
                    "config": name,
                    "split": split.name,
                    **describe(cfg.pathway),
                    "seed": cfg.seed,
                    "accuracy": metrics.accuracy,
                    "final_loss": metrics.loss_curve[-1] if metrics.loss_curve else None,
                }
            )
    return rows


def format_table(rows: list[dict]) -> str:
    """Configs as rows, splits as columns (accuracy in percent)."""
    splits = list(dict.fromkeys(r["split"] for r in rows))
    configs = list(dict.fromkeys(r["config"] for r in rows))
    cell = {(r["config"], r["split"]): r for r in rows}
    width = max([len(c) for c in configs] + [6])
    head = f"{'config':<{width}}  {'params':>9}  " + "  ".join(f"{s:>16}" for s in splits)
    lines = [head, "-" * len(head)]
    for c in configs:
        first = next(r for r in rows if r["config"] == c)
        accs = "  ".join(
            f"{100 * cell[(c, s)]['accuracy']:>16.2f}" if (c, s) in cell else f"{'-':>16}" for s in splits
        )
        lines.append(f"{c:<{width}}  {first['params']:>9,}  {accs}")
    return "\n".join(lines)


def ablation_matrix(base: RunConfig) -> list[tuple[str, RunConfig]]:
    """The standard ablation rows around ``base``, then one row per variant.

    Label count K in {2, 15, 30}; feature size at half, one and one-and-a-half
    times the base projection; single pathways; output-head combinations; and
    attention switched off. Rows equal to the reference config are kept so
    every group reads as a complete comparison.
    """
    p = base.pathway

    def row(name, **changes):
        return name, dataclasses.replace(base, pathway=dataclasses.replace(p, **changes))

    rows = [row(f"labels={k}", K=k) for k in (2, 15, 30)]
    rows += [row(f"feature={d}", proj_dim=d) for d in (max(1, p.proj_dim // 2), p.proj_dim, p.proj_dim * 3 // 2)]
    rows += [
        row("actions", use_actions=True, use_objects=False),
        row("objects", use_actions=False, use_objects=True),
        row("actions+objects", use_actions=True, use_objects=True),
        row("audio+pathways", use_audio_head=True, use_text_head=False),
        row("text+pathways", use_audio_head=False, use_text_head=True),
        row("audio+text+pathways", use_audio_head=True, use_text_head=True),
        row("attention", use_attention=True),
        row("no-attention", use_attention=False),
        row("text-output", use_actions=False, use_objects=False, use_text_head=True, use_audio_head=False),
        row("pathways-output", use_text_head=False, use_audio_head=False),
    ]
    rows += [(v, dataclasses.replace(base, pathway=PathwayConfig.preset(v, K=p.K))) for v in VARIANT_ROWS]
    return rows


# aopath-b is by far the slowest row (1.58M parameters); filter it out for quick runs
VARIANT_ROWS = ("atclassifier", "nopaths", "aopath-s", "aopath-b")
