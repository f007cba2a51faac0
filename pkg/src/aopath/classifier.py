"""Candidate scoring: attention-weighted pathway similarities plus linear heads.

For each candidate and each enabled pathway (audio/text x action/object)::

    alpha = fc_att(rep)
    term  = cos(rep, subtitle_rep) * alpha

and the candidate logit is the sum of the terms plus ``fc_t(T)`` (and
``fc_d(D)`` when the audio head is on).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aoextractor import ExtractedRecord, extract_records
from .errors import DataError
from .lexicon import Lexicon
from .numerics import Tensor, affine, concat, cosine_similarity, take_rows
from .pathway_network import ModelParams, PathwayConfig, global_representation

N_CANDIDATES = 5
PATHWAYS = ("audio-action", "audio-object", "text-action", "text-object")
_KIND_NAME = {"a": "action", "o": "object"}


@dataclass
class CandidateScore:
    pathway_terms: dict[str, float]
    attention_weights: dict[str, float]
    cosines: dict[str, float]
    text_logit: float
    audio_logit: float | None
    total: float


def pathway_term(rep: Tensor, sub_rep: Tensor, params: ModelParams, use_attention: bool = True) -> tuple[Tensor, Tensor]:
    """``(cos(rep, sub_rep) * alpha, alpha)`` with ``alpha = fc_att(rep)`` or 1."""
    cos = cosine_similarity(rep, sub_rep)
    if not use_attention:
        return cos, Tensor(np.ones(cos.shape))
    W, b = params.affine("fc_att")
    alpha = affine(rep, W, b)[..., 0]
    return cos * alpha, alpha


def score_candidate(D_reps: dict, T_reps: dict, S_reps: dict, T_feat, D_feat, params: ModelParams, cfg: PathwayConfig) -> CandidateScore:
    """Score one candidate from its global representations.

    ``*_reps`` map ``"a"``/``"o"`` to BiLSTM outputs; missing keys mean the
    pathway is disabled and contributes 0.
    """
    terms, alphas, cosines = {}, {}, {}
    total = 0.0
    for k in ("a", "o"):
        for modality, reps in (("audio", D_reps), ("text", T_reps)):
            key = f"{modality}-{_KIND_NAME[k]}"
            if k not in cfg.kinds:
                terms[key], alphas[key], cosines[key] = 0.0, 0.0, 0.0
                continue
            if k not in reps or k not in S_reps:
                raise DataError(f"pathway {key} is enabled but its representation is missing")
            term, alpha = pathway_term(reps[k], S_reps[k], params, cfg.use_attention)
            terms[key] = term.item()
            alphas[key] = alpha.item()
            cosines[key] = cosine_similarity(reps[k], S_reps[k]).item()
    total = sum(terms[p] for p in PATHWAYS)
    text_logit = 0.0
    if cfg.use_text_head:
        text_logit = affine(_as_tensor(T_feat), *params.affine("fc_t")).data[0]
        total += text_logit
    audio_logit = None
    if cfg.use_audio_head:
        audio_logit = affine(_as_tensor(D_feat), *params.affine("fc_d")).data[0]
        total += audio_logit
    return CandidateScore(terms, alphas, cosines, float(text_logit), audio_logit, float(total))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _gather_projected(dictionary_rows: np.ndarray, ids: np.ndarray, W: Tensor, b: Tensor) -> Tensor:
    """Project only the distinct labels used, then scatter them into ``ids``' shape."""
    uniq, inverse = np.unique(ids, return_inverse=True)
    projected = affine(Tensor(dictionary_rows[uniq]), W, b)
    return take_rows(projected, inverse.reshape(ids.shape))


def _subtitle_batch(batch: list[ExtractedRecord], key: str, dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-padded time-major subtitle vectors ``[L, B, dim]``, mask ``[L, B]``, non-empty flags ``[B]``."""
    seqs = [rec.subtitle[key] for rec in batch]
    L = max(len(s) for s in seqs)
    vectors = np.zeros((L, len(batch), dim))
    mask = np.zeros((L, len(batch)))
    for j, s in enumerate(seqs):
        vectors[: len(s), j] = s.vectors
        mask[: len(s), j] = 1.0
    live = np.array([0.0 if s.degenerate else 1.0 for s in seqs])
    return vectors, mask, live


def forward_batch(batch: list[ExtractedRecord], params: ModelParams, lexicon: Lexicon | None = None, details: bool = False):
    """Logits ``[B, 5]`` for a batch of extracted records.

    With ``details=True`` also returns a dict of per-candidate arrays: the
    four cosines, attention weights and terms, ``text_logit``,
    ``audio_logit`` and ``total``.
    """
    cfg = params.cfg
    for rec in batch:
        if len(rec.D) != N_CANDIDATES or len(rec.T) != N_CANDIDATES:
            raise DataError(f"record {rec.record_id}: expected {N_CANDIDATES} candidates, got {len(rec.T)}")
    D = Tensor(np.stack([rec.D for rec in batch]))
    T = Tensor(np.stack([rec.T for rec in batch]))
    parts: list[Tensor] = []
    info: dict[str, np.ndarray] = {}

    if cfg.variant == "atclassifier":
        W, b = params.affine("fc_t")
        if cfg.use_text_head:
            parts.append(affine(T, W, b)[..., 0])
            info["text_logit"] = parts[-1].data
        if cfg.use_audio_head:
            parts.append(affine(D, W, b)[..., 0])
            info["audio_logit"] = parts[-1].data
    elif cfg.variant == "nopaths":
        parts += _nopaths_terms(D, T, params, info)
    else:
        if cfg.kinds and lexicon is None:
            raise ValueError("the pathway variants need the lexicon to look up label embeddings")
        for k in cfg.kinds:
            parts += _pathway_terms(batch, k, params, lexicon, info)
        if cfg.use_text_head:
            parts.append(affine(T, *params.affine("fc_t"))[..., 0])
            info["text_logit"] = parts[-1].data
        if cfg.use_audio_head:
            parts.append(affine(D, *params.affine("fc_d"))[..., 0])
            info["audio_logit"] = parts[-1].data

    logits = parts[0]
    for p in parts[1:]:
        logits = logits + p
    if not details:
        return logits
    info["total"] = logits.data
    return logits, info


def _pathway_terms(batch, k: str, params: ModelParams, lexicon: Lexicon, info: dict) -> list[Tensor]:
    cfg = params.cfg
    kind = _KIND_NAME[k]
    rows = lexicon.dictionary(kind).embeddings
    B, n = len(batch), N_CANDIDATES
    K = batch[0].ids["D" + k.upper()].shape[1]

    # time-major label ids [K, B*n] for audio then text
    seqs = []
    for modality, layer in (("D", f"fc_d{k}"), ("T", f"fc_{k}")):
        ids = np.stack([rec.ids[modality + k.upper()] for rec in batch]).reshape(B * n, K).T
        seqs.append(_gather_projected(rows, ids, *params.affine(layer)))
    reps = global_representation(concat(seqs, axis=1), k, params)
    rep_d = reps[: B * n].reshape(B, n, -1)
    rep_t = reps[B * n :].reshape(B, n, -1)

    vectors, mask, live = _subtitle_batch(batch, k.upper(), rows.shape[1])
    sub_proj = affine(Tensor(vectors), *params.affine(f"fc_{k}"))
    sub_rep = global_representation(sub_proj, k, params, mask) * live[:, None]
    sub_rep = sub_rep.reshape(B, 1, -1)

    out = []
    for modality, rep in (("audio", rep_d), ("text", rep_t)):
        term, alpha = pathway_term(rep, sub_rep, params, cfg.use_attention)
        key = f"{modality}-{kind}"
        info[f"{key}.alpha"] = alpha.data
        info[f"{key}.cos"] = cosine_similarity(Tensor(rep.data), Tensor(sub_rep.data)).data
        info[f"{key}.term"] = term.data
        out.append(term)
    return out


def _nopaths_terms(D: Tensor, T: Tensor, params: ModelParams, info: dict) -> list[Tensor]:
    """Raw D and T, each projected and summarised by the shared BiLSTM (length 1)."""
    B, n, _ = D.shape
    d = affine(D, *params.affine("fc_da")).reshape(1, B * n, -1)
    t = affine(T, *params.affine("fc_a")).reshape(1, B * n, -1)
    reps = global_representation(concat([d, t], axis=1), "a", params)
    scores = affine(reps, *params.affine("fc_att"))[..., 0]
    audio, text = scores[: B * n].reshape(B, n), scores[B * n :].reshape(B, n)
    info["audio-rep.score"], info["text-rep.score"] = audio.data, text.data
    head = affine(T, *params.affine("fc_t"))[..., 0]
    info["text_logit"] = head.data
    return [audio, text, head]


def forward_question(record, params: ModelParams, lexicon: Lexicon | None = None) -> Tensor:
    """Logits ``[5]`` for one QA record; the prediction is their argmax."""
    if len(record.D) != N_CANDIDATES or len(record.T) != N_CANDIDATES:
        raise DataError(f"record {record.id}: expected {N_CANDIDATES} candidates")
    if params.cfg.kinds:
        extracted = extract_records([record], lexicon, params.cfg.K)[0]
    else:
        extracted = ExtractedRecord(record.id, record.D, record.T, record.gold, {}, {})
    return forward_batch([extracted], params, lexicon)[0]


def predict(logits: np.ndarray) -> np.ndarray:
    """Argmax over candidates; ties go to the lowest index."""
    return np.argmax(np.asarray(logits), axis=-1)
