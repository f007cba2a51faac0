"""Weight-free dissociation of features into action and object pathways.

A modality feature is matched against every label embedding by cosine
similarity and the K best labels become that feature's pathway sequence
(strongest first). Subtitles contribute the verbs and nouns that literally
occur in the dictionaries.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConfigError, DataError
from .lexicon import LabelDictionary, Lexicon, embed_tokens, tokenize

Source = Literal["audio", "text", "subtitle"]

_CHUNK = 2048
_TIE_TOL = 1e-9  # far above matmul rounding on unit vectors


@dataclass
class PathwayFeatureSet:
    kind: Literal["action", "object"]
    source: Source
    vectors: np.ndarray  # [n, dim]
    label_ids: np.ndarray | None = None
    degenerate: bool = False  # zero-norm feature (audio/text) or empty subtitle sentinel

    def __len__(self) -> int:
        return len(self.vectors)


def _ranked_top_k(sims: np.ndarray, K: int, unit: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Row-wise indices of the K largest similarities, descending, ties by lower index.

    ``sims`` comes from a matrix product, whose rounding can differ between two
    identical label rows depending on where they sit in the table. Labels within
    ``_TIE_TOL`` of the K-th value are therefore rescored one row at a time, so
    that equal rows get bit-equal scores and the index rule decides.
    """
    neg = -sims
    kth = np.partition(neg, K - 1, axis=1)[:, K - 1 : K]
    out = np.empty((sims.shape[0], K), dtype=np.intp)
    for r in range(sims.shape[0]):
        cand = np.flatnonzero(neg[r] <= kth[r] + _TIE_TOL)
        exact = -(labels[cand] * unit[r]).sum(axis=1)
        out[r] = cand[np.argsort(exact, kind="stable")][:K]
    return out


def top_k_ids(features: np.ndarray, dictionary: LabelDictionary, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Batched retrieval: ``features`` is ``[N, dim]``; returns ``(ids [N, K], degenerate [N])``."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if K < 1 or K > len(dictionary):
        raise ConfigError(f"K={K} must lie in [1, {len(dictionary)}] for the {dictionary.kind} dictionary")
    if not np.isfinite(features).all():
        raise DataError("non-finite modality feature")
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    degenerate = norms[:, 0] == 0
    unit = features / np.where(degenerate[:, None], 1.0, norms)
    labels = dictionary.unit_embeddings
    ids = np.concatenate(
        [_ranked_top_k(unit[i : i + _CHUNK] @ labels.T, K, unit[i : i + _CHUNK], labels) for i in range(0, len(unit), _CHUNK)]
    )
    return ids, degenerate


def top_k_labels(feature: np.ndarray, dictionary: LabelDictionary, K: int, source: Source = "text") -> PathwayFeatureSet:
    ids, degenerate = top_k_ids(feature, dictionary, K)
    if degenerate[0]:
        warnings.warn("zero-norm feature: all similarities are 0, returning the first K labels", RuntimeWarning)
    return PathwayFeatureSet(dictionary.kind, source, dictionary.embeddings[ids[0]], ids[0], bool(degenerate[0]))


def extract_modality_pathways(D: np.ndarray, T: np.ndarray, lexicon: Lexicon, K: int):
    """``(D_A, D_O, T_A, T_O)`` for one audio feature and one text feature."""
    return (
        top_k_labels(D, lexicon.actions, K, "audio"),
        top_k_labels(D, lexicon.objects, K, "audio"),
        top_k_labels(T, lexicon.actions, K, "text"),
        top_k_labels(T, lexicon.objects, K, "text"),
    )


def extract_subtitle_words(subtitle: str, lexicon: Lexicon) -> tuple[list[str], list[str]]:
    """Dictionary verbs and nouns in order of occurrence (duplicates kept)."""
    tokens = tokenize(subtitle)
    verbs = [t for t in tokens if t in lexicon.actions]
    nouns = [t for t in tokens if t in lexicon.objects]
    return verbs, nouns


def subtitle_pathways(subtitle: str, lexicon: Lexicon) -> tuple[PathwayFeatureSet, PathwayFeatureSet]:
    """Embedded subtitle verbs and nouns; an empty side becomes one zero row."""
    verbs, nouns = extract_subtitle_words(subtitle, lexicon)
    out = []
    for kind, words in (("action", verbs), ("object", nouns)):
        vectors, _ = embed_tokens(words, lexicon.table)
        if vectors:
            out.append(PathwayFeatureSet(kind, "subtitle", np.stack(vectors)))
        else:
            out.append(PathwayFeatureSet(kind, "subtitle", np.zeros((1, lexicon.table.dim)), degenerate=True))
    return out[0], out[1]


@dataclass
class ExtractedRecord:
    """Everything the trainable part of the model needs from one QA record.

    ``ids`` maps ``"DA" | "DO" | "TA" | "TO"`` to ``[n_candidates, K]``
    dictionary rows; ``subtitle`` maps ``"A" | "O"`` to subtitle pathways.
    """

    record_id: str
    D: np.ndarray
    T: np.ndarray
    gold: int
    ids: dict[str, np.ndarray]
    subtitle: dict[str, PathwayFeatureSet]


def extract_records(records, lexicon: Lexicon, K: int) -> list[ExtractedRecord]:
    """Run the extractor over many records with one matrix product per dictionary."""
    records = list(records)
    if not records:
        return []
    D = np.concatenate([r.D for r in records])
    T = np.concatenate([r.T for r in records])
    counts = [len(r.D) for r in records]
    cuts = np.cumsum(counts)[:-1]
    found = {}
    for key, feats, dictionary in (
        ("DA", D, lexicon.actions),
        ("DO", D, lexicon.objects),
        ("TA", T, lexicon.actions),
        ("TO", T, lexicon.objects),
    ):
        ids, _ = top_k_ids(feats, dictionary, K)
        found[key] = np.split(ids, cuts)
    out = []
    for i, r in enumerate(records):
        s_a, s_o = subtitle_pathways(r.subtitle, lexicon)
        out.append(
            ExtractedRecord(
                r.id,
                r.D,
                r.T,
                r.gold,
                {key: found[key][i] for key in found},
                {"A": s_a, "O": s_o},
            )
        )
    return out
