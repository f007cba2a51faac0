"""Seeded synthetic QA data standing in for backbone features.

``signal="pathway"``: each candidate's D and T are noisy mixtures of the
embeddings of a few dictionary words; the subtitle mentions the gold
candidate's words. Gold and distractors are drawn from the same distribution,
so raw features alone carry no answer signal.

``signal="text"``: the gold T feature is shifted along one fixed direction
(linearly separable from T alone).

``signal="none"``: every feature is i.i.d. noise.

Every genre draws its words from its own disjoint slice of each dictionary,
which is what creates the domain gap between genres.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import N_CANDIDATES, QARecord
from .errors import ConfigError
from .lexicon import Lexicon, default_filler_words

SIGNALS = ("pathway", "text", "none")
DEFAULT_GENRES = ("medical", "sitcom", "crime")


@dataclass(frozen=True)
class SyntheticSpec:
    n_records: int
    genres: tuple[str, ...] = DEFAULT_GENRES
    seed: int = 0
    signal: str = "pathway"
    verbs_per_candidate: int = 2
    nouns_per_candidate: int = 2
    noise: float = 1.0
    text_shift: float = 1.0
    # words per genre and dictionary (None = the genre's whole slice); a
    # bounded pool lets every word recur often enough to be learned
    pool_size: int | None = 200
    vocab_seed: int = 0

    def __post_init__(self):
        if self.signal not in SIGNALS:
            raise ConfigError(f"unknown signal {self.signal!r}; expected one of {', '.join(SIGNALS)}")
        if self.n_records < 0 or not self.genres:
            raise ConfigError("need n_records >= 0 and at least one genre")


def genre_vocabulary(lexicon: Lexicon, genres, vocab_seed: int = 0, pool_size: int | None = None) -> dict[str, tuple[list[str], list[str]]]:
    """Disjoint ``(verbs, nouns)`` word pools per genre.

    Only single-token labels that belong to exactly one dictionary are used,
    so a planted subtitle word is unambiguously a verb or a noun. The split
    depends on ``vocab_seed`` only, never on the record seed.
    """
    verbs = sorted(w for w in lexicon.actions.labels if " " not in w and w not in lexicon.objects)
    nouns = sorted(w for w in lexicon.objects.labels if " " not in w and w not in lexicon.actions)
    rng = np.random.default_rng([vocab_seed, 7])
    verbs = [verbs[i] for i in rng.permutation(len(verbs))]
    nouns = [nouns[i] for i in rng.permutation(len(nouns))]
    g = len(genres)
    return {name: (verbs[i::g][:pool_size], nouns[i::g][:pool_size]) for i, name in enumerate(genres)}


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _noise(rng, shape, dim) -> np.ndarray:
    return rng.standard_normal(shape) / np.sqrt(dim)


def _mixture(rng, rows: np.ndarray) -> np.ndarray:
    weights = rng.uniform(0.5, 1.0, size=len(rows))
    return _unit(weights @ rows)


def _subtitle(rng, verbs, nouns, filler) -> str:
    """Short clauses mentioning each verb and noun once, in a random order."""
    clauses = []
    order = rng.permutation(max(len(verbs), len(nouns)))
    for i in order:
        words = [str(rng.choice(filler))]
        if i < len(verbs):
            words.append(verbs[i])
        words.append(str(rng.choice(filler)))
        if i < len(nouns):
            words.append(nouns[i])
        clauses.append(" ".join(words))
    text = ". ".join(clauses)
    return text[:1].upper() + text[1:] + "."


def generate_synthetic(spec: SyntheticSpec, lexicon: Lexicon) -> list[QARecord]:
    rng = np.random.default_rng([spec.seed, SIGNALS.index(spec.signal)])
    vocab = genre_vocabulary(lexicon, spec.genres, spec.vocab_seed, spec.pool_size)
    filler = default_filler_words()
    dim = lexicon.table.dim
    direction = _unit(np.random.default_rng([spec.vocab_seed, 11]).standard_normal(dim))
    mv, mo = spec.verbs_per_candidate, spec.nouns_per_candidate
    for genre, (pool_v, pool_o) in vocab.items():
        if len(pool_v) < N_CANDIDATES * mv or len(pool_o) < N_CANDIDATES * mo:
            raise ConfigError(
                f"genre {genre!r} has {len(pool_v)} verbs and {len(pool_o)} nouns; "
                f"need {N_CANDIDATES * mv} and {N_CANDIDATES * mo} for distinct candidate words"
            )
    records = []
    for i in range(spec.n_records):
        genre = spec.genres[i % len(spec.genres)]
        pool_v, pool_o = vocab[genre]
        gold = int(rng.integers(N_CANDIDATES))
        if spec.signal == "pathway":
            verbs = rng.choice(pool_v, size=(N_CANDIDATES, mv), replace=False)
            nouns = rng.choice(pool_o, size=(N_CANDIDATES, mo), replace=False)
            D = np.empty((N_CANDIDATES, dim))
            T = np.empty((N_CANDIDATES, dim))
            for n in range(N_CANDIDATES):
                rows = np.concatenate(
                    [
                        lexicon.actions.embeddings[[lexicon.actions.index[w] for w in verbs[n]]],
                        lexicon.objects.embeddings[[lexicon.objects.index[w] for w in nouns[n]]],
                    ]
                )
                D[n] = _mixture(rng, rows) + spec.noise * _noise(rng, dim, dim)
                T[n] = _mixture(rng, rows) + spec.noise * _noise(rng, dim, dim)
            subtitle = _subtitle(rng, list(verbs[gold]), list(nouns[gold]), filler)
        else:
            D = _noise(rng, (N_CANDIDATES, dim), dim)
            T = _noise(rng, (N_CANDIDATES, dim), dim)
            if spec.signal == "text":
                T[gold] += spec.text_shift * direction
            subtitle = _subtitle(
                rng,
                list(rng.choice(pool_v, size=mv, replace=False)),
                list(rng.choice(pool_o, size=mo, replace=False)),
                filler,
            )
        records.append(
            QARecord(
                id=f"syn{spec.seed}-{spec.signal}-{i:06d}",
                D=D,
                T=T,
                subtitle=subtitle,
                gold=gold,
                genre=genre,
                series=f"{genre}-{i % 2}",
            )
        )
    return records
