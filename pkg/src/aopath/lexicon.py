"""Label dictionaries and the token embedding table.

The embedding table stands in for a pretrained text embedder: every token
maps to one fixed-width row, and a multi-token label is the mean of its
token rows.
"""
from __future__ import annotations

import hashlib
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

from .errors import LexiconError, UnknownTokenError

EMBED_DIM = 768
_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*")
_TABLE_MAGIC = b"AOPEMB1\n"

Kind = Literal["action", "object"]


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; punctuation and whitespace are separators."""
    return _TOKEN_RE.findall(text.lower())


def normalize_label(label: str) -> str:
    return " ".join(tokenize(label))


@dataclass
class EmbeddingTable:
    vocab: dict[str, int]
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.vocab):
            raise LexiconError(f"table has {len(self.vocab)} tokens but vectors of shape {self.vectors.shape}")
        if not np.isfinite(self.vectors).all():
            raise LexiconError("embedding table contains non-finite values")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def __len__(self) -> int:
        return len(self.vocab)

    def lookup(self, token: str) -> np.ndarray:
        try:
            return self.vectors[self.vocab[token]]
        except KeyError:
            raise UnknownTokenError(token) from None

    def tokens(self) -> list[str]:
        return sorted(self.vocab, key=self.vocab.__getitem__)


def synthetic_table(tokens: Iterable[str], dim: int = EMBED_DIM, seed: int = 0, norm: float | None = None) -> EmbeddingTable:
    """Gaussian row per token, rescaled to length ``norm``.

    The default length ``sqrt(dim)`` gives entries of unit variance, the
    scale of typical pretrained token embeddings; pass ``norm=1`` for unit rows.

    Each row is seeded from ``(seed, token)`` alone, so a token's vector does
    not depend on which other tokens are in the table or their order.
    """
    vocab: dict[str, int] = {}
    for tok in tokens:
        vocab.setdefault(tok, len(vocab))
    norm = np.sqrt(dim) if norm is None else norm
    vectors = np.empty((len(vocab), dim))
    for tok, row in vocab.items():
        digest = hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest()
        rng = np.random.default_rng([seed, int.from_bytes(digest, "little")])
        v = rng.standard_normal(dim)
        vectors[row] = norm * v / np.linalg.norm(v)
    return EmbeddingTable(vocab, vectors)


def save_table(table: EmbeddingTable, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_TABLE_MAGIC)
        fh.write(struct.pack("<II", len(table), table.dim))
        for tok in table.tokens():
            raw = tok.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(table.vectors[table.vocab[tok]].astype("<f8").tobytes())


def load_table(path) -> EmbeddingTable:
    blob = Path(path).read_bytes()
    if not blob.startswith(_TABLE_MAGIC):
        raise LexiconError(f"{path}: not an embedding table (bad magic)")
    pos = len(_TABLE_MAGIC)
    try:
        size, dim = struct.unpack_from("<II", blob, pos)
        pos += 8
        vocab: dict[str, int] = {}
        vectors = np.empty((size, dim))
        for row in range(size):
            (n,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            tok = blob[pos : pos + n].decode("utf-8")
            pos += n
            if tok in vocab:
                raise LexiconError(f"{path}: duplicate token {tok!r}")
            vocab[tok] = row
            vectors[row] = np.frombuffer(blob, dtype="<f8", count=dim, offset=pos)
            pos += 8 * dim
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, LexiconError):
            raise
        raise LexiconError(f"{path}: truncated or corrupt embedding table") from exc
    if pos != len(blob):
        raise LexiconError(f"{path}: {len(blob) - pos} trailing bytes")
    return EmbeddingTable(vocab, vectors)


def embed_label(label: str, table: EmbeddingTable) -> np.ndarray:
    """Mean of the rows of the label's known tokens (case-insensitive)."""
    toks = tokenize(label)
    if not toks:
        raise ValueError("empty label")
    rows = [table.vectors[table.vocab[t]] for t in toks if t in table.vocab]
    if not rows:
        raise UnknownTokenError(label)
    if len(rows) == 1:
        return rows[0].copy()
    return np.mean(rows, axis=0)


def embed_tokens(words: Iterable[str], table: EmbeddingTable) -> tuple[list[np.ndarray], int]:
    """Embed each word in order; returns ``(vectors, skipped)`` for unknown words."""
    vectors, skipped = [], 0
    for w in words:
        try:
            vectors.append(embed_label(w, table))
        except (UnknownTokenError, ValueError):
            skipped += 1
    return vectors, skipped


@dataclass
class LabelDictionary:
    kind: Kind
    labels: list[str]
    embeddings: np.ndarray
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("action", "object"):
            raise LexiconError(f"unknown dictionary kind {self.kind!r}")
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        if self.embeddings.shape[0] != len(self.labels):
            raise LexiconError("one embedding row per label required")
        dupes = sorted(k for k, n in Counter(self.labels).items() if n > 1)
        if dupes:
            raise LexiconError(f"duplicate labels in {self.kind} dictionary: {', '.join(dupes)}")
        norms = np.linalg.norm(self.embeddings, axis=1)
        if not np.isfinite(self.embeddings).all() or (norms == 0).any():
            bad = [self.labels[i] for i in np.flatnonzero(~(norms > 0))]
            raise LexiconError(f"zero-norm or non-finite embedding for: {', '.join(bad) or '?'}")
        self.index = {lab: i for i, lab in enumerate(self.labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    @cached_property
    def unit_embeddings(self) -> np.ndarray:
        return self.embeddings / np.linalg.norm(self.embeddings, axis=1, keepdims=True)

    @classmethod
    def from_labels(cls, labels: Iterable[str], kind: Kind, table: EmbeddingTable) -> LabelDictionary:
        labels = [normalize_label(lab) for lab in labels]
        if not all(labels):
            raise LexiconError("empty label")
        dupes = sorted(k for k, n in Counter(labels).items() if n > 1)
        if dupes:
            raise LexiconError(f"duplicate labels in {kind} dictionary: {', '.join(dupes)}")
        rows = []
        for lab in labels:
            try:
                rows.append(embed_label(lab, table))
            except UnknownTokenError:
                raise LexiconError(f"label {lab!r} has no token in the embedding table") from None
        emb = np.stack(rows) if rows else np.empty((0, table.dim))
        return cls(kind, labels, emb)


def read_label_file(path) -> list[str]:
    labels = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            labels.append(line)
    return labels


def load_dictionary(path, kind: Kind, table: EmbeddingTable) -> LabelDictionary:
    return LabelDictionary.from_labels(read_label_file(path), kind, table)


def save_dictionary(dictionary: LabelDictionary, path) -> None:
    Path(path).write_text("".join(lab + "\n" for lab in dictionary.labels), encoding="utf-8")


@dataclass
class Lexicon:
    """The action dictionary, object dictionary and token table used together."""

    actions: LabelDictionary
    objects: LabelDictionary
    table: EmbeddingTable

    def dictionary(self, kind: Kind) -> LabelDictionary:
        return self.actions if kind == "action" else self.objects


def reference_label_files() -> tuple[Path, Path]:
    base = resources.files("aopath") / "data"
    return Path(str(base / "actions.txt")), Path(str(base / "objects.txt"))


def default_filler_words() -> list[str]:
    return (
        "i you he she we they it the a an to of and in on at for with is was are were "
        "be been not no yes this that what why how where when there here my your his her "
        "our their me him us them oh okay well just so but or if then now really think know"
    ).split()


def build_lexicon(
    actions_path=None,
    objects_path=None,
    embeddings_path=None,
    dim: int = EMBED_DIM,
    seed: int = 0,
    norm: float | None = None,
) -> Lexicon:
    """Load dictionaries and table, falling back to the bundled reference lists.

    Without an embedding file a synthetic table is generated covering every
    dictionary token plus a small set of non-dictionary filler words.
    """
    ref_actions, ref_objects = reference_label_files()
    action_labels = read_label_file(actions_path or ref_actions)
    object_labels = read_label_file(objects_path or ref_objects)
    if embeddings_path is not None:
        table = load_table(embeddings_path)
    else:
        tokens = [t for lab in action_labels + object_labels for t in tokenize(lab)]
        table = synthetic_table(tokens + default_filler_words(), dim=dim, seed=seed, norm=norm)
    return Lexicon(
        LabelDictionary.from_labels(action_labels, "action", table),
        LabelDictionary.from_labels(object_labels, "object", table),
        table,
    )
