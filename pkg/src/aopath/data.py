"""QA records, the JSON-lines record file, and genre splits."""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

N_CANDIDATES = 5


@dataclass(eq=False)
class QARecord:
    """One question: per-candidate audio (D) and text (T) features plus the raw subtitle."""

    id: str
    D: np.ndarray  # [5, dim]
    T: np.ndarray  # [5, dim]
    subtitle: str
    gold: int
    genre: str
    series: str = ""

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=np.float64)
        self.T = np.asarray(self.T, dtype=np.float64)
        if self.D.ndim != 2 or len(self.D) != N_CANDIDATES or self.T.shape != self.D.shape:
            raise DataError(f"record {self.id}: need {N_CANDIDATES} D/T feature pairs, got D{self.D.shape} T{self.T.shape}")
        if not (isinstance(self.gold, (int, np.integer)) and 0 <= self.gold < N_CANDIDATES):
            raise DataError(f"record {self.id}: gold index {self.gold!r} out of range")
        self.gold = int(self.gold)
        if not (np.isfinite(self.D).all() and np.isfinite(self.T).all()):
            raise DataError(f"record {self.id}: non-finite features")

    def __eq__(self, other) -> bool:
        if not isinstance(other, QARecord):
            return NotImplemented
        return (
            (self.id, self.subtitle, self.gold, self.genre, self.series)
            == (other.id, other.subtitle, other.gold, other.genre, other.series)
            and np.array_equal(self.D, other.D)
            and np.array_equal(self.T, other.T)
        )


def _encode(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _decode(text: str, shape: tuple[int, ...]) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"), validate=True)
    arr = np.frombuffer(raw, dtype="<f8")
    if arr.size != int(np.prod(shape)):
        raise ValueError(f"feature block holds {arr.size} values, expected {int(np.prod(shape))}")
    return arr.reshape(shape).astype(np.float64)


def record_to_json(rec: QARecord) -> str:
    return json.dumps(
        {
            "id": rec.id,
            "genre": rec.genre,
            "series": rec.series,
            "gold": rec.gold,
            "subtitle": rec.subtitle,
            "candidates": len(rec.D),
            "dim": rec.D.shape[1],
            "D": _encode(rec.D),
            "T": _encode(rec.T),
        },
        ensure_ascii=False,
    )


def record_from_json(line: str) -> QARecord:
    obj = json.loads(line)
    shape = (int(obj["candidates"]), int(obj["dim"]))
    return QARecord(
        id=str(obj["id"]),
        D=_decode(obj["D"], shape),
        T=_decode(obj["T"], shape),
        subtitle=str(obj["subtitle"]),
        gold=obj["gold"],
        genre=str(obj["genre"]),
        series=str(obj.get("series", "")),
    )


def save_dataset(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_to_json(rec) + "\n")


def load_dataset(path) -> list[QARecord]:
    """Parse a record file, failing on the first malformed line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(record_from_json(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed record: {exc}") from exc
    return records


@dataclass
class GenreSplit:
    """Train on ``train_genre``, evaluate on ``eval_genre`` (written X->Y)."""

    train_genre: str
    eval_genre: str
    train_records: list[QARecord] = field(repr=False)
    eval_records: list[QARecord] = field(repr=False)

    def __post_init__(self):
        overlap = {r.id for r in self.train_records} & {r.id for r in self.eval_records}
        if overlap:
            raise DataError(f"split {self.name}: {len(overlap)} record ids in both train and eval")

    @property
    def name(self) -> str:
        return f"{self.train_genre}->{self.eval_genre}"

    @classmethod
    def from_pools(cls, train_genre: str, eval_genre: str, train_pool, eval_pool=None) -> GenreSplit:
        """Select by genre tag. For X->X pass a separate ``eval_pool``."""
        eval_pool = train_pool if eval_pool is None else eval_pool
        train = [r for r in train_pool if r.genre == train_genre]
        held_out = [r for r in eval_pool if r.genre == eval_genre]
        if eval_pool is train_pool and train_genre == eval_genre:
            raise DataError("in-genre split needs a separate evaluation pool")
        return cls(train_genre, eval_genre, train, held_out)


def parse_split(text: str) -> tuple[str, str]:
    for sep in ("->", ":", ","):
        if sep in text:
            a, b = text.split(sep, 1)
            return a.strip(), b.strip()
    raise DataError(f"cannot parse split {text!r}; use TRAIN->EVAL")
