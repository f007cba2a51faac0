import base64
import json

import numpy as np
import pytest

from aopath.data import GenreSplit, QARecord, load_dataset, parse_split, record_to_json, save_dataset
from aopath.errors import DataError

from conftest import random_record


def test_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_dataset(path) == []


def test_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    recs = [random_record(rng, 16, rid=f"q{i}", subtitle=f"line {i} · «unicode» ü") for i in range(10)]
    save_dataset(recs, tmp_path / "d.jsonl")
    again = load_dataset(tmp_path / "d.jsonl")
    assert again == recs
    assert all(np.array_equal(a.D, b.D) for a, b in zip(again, recs))


def test_four_candidates_rejected(tmp_path):
    rng = np.random.default_rng(0)
    good = random_record(rng, 8, rid="ok")
    obj = json.loads(record_to_json(good))
    obj["candidates"] = 4
    obj["D"] = obj["T"] = base64.b64encode(np.ones((4, 8), "<f8").tobytes()).decode()
    path = tmp_path / "d.jsonl"
    path.write_text(record_to_json(good) + "\n" + json.dumps(obj) + "\n")
    with pytest.raises(DataError, match=":2:"):
        load_dataset(path)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda o: o.update(gold=5),
        lambda o: o.update(gold=-1),
        lambda o: o.pop("subtitle"),
        lambda o: o.update(D="not base64!"),
        lambda o: o.update(dim=7),
    ],
)
def test_malformed_records_name_their_line(tmp_path, mutate):
    rng = np.random.default_rng(1)
    obj = json.loads(record_to_json(random_record(rng, 8)))
    mutate(obj)
    path = tmp_path / "d.jsonl"
    path.write_text("\n" + json.dumps(obj) + "\n")
    with pytest.raises(DataError, match=":2:"):
        load_dataset(path)


def test_truncated_json_line(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"id": "x", ')
    with pytest.raises(DataError, match=":1:"):
        load_dataset(path)


def test_nonfinite_features_rejected():
    D = np.ones((5, 4))
    D[2, 1] = np.nan
    with pytest.raises(DataError):
        QARecord("x", D, np.ones((5, 4)), "", 0, "g")


def test_nonfinite_features_in_file(tmp_path):
    rng = np.random.default_rng(1)
    rec = random_record(rng, 4)
    line = record_to_json(rec)
    rec.D[0, 0] = np.inf  # bypasses validation, but the reader re-validates
    bad = record_to_json(rec)
    (tmp_path / "d.jsonl").write_text(line + "\n" + bad + "\n")
    with pytest.raises(DataError, match=":2:"):
        load_dataset(tmp_path / "d.jsonl")


def test_split_by_genre_and_hygiene():
    rng = np.random.default_rng(2)
    pool = [random_record(rng, 4, rid=f"r{i}", genre=g) for i, g in enumerate(["medical", "sitcom", "crime"] * 4)]
    split = GenreSplit.from_pools("medical", "sitcom", pool)
    assert split.name == "medical->sitcom"
    assert {r.genre for r in split.train_records} == {"medical"}
    assert {r.genre for r in split.eval_records} == {"sitcom"}
    with pytest.raises(DataError):
        GenreSplit.from_pools("medical", "medical", pool)
    with pytest.raises(DataError):
        GenreSplit("medical", "medical", pool[:3], pool[:1])


def test_in_genre_split_with_separate_pool():
    rng = np.random.default_rng(3)
    train = [random_record(rng, 4, rid=f"a{i}") for i in range(3)]
    held = [random_record(rng, 4, rid=f"b{i}") for i in range(2)]
    split = GenreSplit.from_pools("medical", "medical", train, held)
    assert len(split.train_records) == 3 and len(split.eval_records) == 2


@pytest.mark.parametrize("text", ["medical->sitcom", "medical:sitcom", " medical , sitcom "])
def test_parse_split(text):
    assert parse_split(text) == ("medical", "sitcom")


def test_parse_split_error():
    with pytest.raises(DataError):
        parse_split("medical")
