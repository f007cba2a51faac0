import pytest

from aopath.data import QARecord
from aopath.lexicon import LabelDictionary, Lexicon, build_lexicon, default_filler_words, synthetic_table, tokenize

TINY_ACTIONS = ["run", "walk", "eat", "open", "drink", "sit", "throw", "carry", "runs", "hold"]
TINY_OBJECTS = ["car", "cup", "door", "table", "phone", "bag", "open", "coffee cup", "chair", "key", "book", "hat"]


@pytest.fixture(scope="session")
def lexicon():
    """Reference dictionaries (1000 actions, 1374 objects) over a synthetic 768-d table."""
    return build_lexicon()


def make_tiny_lexicon(dim=12, seed=0):
    tokens = [t for lab in TINY_ACTIONS + TINY_OBJECTS for t in tokenize(lab)] + default_filler_words()
    table = synthetic_table(tokens, dim=dim, seed=seed)
    return Lexicon(
        LabelDictionary.from_labels(TINY_ACTIONS, "action", table),
        LabelDictionary.from_labels(TINY_OBJECTS, "object", table),
        table,
    )


@pytest.fixture
def tiny_lexicon():
    return make_tiny_lexicon()


def random_record(rng, dim, subtitle="he runs to the car and opens the door", rid="r0", genre="medical", gold=None):
    return QARecord(
        id=rid,
        D=rng.standard_normal((5, dim)),
        T=rng.standard_normal((5, dim)),
        subtitle=subtitle,
        gold=int(rng.integers(5)) if gold is None else gold,
        genre=genre,
    )


# --- acceptance summary ------------------------------------------------------

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def verdict(request):
    """Record one acceptance line, print it, then assert on it."""
    results = request.config.stash[ACCEPTANCE]

    def record(number: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        results[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 10):
        terminalreporter.write_line(results.get(number, f"NOT RUN criterion {number}: deselected or stopped before its verdict"))
