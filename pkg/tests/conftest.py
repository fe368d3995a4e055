"""Shared fixtures: random table corpus, probe fixtures, token corpora."""
import numpy as np
import pytest

from modspec import EmbeddingTable, TokenCorpus


def divisors(n):
    return [t for t in range(2, n // 2 + 1) if n % t == 0]


def random_table_specs(count=50):
    """Deterministic (n_tokens, dim, period) list with invertible S_W.

    Sizes cycle over N in {20, 100, 1000} and d in {1, 8, 64}; periods cycle
    over the divisors of N.  Combinations with n - T <= d are excluded so
    the pooled within-class scatter has full rank for Gaussian data.
    """
    combos = [
        (n, d)
        for n in (20, 100, 1000)
        for d in (1, 8, 64)
        if min(divisors(n)) < n - d
    ]
    specs = []
    i = 0
    while len(specs) < count:
        n, d = combos[i % len(combos)]
        valid = [t for t in divisors(n) if n - t > d]
        t = valid[(i // len(combos)) % len(valid)]
        specs.append((n, d, t))
        i += 1
    return specs


@pytest.fixture(scope="session")
def random_tables():
    """50 Gaussian tables paired with a period dividing their length."""
    tables = []
    for idx, (n, d, t) in enumerate(random_table_specs(50)):
        rng = np.random.default_rng(np.random.SeedSequence([9001, idx]))
        table = EmbeddingTable(
            rng.normal(size=(n, d)).astype(np.float32), label=f"random-{idx}"
        )
        tables.append((table, t))
    return tables


@pytest.fixture(scope="session")
def xor_table():
    """T=2 classes on crossed diagonals: non-linearly-separable at N=200."""
    rng = np.random.default_rng(np.random.SeedSequence([3131]))
    corners = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    rows = np.empty((200, 2))
    for i in range(200):
        rows[i] = corners[2 * (i % 2) + ((i // 2) % 2)]
    rows += 0.05 * rng.normal(size=rows.shape)
    return EmbeddingTable(rows.astype(np.float32), label="xor")


@pytest.fixture(scope="session")
def gaussian_table():
    """Pure-noise i.i.d. Gaussian table, N=1000, d=8."""
    rng = np.random.default_rng(np.random.SeedSequence([4242]))
    return EmbeddingTable(
        rng.normal(size=(1000, 8)).astype(np.float32), label="gaussian-noise"
    )


TEXT_IDS = 10
NUMBER_VALUES = 100


def number_vocab():
    """Token ids 10..109 encode the values 0..99; ids 0..9 are text."""
    return {TEXT_IDS + v: v for v in range(NUMBER_VALUES)}


def make_corpus(n_sequences, seed, *, min_len=80, max_len=120, number_frac=0.35):
    """Synthetic corpus with a skewed number marginal and run structure.

    Number values tend to continue v -> v+1 (mod 100), so bigram statistics
    carry real information for the perturbation audits to destroy.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    weights = 1.0 / (1.0 + np.arange(NUMBER_VALUES))
    weights /= weights.sum()
    sequences = []
    for _ in range(n_sequences):
        length = int(rng.integers(min_len, max_len + 1))
        tokens = rng.integers(0, TEXT_IDS, size=length)
        is_number = rng.random(length) < number_frac
        idx = np.flatnonzero(is_number)
        values = np.empty(idx.shape[0], dtype=np.int64)
        prev = -1
        fresh = rng.choice(NUMBER_VALUES, size=idx.shape[0], p=weights)
        cont = rng.random(idx.shape[0]) < 0.7
        for j in range(idx.shape[0]):
            if prev >= 0 and cont[j]:
                values[j] = (prev + 1) % NUMBER_VALUES
            else:
                values[j] = fresh[j]
            prev = values[j]
        tokens[idx] = TEXT_IDS + values
        sequences.append(tokens)
    return TokenCorpus(
        tuple(sequences), TEXT_IDS + NUMBER_VALUES, number_vocab()
    )


@pytest.fixture(scope="session")
def small_corpus():
    return make_corpus(40, seed=555)


@pytest.fixture(scope="session")
def big_corpus():
    """10k-sequence corpus for the perturbation invariants."""
    return make_corpus(10_000, seed=7777)
