"""Container types and on-disk formats for embedding tables and token corpora.

An embedding table holds one vector per token index.  The native file format
("raw-f32") is a single JSON header line followed by a little-endian float32
payload in row-major order, so a save/load round trip is bit-exact.  A
``.npy``-style reader/writer is provided as a convenience alias for 2-D
float32/float64 arrays.

Token corpora are newline-delimited JSON, one sequence of integer token ids
per line.  A separate JSON object file maps the token ids that encode numbers
to the integer values they stand for.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import FormatError, ValidationError
from .validation import preview_indices

RAW_F32 = "raw-f32"
NPY = "npy"
FORMATS = (RAW_F32, NPY)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """A dense (n_tokens, dim) table of token embeddings.

    Values are stored as read-only float32 (the native payload precision, so
    file round trips are exact); analyses upcast to float64.  1-D input is
    stored with shape (n_tokens, 1).
    """

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise ValidationError(
                f"embedding values must be 2-D, got shape {values.shape}"
            )
        if values.shape[0] < 2:
            raise ValidationError(
                f"an embedding table needs at least 2 rows, got {values.shape[0]}"
            )
        if values.shape[1] < 1:
            raise ValidationError("an embedding table needs at least 1 column")
        finite_rows = np.isfinite(values).all(axis=1)
        if not finite_rows.all():
            bad = np.flatnonzero(~finite_rows)
            raise ValidationError(
                f"non-finite embedding entries in rows {preview_indices(bad)}"
            )
        if not isinstance(self.label, str):
            raise ValidationError("label must be a string")
        object.__setattr__(
            self, "values", _readonly(values.astype(np.float32, copy=False))
        )

    @property
    def n_tokens(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def save_embeddings(table: EmbeddingTable, path, *, format: str = RAW_F32) -> Path:
    """Write a table to *path* in the given format and return the path."""
    path = Path(path)
    if format == RAW_F32:
        header = json.dumps(
            {"n_tokens": table.n_tokens, "dim": table.dim, "label": table.label}
        )
        with open(path, "wb") as fh:
            fh.write(header.encode("utf-8") + b"\n")
            fh.write(np.ascontiguousarray(table.values, dtype="<f4").tobytes())
    elif format == NPY:
        with open(path, "wb") as fh:
            np.save(fh, np.ascontiguousarray(table.values, dtype=np.float32))
    else:
        raise ValidationError(f"unknown embedding format {format!r}; use one of {FORMATS}")
    return path


def load_embeddings(path, *, format: str = RAW_F32) -> EmbeddingTable:
    """Read an embedding table written by :func:`save_embeddings`."""
    path = Path(path)
    if format == RAW_F32:
        return _load_raw(path)
    if format == NPY:
        return _load_npy(path)
    raise ValidationError(f"unknown embedding format {format!r}; use one of {FORMATS}")


def _load_raw(path: Path) -> EmbeddingTable:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    if not header_line.endswith(b"\n"):
        raise FormatError(f"{path}: missing header line")
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed header: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header must be a JSON object")
    try:
        n_tokens = int(header["n_tokens"])
        dim = int(header["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: header needs integer n_tokens and dim") from exc
    label = header.get("label", "")
    if not isinstance(label, str):
        raise FormatError(f"{path}: header label must be a string")
    if n_tokens < 2 or dim < 1:
        raise FormatError(
            f"{path}: header declares invalid shape ({n_tokens}, {dim})"
        )
    expected = n_tokens * dim * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} "
            f"for a ({n_tokens}, {dim}) float32 table"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(n_tokens, dim)
    return EmbeddingTable(values=values, label=label)


def _load_npy(path: Path) -> EmbeddingTable:
    try:
        arr = np.load(path, allow_pickle=False)
    except (ValueError, OSError) as exc:
        raise FormatError(f"{path}: not a readable npy file: {exc}") from exc
    if arr.ndim != 2:
        raise FormatError(f"{path}: expected a 2-D array, got {arr.ndim}-D")
    if arr.dtype not in (np.float32, np.float64):
        raise FormatError(
            f"{path}: expected float32 or float64 data, got {arr.dtype}"
        )
    return EmbeddingTable(values=arr.astype(np.float32, copy=False))


@dataclass(frozen=True, eq=False)
class TokenFrequencyTable:
    """Occurrence counts for number values 0..N-1 and the induced marginal."""

    counts: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_counts(cls, counts) -> "TokenFrequencyTable":
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValidationError("counts must be a non-empty 1-D array")
        if (counts < 0).any():
            raise ValidationError("counts must be non-negative")
        total = int(counts.sum())
        if total == 0:
            raise ValidationError(
                "no number tokens counted; the marginal distribution is undefined"
            )
        probs = counts.astype(np.float64) / total
        return cls(counts=_readonly(counts), probs=_readonly(probs))

    @property
    def n_values(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class TokenCorpus:
    """Sequences of integer token ids plus the number-token vocabulary.

    ``number_vocab`` maps the token ids that encode numbers to the integer
    values they stand for; all other ids are treated as text.
    """

    sequences: tuple
    vocab_size: int
    number_vocab: dict = field(default_factory=dict)

    def __post_init__(self):
        seqs = []
        for i, seq in enumerate(self.sequences):
            arr = np.asarray(seq, dtype=np.int64)
            if arr.ndim != 1:
                raise ValidationError(f"sequence {i} is not 1-D")
            if arr.size and (arr.min() < 0 or arr.max() >= self.vocab_size):
                raise ValidationError(
                    f"sequence {i} has token ids outside [0, {self.vocab_size})"
                )
            seqs.append(_readonly(arr))
        object.__setattr__(self, "sequences", tuple(seqs))
        if self.vocab_size < 1:
            raise ValidationError("vocab_size must be positive")
        vocab = {}
        for key, value in self.number_vocab.items():
            key, value = int(key), int(value)
            if not 0 <= key < self.vocab_size:
                raise ValidationError(
                    f"number_vocab token id {key} outside [0, {self.vocab_size})"
                )
            if value < 0:
                raise ValidationError(
                    f"number_vocab value {value} for token {key} is negative"
                )
            vocab[key] = value
        object.__setattr__(self, "number_vocab", vocab)

    @property
    def n_sequences(self) -> int:
        return len(self.sequences)

    def value_lut(self) -> np.ndarray:
        """vocab_size-long lookup of number values; -1 marks text tokens."""
        lut = np.full(self.vocab_size, -1, dtype=np.int64)
        for token_id, value in self.number_vocab.items():
            lut[token_id] = value
        return lut

    def number_positions(self, index: int) -> np.ndarray:
        """Positions of number tokens within sequence *index*."""
        lut = self.value_lut()
        return np.flatnonzero(lut[self.sequences[index]] >= 0)


def save_corpus(corpus: TokenCorpus, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for seq in corpus.sequences:
            fh.write(json.dumps([int(t) for t in seq]))
            fh.write("\n")
    return path


def load_corpus(path, number_vocab: dict, *, vocab_size: int | None = None) -> TokenCorpus:
    """Read a newline-delimited JSON corpus.

    ``vocab_size`` defaults to one past the largest id seen in the sequences
    or the number vocabulary.
    """
    path = Path(path)
    sequences = []
    max_id = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            if not isinstance(row, list) or not all(
                isinstance(t, int) and not isinstance(t, bool) for t in row
            ):
                raise FormatError(
                    f"{path}:{lineno}: each line must be a JSON array of integers"
                )
            if any(t < 0 for t in row):
                raise FormatError(f"{path}:{lineno}: negative token id")
            if row:
                max_id = max(max_id, max(row))
            sequences.append(np.asarray(row, dtype=np.int64))
    if not sequences:
        raise FormatError(f"{path}: corpus has no sequences")
    vocab_ids = [int(k) for k in number_vocab]
    if vocab_ids:
        max_id = max(max_id, max(vocab_ids))
    if vocab_size is None:
        vocab_size = max_id + 1
    return TokenCorpus(
        sequences=tuple(sequences),
        vocab_size=vocab_size,
        number_vocab={int(k): int(v) for k, v in number_vocab.items()},
    )


def save_number_vocab(number_vocab: dict, path) -> Path:
    path = Path(path)
    payload = {str(int(k)): int(v) for k, v in number_vocab.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=0, sort_keys=True)
        fh.write("\n")
    return path


def load_number_vocab(path) -> dict:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise FormatError(f"{path}: number vocabulary must be a JSON object")
    vocab = {}
    for key, value in raw.items():
        try:
            token_id = int(key)
            number_value = int(value)
        except (TypeError, ValueError) as exc:
            raise FormatError(
                f"{path}: entries must map token-id strings to integer values"
            ) from exc
        vocab[token_id] = number_value
    return vocab


def count_number_tokens(corpus: TokenCorpus) -> TokenFrequencyTable:
    """Count occurrences of each number value across the corpus.

    The number vocabulary must cover the values 0..N-1 exactly (N implied by
    the largest value present); a corpus with no number tokens is an error
    because the marginal would be undefined.
    """
    if not corpus.number_vocab:
        raise ValidationError("corpus has an empty number vocabulary")
    values = sorted(set(corpus.number_vocab.values()))
    n_values = values[-1] + 1
    missing = sorted(set(range(n_values)) - set(values))
    if missing:
        raise ValidationError(
            f"number vocabulary must cover 0..{n_values - 1}; "
            f"missing values {preview_indices(missing)}"
        )
    lut = corpus.value_lut()
    counts = np.zeros(n_values, dtype=np.int64)
    for seq in corpus.sequences:
        vals = lut[seq]
        vals = vals[vals >= 0]
        if vals.size:
            counts += np.bincount(vals, minlength=n_values)
    return TokenFrequencyTable.from_counts(counts)


def frequency_embedding(
    freq: TokenFrequencyTable, *, label: str = "number-frequency"
) -> EmbeddingTable:
    """A 1-dim table whose row n is the marginal probability of value n."""
    return EmbeddingTable(values=freq.probs.reshape(-1, 1), label=label)
