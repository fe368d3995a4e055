"""Corpus perturbations that knock out specific kinds of number structure.

Four transforms over a token corpus, each destroying one ingredient while
preserving the rest:

* :func:`isolate_k`: tokens untouched; emits a segmentation plan that caps
  every attention segment at k number tokens;
* :func:`context_window`: reshapes each sequence into independent fixed
  length windows, shrinking how much context any token can see;
* :func:`swap_numbers`: overwrites each sequence's number slots with a
  contiguous slice of the corpus-wide number stream drawn from *other*
  sequences (local n-gram statistics survive, position-specific content
  does not);
* :func:`unigram_replace`: resamples every number slot i.i.d. from the
  corpus marginal (only the frequency profile survives).

Randomized transforms draw from the portable generator in :mod:`.rng` via
one substream per sequence, so results are reproducible across platforms
and independent of processing order.  :func:`marginal_audit` quantifies
what a perturbation actually changed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import SwapPoolError, ValidationError
from .io import TokenCorpus
from .rng import substream


@dataclass(frozen=True, eq=False)
class SegmentPlan:
    """Per-sequence segmentation metadata for attention isolation.

    All fields are tuples with one entry per sequence: ``boundaries`` holds
    the segment-start indices (the first is 0 for non-empty sequences),
    ``segment_ids`` the per-token segment index, ``position_ids`` the
    per-token offset within its segment, and ``loss_mask`` a 0/1 bit that is
    0 on the first token of every segment, where prediction would have to
    cross the boundary.
    """

    boundaries: tuple
    segment_ids: tuple
    position_ids: tuple
    loss_mask: tuple

    def n_segments(self, index: int) -> int:
        return int(self.boundaries[index].shape[0])


@dataclass(frozen=True, eq=False)
class PerturbedCorpus:
    """A perturbation's output corpus plus its provenance.

    ``plan`` is only set by perturbations that change segmentation rather
    than token content.
    """

    corpus: TokenCorpus
    name: str
    params: tuple = ()
    seed: int | None = None
    plan: SegmentPlan | None = None

    @property
    def sequences(self) -> tuple:
        return self.corpus.sequences


def _number_positions(corpus: TokenCorpus) -> list:
    lut = corpus.value_lut()
    return [np.flatnonzero(lut[seq] >= 0) for seq in corpus.sequences]


def _number_stream(corpus: TokenCorpus, positions: list) -> np.ndarray:
    parts = [seq[pos] for seq, pos in zip(corpus.sequences, positions)]
    if not parts:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(parts)


def isolate_k(corpus: TokenCorpus, k: int) -> PerturbedCorpus:
    """Segmentation plan capping every segment at ``k`` number tokens.

    Numbers are grouped greedily left to right into runs of at most k; the
    boundary between consecutive groups sits at the midpoint of the text gap
    separating them (the left segment keeps the extra token when the gap is
    odd).  Token content is unchanged; sequences with at most k numbers get
    a single segment.
    """
    if k < 1:
        raise ValidationError(f"k must be at least 1, got {k}")
    boundaries, segment_ids, position_ids, loss_mask = [], [], [], []
    lut = corpus.value_lut()
    for seq in corpus.sequences:
        length = seq.shape[0]
        if length == 0:
            empty = np.zeros(0, dtype=np.int64)
            boundaries.append(empty)
            segment_ids.append(empty)
            position_ids.append(empty)
            loss_mask.append(empty)
            continue
        numbers = np.flatnonzero(lut[seq] >= 0)
        cuts = [0]
        for g in range(k, numbers.shape[0], k):
            last_prev = int(numbers[g - 1])
            first_next = int(numbers[g])
            gap = first_next - last_prev - 1
            cuts.append(last_prev + 1 + (gap + 1) // 2)
        starts = np.asarray(cuts, dtype=np.int64)
        seg = np.searchsorted(starts, np.arange(length), side="right") - 1
        pos = np.arange(length) - starts[seg]
        mask = np.ones(length, dtype=np.int64)
        mask[starts] = 0
        for arr in (starts, seg, pos, mask):
            arr.setflags(write=False)
        boundaries.append(starts)
        segment_ids.append(seg)
        position_ids.append(pos)
        loss_mask.append(mask)
    plan = SegmentPlan(
        boundaries=tuple(boundaries),
        segment_ids=tuple(segment_ids),
        position_ids=tuple(position_ids),
        loss_mask=tuple(loss_mask),
    )
    return PerturbedCorpus(corpus, "isolate_k", (("k", int(k)),), plan=plan)


def context_window(corpus: TokenCorpus, window: int) -> PerturbedCorpus:
    """Reshape each length-L sequence into floor(L/window) windows.

    Trailing remainders are dropped; sequences shorter than ``window``
    contribute nothing.  Raises if that leaves no windows at all.
    """
    if window < 2:
        raise ValidationError(f"window must be at least 2, got {window}")
    pieces = []
    for seq in corpus.sequences:
        n_windows = seq.shape[0] // window
        for w in range(n_windows):
            pieces.append(seq[w * window : (w + 1) * window])
    if not pieces:
        raise ValidationError(
            f"every sequence is shorter than window={window}; "
            "the reshaped corpus would be empty"
        )
    reshaped = TokenCorpus(tuple(pieces), corpus.vocab_size, corpus.number_vocab)
    return PerturbedCorpus(reshaped, "context_window", (("window", int(window)),))


def _complement_slice(
    stream: np.ndarray, lo: int, hi: int, start: int, count: int, wrap: bool
) -> np.ndarray:
    # The complement of stream[lo:hi] is addressed as 0..len-(hi-lo)-1;
    # indices at or past lo skip over the excised range.
    idx = start + np.arange(count, dtype=np.int64)
    if wrap:
        idx %= stream.shape[0] - (hi - lo)
    return stream[np.where(idx < lo, idx, idx + (hi - lo))]


def swap_numbers(
    corpus: TokenCorpus, seed: int, *, wrap_around: bool = False
) -> PerturbedCorpus:
    """Overwrite each sequence's number slots with other sequences' numbers.

    The corpus's number tokens are pooled into a single sequence-major
    stream; each sequence's c slots are filled by a contiguous, order
    preserving slice of that stream with the sequence's own range excised,
    starting at a seeded uniform position.  Text tokens are untouched and
    the set of number positions is preserved exactly.  A complement shorter
    than c raises unless ``wrap_around`` permits a cyclic slice.
    """
    positions = _number_positions(corpus)
    stream = _number_stream(corpus, positions)
    total = int(stream.shape[0])
    if total == 0:
        raise SwapPoolError("corpus contains no number tokens")
    offsets = np.concatenate(
        [[0], np.cumsum([pos.shape[0] for pos in positions])]
    )
    sequences = []
    for i, seq in enumerate(corpus.sequences):
        pos = positions[i]
        count = int(pos.shape[0])
        if count == 0:
            sequences.append(seq)
            continue
        available = total - count
        if available == 0:
            raise SwapPoolError(
                f"sequence {i} holds every number token in the corpus; "
                "there is no other material to draw from"
            )
        rng = substream(seed, i)
        lo, hi = int(offsets[i]), int(offsets[i]) + count
        if available >= count:
            start = rng.bounded(available - count + 1)
            replacement = _complement_slice(stream, lo, hi, start, count, False)
        elif wrap_around:
            start = rng.bounded(available)
            replacement = _complement_slice(stream, lo, hi, start, count, True)
        else:
            raise SwapPoolError(
                f"sequence {i} needs {count} numbers but only {available} "
                "exist outside it; pass wrap_around=True to slice cyclically"
            )
        out = seq.copy()
        out[pos] = replacement
        sequences.append(out)
    swapped = TokenCorpus(tuple(sequences), corpus.vocab_size, corpus.number_vocab)
    return PerturbedCorpus(
        swapped, "swap_numbers", (("wrap_around", bool(wrap_around)),), seed=int(seed)
    )


def unigram_replace(corpus: TokenCorpus, seed: int) -> PerturbedCorpus:
    """Resample every number token i.i.d. from the corpus-wide marginal.

    Draws are uniform over the pooled occurrences, so each value is picked
    with its empirical frequency.  Text tokens and all positions are
    unchanged.
    """
    positions = _number_positions(corpus)
    stream = _number_stream(corpus, positions)
    total = int(stream.shape[0])
    if total == 0:
        raise SwapPoolError("corpus contains no number tokens")
    sequences = []
    for i, seq in enumerate(corpus.sequences):
        pos = positions[i]
        count = int(pos.shape[0])
        if count == 0:
            sequences.append(seq)
            continue
        rng = substream(seed, i)
        draws = np.fromiter(
            (rng.bounded(total) for _ in range(count)), dtype=np.int64, count=count
        )
        out = seq.copy()
        out[pos] = stream[draws]
        sequences.append(out)
    resampled = TokenCorpus(tuple(sequences), corpus.vocab_size, corpus.number_vocab)
    return PerturbedCorpus(resampled, "unigram_replace", (), seed=int(seed))


def identity(corpus: TokenCorpus) -> PerturbedCorpus:
    """The do-nothing perturbation (audit baseline)."""
    return PerturbedCorpus(corpus, "identity", ())


@dataclass(frozen=True, eq=False)
class AuditReport:
    """What a perturbation did to the number-token statistics.

    Counts are per number token id, aligned with ``token_ids``.  Survival
    statistics compare positions pairwise and are NaN when the two corpora
    are not shape-aligned (as after context_window).  Bigrams are pairs of
    consecutive number tokens within a sequence, text tokens between them
    ignored; ``bigram_overlap`` compares the bigram multisets, which is
    meaningful even without alignment.
    """

    token_ids: np.ndarray
    count_before: np.ndarray
    count_after: np.ndarray
    tv_distance: float
    max_count_delta: int
    token_survival: float
    bigram_survival: float
    bigram_overlap: float
    n_slots_before: int
    n_slots_after: int
    n_bigrams_before: int

    def frequency_deltas(self) -> np.ndarray:
        return self.count_after - self.count_before


def _bigrams(corpus: TokenCorpus, positions: list) -> np.ndarray:
    pairs = []
    for seq, pos in zip(corpus.sequences, positions):
        stream = seq[pos]
        if stream.shape[0] >= 2:
            pairs.append(stream[:-1] * corpus.vocab_size + stream[1:])
    if not pairs:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(pairs)


def _multiset_intersection(a: np.ndarray, b: np.ndarray) -> int:
    keys_a, counts_a = np.unique(a, return_counts=True)
    keys_b, counts_b = np.unique(b, return_counts=True)
    shared, idx_a, idx_b = np.intersect1d(
        keys_a, keys_b, assume_unique=True, return_indices=True
    )
    del shared
    return int(np.minimum(counts_a[idx_a], counts_b[idx_b]).sum())


def marginal_audit(before: TokenCorpus, after) -> AuditReport:
    """Compare number-token statistics before and after a perturbation.

    ``after`` may be a :class:`PerturbedCorpus` or a plain corpus.  The two
    must share the number vocabulary.
    """
    after_corpus = after.corpus if isinstance(after, PerturbedCorpus) else after
    if dict(before.number_vocab) != dict(after_corpus.number_vocab):
        raise ValidationError("number vocabularies differ between the corpora")
    if before.vocab_size != after_corpus.vocab_size:
        raise ValidationError("vocab sizes differ between the corpora")
    token_ids = np.array(sorted(before.number_vocab), dtype=np.int64)
    pos_before = _number_positions(before)
    pos_after = _number_positions(after_corpus)
    stream_before = _number_stream(before, pos_before)
    stream_after = _number_stream(after_corpus, pos_after)

    def counts(stream):
        if token_ids.size == 0:
            return np.zeros(0, dtype=np.int64)
        return np.bincount(stream, minlength=before.vocab_size)[token_ids]

    count_before = counts(stream_before)
    count_after = counts(stream_after)
    total_before = int(count_before.sum())
    total_after = int(count_after.sum())
    if total_before and total_after:
        tv = 0.5 * float(
            np.abs(
                count_before / total_before - count_after / total_after
            ).sum()
        )
    else:
        tv = 0.0
    deltas = count_after - count_before
    max_delta = int(np.abs(deltas).max()) if deltas.size else 0

    aligned = before.n_sequences == after_corpus.n_sequences and all(
        a.shape == b.shape
        for a, b in zip(before.sequences, after_corpus.sequences)
    )
    token_survival = np.nan
    bigram_survival = np.nan
    bigrams_before = _bigrams(before, pos_before)
    bigrams_after = _bigrams(after_corpus, pos_after)
    if aligned and total_before:
        token_survival = float((stream_before == stream_after).mean())
        if bigrams_before.shape[0] and (
            bigrams_before.shape[0] == bigrams_after.shape[0]
        ):
            bigram_survival = float((bigrams_before == bigrams_after).mean())
    if bigrams_before.shape[0]:
        inter = _multiset_intersection(bigrams_before, bigrams_after)
        bigram_overlap = inter / bigrams_before.shape[0]
    else:
        bigram_overlap = np.nan
    for arr in (token_ids, count_before, count_after):
        arr.setflags(write=False)
    return AuditReport(
        token_ids=token_ids,
        count_before=count_before,
        count_after=count_after,
        tv_distance=tv,
        max_count_delta=max_delta,
        token_survival=token_survival,
        bigram_survival=bigram_survival,
        bigram_overlap=bigram_overlap,
        n_slots_before=total_before,
        n_slots_after=total_after,
        n_bigrams_before=int(bigrams_before.shape[0]),
    )
