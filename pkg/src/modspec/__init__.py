"""Spectral and geometric diagnostics for periodic structure in embeddings.

The package answers a two-tier question about an embedding table indexed by
integers: does the per-frequency power spectrum spike at multiples of 1/T
(spectral structure), and do the mod-T residue classes actually separate
(geometric structure)?  The two can dissociate, and the synth module builds
tables that prove it.
"""
from ._version import __version__
from .exceptions import (
    DivisibilityError,
    FoldError,
    FormatError,
    ModspecError,
    SingularScatterError,
    SwapPoolError,
    ValidationError,
)
from .geometry import (
    NoiseAnatomy,
    ScatterSummary,
    class_mean_dft_check,
    fisher_bounds,
    fisher_score,
    noise_anatomy,
    scatter,
)
from .io import (
    EmbeddingTable,
    TokenCorpus,
    TokenFrequencyTable,
    count_number_tokens,
    frequency_embedding,
    load_corpus,
    load_embeddings,
    load_number_vocab,
    save_corpus,
    save_embeddings,
    save_number_vocab,
)
from .perturb import (
    AuditReport,
    PerturbedCorpus,
    SegmentPlan,
    context_window,
    identity,
    isolate_k,
    marginal_audit,
    swap_numbers,
    unigram_replace,
)
from .probes import (
    CircularProbe,
    CircularProbeReport,
    LogisticProbe,
    MLPProbe,
    ProbeConfig,
    ProbeResult,
    ProbeRun,
    SweepResult,
    circular_probe,
    cohen_kappa,
    linear_probe,
    mlp_probe,
    probe_sweep,
    run_probe,
    stratified_fold_assignment,
)
from .report import (
    ReportBundle,
    RunManifest,
    compose_report,
    file_digest,
    freq_baseline,
    write_bundle,
)
from .rng import SplitMix64, substream
from .spectral import (
    HarmonicSet,
    SpikeRow,
    Spectrum,
    dft,
    harmonic_power,
    harmonic_set,
    off_harmonic_power,
    spike_report,
)
from .synth import (
    SynthPrediction,
    SynthSpec,
    best_interval_accuracy,
    construct,
    ideal_circle,
    predict,
    zero_harmonic_table,
)

import types as _types

__all__ = sorted(
    name
    for name, obj in globals().items()
    if not name.startswith("_") and not isinstance(obj, _types.ModuleType)
)
