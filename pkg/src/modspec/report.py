"""Diagnostic bundles, CSV/JSON emission, and reproducibility manifests.

A report bundle answers the two-tier question for one embedding table: does
the spectrum spike at 1/T, and do the residue classes actually separate
(scatter anatomy plus probe kappa)?  Every emitted file starts with a schema
id and the name of the run manifest that produced it; floats are written
with ``repr`` so identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .geometry import noise_anatomy
from .io import (
    EmbeddingTable,
    TokenCorpus,
    count_number_tokens,
    frequency_embedding,
)
from .probes import ProbeConfig, SweepResult, probe_sweep
from .spectral import Spectrum, dft, spike_report
from .svg import bar_chart, line_chart
from .validation import as_matrix

SCHEMA_VERSION = "v1"


def schema_id(name: str) -> str:
    return f"modspec/{name}/{SCHEMA_VERSION}"


def file_digest(path) -> str:
    """sha256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce one tool invocation.

    ``inputs`` maps input paths to sha256 digests.  Outputs reference the
    manifest by file name; the manifest itself carries the only
    run-dependent value (wall-clock duration), so re-running the same
    parameters reproduces every other output byte for byte.
    """

    subcommand: str
    params: dict
    inputs: dict
    seeds: tuple
    version: str = __version__
    duration_seconds: float = 0.0

    def to_json(self) -> str:
        payload = dataclasses.asdict(self)
        payload["schema"] = schema_id("manifest")
        payload["seeds"] = list(self.seeds)
        return json.dumps(payload, indent=2, sort_keys=True, default=_plain) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json(), encoding="utf-8")
        return path


def _plain(value):
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return str(value)


def write_csv(path, name: str, manifest_name: str, header, rows) -> Path:
    """CSV with a leading comment line carrying schema and manifest ids."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema={schema_id(name)} manifest={manifest_name}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    return path


def write_json(path, name: str, manifest_name: str, payload: dict) -> Path:
    body = {"schema": schema_id(name), "manifest": manifest_name}
    body.update(payload)
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True, default=_plain)
        fh.write("\n")
    return path


@dataclass(frozen=True, eq=False)
class ReportBundle:
    """In-memory three-panel diagnostic for one table."""

    label: str
    n_tokens: int
    dim: int
    periods: tuple
    kinds: tuple
    spectrum: Spectrum
    spikes: tuple
    anatomy: tuple
    probes: SweepResult

    @property
    def errors(self) -> tuple:
        return self.probes.errors


def compose_report(
    table,
    periods,
    kinds=("linear",),
    config: ProbeConfig | None = None,
) -> ReportBundle:
    """Spectrum, spike rows, scatter anatomy, and probe grid for a table."""
    values = as_matrix(table)
    label = table.label if isinstance(table, EmbeddingTable) else ""
    periods = tuple(int(p) for p in periods)
    kinds = tuple(kinds)
    spectrum = dft(values)
    spikes = tuple(spike_report(spectrum, periods))
    anatomy = tuple(noise_anatomy(values, period) for period in periods)
    probes = probe_sweep(values, periods, kinds, config)
    return ReportBundle(
        label=label,
        n_tokens=values.shape[0],
        dim=values.shape[1],
        periods=periods,
        kinds=kinds,
        spectrum=spectrum,
        spikes=spikes,
        anatomy=anatomy,
        probes=probes,
    )


def freq_baseline(
    corpus: TokenCorpus,
    periods,
    kinds=("linear",),
    config: ProbeConfig | None = None,
):
    """Token-frequency baseline: counts -> 1-d table -> full report bundle."""
    freq = count_number_tokens(corpus)
    table = frequency_embedding(freq)
    return freq, table, compose_report(table, periods, kinds, config)


_ANATOMY_HEADER = (
    "period",
    "harmonic_power",
    "tr_between",
    "tr_within",
    "lambda_min_within",
    "lambda_max_within",
    "cond_within",
    "fisher",
    "bound_low",
    "bound_high",
    "regularization",
)


def write_anatomy_csv(rows, path, manifest_name: str) -> Path:
    """NoiseAnatomy rows as a diagnostic CSV."""
    return write_csv(
        path,
        "anatomy",
        manifest_name,
        _ANATOMY_HEADER,
        (tuple(getattr(row, field) for field in _ANATOMY_HEADER) for row in rows),
    )


def write_probe_csvs(sweep: SweepResult, outdir, stem: str, manifest_name: str) -> dict:
    """Summary and per-run CSVs for a probe sweep; returns {artifact: name}."""
    outdir = Path(outdir)
    summary_rows = []
    run_rows = []
    for cell in sweep.cells:
        if cell.result is None:
            summary_rows.append((cell.period, cell.kind, "", "", 0, cell.error))
            continue
        result = cell.result
        summary_rows.append(
            (
                cell.period,
                cell.kind,
                result.accuracy,
                result.kappa,
                len(result.per_run),
                "",
            )
        )
        for run in result.per_run:
            run_rows.append(
                (cell.period, cell.kind, run.seed, run.fold, run.accuracy, run.note)
            )
    files = {}
    files["probes_csv"] = write_csv(
        outdir / f"{stem}.probes.csv",
        "probes",
        manifest_name,
        ("period", "kind", "accuracy", "kappa", "n_runs", "error"),
        summary_rows,
    ).name
    files["probe_runs_csv"] = write_csv(
        outdir / f"{stem}.probe_runs.csv",
        "probe-runs",
        manifest_name,
        ("period", "kind", "seed", "fold", "accuracy", "note"),
        run_rows,
    ).name
    return files


def write_bundle(
    bundle: ReportBundle,
    outdir,
    stem: str,
    manifest_name: str,
    *,
    with_svg: bool = True,
) -> dict:
    """Write every artifact of a bundle; returns {artifact: file name}."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {}

    spectrum = bundle.spectrum
    freqs = spectrum.frequencies()
    files["spectrum_csv"] = write_csv(
        outdir / f"{stem}.spectrum.csv",
        "spectrum",
        manifest_name,
        ("k", "nu", "power", "norm_mag"),
        (
            (k, float(freqs[k]), float(spectrum.power[k]), float(spectrum.norm_mag[k]))
            for k in range(spectrum.power.shape[0])
        ),
    ).name

    files["spikes_csv"] = write_csv(
        outdir / f"{stem}.spikes.csv",
        "spikes",
        manifest_name,
        ("period", "harmonic_power", "peak_norm_mag", "prominence"),
        (
            (row.period, row.harmonic_power, row.peak_norm_mag, row.prominence)
            for row in bundle.spikes
        ),
    ).name

    files["anatomy_csv"] = write_anatomy_csv(
        bundle.anatomy, outdir / f"{stem}.anatomy.csv", manifest_name
    ).name

    files.update(write_probe_csvs(bundle.probes, outdir, stem, manifest_name))

    if with_svg:
        comment = f"schema={schema_id('chart')} manifest={manifest_name}"
        spectrum_svg = line_chart(
            freqs[1:],
            spectrum.norm_mag[1:],
            title=f"Median-normalized spectrum ({bundle.label or stem})",
            x_label="frequency (cycles per token)",
            y_label="power / median power",
            comment=comment,
        )
        (outdir / f"{stem}.spectrum.svg").write_text(spectrum_svg, encoding="utf-8")
        files["spectrum_svg"] = f"{stem}.spectrum.svg"
        bars = [
            (f"T={cell.period} {cell.kind}", cell.result.kappa)
            for cell in bundle.probes.cells
            if cell.result is not None
        ]
        if bars:
            kappa_svg = bar_chart(
                [label for label, _ in bars],
                [value for _, value in bars],
                title=f"Probe kappa ({bundle.label or stem})",
                x_label="cell",
                y_label="kappa (percent)",
                comment=comment,
            )
            (outdir / f"{stem}.kappa.svg").write_text(kappa_svg, encoding="utf-8")
            files["kappa_svg"] = f"{stem}.kappa.svg"

    payload = {
        "label": bundle.label,
        "n_tokens": bundle.n_tokens,
        "dim": bundle.dim,
        "periods": list(bundle.periods),
        "kinds": list(bundle.kinds),
        "files": dict(files),
        "spikes": [dataclasses.asdict(row) for row in bundle.spikes],
        "anatomy": [dataclasses.asdict(row) for row in bundle.anatomy],
        "probes": [
            {
                "period": cell.period,
                "kind": cell.kind,
                "accuracy": None if cell.result is None else cell.result.accuracy,
                "kappa": None if cell.result is None else cell.result.kappa,
                "error": cell.error,
            }
            for cell in bundle.probes.cells
        ],
        "errors": [list(item) for item in bundle.errors],
    }
    files["report_json"] = write_json(
        outdir / f"{stem}.report.json", "report", manifest_name, payload
    ).name
    return files
