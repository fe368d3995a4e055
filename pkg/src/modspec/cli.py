"""Command line interface.

One binary, seven subcommands::

    modspec spectrum  TABLE  --periods 2,5,10
    modspec scatter   TABLE  --periods 10
    modspec probe     TABLE  --periods 2,5,10 --kinds linear,mlp
    modspec synth     --period 10 --epsilon 0.009 --amplitude 5 --preset interleaved
    modspec perturb   CORPUS --number-vocab VOCAB --config swap --seed 7
    modspec freq-baseline CORPUS --number-vocab VOCAB --periods 10
    modspec report    TABLE  --periods 10 --kinds linear,mlp,circular

Every run writes ``<stem>.manifest.json`` (parameters, input digests, seeds,
version, duration) next to its outputs, and every output embeds the manifest
name, so a run can be reproduced from its artifacts alone.  The default
output directory is ``$MODSPEC_OUTDIR`` when set, else the current one.

Exit codes: 0 success, 1 completed with per-cell errors (partial sweep),
2 hard error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from pathlib import Path

from ._version import __version__
from .exceptions import ModspecError
from .geometry import noise_anatomy, scatter
from .io import (
    NPY,
    RAW_F32,
    load_corpus,
    load_embeddings,
    load_number_vocab,
    save_corpus,
    save_embeddings,
)
from .perturb import (
    context_window,
    isolate_k,
    marginal_audit,
    swap_numbers,
    unigram_replace,
)
from .probes import ProbeConfig, circular_probe, probe_sweep
from .report import (
    RunManifest,
    compose_report,
    file_digest,
    freq_baseline,
    schema_id,
    write_anatomy_csv,
    write_bundle,
    write_csv,
    write_json,
    write_probe_csvs,
)
from .spectral import dft, spike_report
from .svg import bar_chart, line_chart
from .synth import SynthSpec, construct, predict
from .validation import as_matrix

PROBE_KINDS = ("linear", "mlp", "circular")


def _int_list(text: str) -> tuple:
    try:
        items = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")
    if not items:
        raise argparse.ArgumentTypeError("empty list")
    return items


def _period_list(text: str) -> tuple:
    # Every output table is sorted by period, so the request list is
    # canonicalized the same way.
    return tuple(sorted(set(_int_list(text))))


def _kind_list(text: str) -> tuple:
    kinds = tuple(tok.strip() for tok in text.split(",") if tok.strip())
    for kind in kinds:
        if kind not in PROBE_KINDS:
            raise argparse.ArgumentTypeError(
                f"unknown probe kind {kind!r}; choose from {', '.join(PROBE_KINDS)}"
            )
    if not kinds:
        raise argparse.ArgumentTypeError("empty kind list")
    return kinds


def _add_output_args(sub):
    sub.add_argument(
        "--outdir",
        type=Path,
        default=None,
        help="output directory (default: $MODSPEC_OUTDIR or the current directory)",
    )
    sub.add_argument("--stem", default=None, help="output file stem")


def _resolve_out(args, fallback: str):
    outdir = args.outdir
    if outdir is None:
        outdir = Path(os.environ.get("MODSPEC_OUTDIR", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    stem = args.stem if args.stem else fallback
    return outdir, stem


def _params(args) -> dict:
    skip = {"handler", "outdir", "stem"}
    out = {}
    for key, value in vars(args).items():
        if key in skip:
            continue
        out[key] = str(value) if isinstance(value, Path) else value
    return out


def _write_manifest(args, outdir, stem, *, inputs=(), seeds=(), started) -> str:
    manifest = RunManifest(
        subcommand=args.handler.__name__.removeprefix("_cmd_").replace("_", "-"),
        params=_params(args),
        inputs={str(path): file_digest(path) for path in inputs},
        seeds=tuple(int(s) for s in seeds),
        version=__version__,
        duration_seconds=time.perf_counter() - started,
    )
    name = f"{stem}.manifest.json"
    manifest.write(Path(outdir) / name)
    return name


def _load_table(path: Path, fmt: str):
    if fmt == "auto":
        fmt = NPY if path.suffix.lower() == ".npy" else RAW_F32
    return load_embeddings(path, format=fmt)


def _probe_config(args, period: int) -> ProbeConfig:
    return ProbeConfig(
        kind="linear",
        period=period,
        n_folds=args.folds,
        standardize=not args.no_standardize,
        seeds=tuple(args.seeds),
    )


def _report_cell_errors(errors) -> None:
    for period, kind, message in errors:
        print(f"probe cell T={period} kind={kind} failed: {message}", file=sys.stderr)


def _cmd_spectrum(args) -> int:
    started = time.perf_counter()
    table = _load_table(args.table, args.format)
    outdir, stem = _resolve_out(args, args.table.stem)
    manifest_name = f"{stem}.manifest.json"
    spectrum = dft(
        table,
        method=args.method,
        norm_kind=args.norm,
        median_includes_dc=args.median_includes_dc,
    )
    freqs = spectrum.frequencies()
    write_csv(
        outdir / f"{stem}.spectrum.csv",
        "spectrum",
        manifest_name,
        ("k", "nu", "power", "norm_mag"),
        (
            (k, float(freqs[k]), float(spectrum.power[k]), float(spectrum.norm_mag[k]))
            for k in range(spectrum.power.shape[0])
        ),
    )
    if args.periods:
        write_csv(
            outdir / f"{stem}.spikes.csv",
            "spikes",
            manifest_name,
            ("period", "harmonic_power", "peak_norm_mag", "prominence"),
            (
                (row.period, row.harmonic_power, row.peak_norm_mag, row.prominence)
                for row in spike_report(spectrum, args.periods)
            ),
        )
    if not args.no_svg:
        chart = line_chart(
            freqs[1:],
            spectrum.norm_mag[1:],
            title=f"Median-normalized spectrum ({table.label or stem})",
            x_label="frequency (cycles per token)",
            y_label=f"{args.norm} / median",
            comment=f"schema={schema_id('chart')} manifest={manifest_name}",
        )
        (outdir / f"{stem}.spectrum.svg").write_text(chart, encoding="utf-8")
    _write_manifest(args, outdir, stem, inputs=[args.table], started=started)
    return 0


def _cmd_scatter(args) -> int:
    started = time.perf_counter()
    table = _load_table(args.table, args.format)
    outdir, stem = _resolve_out(args, args.table.stem)
    manifest_name = f"{stem}.manifest.json"
    values = as_matrix(table)
    summaries = []
    rows = []
    for period in args.periods:
        summary = scatter(values, period)
        entry = dataclasses.asdict(summary)
        if args.no_matrices:
            for field in ("class_means", "grand_mean", "s_between", "s_within"):
                entry.pop(field)
        summaries.append(entry)
        rows.append(noise_anatomy(values, period))
    write_anatomy_csv(rows, outdir / f"{stem}.anatomy.csv", manifest_name)
    write_json(
        outdir / f"{stem}.scatter.json",
        "scatter",
        manifest_name,
        {"label": table.label, "periods": list(args.periods), "scatter": summaries},
    )
    _write_manifest(args, outdir, stem, inputs=[args.table], started=started)
    return 0


def _cmd_probe(args) -> int:
    started = time.perf_counter()
    table = _load_table(args.table, args.format)
    outdir, stem = _resolve_out(args, args.table.stem)
    manifest_name = f"{stem}.manifest.json"
    values = as_matrix(table)
    config = _probe_config(args, args.periods[0])
    sweep = probe_sweep(values, args.periods, args.kinds, config)
    write_probe_csvs(sweep, outdir, stem, manifest_name)
    if args.dump_projection:
        rows = []
        for period in args.periods:
            projection = circular_probe(
                values, dataclasses.replace(config, period=period)
            )
            for index, point in enumerate(projection.projections):
                rows.append(
                    (period, index, index % period, float(point[0]), float(point[1]))
                )
        write_csv(
            outdir / f"{stem}.projection.csv",
            "projection",
            manifest_name,
            ("period", "index", "residue", "x", "y"),
            rows,
        )
    if args.svg:
        bars = [
            (f"T={cell.period} {cell.kind}", cell.result.kappa)
            for cell in sweep.cells
            if cell.result is not None
        ]
        if bars:
            chart = bar_chart(
                [label for label, _ in bars],
                [value for _, value in bars],
                title=f"Probe kappa ({table.label or stem})",
                x_label="cell",
                y_label="kappa (percent)",
                comment=f"schema={schema_id('chart')} manifest={manifest_name}",
            )
            (outdir / f"{stem}.kappa.svg").write_text(chart, encoding="utf-8")
    _write_manifest(
        args, outdir, stem, inputs=[args.table], seeds=args.seeds, started=started
    )
    if sweep.errors:
        _report_cell_errors(sweep.errors)
        return 1
    return 0


def _cmd_synth(args) -> int:
    started = time.perf_counter()
    outdir, stem = _resolve_out(args, f"synth-T{args.period}")
    manifest_name = f"{stem}.manifest.json"
    if args.preset is not None:
        if args.block_scale is not None or args.power_target is not None:
            raise ModspecError(
                "--preset fixes B from the amplitude; it conflicts with "
                "--block-scale and --power-target"
            )
        amplitude = 1.0 if args.amplitude is None else args.amplitude
        spec = SynthSpec.preset(args.preset, args.period, args.epsilon, amplitude)
    else:
        if args.block_scale is None:
            raise ModspecError("one of --block-scale or --preset is required")
        if (args.power_target is None) == (args.amplitude is None):
            raise ModspecError(
                "give exactly one of --power-target or --amplitude"
            )
        if args.power_target is not None:
            spec = SynthSpec(
                period=args.period,
                epsilon=args.epsilon,
                power_target=args.power_target,
                block_scale=args.block_scale,
            )
        else:
            spec = SynthSpec.from_amplitude(
                args.period, args.epsilon, args.amplitude, args.block_scale
            )
    table = construct(spec)
    save_embeddings(table, outdir / f"{stem}.table.f32")
    prediction = predict(spec)
    write_json(
        outdir / f"{stem}.prediction.json",
        "prediction",
        manifest_name,
        {
            "spec": dataclasses.asdict(spec),
            "prediction": dataclasses.asdict(prediction),
            "table": f"{stem}.table.f32",
        },
    )
    _write_manifest(args, outdir, stem, started=started)
    return 0


def _cmd_perturb(args) -> int:
    started = time.perf_counter()
    allowed = {"isolate": ("--k",), "context": ("--window",), "swap": ("--wrap-around",)}
    given = {
        "--k": args.k is not None,
        "--window": args.window is not None,
        "--wrap-around": bool(args.wrap_around),
    }
    for flag, present in given.items():
        if present and flag not in allowed.get(args.config, ()):
            raise ModspecError(f"{flag} does not apply to --config {args.config}")
    vocab = load_number_vocab(args.number_vocab)
    corpus = load_corpus(args.corpus, vocab, vocab_size=args.vocab_size)
    outdir, stem = _resolve_out(args, f"{args.corpus.stem}.{args.config}")
    manifest_name = f"{stem}.manifest.json"
    seeds = ()
    if args.config == "isolate":
        if args.k is None:
            raise ModspecError("--config isolate requires --k")
        result = isolate_k(corpus, args.k)
    elif args.config == "context":
        if args.window is None:
            raise ModspecError("--config context requires --window")
        result = context_window(corpus, args.window)
    elif args.config == "swap":
        result = swap_numbers(corpus, args.seed, wrap_around=args.wrap_around)
        seeds = (args.seed,)
    else:
        result = unigram_replace(corpus, args.seed)
        seeds = (args.seed,)
    save_corpus(result.corpus, outdir / f"{stem}.corpus.jsonl")
    if result.plan is not None:
        with open(outdir / f"{stem}.plan.jsonl", "w", encoding="utf-8") as fh:
            plan = result.plan
            for i in range(len(plan.boundaries)):
                fh.write(
                    json.dumps(
                        {
                            "boundaries": plan.boundaries[i].tolist(),
                            "segment_ids": plan.segment_ids[i].tolist(),
                            "position_ids": plan.position_ids[i].tolist(),
                            "loss_mask": plan.loss_mask[i].tolist(),
                        }
                    )
                    + "\n"
                )
    audit = marginal_audit(corpus, result)
    write_json(
        outdir / f"{stem}.audit.json",
        "audit",
        manifest_name,
        {
            "perturbation": result.name,
            "params": [list(pair) for pair in result.params],
            "tv_distance": audit.tv_distance,
            "max_count_delta": audit.max_count_delta,
            "token_survival": _none_if_nan(audit.token_survival),
            "bigram_survival": _none_if_nan(audit.bigram_survival),
            "bigram_overlap": _none_if_nan(audit.bigram_overlap),
            "n_slots_before": audit.n_slots_before,
            "n_slots_after": audit.n_slots_after,
            "n_bigrams_before": audit.n_bigrams_before,
            "token_ids": audit.token_ids,
            "count_before": audit.count_before,
            "count_after": audit.count_after,
        },
    )
    _write_manifest(
        args,
        outdir,
        stem,
        inputs=[args.corpus, args.number_vocab],
        seeds=seeds,
        started=started,
    )
    return 0


def _none_if_nan(value: float):
    return None if isinstance(value, float) and math.isnan(value) else value


def _cmd_freq_baseline(args) -> int:
    started = time.perf_counter()
    vocab = load_number_vocab(args.number_vocab)
    corpus = load_corpus(args.corpus, vocab, vocab_size=args.vocab_size)
    outdir, stem = _resolve_out(args, f"{args.corpus.stem}.freq")
    manifest_name = f"{stem}.manifest.json"
    config = _probe_config(args, args.periods[0])
    freq, table, bundle = freq_baseline(corpus, args.periods, args.kinds, config)
    write_csv(
        outdir / f"{stem}.freq.csv",
        "frequency",
        manifest_name,
        ("value", "count", "prob"),
        (
            (value, int(freq.counts[value]), float(freq.probs[value]))
            for value in range(freq.counts.shape[0])
        ),
    )
    save_embeddings(table, outdir / f"{stem}.table.f32")
    write_bundle(bundle, outdir, stem, manifest_name, with_svg=not args.no_svg)
    _write_manifest(
        args,
        outdir,
        stem,
        inputs=[args.corpus, args.number_vocab],
        seeds=args.seeds,
        started=started,
    )
    if bundle.errors:
        _report_cell_errors(bundle.errors)
        return 1
    return 0


def _cmd_report(args) -> int:
    started = time.perf_counter()
    table = _load_table(args.table, args.format)
    outdir, stem = _resolve_out(args, args.table.stem)
    manifest_name = f"{stem}.manifest.json"
    config = _probe_config(args, args.periods[0])
    bundle = compose_report(table, args.periods, args.kinds, config)
    write_bundle(bundle, outdir, stem, manifest_name, with_svg=not args.no_svg)
    _write_manifest(
        args, outdir, stem, inputs=[args.table], seeds=args.seeds, started=started
    )
    if bundle.errors:
        _report_cell_errors(bundle.errors)
        return 1
    return 0


def _add_table_args(sub):
    sub.add_argument("table", type=Path, help="embedding table file")
    sub.add_argument(
        "--format",
        choices=("auto", RAW_F32, NPY),
        default="auto",
        help="table format (auto: by file extension)",
    )


def _add_probe_args(sub):
    sub.add_argument(
        "--kinds", type=_kind_list, default=("linear",), help="comma list of probe kinds"
    )
    sub.add_argument(
        "--seeds", type=_int_list, default=(0, 1, 2), help="comma list of fold seeds"
    )
    sub.add_argument("--folds", type=int, default=10, help="cross-validation folds")
    sub.add_argument(
        "--no-standardize",
        action="store_true",
        help="skip per-dimension z-scoring from training-fold statistics",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modspec",
        description="Spectral and geometric diagnostics for periodic structure "
        "in token embedding tables.",
    )
    parser.add_argument("--version", action="version", version=f"modspec {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    sub = subs.add_parser("spectrum", help="DFT power spectrum along the token index")
    _add_table_args(sub)
    sub.add_argument("--periods", type=_period_list, default=(), help="spike rows to emit")
    sub.add_argument("--method", choices=("fft", "direct"), default="fft")
    sub.add_argument("--norm", choices=("power", "magnitude"), default="power")
    sub.add_argument(
        "--median-includes-dc",
        action="store_true",
        help="include the DC bin in the normalizing median",
    )
    sub.add_argument("--no-svg", action="store_true")
    _add_output_args(sub)
    sub.set_defaults(handler=_cmd_spectrum)

    sub = subs.add_parser("scatter", help="between/within scatter and Fisher bounds")
    _add_table_args(sub)
    sub.add_argument("--periods", type=_period_list, required=True)
    sub.add_argument(
        "--no-matrices",
        action="store_true",
        help="omit scatter matrices from the JSON output",
    )
    _add_output_args(sub)
    sub.set_defaults(handler=_cmd_scatter)

    sub = subs.add_parser("probe", help="mod-T classification probes")
    _add_table_args(sub)
    sub.add_argument("--periods", type=_period_list, required=True)
    _add_probe_args(sub)
    sub.add_argument(
        "--dump-projection",
        action="store_true",
        help="write circular-probe 2-D coordinates per period",
    )
    sub.add_argument("--svg", action="store_true", help="emit a kappa bar chart")
    _add_output_args(sub)
    sub.set_defaults(handler=_cmd_probe)

    sub = subs.add_parser("synth", help="periodic construction with predictions")
    sub.add_argument("--period", "-T", type=int, required=True)
    sub.add_argument("--epsilon", type=float, required=True)
    sub.add_argument("--power-target", type=float, default=None, help="harmonic power C")
    sub.add_argument("--amplitude", type=float, default=None, help="class spacing A")
    sub.add_argument("--block-scale", type=float, default=None, help="drift scale B")
    sub.add_argument("--preset", choices=("interleaved", "separable"), default=None)
    _add_output_args(sub)
    sub.set_defaults(handler=_cmd_synth)

    sub = subs.add_parser("perturb", help="corpus perturbations")
    sub.add_argument("corpus", type=Path, help="newline-JSON corpus file")
    sub.add_argument(
        "--number-vocab", type=Path, required=True, help="JSON token-id to value map"
    )
    sub.add_argument("--vocab-size", type=int, default=None)
    sub.add_argument(
        "--config",
        choices=("isolate", "context", "swap", "unigram"),
        required=True,
    )
    sub.add_argument("--k", type=int, default=None, help="numbers per segment (isolate)")
    sub.add_argument("--window", type=int, default=None, help="window length (context)")
    sub.add_argument("--seed", type=int, default=0, help="seed (swap, unigram)")
    sub.add_argument(
        "--wrap-around",
        action="store_true",
        help="allow cyclic slices when the swap pool is short",
    )
    _add_output_args(sub)
    sub.set_defaults(handler=_cmd_perturb)

    sub = subs.add_parser(
        "freq-baseline", help="report bundle on the token-frequency embedding"
    )
    sub.add_argument("corpus", type=Path)
    sub.add_argument("--number-vocab", type=Path, required=True)
    sub.add_argument("--vocab-size", type=int, default=None)
    sub.add_argument("--periods", type=_period_list, required=True)
    _add_probe_args(sub)
    sub.add_argument("--no-svg", action="store_true")
    _add_output_args(sub)
    sub.set_defaults(handler=_cmd_freq_baseline)

    sub = subs.add_parser("report", help="full three-panel diagnostic bundle")
    _add_table_args(sub)
    sub.add_argument("--periods", type=_period_list, required=True)
    _add_probe_args(sub)
    sub.add_argument("--no-svg", action="store_true")
    _add_output_args(sub)
    sub.set_defaults(handler=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ModspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
