"""Command-line front end.

Subcommands: ``separate`` (run one of the algorithms on a mixture WAV),
``mix`` (build synthetic mixtures), ``eval`` (SDR/SIR/SAR against
references, appended to a CSV), ``bench`` (grid sweeps emitting
results.csv and summary.json).

Exit codes: 0 success, 2 invalid arguments or config, 3 I/O failure,
4 numeric failure.  Nothing is printed to stdout except one final summary
line per command; data goes to files.  The bench worker count is capped by
the BNPBSS_THREADS environment variable (default 1, fully sequential and
reproducible).
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .audio_io import MalformedWavError, UnsupportedEncodingError, read_wav, write_wav
from .bss_eval import evaluate
from .core import MultichannelSignal, SeparationConfig
from .demixing import SingularMatrixError
from .mixgen import MixSpec, convolve_mix, synth_exponential_rir
from .separator import separate
from .source_model import NumericsError

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

ALGO_ALIASES = {
    "auxiva": "auxiva",
    "ilrma": "ilrma",
    "vb": "vb_nonparametric",
    "vb_nonparametric": "vb_nonparametric",
}

SEPARATE_CONFIG_KEYS = {
    "schema_version", "algorithm", "K", "a0", "b0", "c0", "iterations", "seed",
    "window_ms", "hop_ms", "ref_channel", "prune_threshold", "prune_burn_in",
}

BENCH_CONFIG_KEYS = {
    "schema_version", "out_dir", "iterations", "window_ms", "hop_ms",
    "filter_len", "seeds", "grid", "mixtures",
}

CSV_FIELDS = ["run_id", "source", "sdr_db", "sir_db", "sar_db", "permutation"]
BENCH_FIELDS = ["algorithm", "K", "seed", "mixture_id", "sdr", "sir", "sar",
                "active_bases_final", "seconds", "status"]


class UsageError(ValueError):
    """Invalid arguments or config content (exit 2)."""


def _load_json(path, allowed_keys, what):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"{what} {path} must be a JSON object")
    unknown = set(doc) - allowed_keys
    if unknown:
        raise UsageError(f"{what} {path} has unknown keys: {sorted(unknown)}")
    return doc


def _build_config(args, file_cfg):
    merged = {k: v for k, v in file_cfg.items() if k not in ("schema_version",)}
    if args.algo is not None:
        merged["algorithm"] = ALGO_ALIASES[args.algo]
    elif "algorithm" in merged:
        merged["algorithm"] = ALGO_ALIASES.get(merged["algorithm"], merged["algorithm"])
    if args.seed is not None:
        merged["seed"] = args.seed
    if args.iters is not None:
        merged["iterations"] = args.iters
    if args.bases is not None:
        merged["K"] = args.bases
    if args.window_ms is not None:
        merged["window_ms"] = args.window_ms
    if args.hop_ms is not None:
        merged["hop_ms"] = args.hop_ms
    if args.ref_channel is not None:
        merged["ref_channel"] = args.ref_channel
    try:
        return SeparationConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid separation config: {exc}") from exc


def cmd_separate(args) -> int:
    file_cfg = {}
    if args.config:
        file_cfg = _load_json(args.config, SEPARATE_CONFIG_KEYS, "config")
    config = _build_config(args, file_cfg)
    mixture = read_wav(args.input)
    if mixture.channels < 2:
        raise UsageError("determined separation requires M >= 2 channels")
    result = separate(mixture, config)
    os.makedirs(args.out_dir, exist_ok=True)
    for m in range(result.sources.channels):
        mono = MultichannelSignal(
            samples=result.sources.samples[m : m + 1], sample_rate=result.sources.sample_rate
        )
        write_wav(os.path.join(args.out_dir, f"source_{m}.wav"), mono, encoding="float32")
    diagnostics = {
        "schema_version": SCHEMA_VERSION,
        "algorithm": config.algorithm,
        "K": config.K,
        "iterations": config.iterations,
        "seed": config.seed,
        "window_ms": config.window_ms,
        "hop_ms": config.hop_ms,
        "cost_trace": result.diagnostics.cost_trace.tolist(),
        "active_bases": result.diagnostics.active_bases.tolist(),
        "wall_time_seconds": result.diagnostics.wall_time,
    }
    with open(os.path.join(args.out_dir, "diagnostics.json"), "w", encoding="utf-8") as fh:
        json.dump(diagnostics, fh, indent=1)
    print(
        f"separated {result.sources.channels} sources with {config.algorithm} "
        f"in {result.diagnostics.wall_time:.1f}s -> {args.out_dir}"
    )
    return EXIT_OK


def cmd_mix(args) -> int:
    chosen = [opt for opt in (args.rir, args.matrix, args.t60) if opt is not None]
    if len(chosen) != 1:
        raise UsageError("provide exactly one of --rir, --matrix, --t60")
    sources = tuple(read_wav(p) for p in args.sources)
    for src, path in zip(sources, args.sources):
        if src.channels != 1:
            raise UsageError(f"source {path} must be mono")
    n_src = len(sources)
    rate = sources[0].sample_rate
    mixing: dict
    if args.matrix is not None:
        with open(args.matrix, "r", encoding="utf-8") as fh:
            try:
                mat = np.asarray(json.load(fh), dtype=float)
            except (json.JSONDecodeError, ValueError) as exc:
                raise UsageError(f"--matrix file is not a JSON matrix: {exc}") from exc
        spec = MixSpec(sources=sources, matrix=mat, seed=args.seed)
        mixing = {"type": "matrix", "matrix": mat.tolist()}
    elif args.t60 is not None:
        if args.t60 <= 0:
            raise UsageError("--t60 must be positive (milliseconds)")
        t60_s = args.t60 / 1000.0
        taps = args.taps or int(round(1.5 * t60_s * rate))
        rirs = tuple(
            np.vstack([
                synth_exponential_rir(t60_s, taps, seed=args.seed + n_src * mic + s, sample_rate=rate)
                for mic in range(n_src)
            ])
            for s in range(n_src)
        )
        spec = MixSpec(sources=sources, rirs=rirs, seed=args.seed)
        mixing = {"type": "synthetic_rir", "t60_ms": args.t60, "taps": taps, "seed": args.seed}
    else:
        if len(args.rir) != n_src * n_src:
            raise UsageError(
                f"--rir needs one mono WAV per (source, mic) pair: expected "
                f"{n_src * n_src} files, got {len(args.rir)}"
            )
        rirs = []
        for s in range(n_src):
            rows = []
            for mic in range(n_src):
                rir_sig = read_wav(args.rir[s * n_src + mic])
                if rir_sig.channels != 1:
                    raise UsageError("RIR files must be mono")
                rows.append(rir_sig.samples[0])
            rirs.append(np.vstack(rows))
        spec = MixSpec(sources=sources, rirs=tuple(rirs), seed=args.seed)
        mixing = {"type": "rir", "rir_files": list(args.rir)}
    try:
        mixture = convolve_mix(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_wav(args.out, mixture, encoding="float32")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "sources": list(args.sources),
        "mixing": mixing,
        "out": args.out,
        "sample_rate": rate,
        "seed": args.seed,
    }
    manifest_path = os.path.splitext(args.out)[0] + ".manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
    print(f"mixed {n_src} sources -> {args.out} ({mixing['type']})")
    return EXIT_OK


def _read_mono_set(paths, what):
    signals = []
    for p in paths:
        sig = read_wav(p)
        if sig.channels != 1:
            raise UsageError(f"{what} {p} must be mono")
        signals.append(sig.samples[0])
    lengths = {len(s) for s in signals}
    if len(lengths) != 1:
        raise UsageError(f"{what} files must share one length, got {sorted(lengths)}")
    return np.vstack(signals)


def cmd_eval(args) -> int:
    estimates = _read_mono_set(args.estimates, "estimate")
    references = _read_mono_set(args.references, "reference")
    if estimates.shape[0] != references.shape[0]:
        raise UsageError(
            f"{estimates.shape[0]} estimates vs {references.shape[0]} references"
        )
    if estimates.shape[1] != references.shape[1]:
        raise UsageError("estimates and references must share one length")
    scores = evaluate(estimates, references, filter_len=args.filter_len)
    run_id = args.run_id or os.path.basename(os.path.dirname(os.path.abspath(args.estimates[0]))) or "run"
    write_header = not (os.path.exists(args.csv) and os.path.getsize(args.csv) > 0)
    with open(args.csv, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        if write_header:
            writer.writeheader()
        for m in range(estimates.shape[0]):
            writer.writerow({
                "run_id": run_id,
                "source": m,
                "sdr_db": f"{scores.sdr[m]:.6f}",
                "sir_db": f"{scores.sir[m]:.6f}",
                "sar_db": f"{scores.sar[m]:.6f}",
                "permutation": scores.permutation[m],
            })
    print(
        f"evaluated {estimates.shape[0]} sources: mean SDR "
        f"{float(np.mean(scores.sdr)):.2f} dB -> {args.csv}"
    )
    return EXIT_OK


def _bench_cell(job):
    """One (algorithm, K, seed, mixture) cell; returns a results row."""
    t0 = time.perf_counter()
    row = {
        "algorithm": job["algorithm"], "K": job["K"], "seed": job["seed"],
        "mixture_id": job["mixture_id"], "sdr": "", "sir": "", "sar": "",
        "active_bases_final": "", "seconds": "", "status": "ok",
    }
    try:
        mixture = read_wav(job["input"])
        config = SeparationConfig(
            algorithm=job["algorithm"], K=job["K"], iterations=job["iterations"],
            seed=job["seed"], window_ms=job["window_ms"], hop_ms=job["hop_ms"],
        )
        result = separate(mixture, config)
        references = np.vstack([read_wav(p).samples[0] for p in job["references"]])
        scores = evaluate(result.sources.samples, references, filter_len=job["filter_len"])
        active = result.diagnostics.active_bases[-1]
        row.update({
            "sdr": f"{float(np.mean(scores.sdr)):.6f}",
            "sir": f"{float(np.mean(scores.sir)):.6f}",
            "sar": f"{float(np.mean(scores.sar)):.6f}",
            "active_bases_final": int(active.max()) if active.max() >= 0 else "",
        })
    except Exception as exc:  # failures recorded per-row
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    row["seconds"] = f"{time.perf_counter() - t0:.3f}"
    return row


def cmd_bench(args) -> int:
    cfg = _load_json(args.config, BENCH_CONFIG_KEYS, "bench config")
    for key in ("out_dir", "grid", "mixtures", "seeds"):
        if key not in cfg:
            raise UsageError(f"bench config missing required key {key!r}")
    mixtures = cfg["mixtures"]
    for mx in mixtures:
        unknown = set(mx) - {"id", "input", "references"}
        if unknown:
            raise UsageError(f"mixture entry has unknown keys: {sorted(unknown)}")
        for path in [mx["input"], *mx["references"]]:
            if not os.path.exists(path):
                raise FileNotFoundError(f"bench input does not exist: {path}")
    jobs = []
    for cell in cfg["grid"]:
        unknown = set(cell) - {"algorithm", "K"}
        if unknown:
            raise UsageError(f"grid entry has unknown keys: {sorted(unknown)}")
        algorithm = ALGO_ALIASES.get(cell["algorithm"], cell["algorithm"])
        for K in cell["K"]:
            for seed in cfg["seeds"]:
                for mx in mixtures:
                    jobs.append({
                        "algorithm": algorithm, "K": K, "seed": seed,
                        "mixture_id": mx["id"], "input": mx["input"],
                        "references": mx["references"],
                        "iterations": cfg.get("iterations", 100),
                        "window_ms": cfg.get("window_ms", 512.0),
                        "hop_ms": cfg.get("hop_ms", 128.0),
                        "filter_len": cfg.get("filter_len", 512),
                    })
    workers = max(1, int(os.environ.get("BNPBSS_THREADS", "1")))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_cell, jobs))
    else:
        rows = [_bench_cell(job) for job in jobs]
    out_dir = cfg["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.csv")
    with open(results_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    summary = {"schema_version": SCHEMA_VERSION, "cells": []}
    for cell in sorted({(r["algorithm"], r["K"]) for r in rows}):
        ok = [r for r in rows if (r["algorithm"], r["K"]) == cell and r["status"] == "ok"]
        entry = {"algorithm": cell[0], "K": cell[1], "runs": len(ok)}
        if ok:
            for metric in ("sdr", "sir", "sar"):
                entry[f"mean_{metric}"] = float(np.mean([float(r[metric]) for r in ok]))
        summary["cells"].append(entry)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1)
    n_ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"bench: {n_ok}/{len(rows)} cells succeeded -> {results_path}")
    return EXIT_OK if n_ok >= 1 else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnpbss",
        description="Determined blind source separation (AuxIVA / ILRMA / adaptive VB).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sep = sub.add_parser("separate", help="separate a multichannel mixture WAV")
    p_sep.add_argument("--input", required=True)
    p_sep.add_argument("--algo", choices=sorted(ALGO_ALIASES), default=None)
    p_sep.add_argument("--out-dir", required=True)
    p_sep.add_argument("--config", default=None, help="JSON config mirroring SeparationConfig")
    p_sep.add_argument("--seed", type=int, default=None)
    p_sep.add_argument("--iters", type=int, default=None)
    p_sep.add_argument("--bases", type=int, default=None)
    p_sep.add_argument("--window-ms", type=float, default=None)
    p_sep.add_argument("--hop-ms", type=float, default=None)
    p_sep.add_argument("--ref-channel", type=int, default=None)
    p_sep.set_defaults(func=cmd_separate)

    p_mix = sub.add_parser("mix", help="create a synthetic mixture from mono sources")
    p_mix.add_argument("--sources", nargs="+", required=True)
    p_mix.add_argument("--rir", nargs="+", default=None,
                       help="mono RIR WAVs, one per (source, mic), source-major order")
    p_mix.add_argument("--matrix", default=None, help="JSON file with a (mics x sources) matrix")
    p_mix.add_argument("--t60", type=float, default=None, help="synthetic RIR T60 in ms")
    p_mix.add_argument("--taps", type=int, default=None)
    p_mix.add_argument("--out", required=True)
    p_mix.add_argument("--seed", type=int, default=0)
    p_mix.set_defaults(func=cmd_mix)

    p_eval = sub.add_parser("eval", help="score estimates against references")
    p_eval.add_argument("--estimates", nargs="+", required=True)
    p_eval.add_argument("--references", nargs="+", required=True)
    p_eval.add_argument("--filter-len", type=int, default=512)
    p_eval.add_argument("--csv", required=True)
    p_eval.add_argument("--run-id", default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="run a sweep grid from a JSON config")
    p_bench.add_argument("--config", required=True)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, OSError, MalformedWavError, UnsupportedEncodingError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericsError, SingularMatrixError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
