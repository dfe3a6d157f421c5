"""Command-line workflow: delimit, build, stats, mine, train, report.

Every subcommand writes a run manifest next to its primary output (same
path + ".manifest.json") echoing the resolved configuration, the seed, and
SHA-256 digests of the inputs. Outputs themselves carry no timestamps or
environment details, so a rerun with identical inputs is byte-identical;
wall-clock time lives only in the manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

from . import __version__
from .core import (
    EventAlphabet,
    LabeledDataset,
    compute_stats,
    load_alphabet,
    load_dataset,
    save_dataset,
    split_by_label,
)
from .delimit import (
    DelimitConfig,
    build_outcome_dataset,
    delimit_matches,
    load_event_stream,
    rugby_alphabet,
)
from .mine import MiningConfig, mine, top_k_by_support
from .modelsel import CvConfig, write_cv_table
from .report import rank_positive, write_length_histogram, write_report_csv, write_report_json
from .solver import ModelSolution
from .spp import SppConfig, fit_cv, fit_path

__all__ = ["main", "save_model", "load_model"]


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_path, subcommand, config, inputs, outputs, seed, elapsed_s) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "inputs": {str(p): _sha256_file(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
        "elapsed_s": elapsed_s,
    }
    with open(str(out_path) + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _resolve_threads(value) -> int:
    if value is not None:
        return value
    env = os.environ.get("SEQPAT_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"SEQPAT_THREADS is not an integer: {env!r}") from None
    return 1


def _load_alphabet_arg(spec: str | None) -> EventAlphabet | None:
    if spec is None:
        return None
    if spec == "rugby":
        return rugby_alphabet()
    return load_alphabet(spec)


def save_model(model: ModelSolution, path) -> None:
    """Model JSON with a fixed key order and shortest-roundtrip floats, so
    equal models serialize byte-identically."""
    patterns = [
        {
            "ids": list(pat),
            "weight": w,
            "support": model.supports.get(pat),
            "odds_ratio": math.exp(w),
        }
        for pat, w in model.weights.items()
    ]
    doc = {
        "format": "seqpat-model",
        "tool_version": __version__,
        "lam": model.lam,
        "bias": model.bias,
        "duality_gap": model.duality_gap,
        "primal_objective": model.primal_objective,
        "iterations": model.iterations,
        "converged": model.converged,
        "patterns": patterns,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path) -> ModelSolution:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "seqpat-model":
        raise ValueError(f"{path}: not a seqpat model file")
    weights = {}
    supports = {}
    for row in doc["patterns"]:
        pat = tuple(int(e) for e in row["ids"])
        weights[pat] = float(row["weight"])
        if row.get("support") is not None:
            supports[pat] = int(row["support"])
    return ModelSolution(
        weights=weights,
        bias=float(doc["bias"]),
        lam=float(doc["lam"]),
        duality_gap=float(doc["duality_gap"]),
        primal_objective=float(doc["primal_objective"]),
        iterations=int(doc["iterations"]),
        converged=bool(doc["converged"]),
        supports=supports,
    )


def _cmd_delimit(args) -> int:
    t0 = time.monotonic()
    config = DelimitConfig(scrum_reset_suppression=not args.no_scrum_suppression)
    streams = load_event_stream(args.input)
    passages = delimit_matches(streams, config)
    save_dataset(LabeledDataset(tuple(passages)), args.out)
    _write_manifest(
        args.out,
        "delimit",
        {
            "start_events": sorted(config.start_events),
            "post_boundary_events": sorted(config.post_boundary_events),
            "scrum_reset_suppression": config.scrum_reset_suppression,
        },
        [args.input],
        [args.out],
        None,
        time.monotonic() - t0,
    )
    print(f"{len(passages)} passages from {len(streams)} matches -> {args.out}")
    return 0


def _cmd_build(args) -> int:
    t0 = time.monotonic()
    passages = load_dataset(args.input)
    dataset = build_outcome_dataset(passages.sequences, args.perspective)
    save_dataset(dataset, args.out)
    _write_manifest(
        args.out,
        "build",
        {"perspective": args.perspective},
        [args.input],
        [args.out],
        None,
        time.monotonic() - t0,
    )
    print(
        f"{args.perspective}: {len(dataset)} sequences "
        f"(+{dataset.n_pos}/-{dataset.n_neg}) -> {args.out}"
    )
    return 0


def _stats_doc(dataset: LabeledDataset) -> dict:
    st = compute_stats(dataset)
    doc = {
        "n": st.n,
        "mean": st.mean,
        "std": st.std,
        "min": st.min,
        "p25": st.p25,
        "median": st.median,
        "p75": st.p75,
        "max": st.max,
        "skewness": st.skewness,
    }
    if st.n_pos is not None:
        doc["n_pos"] = st.n_pos
        doc["n_neg"] = st.n_neg
    return doc


def _cmd_stats(args) -> int:
    t0 = time.monotonic()
    dataset = load_dataset(args.input)
    doc = _stats_doc(dataset)
    for key, val in doc.items():
        print(f"{key:>10}: {val:.4f}" if isinstance(val, float) else f"{key:>10}: {val}")
    if dataset.labels is not None and args.by_label:
        pos, neg = split_by_label(dataset)
        for name, part in (("positive", pos), ("negative", neg)):
            print(f"-- {name} --")
            for key, val in _stats_doc(part).items():
                if key in ("n_pos", "n_neg"):
                    continue
                print(f"{key:>10}: {val:.4f}" if isinstance(val, float) else f"{key:>10}: {val}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        _write_manifest(
            args.out, "stats", {"by_label": args.by_label}, [args.input], [args.out],
            None, time.monotonic() - t0,
        )
    return 0


def _select_class(dataset: LabeledDataset, which: str) -> LabeledDataset:
    if which == "all":
        return dataset
    if dataset.labels is None:
        raise ValueError("--class requires a labeled dataset")
    pos, neg = split_by_label(dataset)
    return pos if which == "pos" else neg


def _cmd_mine(args) -> int:
    t0 = time.monotonic()
    dataset = _select_class(load_dataset(args.input), getattr(args, "class"))
    alphabet = _load_alphabet_arg(args.alphabet)
    config = MiningConfig(
        min_support=args.min_support,
        max_length=args.max_length,
        algorithm=args.algo,
        max_gap=args.max_gap,
    )
    result = mine(dataset, config)
    rows = top_k_by_support(result, args.top) if args.top else list(result.patterns)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        header = ["pattern", "support"] + (["names"] if alphabet else [])
        writer.writerow(header)
        for p in rows:
            row = [" ".join(str(e) for e in p.events), p.support]
            if alphabet:
                row.append(", ".join(alphabet.name_of(e) for e in p.events))
            writer.writerow(row)
    _write_manifest(
        args.out,
        "mine",
        {
            "algorithm": args.algo,
            "min_support": args.min_support,
            "max_length": args.max_length,
            "max_gap": args.max_gap,
            "top": args.top,
            "class": getattr(args, "class"),
        },
        [args.input],
        [args.out],
        None,
        time.monotonic() - t0,
    )
    print(f"{len(result.patterns)} frequent patterns, wrote {len(rows)} -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    t0 = time.monotonic()
    threads = _resolve_threads(args.threads)
    dataset = load_dataset(args.input)
    if dataset.labels is None:
        raise ValueError("train requires a labeled dataset")
    spp = SppConfig(
        max_length=args.max_length,
        grid_size=args.grid_size,
        grid_ratio=args.grid_ratio,
        tol=args.tol,
    )
    outputs = [args.out_model]
    if args.lam is not None:
        # fixed-lambda path: warm-start down a short grid ending at lam
        path = fit_path(dataset, _with_lams_to(spp, args.lam))
        model = path.solutions[-1]
        best_lam = args.lam
        table = None
    else:
        cv = CvConfig(folds=args.folds, repeats=args.repeats, seed=args.seed)
        best_lam, model, table = fit_cv(dataset, spp, cv, threads=threads)
        if args.out_cv:
            write_cv_table(table, args.out_cv)
            outputs.append(args.out_cv)
    save_model(model, args.out_model)
    _write_manifest(
        args.out_model,
        "train",
        {
            "max_length": args.max_length,
            "grid_size": args.grid_size,
            "grid_ratio": args.grid_ratio,
            "tol": args.tol,
            "folds": args.folds,
            "repeats": args.repeats,
            "lam": args.lam,
            "threads": threads,
        },
        [args.input],
        outputs,
        args.seed,
        time.monotonic() - t0,
    )
    print(
        f"lambda={best_lam!r} nnz={model.nnz} gap={model.duality_gap:.3e} "
        f"-> {args.out_model}"
    )
    return 0


def _with_lams_to(spp: SppConfig, lam: float) -> SppConfig:
    from dataclasses import replace

    # short warm-start ladder from 4x lam down to lam
    ladder = tuple(lam * (4.0 ** (1 - i / 4)) for i in range(5))
    return replace(spp, lams=ladder)


def _cmd_report(args) -> int:
    t0 = time.monotonic()
    model = load_model(args.model)
    dataset = load_dataset(args.input)
    alphabet = _load_alphabet_arg(args.alphabet)
    ranked = rank_positive(
        model, dataset, min_support=args.min_support, k=args.top, alphabet=alphabet
    )
    prefix = args.out_prefix
    out_csv = prefix + "_patterns.csv"
    out_json = prefix + "_patterns.json"
    out_hist = prefix + "_lengths.csv"
    write_report_csv(out_csv, ranked)
    write_report_json(out_json, ranked)
    write_length_histogram(out_hist, dataset)
    outputs = [out_csv, out_json, out_hist]
    if not args.no_figures:
        from .figures import render_length_histogram, render_top_patterns

        fig_hist = prefix + "_lengths.png"
        render_length_histogram(dataset, fig_hist)
        outputs.append(fig_hist)
        if ranked:
            fig_pat = prefix + "_patterns.png"
            render_top_patterns(ranked, fig_pat)
            outputs.append(fig_pat)
    _write_manifest(
        out_csv,
        "report",
        {"min_support": args.min_support, "top": args.top, "figures": not args.no_figures},
        [args.model, args.input],
        outputs,
        None,
        time.monotonic() - t0,
    )
    for r in ranked:
        print(f"{r.weight:+.4f}  OR {r.odds_ratio:.3f}  [{r.support:3d}]  {r.description}")
    print(f"wrote {len(outputs)} file(s) under {prefix}_*")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqpat",
        description="Frequent-subsequence mining and sparse pattern-weighted classification.",
    )
    parser.add_argument("--version", action="version", version=f"seqpat {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("delimit", help="split raw match event streams into passages")
    p.add_argument("input", help="event-stream CSV: match_id,seq_no,event_id")
    p.add_argument("--out", required=True, help="output passages TSV")
    p.add_argument("--no-scrum-suppression", action="store_true")
    p.set_defaults(func=_cmd_delimit)

    p = sub.add_parser("build", help="label passages and strip outcome events")
    p.add_argument("input", help="passages TSV")
    p.add_argument("--perspective", required=True, choices=("scoring", "conceding"))
    p.add_argument("--out", required=True, help="output labeled TSV")
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("stats", help="sequence-length summary statistics")
    p.add_argument("input", help="dataset TSV")
    p.add_argument("--out", help="also write the summary as JSON")
    p.add_argument("--by-label", action="store_true", help="add per-class summaries")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("mine", help="frequent subsequence mining")
    p.add_argument("input", help="dataset TSV")
    p.add_argument(
        "--algo",
        default="prefixspan",
        choices=("prefixspan", "cm-spam", "cm-spade", "bruteforce"),
    )
    p.add_argument("--min-support", type=int, required=True)
    p.add_argument("--max-length", type=int, default=20)
    p.add_argument("--max-gap", type=int, default=None)
    p.add_argument("--top", type=int, default=None, help="write only the top k patterns")
    p.add_argument(
        "--class",
        default="all",
        choices=("pos", "neg", "all"),
        help="mine only one label class of a labeled dataset",
    )
    p.add_argument("--alphabet", help="alphabet CSV path, or 'rugby' for the built-in")
    p.add_argument("--out", required=True, help="output pattern CSV")
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("train", help="cross-validated sparse pattern classifier")
    p.add_argument("input", help="labeled dataset TSV")
    p.add_argument("--out-model", required=True, help="output model JSON")
    p.add_argument("--out-cv", help="output CV table CSV")
    p.add_argument("--max-length", type=int, default=20)
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--grid-ratio", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--lam", type=float, default=None, help="skip CV, fit this lambda")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="CV workers (or SEQPAT_THREADS)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("report", help="ranked-pattern tables and figures from a model")
    p.add_argument("input", help="dataset TSV to report against")
    p.add_argument("--model", required=True, help="model JSON from train")
    p.add_argument("--out-prefix", required=True, help="prefix for output files")
    p.add_argument("--min-support", type=int, default=5)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--alphabet", help="alphabet CSV path, or 'rugby' for the built-in")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"seqpat: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
