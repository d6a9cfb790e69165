"""Command-line surface: scan, train, evaluate, explain, gen.

Exit codes: 0 success; 2 when --fail-on-phi is set and a column is flagged;
64 usage error; 66 missing input; 70 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .gbt import TrainParams, load_model, model_hash, save_model, train_calibrated
from .explain import Explainer, importance_report
from .ingest import apply_labels, load_dataset, load_label_sidecar
from .metafeatures import write_matrix_csv
from .parallel import resolve_threads
from .patterns import builtin_library, load_library
from .pipeline import (
    build_report,
    cross_validate,
    cv_summary_doc,
    extract_corpus,
    format_metrics_table,
    scan,
    write_report,
)
from .synthgen import CorpusSpec, generate_corpus, load_corpus, save_corpus

EXIT_OK = 0
EXIT_PHI_FOUND = 2
EXIT_USAGE = 64
EXIT_NO_INPUT = 66
EXIT_INTERNAL = 70

log = logging.getLogger("phi_sentinel")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("--k", type=int, default=1000, help="samples per column (default 1000)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=None,
                   help="worker count; falls back to PHI_SENTINEL_THREADS, then all cores")
    p.add_argument("--config", type=Path, default=None,
                   help="JSON file of flag defaults (keys are flag names)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="phi-sentinel", description=__doc__)
    parser.add_argument("--version", action="version", version=f"phi-sentinel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", parents=[], help="scan a delimited file into a PHI report")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--library", type=Path, default=None)
    p.add_argument("--output", type=Path, default=None, help="report JSON (default stdout)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--paranoid", action="store_true", help="preset threshold 0.2")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--fail-on-phi", action="store_true", dest="fail_on_phi")
    p.add_argument("--figures-dir", type=Path, default=None)
    _add_common(p)

    p = sub.add_parser("train", help="train a model from labeled data")
    p.add_argument("--corpus", type=Path, default=None, help="corpus manifest.json")
    p.add_argument("--input", type=Path, action="append", default=[])
    p.add_argument("--labels", type=Path, action="append", default=[])
    p.add_argument("--output", type=Path, required=True, help="model JSON path")
    p.add_argument("--log-file", type=Path, default=None,
                   help="per-round loss log (default <output>.log)")
    p.add_argument("--matrix", type=Path, default=None,
                   help="also write the derived feature matrix CSV here")
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--eta", type=float, default=0.09)
    _add_common(p)

    p = sub.add_parser("evaluate", help="five-fold cross-validation on a labeled corpus")
    p.add_argument("--corpus", type=Path, required=True, help="corpus manifest.json")
    p.add_argument("--output-dir", type=Path, required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--eta", type=float, default=0.09)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--library", type=Path, default=None)
    _add_common(p)

    p = sub.add_parser("explain", help="Shapley attributions / importance report")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--column", default=None, help="explain one column (default: importance report)")
    p.add_argument("--output", type=Path, default=None, help="JSON output (default stdout)")
    p.add_argument("--csv", type=Path, default=None, help="CSV suitable for external plotting")
    p.add_argument("--top-k", type=int, default=20, dest="top_k")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--figures-dir", type=Path, default=None)
    _add_common(p)

    p = sub.add_parser("gen", help="generate a labeled synthetic corpus")
    p.add_argument("--output-dir", type=Path, required=True)
    p.add_argument("--datasets", type=int, default=8)
    p.add_argument("--rows", type=int, default=400)
    p.add_argument("--columns", type=int, default=889)
    p.add_argument("--phi-fraction", type=float, default=0.075, dest="phi_fraction")
    p.add_argument("--no-holdout", action="store_true")
    _add_common(p)

    return parser


def _apply_config(parser, argv):
    """Pre-scan argv for --config and install its values as defaults."""
    if "--config" not in argv:
        return
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        return
    path = Path(argv[idx + 1])
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, "r", encoding="utf-8") as fh:
        values = json.load(fh)
    clean = {str(k).replace("-", "_"): v for k, v in values.items()}
    parser.set_defaults(**clean)
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            known = {a.dest for a in sub._actions}
            sub.set_defaults(**{k: v for k, v in clean.items() if k in known})


def _require(path: Path):
    if path is not None and not Path(path).exists():
        raise FileNotFoundError(str(path))
    return path


def _load_library(path):
    return load_library(_require(path)) if path else builtin_library()


def _audit(args, library, model=None):
    log.info(
        "library=%s model=%s k=%d seed=%d threshold=%s",
        library.version,
        model_hash(model)[:12] if model is not None else "-",
        args.k, args.seed, getattr(args, "threshold", "-"),
    )


def _corpus_inputs(args):
    """Labeled datasets either from a corpus manifest or --input/--labels pairs."""
    datasets = []
    if args.corpus is not None:
        bundle = load_corpus(_require(args.corpus))
        datasets.extend(bundle.datasets)
    if getattr(args, "input", None):
        if len(args.labels) != len(args.input):
            raise ValueError("each --input needs a matching --labels")
        for data_path, labels_path in zip(args.input, args.labels):
            ds = load_dataset(_require(data_path))
            apply_labels(ds, load_label_sidecar(_require(labels_path)))
            datasets.append(ds)
    if not datasets:
        raise ValueError("no training data: give --corpus or --input/--labels")
    return datasets


def _cmd_scan(args) -> int:
    threshold = 0.2 if args.paranoid else args.threshold
    args.threshold = threshold
    dataset = load_dataset(_require(args.input), delimiter=args.delimiter)
    model = load_model(_require(args.model))
    library = _load_library(args.library)
    _audit(args, library, model)
    threads = resolve_threads(args.threads)
    verdicts = scan(dataset, model, library, k=args.k, seed=args.seed,
                    threshold=threshold, threads=threads)
    if args.output is not None:
        write_report(verdicts, args.output, k=args.k, seed=args.seed,
                     threshold=threshold, library_version=library.version, model=model)
    else:
        doc = build_report(verdicts, k=args.k, seed=args.seed, threshold=threshold,
                           library_version=library.version, model=model)
        json.dump(doc, sys.stdout, indent=1)
        sys.stdout.write("\n")
    if args.figures_dir is not None:
        from .figures import save_probability_bars

        args.figures_dir.mkdir(parents=True, exist_ok=True)
        save_probability_bars(verdicts, args.figures_dir / "scan_probabilities.png")
    flagged = sum(v.predicted for v in verdicts)
    log.info("flagged %d of %d columns", flagged, len(verdicts))
    if args.fail_on_phi and flagged:
        return EXIT_PHI_FOUND
    return EXIT_OK


def _cmd_train(args) -> int:
    datasets = _corpus_inputs(args)
    library = builtin_library()
    _audit(args, library)
    threads = resolve_threads(args.threads)
    vectors, labels, _, names = extract_corpus(datasets, library, k=args.k,
                                               seed=args.seed, threads=threads,
                                               screen=False)
    params = TrainParams(rounds=args.rounds, depth=args.depth, eta=args.eta)
    model = train_calibrated(vectors, labels, params, seed=args.seed)
    save_model(model, args.output)
    log_path = args.log_file or Path(str(args.output) + ".log")
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write("round,mean_logistic_loss\n")
        for i, loss in enumerate(model.training_loss, 1):
            fh.write(f"{i},{loss!r}\n")
    if args.matrix is not None:
        write_matrix_csv(vectors, args.matrix, labels=labels)
    log.info("trained on %d columns (%d PHI); model %s", len(labels),
             sum(labels), model_hash(model)[:12])
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    bundle = load_corpus(_require(args.corpus))
    library = _load_library(args.library)
    _audit(args, library)
    threads = resolve_threads(args.threads)
    vectors, labels, regex_probs, names = extract_corpus(
        bundle.datasets, library, k=args.k, seed=args.seed, threads=threads)
    params = TrainParams(rounds=args.rounds, depth=args.depth, eta=args.eta)
    result = cross_validate(vectors, labels, regex_probs, folds=args.folds,
                            seed=args.seed, params=params, threshold=args.threshold)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    table = format_metrics_table(result)
    print(table)
    (args.output_dir / "metrics.txt").write_text(table + "\n", encoding="utf-8")
    with open(args.output_dir / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(cv_summary_doc(result), fh, indent=1)
    if not args.no_figures:
        from .figures import save_fold_metric_bars, save_metric_summary

        save_fold_metric_bars(result, args.output_dir / "fold_metrics.png")
        save_metric_summary(result, args.output_dir / "metric_summary.png")
    return EXIT_OK


def _explain_background(vectors, seed):
    import random

    if len(vectors) > 100:
        idx = sorted(random.Random(seed).sample(range(len(vectors)), 100))
        return [vectors[i] for i in idx]
    return vectors


def _cmd_explain(args) -> int:
    dataset = load_dataset(_require(args.input), delimiter=args.delimiter)
    model = load_model(_require(args.model))
    library = builtin_library()
    _audit(args, library, model)
    threads = resolve_threads(args.threads)
    vectors, _, _, names = extract_corpus([dataset], library, k=args.k,
                                          seed=args.seed, threads=threads, screen=False)
    background = _explain_background(vectors, args.seed)

    if args.column is not None:
        if args.column not in names:
            raise ValueError(f"column {args.column!r} not found (or has no data)")
        vec = vectors[names.index(args.column)]
        explainer = Explainer(model, background)
        att = explainer.explain(vec)
        margin = att.total()
        contributions = [
            {"slot": model.slot_names[i], "value": att.phi[i]}
            for i in sorted(range(len(att.phi)), key=lambda i: (-abs(att.phi[i]), i))
        ]
        doc = {"column": args.column, "phi0": att.phi0,
               "contributions": contributions, "margin": margin}
        rows = [(c["slot"], c["value"]) for c in contributions]
        header = ("slot", "contribution")
        print(f"top {args.top_k} attributions for {args.column!r} "
              f"(margin {margin:+.4f}, base {att.phi0:+.4f})")
    else:
        report = importance_report(model, vectors, background=background,
                                   top_k=args.top_k, seed=args.seed)
        doc = {
            "slots": report.slot_names,
            "importances": report.importances,
            "stddevs": report.stddevs,
            "top": [
                {"slot_index": i, "slot": name, "importance": imp, "std": std}
                for i, name, imp, std in report.top
            ],
        }
        rows = [(name, imp) for name, imp in
                sorted(zip(report.slot_names, report.importances), key=lambda t: -t[1])]
        header = ("slot", "importance")
        print(f"top {args.top_k} feature importances (normalized)")
        if args.figures_dir is not None:
            from .figures import save_importance_bars

            args.figures_dir.mkdir(parents=True, exist_ok=True)
            save_importance_bars(report, args.figures_dir / "importance.png", args.top_k)

    width = max(len(s) for s, _ in rows[:args.top_k])
    for slot, value in rows[:args.top_k]:
        print(f"  {slot.ljust(width)}  {value:+.6f}")

    if args.output is not None:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
    else:
        json.dump(doc, sys.stdout, indent=1)
        sys.stdout.write("\n")
    if args.csv is not None:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    return EXIT_OK


def _cmd_gen(args) -> int:
    spec = CorpusSpec(
        n_datasets=args.datasets,
        rows=args.rows,
        phi_fraction=args.phi_fraction,
        seed=args.seed,
        total_columns=args.columns,
        hold_out=not args.no_holdout,
    )
    bundle = generate_corpus(spec)
    manifest_path = save_corpus(bundle, args.output_dir)
    n_cols = sum(ds.column_count for ds in bundle.datasets)
    n_phi = sum(1 for ds in bundle.datasets for c in ds.columns if c.label == 1)
    log.info("wrote %d datasets, %d columns (%d PHI) under %s",
             len(bundle.datasets), n_cols, n_phi, args.output_dir)
    print(manifest_path)
    return EXIT_OK


_COMMANDS = {
    "scan": _cmd_scan,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "explain": _cmd_explain,
    "gen": _cmd_gen,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except FileNotFoundError as exc:
        print(f"phi-sentinel: missing input: {exc}", file=sys.stderr)
        return EXIT_NO_INPUT
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"phi-sentinel: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"phi-sentinel: missing input: {exc}", file=sys.stderr)
        return EXIT_NO_INPUT
    except Exception as exc:  # internal failure: report, never traceback-crash
        print(f"phi-sentinel: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
