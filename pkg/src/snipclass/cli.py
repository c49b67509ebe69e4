"""Command-line front end: ``snipclass {ingest,train,predict,evaluate,compare,stats}``.

Exit codes: 0 success, 2 input/IO errors, 3 domain errors (degenerate data).
Diagnostics go to stderr; labels, JSON and CSV go to stdout.
"""
from __future__ import annotations

import argparse
import csv
import gzip
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .corpus import (Corpus, CorpusFormatError, IngestStats, PostsParseError, iter_snippets,
                     length_stats, parse_posts_stream, read_corpus, sample_corpus, write_corpus)
from .evaluation import (EvaluationError, compare_external, evaluate_model, load_external,
                         predict_corpus, predictions_to_external, render_json, render_text,
                         subset_corpus, train_test_split)
from .labels import LabelSetError, default_label_set, load_aliases
from .mnb import (DEFAULT_ALPHA_GRID, ModelFormatError, TrainingError, fit, fit_with_search,
                  load_model, predict_text, save_model)
from .text import FEATURE_MODES, SELECT_MODES, PipelineConfig, tokenize

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DOMAIN = 3


class InputError(Exception):
    pass


class DomainError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"snipclass: {msg}", file=sys.stderr)


def _need_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"cannot read {p}: no such file")
    return p


def _need_out(path) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.parent.is_dir():
        raise InputError(f"cannot write {p}: directory {p.parent} does not exist")
    return p


def _alpha_grid(text: str) -> tuple[float, ...]:
    try:
        grid = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha grid {text!r}") from None
    if not grid or any(not a > 0 for a in grid):
        raise argparse.ArgumentTypeError("alpha grid needs one or more positive values")
    return grid


def _label_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _read_corpus(path, labels=None) -> Corpus:
    try:
        corpus = read_corpus(_need_file(path))
    except (CorpusFormatError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None
    if labels:
        corpus = subset_corpus(corpus, labels)
    return corpus


def _read_model(path):
    try:
        return load_model(_need_file(path))
    except ModelFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _config(args) -> PipelineConfig:
    return PipelineConfig(top_k=args.top_k, features=args.features, select_by=args.select_by,
                          min_df=args.min_df)


def _print_grid(result) -> None:
    print(f"{result.fold_count}-fold CV accuracy (seed {result.seed}):", file=sys.stderr)
    for a, m in zip(result.alpha_grid, result.mean_cv_accuracy):
        mark = "  <- best" if a == result.best_alpha else ""
        print(f"  alpha={a:<8g} {m:.4f}{mark}", file=sys.stderr)


# ---------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    posts_path = _need_file(args.posts)
    label_set = load_aliases(_need_file(args.aliases)) if args.aliases else default_label_set()
    out = _need_out(args.out)
    if args.cap < 1:
        raise InputError("--cap must be >= 1")
    stats = IngestStats()
    opener = gzip.open if posts_path.suffix == ".gz" else open
    with opener(posts_path, "rb") as fh:
        stream = parse_posts_stream(fh)
        corpus = sample_corpus(iter_snippets(stream, label_set, stats), label_set, args.cap, args.seed)
    print(f"rows read: {stats.rows} (skipped, missing attributes: {stats.rows_skipped})", file=sys.stderr)
    print(f"questions: {stats.questions}  non-question posts ignored: {stats.non_questions}", file=sys.stderr)
    print(f"questions with no known language tag: {stats.unmatched}", file=sys.stderr)
    print(f"multi-language questions removed: {stats.multi_language}", file=sys.stderr)
    print(f"code blocks: {stats.code_blocks}  dropped (< 2 lines): {stats.short_blocks}", file=sys.stderr)
    print(f"snippets extracted: {stats.snippets}  kept after cap {args.cap}: {len(corpus)}", file=sys.stderr)
    for lab, n in corpus.per_language_counts.items():
        print(f"  {lab:<14} {n}", file=sys.stderr)
    if not len(corpus):
        raise DomainError("no snippets extracted")
    write_corpus(corpus, out, meta={"seed": args.seed, "cap": args.cap})
    return EXIT_OK


def cmd_train(args) -> int:
    corpus = _read_corpus(args.corpus, args.labels)
    out = _need_out(args.out)
    config = _config(args)
    model, result = fit_with_search(corpus.texts, corpus.labels, args.alpha_grid, args.folds,
                                    args.seed, config)
    model = replace(model, meta={"seed": args.seed, "grid_search": result.to_dict(),
                                 "trained_on": len(corpus)})
    save_model(model, out)
    _print_grid(result)
    print(f"best alpha {result.best_alpha:g}; model written to {out}", file=sys.stderr)
    return EXIT_OK


def _format_prediction(pred) -> str:
    lines = [pred.label]
    lines += [f"{lab}\t{p:.6f}" for lab, p in pred.top(3)]
    return "\n".join(lines) + "\n"


def cmd_predict(args) -> int:
    model = _read_model(args.model)
    if args.corpus:
        corpus = _read_corpus(args.corpus)
        out = _need_out(args.out)
        preds = predict_corpus(model, corpus)
        doc = predictions_to_external(corpus, preds)
        _emit(json.dumps(doc, indent=1, ensure_ascii=False) + "\n", out)
        return EXIT_OK
    if args.input and args.input != "-":
        text = _need_file(args.input).read_text(encoding="utf-8")
    else:
        text = sys.stdin.read()
    pred = predict_text(model, text)
    tokens = tokenize(text, model.config)
    if not tokens:
        _err("warning: empty input; answering with the most frequent training language")
    elif not any(t in model.vocab.index_of for t in tokens):
        _err("warning: no known terms in input; answering with the most frequent training language")
    _emit(_format_prediction(pred), _need_out(args.out))
    return EXIT_OK


def _write_report(report, args, meta) -> None:
    out = _need_out(args.out)
    text = render_json(report, meta) if args.format == "json" else render_text(report)
    _emit(text, out)
    if args.figure:
        from .figures import plot_confusion
        plot_confusion(report.matrix, args.figure)


def cmd_evaluate(args) -> int:
    _need_out(args.out)
    _need_out(args.figure)
    _need_out(args.write_test)
    _need_out(args.predictions)
    meta = {"seed": args.seed}
    model = _read_model(args.model) if args.model else None
    if args.test:
        if model is None:
            raise InputError("--test needs --model")
        test = _read_corpus(args.test, args.labels)
        meta["test"] = str(args.test)
    elif args.corpus:
        corpus = _read_corpus(args.corpus, args.labels)
        train_part, test = train_test_split(corpus, args.split, args.seed)
        meta.update(split=args.split, train_size=len(train_part))
        if model is not None:
            model = fit(train_part.texts, train_part.labels, model.alpha, model.config)
            meta["alpha"] = model.alpha
        else:
            model, result = fit_with_search(train_part.texts, train_part.labels, args.alpha_grid,
                                            args.folds, args.seed, _config(args))
            _print_grid(result)
            meta.update(alpha=model.alpha, grid_search=result.to_dict())
        if args.write_test:
            write_corpus(test, args.write_test, meta={"seed": args.seed, "split": args.split})
    else:
        raise InputError("evaluate needs --corpus (to split) or --model with --test")
    meta["test_size"] = len(test)
    preds = predict_corpus(model, test)
    if args.predictions:
        Path(args.predictions).write_text(
            json.dumps(predictions_to_external(test, preds), indent=1, ensure_ascii=False) + "\n",
            encoding="utf-8")
    report = evaluate_model(model, test)
    _write_report(report, args, meta)
    return EXIT_OK


def cmd_compare(args) -> int:
    test = _read_corpus(args.test)
    try:
        external = load_external(_need_file(args.external))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{args.external}: {exc}") from None
    report = compare_external(test, external)
    _write_report(report, args, {"external": str(args.external), "test_size": len(test)})
    return EXIT_OK


def cmd_stats(args) -> int:
    corpus = _read_corpus(args.corpus)
    _need_out(args.figure)
    if not len(corpus):
        raise DomainError("corpus is empty")
    stats = length_stats(corpus)
    if args.csv:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["language", "count", "mean_lines", "median_lines", "mean_chars", "median_chars"])
        for lab, s in stats.per_language.items():
            w.writerow([lab, s.count, f"{s.mean_lines:.4f}", f"{s.median_lines:.1f}",
                        f"{s.mean_chars:.4f}", f"{s.median_chars:.1f}"])
    else:
        width = max(8, *(len(lab) for lab in stats.per_language))
        print(f"{'language':<{width}}  {'count':>7}  {'mean lines':>10}  {'median lines':>12}"
              f"  {'mean chars':>10}  {'median chars':>12}")
        for lab, s in stats.per_language.items():
            print(f"{lab:<{width}}  {s.count:>7d}  {s.mean_lines:>10.2f}  {s.median_lines:>12.1f}"
                  f"  {s.mean_chars:>10.2f}  {s.median_chars:>12.1f}")
    if args.figure:
        from .figures import plot_lengths
        plot_lengths(stats, args.figure)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_model_options(p) -> None:
    p.add_argument("--alpha-grid", type=_alpha_grid, default=DEFAULT_ALPHA_GRID,
                   help="comma-separated smoothing values to search (default "
                        + ",".join(map(str, DEFAULT_ALPHA_GRID)) + ")")
    p.add_argument("--folds", type=int, default=10, help="cross-validation folds (default 10)")
    p.add_argument("--top-k", type=int, default=10, help="terms kept per snippet (default 10)")
    p.add_argument("--features", choices=FEATURE_MODES, default="tfidf",
                   help="feature weights fed to the classifier")
    p.add_argument("--select-by", choices=SELECT_MODES, default="tfidf",
                   help="ranking used for top-k term selection")
    p.add_argument("--min-df", type=int, default=1, help="drop terms in fewer snippets than this")
    p.add_argument("--labels", type=_label_list, default=None,
                   help="restrict the corpus to these comma-separated labels")


def _add_report_options(p) -> None:
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--figure", help="also render the confusion matrix to this image file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snipclass",
                                     description="Identify the programming language of code snippets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="mine a snippet corpus from a Stack Exchange Posts.xml dump")
    p.add_argument("--posts", required=True, help="Posts.xml (optionally .gz)")
    p.add_argument("--aliases", help="label: tag, tag ... config (default: built-in 21 languages)")
    p.add_argument("--cap", type=int, default=12000, help="max snippets per language")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, help="corpus file to write")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="grid-search alpha with k-fold CV and train a model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, help="model file to write")
    _add_model_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify a snippet from a file or stdin")
    p.add_argument("--model", required=True)
    p.add_argument("input", nargs="?", help="snippet file (default: stdin)")
    p.add_argument("--corpus", help="classify every snippet of a corpus; writes id -> posterior JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="held-out precision/recall/F1 and confusion matrix")
    p.add_argument("--model", help="model file; with --corpus only its alpha and settings are reused")
    p.add_argument("--corpus", help="corpus to split into train/test")
    p.add_argument("--test", help="pre-split test corpus (evaluated with --model as is)")
    p.add_argument("--split", type=float, default=0.2, help="test fraction (default 0.2)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--write-test", help="save the test split as a corpus file")
    p.add_argument("--predictions", help="save test posteriors in external-predictions format")
    _add_model_options(p)
    _add_report_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="score an external predictions file on a test corpus")
    p.add_argument("--test", required=True)
    p.add_argument("--external", required=True, help="JSON: id -> label or {label: probability}")
    _add_report_options(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stats", help="snippet length statistics per language")
    p.add_argument("--corpus", required=True)
    p.add_argument("--csv", action="store_true", help="CSV rows instead of a table")
    p.add_argument("--figure", help="also render mean lengths to this image file")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, OSError, PostsParseError, LabelSetError, CorpusFormatError,
            ModelFormatError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except (DomainError, TrainingError, EvaluationError, ValueError) as exc:
        _err(str(exc))
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
