import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

from .config import RunConfig, configure_logging, creation_timestamp, load_run_config
from .errors import EsdpError
from .evaluation import check_criteria, evaluate_gold, load_eval_config, load_gold_file
from .extractor import dump_items
from .groum import format_groum, format_pattern_report, groums_from_items, patt_explorer
from .query import QueryContext, abstract_query, context_from_source, render_skeleton, search, verify_skeleton
from .repository import MinedRepository, load_repository, merge_update, save_repository
from .seq_miner import adaptive_mine, adaptive_threshold, format_ratio, mine_prefixspan
from .tools import corpus_items, corpus_markers, export_report, extract_corpus
from .transactions import Granularity, build_sequence_db, build_transactions, transactions_to_xml

logger = logging.getLogger(__name__)

BANNER = "ESDP – API usage pattern recommender"


# ---- argument parsing ----

def _corpus_options(parser: argparse.ArgumentParser, positional: bool = False) -> None:
    if positional:
        parser.add_argument("corpus", nargs="+", type=Path, help="Source directories or files.")
    else:
        parser.add_argument("--corpus", nargs="+", type=Path, required=True, help="Source directories.")
    parser.add_argument("--ext", dest="extensions", nargs="+", help="File extensions (default .java).")
    parser.add_argument("--workers", type=int, help="Extraction threads.")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _mining_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--repo", dest="repo_path", type=Path, help="Repository file (default $ESDP_REPO or esdp-repo.xml).")
    parser.add_argument("--min-support", dest="min_support", type=int, help="Fixed minimum support count.")
    parser.add_argument("--adaptive", action="store_true", help="Choose min support so at most --max-patterns remain.")
    parser.add_argument("--max-patterns", dest="max_patterns", type=int, help="Pattern cap for --adaptive.")
    parser.add_argument("--label", help="Corpus label stored in the repository.")
    parser.add_argument("--created", type=creation_timestamp, help="ISO 8601 creation time to record.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esdp", description="Mine API usage patterns and recommend code skeletons.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr.")
    commands = parser.add_subparsers(dest="command", required=True)

    extract = commands.add_parser("extract", help="Dump the abstracted item stream of a corpus.")
    _corpus_options(extract, positional=True)
    extract.add_argument("--format", choices=["text", "csv", "xml"], default="text")
    extract.add_argument("--granularity", choices=[g.value for g in Granularity], default="method")
    extract.add_argument("--strict", action="store_true", help="Fail on the first unparsable file.")
    extract.add_argument("--out", type=Path)

    mine = commands.add_parser("mine", help="Mine a corpus into a new repository.")
    _corpus_options(mine)
    _mining_options(mine)

    update = commands.add_parser("update", help="Merge a fresh mining run into an existing repository.")
    _corpus_options(update)
    _mining_options(update)
    update.add_argument("--full-replacement", action="store_true", help="Drop patterns absent from the fresh run.")

    query = commands.add_parser("query", help="Recommend API sequences for one statement.")
    query.add_argument("statement")
    query.add_argument("--repo", dest="repo_path", type=Path)
    query.add_argument("--top", dest="top_n", type=int)
    query.add_argument("--pick", type=int, help="Recommendation to render (1-based); prompts when interactive.")
    query.add_argument("--context", type=Path, help="Java file providing imports and variables in scope.")
    query.add_argument("--import", dest="imports", action="append", default=[], help="Extra import in scope.")
    query.add_argument("--check", action="store_true", help="Verify the skeleton re-extracts to the pattern.")
    query.add_argument("--time", action="store_true", help="Print query latency.")
    query.add_argument("--format", choices=["table", "csv"], default="table")
    query.add_argument("--out", type=Path, help="Write the skeleton to a file.")

    groum = commands.add_parser("groum", help="Mine graph-based usage patterns.")
    _corpus_options(groum)
    groum.add_argument("--sigma", type=int)
    groum.add_argument("--max-size", dest="max_groum_size", type=int)
    groum.add_argument("--dump", action="store_true", help="Also print every groum.")

    evaluate = commands.add_parser("eval", help="Score recommendations against a gold file.")
    evaluate.add_argument("--gold", type=Path, required=True)
    evaluate.add_argument("--repo", dest="repo_path", type=Path)
    evaluate.add_argument("--top", dest="top_ns", type=_positive_int, nargs="+")
    evaluate.add_argument("--criteria", type=Path, help="JSON file with criteria and top_n list.")
    evaluate.add_argument("--context", type=Path)
    evaluate.add_argument("--format", choices=["table", "csv"], default="table")
    evaluate.add_argument("--roc-out", type=Path, help="Write ROC points as CSV.")
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    fields = set(RunConfig.model_fields)
    overrides = {key: value for key, value in vars(args).items() if key in fields}
    if "corpus" in vars(args):
        overrides["corpus_dirs"] = args.corpus
    return load_run_config(**overrides)


def _csv(rows: Sequence[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


# ---- commands ----

def cmd_extract(args: argparse.Namespace, config: RunConfig) -> int:
    files = extract_corpus(config.corpus_dirs, config.extensions, config.workers, strict=args.strict)
    items = corpus_items(files)
    if args.format == "xml":
        records = build_transactions(items, args.granularity)
        label = args.corpus[0].name if args.corpus else ""
        text = transactions_to_xml(records, label).decode("utf-8")
    elif args.format == "csv":
        text = _csv([("kind", "name", "enclosing", "line")] + [(i.kind.value, i.name, i.enclosing, i.line) for i in items])
    else:
        text = dump_items(items)
    export_report(text, args.out)
    return 0


def _mine(args: argparse.Namespace, config: RunConfig):
    files = extract_corpus(config.corpus_dirs, config.extensions, config.workers)
    label = args.label or ",".join(path.name for path in config.corpus_dirs)
    db = build_sequence_db(corpus_items(files), corpus_label=label)
    if args.adaptive:
        patterns = adaptive_mine(db, config.max_patterns)
        threshold = adaptive_threshold(db, patterns)
    else:
        patterns = mine_prefixspan(db, config.min_support)
        threshold = config.min_support
    logger.info("%d files, %d sequences, %d patterns", len(files), len(db), len(patterns))
    return label, db, patterns, threshold


def cmd_mine(args: argparse.Namespace, config: RunConfig) -> int:
    label, db, patterns, threshold = _mine(args, config)
    repo = MinedRepository.from_patterns(patterns, label, creation_timestamp(args.created), threshold)
    save_repository(repo, config.repo_path)
    print(f"{len(repo)} patterns from {len(db)} method sequences (min support {threshold}) -> {config.repo_path}")
    return 0


def cmd_update(args: argparse.Namespace, config: RunConfig) -> int:
    label, db, patterns, threshold = _mine(args, config)
    created = creation_timestamp(args.created)
    if config.repo_path.exists():
        existing = load_repository(config.repo_path)
    else:
        logger.warning("%s does not exist; starting an empty repository", config.repo_path)
        existing = MinedRepository(corpus_label=label, created_at=created, min_support_used=threshold)
    merged = merge_update(existing, patterns, args.full_replacement, created, threshold)
    save_repository(merged, config.repo_path)
    print(f"{len(existing)} -> {len(merged)} patterns in {config.repo_path}")
    return 0


def _recommendation_rows(recommendations) -> list[tuple]:
    rows = []
    for rank, rec in enumerate(recommendations, start=1):
        pattern = rec.pattern
        head = " ; ".join(key.name for key in pattern.elements[:3])
        if pattern.k > 3:
            head += " ; ..."
        rows.append(
            (
                rank,
                pattern.k,
                format_ratio(pattern.support_ratio),
                format_ratio(pattern.confidence),
                format_ratio(pattern.ranking),
                rec.tier,
                head,
            )
        )
    return rows


def _format_table(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    cells = [list(map(str, header))] + [list(map(str, row)) for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines) + "\n"


def _choose(count: int, pick: int | None) -> int | None:
    if pick is not None:
        return pick if 1 <= pick <= count else None
    if not sys.stdin.isatty():
        return 1
    answer = input(f"Select a sequence [1-{count}] (Enter to skip):\n> ").strip()
    if not answer:
        return None
    return int(answer) if answer.isdigit() and 1 <= int(answer) <= count else None


def _query_context(path: Path | None, imports: Sequence[str]) -> QueryContext:
    context = context_from_source(path.read_text(encoding="utf-8")) if path else QueryContext()
    return context.with_imports(imports)


def cmd_query(args: argparse.Namespace, config: RunConfig) -> int:
    repo = load_repository(config.repo_path)
    context = _query_context(args.context, args.imports)
    started = time.perf_counter()
    query = abstract_query(args.statement, context)
    recommendations = search(query, repo, config.top_n)
    elapsed = time.perf_counter() - started

    header = ("rank", "k", "support", "confidence", "ranking", "match", "sequence")
    rows = _recommendation_rows(recommendations)
    if args.format == "csv":
        sys.stdout.write(_csv([header] + rows))
    else:
        print(f"query item: {query.item}")
        sys.stdout.write(_format_table(header, rows) if rows else "no matching patterns\n")
    if args.time:
        print(f"query time: {elapsed * 1000:.1f} ms")
    if not recommendations:
        return 0

    choice = _choose(len(recommendations), args.pick)
    if choice is None:
        return 0
    chosen = recommendations[choice - 1]
    skeleton = render_skeleton(chosen, query)
    if args.out:
        export_report(skeleton, args.out)
    elif args.format == "table":
        print(f"\n=== skeleton for sequence {choice} ===")
        sys.stdout.write(skeleton or "(nothing follows the matched statement)\n")
    if args.check:
        ok = verify_skeleton(chosen, query)
        print(f"round trip: {'ok' if ok else 'MISMATCH'}")
        return 0 if ok else 1
    return 0


def cmd_groum(args: argparse.Namespace, config: RunConfig) -> int:
    files = extract_corpus(config.corpus_dirs, config.extensions, config.workers)
    groums = groums_from_items(corpus_items(files), corpus_markers(files))
    if args.dump:
        sys.stdout.write("\n".join(format_groum(g) for g in groums) + "\n")
    patterns = patt_explorer(groums, config.sigma, config.max_groum_size)
    print(f"{len(groums)} groums, {len(patterns)} patterns (sigma {config.sigma})\n")
    sys.stdout.write(format_pattern_report(patterns))
    return 0


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> int:
    eval_config = load_eval_config(args.criteria) if args.criteria else None
    ns = args.top_ns or (eval_config.top_n if eval_config else [config.top_n])
    repo = load_repository(config.repo_path)
    context = _query_context(args.context, [])
    report = evaluate_gold(load_gold_file(args.gold), repo, ns, context)

    header = ("top_n", "precision", "recall", "queries")
    rows = [(row.n, f"{row.precision:.3f}", f"{row.recall:.3f}", row.queries) for row in report.rows]
    if args.format == "csv":
        sys.stdout.write(_csv([header] + rows))
    else:
        sys.stdout.write(_format_table(header, rows))
        for result in report.cases:
            if result.error:
                print(f"line {result.case.line}: {result.error}")
            elif result.sequence_precision is not None:
                print(
                    f"line {result.case.line}: sequence P={result.sequence_precision} "
                    f"R={result.sequence_recall}"
                )
        if report.area is not None:
            print(f"AUC: {report.area:.3f}")
    if args.roc_out and report.roc:
        export_report(_csv([("fpr", "tpr")] + [(float(x), float(y)) for x, y in report.roc]), args.roc_out)
    if eval_config:
        check_criteria(report.rows, eval_config.criteria)
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "mine": cmd_mine,
    "update": cmd_update,
    "query": cmd_query,
    "groum": cmd_groum,
    "eval": cmd_eval,
}


def main(argv: Sequence[str] | None = None) -> int:
    # Load environment variables from .env
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.verbose)

    try:
        config = _config(args)
    except ValidationError as exc:
        print(f"invalid options: {exc}", file=sys.stderr)
        return 2

    if args.command == "query" and args.pick is None and sys.stdin.isatty():
        print(BANNER)
    try:
        return COMMANDS[args.command](args, config)
    except ValidationError as exc:
        # criteria files are options too
        print(f"invalid options: {exc}", file=sys.stderr)
        return 2
    except (EsdpError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
