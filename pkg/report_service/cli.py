"""
Command-line front door of the audit pipeline.

Every subcommand reads and writes files only, so stages compose:

    audit curate      --provider trend-topic=trends.jsonl --provider autocomplete=ac.jsonl \
                      --topic vaccine --seeds vaccine vaccines --out corpus/
    audit gen-catalog --seed 7 --out data/
    audit run         --plan plan.yaml --catalog data/catalog.jsonl --seed 7 --out run/
    audit analyze     --run run/ --annotations data/annotations.jsonl --catalog data/catalog.jsonl --out run/
    audit report      --analysis run/analysis.json --format csv --out report/

Exit codes: 0 success, 2 configuration error, 3 data error, 1 aborted run
(a platform action still failing after the configured retries raises
ProtocolError) or any other pipeline failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from corpus_service.annotation import load_annotations, save_annotations, stance_counts
from corpus_service.queries import (
    FileSuggestionProvider,
    QuerySource,
    curate_queries,
    load_annotated_queries,
    load_stopwords,
    save_annotated_queries,
    save_candidates,
    shortlist,
)
from experiment_service.plan import PlanFile, build_plan, load_plan_file
from experiment_service.protocol import run_protocol
from experiment_service.runlog import EVENTS_FILE, check_complete, load_run_plan, load_runlog, save_runlog
from experiment_service.treatments import select_treatments
from platform_service.catalog import default_queries, generate_catalog, load_catalog, save_catalog
from platform_service.config import load_platform_config
from platform_service.simulator import SimulatedMarketplace
from report_service.analysis import analyze
from report_service.writers import FORMATS, load_analysis, save_analysis, write_report
from utils.errors import AuditError, ConfigurationError, DataError
from utils.settings import get_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3

ANALYSIS_FILE = "analysis.json"


# -------------------------------
# Subcommands
# -------------------------------
def _parse_provider(spec: str) -> FileSuggestionProvider:
    source, sep, path = spec.partition("=")
    if not sep or not path:
        raise ConfigurationError(f"[CORPUS] Provider must look like SOURCE=PATH, got '{spec}'.")
    try:
        source_kind = QuerySource(source)
    except ValueError:
        valid = ", ".join(s.value for s in QuerySource)
        raise ConfigurationError(f"[CORPUS] Unknown provider source '{source}'. Expected one of: {valid}") from None
    return FileSuggestionProvider(name=Path(path).stem, path=Path(path), source=source_kind)


def cmd_curate(args: argparse.Namespace) -> int:
    providers = [_parse_provider(p) for p in args.provider or []]
    candidates = curate_queries(providers, args.topic, args.seeds or [])
    kept = shortlist(candidates, load_stopwords(args.stopwords))
    out = Path(args.out)
    save_candidates(out / "candidates.jsonl", candidates)
    save_candidates(out / "shortlist.jsonl", kept)
    logger.info(f"[CORPUS] Shortlisted {len(kept)} of {len(candidates)} candidates into {out}")
    return EXIT_OK


def cmd_gen_catalog(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else get_settings().default_seed
    catalog = generate_catalog(
        seed,
        n_pro=args.n_pro,
        n_neutral=args.n_neutral,
        n_anti=args.n_anti,
        n_off_topic=args.n_off_topic,
        all_neutral=args.all_neutral,
    )
    out = Path(args.out)
    save_catalog(out / "catalog.jsonl", catalog)
    annotations = catalog.annotations()
    save_annotations(out / "annotations.jsonl", annotations)
    save_annotated_queries(out / "queries.jsonl", default_queries())
    logger.info(f"[PLATFORM] Catalog stance counts: {stance_counts(annotations.values())}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    settings = get_settings()
    seed = args.seed if args.seed is not None else settings.default_seed
    plan_file = load_plan_file(Path(args.plan)) if args.plan else PlanFile()

    if args.queries:
        queries = load_annotated_queries(Path(args.queries))
    elif plan_file.queries_path is not None:
        queries = load_annotated_queries(plan_file.queries_path)
    else:
        queries = default_queries()

    overrides = plan_file.overrides
    if args.days is not None:
        overrides = overrides.model_copy(update={"days": args.days})
    if overrides.carry_over_threshold_minutes is None:
        overrides = overrides.model_copy(
            update={"carry_over_threshold_minutes": settings.carry_over_threshold_minutes}
        )
    if overrides.page_size is None:
        overrides = overrides.model_copy(update={"page_size": settings.page_size})

    config = load_platform_config(
        overrides={"components": settings.components, **plan_file.platform, "rng_seed": seed}
    )
    catalog = load_catalog(Path(args.catalog))
    platform = SimulatedMarketplace(catalog, config)

    treatments = select_treatments(catalog, queries, platform, k=overrides.page_size, seed=seed)
    plan = build_plan(treatments, queries, overrides)

    out = Path(args.out)
    runlog = run_protocol(plan, platform, retries=settings.action_retries, events_path=out / EVENTS_FILE)
    save_runlog(out, runlog, plan, write_events=False)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    settings = get_settings()
    runlog = load_runlog(Path(args.run))
    plan = load_run_plan(Path(args.run))
    if plan is not None:
        check_complete(runlog, plan)
    annotations = load_annotations(Path(args.annotations))
    catalog = load_catalog(Path(args.catalog)) if args.catalog else None
    report = analyze(runlog, annotations, catalog=catalog, alpha=settings.alpha, bins=args.bins or settings.report_bins)
    out = Path(args.out)
    save_analysis(out / ANALYSIS_FILE, report)
    if args.format:
        write_report(report, out, args.format)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    report = load_analysis(Path(args.analysis))
    write_report(report, Path(args.out), args.format)
    return EXIT_OK


# -------------------------------
# Parser
# -------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="audit",
        description="Misinformation audit of marketplace search results and homepage recommendations.",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING... (default: AUDIT_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curate", help="Curate and shortlist search queries from suggestion fixtures.")
    p.add_argument("--provider", action="append", metavar="SOURCE=PATH",
                   help="Suggestion fixture; SOURCE is trend-topic, autocomplete or manual. Repeatable.")
    p.add_argument("--topic", required=True)
    p.add_argument("--seeds", nargs="+", default=[])
    p.add_argument("--stopwords", type=Path, default=None, help="One stopword per line.")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("gen-catalog", help="Generate a synthetic catalog, its annotations and the default queries.")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--n-pro", type=int, default=60)
    p.add_argument("--n-neutral", type=int, default=60)
    p.add_argument("--n-anti", type=int, default=60)
    p.add_argument("--n-off-topic", type=int, default=120)
    p.add_argument("--all-neutral", action="store_true", help="Annotate every topical item neutral.")
    p.set_defaults(func=cmd_gen_catalog)

    p = sub.add_parser("run", help="Select treatments and run the audit protocol on the simulated marketplace.")
    p.add_argument("--plan", default=None, help="YAML plan file.")
    p.add_argument("--catalog", required=True)
    p.add_argument("--queries", default=None, help="Annotated queries; overrides the plan's queries.")
    p.add_argument("--days", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="Score a run log and run the statistical analysis.")
    p.add_argument("--run", required=True, help="Run directory written by 'audit run'.")
    p.add_argument("--annotations", required=True)
    p.add_argument("--catalog", default=None, help="Needed for the rating/popularity section.")
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--format", choices=FORMATS, default=None, help="Also write the rendered report.")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="Render a saved analysis as JSON or CSV tables.")
    p.add_argument("--analysis", required=True)
    p.add_argument("--format", choices=FORMATS, default="json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(list(argv) if argv is not None else None)
    level = (args.log_level or get_settings().log_level).upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except DataError as e:
        logger.error(str(e))
        return EXIT_DATA
    except AuditError as e:
        logger.error(str(e))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
