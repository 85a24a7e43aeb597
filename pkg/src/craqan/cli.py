"""Command-line entry point.

Subcommands mirror the pipeline stages:

    ingest    corpus -> sections.jsonl (sectioning, sampling, segmentation)
    generate  sections.jsonl -> rci_<run_id>.jsonl transcripts
    serve     run the human-review HTTP service (auto-enqueues transcripts)
    export    dedup + write the release files
    stats     report dataset characteristics from the release + run logs

Exit codes: 0 success, 1 partial failure (work completed with a report),
2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import corpus as corpus_mod
from .config import RunConfig, derive_section_seed, load_config
from .gateway import ConfigError, build_backend
from .personas import PersonaRegistry, UnknownPersona, builtin_personas
from .rci import OUTCOME_ACCEPTED, OUTCOME_EXHAUSTED, OUTCOME_FAILED, RciConfig, run_rci
from .service import serve
from .stats import compute_stats, render_table, write_stats
from .store import ReviewStore, read_event_log

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


class RoleRouter:
    """Dispatches chat requests to the backend configured for the calling
    persona's role; backends are constructed once, up front, so credential
    problems surface before any work starts."""

    def __init__(self, config: RunConfig, registry: PersonaRegistry):
        self._registry = registry
        self._backends = {}
        roles = {spec.role for spec in registry}
        for role in roles:
            self._backends[role] = build_backend(config.backend_for(role))

    def complete(self, request):
        role = self._registry.get(request.persona).role
        return self._backends[role].complete(request)


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    if args.seed is not None:
        config.seed = args.seed
    if args.mock_script:
        config.use_mock_script(args.mock_script)
    if getattr(args, "corpus", None):
        config.corpus_path = args.corpus
    if getattr(args, "sections_per_article", None) is not None:
        config.sections_per_article = args.sections_per_article
    if getattr(args, "run_id", None):
        config.run_id = args.run_id
    if getattr(args, "max_iterations", None) is not None:
        config.max_iterations = args.max_iterations
    if getattr(args, "parallelism", None) is not None:
        config.parallelism = args.parallelism
    if getattr(args, "port", None) is not None:
        config.service_port = args.port
    if getattr(args, "host", None):
        config.service_host = args.host
    if getattr(args, "static_dir", None):
        config.static_dir = args.static_dir
    return config


def cmd_ingest(args) -> int:
    config = _resolve_config(args)
    if not config.corpus_path:
        print("error: no corpus path (use --corpus or corpus_path in the config)", file=sys.stderr)
        return EXIT_CONFIG
    registry = builtin_personas()
    splitter = registry.get("splitter")
    try:
        gateway = RoleRouter(config, registry)
        load = corpus_mod.load_corpus(config.corpus_path)
    except corpus_mod.CorpusEmpty as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    failures = [f"{f.path}: {f.reason}" for f in load.failures]
    segmented = []
    for article in load.articles:
        try:
            sections = corpus_mod.split_sections(article)
        except corpus_mod.NoSections as exc:
            failures.append(str(exc))
            continue
        sampled = corpus_mod.sample_sections(
            sections, config.sections_per_article, derive_section_seed(config.seed, article.article_id)
        )
        kept = 0
        for section in sampled:
            try:
                segmented.append(corpus_mod.segment_sentences(section, gateway, splitter))
                kept += 1
            except corpus_mod.SegmentationFailed as exc:
                failures.append(str(exc))
        print(f"article {article.article_id}: {kept} section(s)")

    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    sections_path = output_dir / "sections.jsonl"
    corpus_mod.write_sections_jsonl(segmented, sections_path)
    print(f"wrote {len(segmented)} sections to {sections_path}")
    if failures:
        print(f"{len(failures)} failure(s):", file=sys.stderr)
        for failure in failures:
            print(f"  - {failure}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_generate(args) -> int:
    config = _resolve_config(args)
    output_dir = Path(config.output_dir)
    sections_path = output_dir / "sections.jsonl"
    if not sections_path.exists():
        print(f"error: {sections_path} not found; run ingest first", file=sys.stderr)
        return EXIT_CONFIG
    registry = builtin_personas()
    try:
        panel = registry.panel(config.panel)
        gateway = RoleRouter(config, registry)
    except (UnknownPersona, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    run_id = config.effective_run_id
    transcripts_path = output_dir / f"rci_{run_id}.jsonl"
    done: set[str] = set()
    if transcripts_path.exists():
        for line in transcripts_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                done.add(json.loads(line)["section_id"])

    sections = corpus_mod.read_sections_jsonl(sections_path)
    todo = [s for s in sections if s.section_id not in done]
    skipped = [s for s in sections if len(s.sentences) < 2 and s.section_id not in done]
    todo = [s for s in todo if len(s.sentences) >= 2]

    rci_config = RciConfig(
        generator=registry.get("generator"),
        max_iterations=config.max_iterations,
        run_id=run_id,
        seed=config.seed,
    )
    counts = {OUTCOME_ACCEPTED: 0, OUTCOME_EXHAUSTED: 0, OUTCOME_FAILED: 0}
    write_lock = threading.Lock()
    # append + flush per transcript so an interrupt keeps completed work
    handle = transcripts_path.open("a", encoding="utf-8")

    def process(segment):
        transcript = run_rci(segment, panel, gateway, rci_config)
        with write_lock:
            handle.write(json.dumps(transcript.to_dict(), ensure_ascii=False) + "\n")
            handle.flush()
            counts[transcript.outcome] += 1
        return transcript

    pool = ThreadPoolExecutor(max_workers=config.parallelism)
    try:
        for future in [pool.submit(process, segment) for segment in todo]:
            future.result()
    except KeyboardInterrupt:
        # workers may be parked in backoff/rate-limit sleeps; don't wait on them
        pool.shutdown(wait=False, cancel_futures=True)
        with write_lock:
            handle.flush()
            completed = sum(counts.values())
        print(f"\ninterrupted; {completed} completed transcript(s) kept in {transcripts_path}")
        sys.stdout.flush()
        os._exit(130)
    pool.shutdown(wait=True)
    handle.close()

    print(
        f"run {run_id}: accepted {counts[OUTCOME_ACCEPTED]}, "
        f"exhausted {counts[OUTCOME_EXHAUSTED]}, failed {counts[OUTCOME_FAILED]}, "
        f"skipped {len(skipped)}, resumed past {len(done)}"
    )
    print(f"transcripts in {transcripts_path}")
    return EXIT_PARTIAL if counts[OUTCOME_FAILED] else EXIT_OK


def cmd_serve(args) -> int:
    config = _resolve_config(args)
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    serve(
        store_dir=output_dir,
        port=config.service_port,
        host=config.service_host,
        output_dir=output_dir,
        static_dir=config.static_dir,
    )
    return EXIT_OK


def cmd_export(args) -> int:
    config = _resolve_config(args)
    output_dir = Path(config.output_dir)
    store = ReviewStore(output_dir)
    try:
        dedup = store.dedup()
        result = store.export_dataset(output_dir)
    finally:
        store.close()
    print(f"dedup kept {len(dedup.kept)}, dropped {len(dedup.dropped)} duplicate(s)")
    print(f"exported {result.record_count} record(s) to {result.release_path}")
    return EXIT_OK


def cmd_stats(args) -> int:
    config = _resolve_config(args)
    output_dir = Path(config.output_dir)
    release_path = Path(args.release) if args.release else output_dir / "release.jsonl"
    if not release_path.exists():
        print(f"error: release file not found: {release_path}", file=sys.stderr)
        return EXIT_CONFIG
    records = [
        json.loads(line)
        for line in release_path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    from .service import load_transcripts

    transcripts = [t.to_dict() for t in load_transcripts(output_dir)]
    log_path = output_dir / "review_events.jsonl"
    events = read_event_log(log_path) if log_path.exists() else []
    report = compute_stats(records, transcripts=transcripts or None, events=events or None)
    stats_path = output_dir / "stats.json"
    write_stats(report, stats_path)
    print(render_table(report))
    print(f"\nreport written to {stats_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="craqan",
        description="Coreference-QA dataset pipeline: ingest, generate, review, export, stats.",
    )
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--output-dir", help="run directory (overrides config)")
    parser.add_argument("--seed", type=int, help="random seed (overrides config)")
    parser.add_argument("--mock-script", help="route every persona to this mock script")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="load, section, sample, and segment the corpus")
    p_ingest.add_argument("--corpus", help="directory of .md files or a manifest file")
    p_ingest.add_argument("--sections-per-article", type=int, dest="sections_per_article")
    p_ingest.set_defaults(func=cmd_ingest)

    p_generate = sub.add_parser("generate", help="run the generate/review loop per section")
    p_generate.add_argument("--run-id", dest="run_id")
    p_generate.add_argument("--max-iterations", type=int, dest="max_iterations")
    p_generate.add_argument("--parallelism", type=int)
    p_generate.set_defaults(func=cmd_generate)

    p_serve = sub.add_parser("serve", help="run the human-review HTTP service")
    p_serve.add_argument("--port", type=int)
    p_serve.add_argument("--host")
    p_serve.add_argument("--static-dir", dest="static_dir", help="serve a built frontend from /app")
    p_serve.set_defaults(func=cmd_serve)

    p_export = sub.add_parser("export", help="dedup accepted items and write the release")
    p_export.set_defaults(func=cmd_export)

    p_stats = sub.add_parser("stats", help="dataset characteristics report")
    p_stats.add_argument("--release", help="release file (default: <output-dir>/release.jsonl)")
    p_stats.set_defaults(func=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
