"""Command-line entry point binding the pipeline stages into reproducible
runs.

One declarative JSON config drives network-dependent commands; environment
variables (DF_ENDPOINT, DF_API_KEY, DF_SEARCH_KEY, DF_PARALLELISM) override
the file and explicit flags override both. Every command writes a config
snapshot next to its outputs so any stage can be re-run from the artifacts
alone. All network-dependent commands accept file-backed mocks, which keeps
the full pipeline runnable offline.

Exit codes: 0 success, 1 operational failure, 2 validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, annotation, corpus, generation, mleval, privacy_eval
from .embeddings import HashEmbeddingProvider, HttpEmbeddingProvider
from .llm_client import HttpChatClient, MockChatClient
from .textmetrics import bert_score, pair_report, style_similarity
from .websearch import FixturePageFetcher, FixtureSearchClient, HttpPageFetcher, HttpSearchClient

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2


class ValidationFailure(Exception):
    pass


def _require_file(path: str | None, what: str) -> Path:
    if not path:
        raise ValidationFailure(f"missing required input: {what}")
    p = Path(path)
    if not p.is_file():
        raise ValidationFailure(f"{what} not found: {p}")
    return p


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = _require_file(path, "config file")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"config file {p} is not valid JSON: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _snapshot(out: Path, command: str, resolved: dict) -> None:
    _write_json(out / "config_snapshot.json", {"command": command, "config": resolved})
    _write_json(
        out / "run_meta.json",
        {
            "command": command,
            "version": __version__,
            "generated_at": datetime.now(timezone.utc).isoformat(),
        },
    )


def _jobs(args, config: dict) -> int:
    if getattr(args, "jobs", None):
        return args.jobs
    env = os.environ.get("DF_PARALLELISM")
    if env:
        return int(env)
    return int(config.get("jobs", 1))


# --- filter -----------------------------------------------------------------


def _filter_config(args, config: dict) -> corpus.FilterConfig:
    section = dict(config.get("filter", {}))
    if args.nsfw_blocklist:
        blocklist_path = _require_file(args.nsfw_blocklist, "nsfw blocklist")
        section["nsfw_subreddits"] = [
            line.strip() for line in blocklist_path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    if args.min_words is not None:
        section["min_words"] = args.min_words
    if args.fraction is not None:
        section["sample_fraction"] = args.fraction
    if args.seed is not None:
        section["sample_seed"] = args.seed
    return corpus.FilterConfig(
        nsfw_subreddits=frozenset(section.get("nsfw_subreddits", ())),
        pronoun_lexicon=tuple(
            section.get("pronoun_lexicon", corpus.DEFAULT_PRONOUN_LEXICON)
        ),
        min_words=int(section.get("min_words", 3)),
        sample_fraction=float(section.get("sample_fraction", 0.05)),
        sample_seed=int(section.get("sample_seed", 0)),
    )


def cmd_filter(args) -> int:
    config = _load_config(args.config)
    input_path = _require_file(args.input or config.get("paths", {}).get("input"), "input corpus")
    filter_config = _filter_config(args, config)
    posts, skipped = corpus.load_posts(input_path, strict=not args.lenient)
    filtered, ledger = corpus.run_filter_pipeline(posts, filter_config)
    out = _out_dir(args)
    corpus.save_posts(filtered, out / "filtered.jsonl")
    if skipped:
        ledger.sampling["skipped_input_lines"] = len(skipped)
    ledger.to_json(out / "filter_ledger.json")
    _snapshot(out, "filter", {
        "input": str(input_path),
        "nsfw_subreddits": sorted(filter_config.nsfw_subreddits),
        "pronoun_lexicon": list(filter_config.pronoun_lexicon),
        "min_words": filter_config.min_words,
        "sample_fraction": filter_config.sample_fraction,
        "sample_seed": filter_config.sample_seed,
    })
    print(f"filter: {ledger.rows()[0]} -> {ledger.rows()[-1]} posts ({out / 'filtered.jsonl'})")
    return EXIT_OK


# --- annotations ------------------------------------------------------------


def cmd_import_annotations(args) -> int:
    input_path = _require_file(args.input, "annotation export")
    posts = annotation.import_annotations(input_path, schema=args.schema)
    annotation.export_annotations(posts, args.output)
    print(f"import-annotations: {len(posts)} posts -> {args.output}")
    return EXIT_OK


def cmd_iaa(args) -> int:
    path_a = _require_file(args.annotations_a, "annotator A file")
    path_b = _require_file(args.annotations_b, "annotator B file")
    ann_a = annotation.import_annotations(path_a, schema=args.schema)
    ann_b = annotation.import_annotations(path_b, schema=args.schema)
    report = annotation.pairwise_f1(ann_a, ann_b)
    out = _out_dir(args)
    _write_json(out / "iaa.json", report.to_dict())
    _snapshot(out, "iaa", {"annotations_a": str(path_a), "annotations_b": str(path_b)})
    print(f"iaa: pairwise F1 {report.pairwise_f1:.4f}, mean overlap {report.mean_overlap_fraction:.4f}")
    return EXIT_OK


# --- generation -------------------------------------------------------------


def _generation_config(args, config: dict) -> generation.GenerationConfig:
    section = dict(config.get("generation", {}))
    if args.preset:
        base = generation.PRESET_CONFIGS[args.preset]
    else:
        base = generation.GenerationConfig(
            endpoint=section.get("endpoint", ""),
            model_name=section.get("model_name", "mock"),
            temperature=float(section.get("temperature", 1.0)),
            top_p=float(section.get("top_p", 0.9)),
            max_tokens=int(section.get("max_tokens", 1024)),
            max_rounds=int(section.get("max_rounds", 3)),
            refusal_patterns=tuple(
                section.get("refusal_patterns", generation.DEFAULT_REFUSAL_PATTERNS)
            ),
        )
    endpoint = os.environ.get("DF_ENDPOINT") or base.endpoint or section.get("endpoint", "")
    if args.temperature is not None:
        base = replace(base, temperature=args.temperature)
    return replace(base, endpoint=endpoint)


def _prompt_plan(args, config: dict) -> generation.PromptPlan:
    plan_path = args.plan or config.get("generation", {}).get("prompt_plan")
    if plan_path:
        return generation.PromptPlan.from_file(_require_file(plan_path, "prompt plan"))
    return generation.default_prompt_plan()


def _chat_client(args, gen_config: generation.GenerationConfig):
    if args.mock:
        return MockChatClient.from_fixture(_require_file(args.mock, "chat mock fixture"))
    if not gen_config.endpoint:
        raise ValidationFailure(
            "no chat endpoint configured: set generation.endpoint, DF_ENDPOINT, or pass --mock"
        )
    return HttpChatClient(endpoint=gen_config.endpoint)


def _generation_inputs(args, config: dict) -> list[tuple[str, str]]:
    input_path = _require_file(args.input or config.get("paths", {}).get("input"), "input corpus")
    posts, _ = corpus.load_posts(input_path)
    if args.no_augment:
        return [(p.id, p.text) for p in posts]
    return [(p.id, corpus.augment_with_subreddit(p)) for p in posts]


def cmd_generate(args) -> int:
    config = _load_config(args.config)
    gen_config = _generation_config(args, config)
    plan = _prompt_plan(args, config)
    client = _chat_client(args, gen_config)
    pairs = _generation_inputs(args, config)
    jobs = _jobs(args, config.get("generation", {}))
    out = _out_dir(args)

    if args.calibrate:
        grid = _parse_grid(args.grid)
        rng = random.Random(args.calibration_seed)
        sample = pairs if len(pairs) <= args.calibration_sample else rng.sample(
            pairs, args.calibration_sample
        )
        sweep = generation.calibration_sweep(sample, grid, plan, gen_config, client, jobs=jobs)
        _write_json(out / "calibration.json", sweep.to_dict())
        gen_config = replace(gen_config, temperature=sweep.chosen)
        print(f"calibrate: chose temperature {sweep.chosen:g}")

    traces, report = generation.generate_corpus(pairs, plan, gen_config, client, jobs=jobs)
    generation.save_traces(traces, out / "traces.jsonl")
    accounting = report.to_dict()
    accounting["augmented"] = not args.no_augment
    _write_json(out / "generation_report.json", accounting)
    _snapshot(out, "generate", {
        "config": gen_config.snapshot(),
        "plan_steps": len(plan.step_prompts),
        "jobs": jobs,
        "mock": bool(args.mock),
    })
    hard_failures = sum(
        1 for t in traces if t.outcome == "error" and (t.error_detail or "").startswith("transport")
    )
    print(
        f"generate: {report.succeeded}/{report.attempted} succeeded, "
        f"{report.refused_final} refused, {report.errored} errored"
    )
    return EXIT_FAILURE if hard_failures else EXIT_OK


def _parse_grid(raw: str) -> tuple[float, ...]:
    try:
        grid = tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError as exc:
        raise ValidationFailure(f"bad temperature grid {raw!r}") from exc
    if not grid:
        raise ValidationFailure("temperature grid is empty")
    return grid


def cmd_calibrate(args) -> int:
    config = _load_config(args.config)
    gen_config = _generation_config(args, config)
    plan = _prompt_plan(args, config)
    client = _chat_client(args, gen_config)
    pairs = _generation_inputs(args, config)
    grid = _parse_grid(args.grid)
    out = _out_dir(args)
    sweep = generation.calibration_sweep(
        pairs, grid, plan, gen_config, client, jobs=_jobs(args, config.get("generation", {}))
    )
    _write_json(out / "calibration.json", sweep.to_dict())
    _snapshot(out, "calibrate", {"grid": list(grid), "config": gen_config.snapshot()})
    print(f"calibrate: chose temperature {sweep.chosen:g}")
    return EXIT_OK


# --- metrics ----------------------------------------------------------------


def _successful_traces(path: Path) -> list[generation.GenerationTrace]:
    traces = generation.load_traces(path)
    return [t for t in traces if t.outcome == "success"]


def _scoring_pairs(args) -> list[tuple[str, str, str]]:
    """(id, source, synthetic) triples from --traces or a --pairs JSONL
    file of {"id", "source", "synthetic"} records."""
    if bool(args.traces) == bool(args.pairs):
        raise ValidationFailure("pass exactly one of --traces or --pairs")
    if args.traces:
        traces = _successful_traces(_require_file(args.traces, "traces file"))
        return [(t.source_post_id, t.input_text, t.final_text) for t in traces]
    rows = []
    with open(_require_file(args.pairs, "pairs file"), encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                rows.append((str(rec["id"]), rec["source"], rec["synthetic"]))
    return rows


def _embedding_provider(spec: str):
    if spec == "hash":
        return HashEmbeddingProvider()
    return HttpEmbeddingProvider(spec)


def cmd_metrics(args) -> int:
    triples = _scoring_pairs(args)
    out = _out_dir(args)
    provider = _embedding_provider(args.embeddings) if args.embeddings else None

    sums = {"bleu3": 0.0, "rouge_l": 0.0, "meteor": 0.0, "cosine": 0.0, "divergence": 0.0}
    supplementary = {"bert_score_f1": 0.0, "style_similarity": 0.0}
    scored = 0
    with open(out / "similarity.jsonl", "w", encoding="utf-8") as fh:
        for pair_id, source, synthetic in triples:
            report = pair_report(synthetic, source)
            row = report.to_dict(id=pair_id)
            if provider is not None:
                cand = provider.token_vectors(synthetic)
                ref = provider.token_vectors(source)
                if cand.shape[0] and ref.shape[0]:
                    row["bert_score_f1"] = bert_score(cand, ref)[2]
                    row["style_similarity"] = style_similarity(
                        provider.pooled_vector(synthetic),
                        provider.pooled_vector(source),
                    )
                    supplementary["bert_score_f1"] += row["bert_score_f1"]
                    supplementary["style_similarity"] += row["style_similarity"]
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
            for key in sums:
                sums[key] += row[key]
            scored += 1

    summary = {"pairs": scored}
    summary["means"] = {k: (v / scored if scored else None) for k, v in sums.items()}
    if provider is not None and scored:
        summary["supplementary_means"] = {
            k: v / scored for k, v in supplementary.items()
        }
    _write_json(out / "metrics_summary.json", summary)
    _snapshot(
        out,
        "metrics",
        {"traces": args.traces, "pairs": args.pairs, "embeddings": args.embeddings},
    )
    print(f"metrics: scored {scored} pairs -> {out / 'similarity.jsonl'}")
    return EXIT_OK


# --- unlinkability ----------------------------------------------------------


def _search_stack(args, config: dict):
    section = config.get("unlink", {})
    if args.search_fixture or args.pages_fixture:
        search_path = _require_file(args.search_fixture, "search fixture")
        pages_path = _require_file(args.pages_fixture, "pages fixture")
        return FixtureSearchClient(search_path), FixturePageFetcher(pages_path)
    endpoint = args.search_endpoint or section.get("search_endpoint")
    if not endpoint:
        raise ValidationFailure(
            "no search endpoint configured: pass --search-endpoint or fixture files"
        )
    return HttpSearchClient(endpoint), HttpPageFetcher()


def cmd_unlink(args) -> int:
    config = _load_config(args.config)
    section = config.get("unlink", {})
    triples = _scoring_pairs(args)
    search_client, fetcher = _search_stack(args, config)
    k = args.k if args.k is not None else int(section.get("k", 10))
    threshold = (
        args.threshold if args.threshold is not None else float(section.get("threshold", 0.5))
    )
    out = _out_dir(args)
    items = [(pair_id, synthetic) for pair_id, _, synthetic in triples]
    records = privacy_eval.scan_corpus(
        items,
        search_client,
        fetcher,
        k=k,
        threshold=threshold,
        max_query_chars=int(section.get("max_query_chars", 256)),
        reddit_hosts=tuple(section.get("reddit_hosts", privacy_eval.DEFAULT_REDDIT_HOSTS)),
        jobs=_jobs(args, section),
    )
    privacy_eval.save_records(records, out / "unlink_records.jsonl")
    if args.traces:
        traces = _successful_traces(Path(args.traces))
        kept, accounting = privacy_eval.apply_threshold(traces, records)
        generation.save_traces(kept, out / "kept.jsonl")
    else:
        kept_items, accounting = privacy_eval.apply_threshold(
            items, records, id_of=lambda item: item[0]
        )
        with open(out / "kept.jsonl", "w", encoding="utf-8") as fh:
            for pair_id, synthetic in kept_items:
                fh.write(json.dumps({"id": pair_id, "synthetic": synthetic}) + "\n")
    _write_json(out / "unlink_accounting.json", accounting)
    _snapshot(out, "unlink", {"k": k, "threshold": threshold, "traces": args.traces, "pairs": args.pairs})
    print(
        f"unlink: {accounting['before']} scanned, {accounting['discarded']} discarded, "
        f"{accounting['after']} kept"
    )
    return EXIT_OK


# --- survey -----------------------------------------------------------------


def cmd_survey(args) -> int:
    config = _load_config(args.config)
    responses_path = _require_file(args.responses, "survey responses CSV")
    expected = {
        int(k): float(v)
        for k, v in config.get("survey", {}).get(
            "expected_p", {str(k): v for k, v in privacy_eval.DEFAULT_EXPECTED_P.items()}
        ).items()
    }
    responses = privacy_eval.load_survey_csv(responses_path)
    tally = privacy_eval.tally_survey(responses, expected_p=expected)
    result = privacy_eval.chi_square_gof(tally)
    out = _out_dir(args)
    _write_json(out / "survey_report.json", {"tally": tally.to_dict(), "chi_square": result.to_dict()})
    _snapshot(out, "survey", {"responses": str(responses_path), "expected_p": {str(k): v for k, v in expected.items()}})
    print(
        f"survey: chi2 {result.statistic:.4f} (df {result.degrees_of_freedom}), "
        f"p {result.p_value:.4f}"
    )
    return EXIT_OK


# --- classifier evaluation ---------------------------------------------------


def cmd_eval_classifier(args) -> int:
    out = _out_dir(args)
    if args.task == "multilabel":
        examples = mleval.load_multilabel_jsonl(_require_file(args.predictions, "predictions"))
        payload = mleval.multilabel_metrics(examples)
    elif args.task == "token":
        records = mleval.load_token_jsonl(_require_file(args.predictions, "predictions"))
        payload = {"token_macro_f1": mleval.token_macro_f1(records)}
    else:  # span
        gold = annotation.import_annotations(
            _require_file(args.gold, "gold annotations"), schema="native"
        )
        pred = annotation.import_annotations(
            _require_file(args.pred, "predicted annotations"), schema="native"
        )
        gold_by_id = {p.id: p.spans for p in gold}
        pred_by_id = {p.id: p.spans for p in pred}
        if set(gold_by_id) != set(pred_by_id):
            raise ValidationFailure("gold and predicted files cover different ids")
        pairs = [(gold_by_id[i], pred_by_id[i]) for i in sorted(gold_by_id)]
        payload = mleval.span_f1_partial_corpus(pairs, min_overlap=args.min_overlap)
    payload = {"task": args.task, **payload}
    _write_json(out / "classifier_report.json", payload)
    _snapshot(out, "eval-classifier", {"task": args.task})
    print(f"eval-classifier[{args.task}]: " + ", ".join(f"{k}={v}" for k, v in payload.items() if k != "task"))
    return EXIT_OK


def cmd_proportions(args) -> int:
    original = annotation.import_annotations(
        _require_file(args.original, "original annotations"), schema=args.schema
    )
    synthetic = annotation.import_annotations(
        _require_file(args.synthetic, "synthetic annotations"), schema=args.schema
    )
    comparison = mleval.proportion_comparison(original, synthetic)
    out = _out_dir(args)
    comparison.to_csv(out / "proportions.csv")
    _write_json(out / "proportions.json", comparison.to_dict())
    _snapshot(out, "proportions", {"original": args.original, "synthetic": args.synthetic})
    print(f"proportions: max |residual| {comparison.max_abs_deviation:.4f}")
    return EXIT_OK


# --- aggregate report --------------------------------------------------------


_REPORT_FILES = {
    "filter": "filter_ledger.json",
    "generation": "generation_report.json",
    "calibration": "calibration.json",
    "metrics": "metrics_summary.json",
    "unlink": "unlink_accounting.json",
    "survey": "survey_report.json",
    "classifier": "classifier_report.json",
    "proportions": "proportions.json",
    "iaa": "iaa.json",
}


def cmd_report(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        raise ValidationFailure(f"report directory not found: {root}")
    summary: dict = {"reports": {}, "succeeded": [], "failed": {}}
    for name, filename in _REPORT_FILES.items():
        matches = sorted(root.rglob(filename))
        if not matches:
            continue
        try:
            summary["reports"][name] = json.loads(matches[0].read_text(encoding="utf-8"))
            summary["succeeded"].append(name)
        except (OSError, json.JSONDecodeError) as exc:
            summary["failed"][name] = str(exc)
    _write_json(root / "summary.json", summary)
    print(f"report: aggregated {len(summary['succeeded'])} reports -> {root / 'summary.json'}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dforge",
        description="Synthetic rewriting and privacy evaluation for PII-annotated corpora.",
    )
    parser.add_argument("--version", action="version", version=f"dforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="run the corpus filtering cascade")
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--nsfw-blocklist", help="file with one subreddit per line")
    p.add_argument("--min-words", type=int)
    p.add_argument("--fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--lenient", action="store_true", help="skip malformed input lines")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("import-annotations", help="convert annotation exports to native JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", choices=["doccano", "native"], default="doccano")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_import_annotations)

    p = sub.add_parser("iaa", help="pairwise span F1 between two annotators")
    p.add_argument("--annotations-a", required=True)
    p.add_argument("--annotations-b", required=True)
    p.add_argument("--schema", choices=["doccano", "native"], default="native")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_iaa)

    p = sub.add_parser("generate", help="rewrite a corpus via sequential prompting")
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--mock", help="chat mock fixture JSON (offline mode)")
    p.add_argument("--preset", choices=sorted(generation.PRESET_CONFIGS))
    p.add_argument("--plan", help="prompt plan JSON file")
    p.add_argument("--temperature", type=float)
    p.add_argument("--jobs", type=int)
    p.add_argument("--no-augment", action="store_true", help="input text is already augmented")
    p.add_argument("--calibrate", action="store_true", help="pick temperature before generating")
    p.add_argument("--grid", default="0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--calibration-sample", type=int, default=50)
    p.add_argument("--calibration-seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("calibrate", help="temperature sweep on a sample corpus")
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--mock")
    p.add_argument("--preset", choices=sorted(generation.PRESET_CONFIGS))
    p.add_argument("--plan")
    p.add_argument("--temperature", type=float)
    p.add_argument("--grid", default="0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--jobs", type=int)
    p.add_argument("--no-augment", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("metrics", help="similarity reports for generated traces")
    p.add_argument("--traces")
    p.add_argument("--pairs", help='JSONL of {"id","source","synthetic"} records')
    p.add_argument("--output-dir", required=True)
    p.add_argument("--embeddings", help='"hash" or an embedding endpoint URL')
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("unlink", help="web-search unlinkability scan")
    p.add_argument("--config")
    p.add_argument("--traces")
    p.add_argument("--pairs", help='JSONL of {"id","source","synthetic"} records')
    p.add_argument("--output-dir", required=True)
    p.add_argument("--search-fixture", help="JSON query->results mock")
    p.add_argument("--pages-fixture", help="JSON url->text mock")
    p.add_argument("--search-endpoint")
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_unlink)

    p = sub.add_parser("survey", help="tally + chi-square for the human study")
    p.add_argument("--config")
    p.add_argument("--responses", required=True)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_survey)

    p = sub.add_parser("eval-classifier", help="score prediction files")
    p.add_argument("--task", choices=["multilabel", "token", "span"], required=True)
    p.add_argument("--predictions")
    p.add_argument("--gold")
    p.add_argument("--pred")
    p.add_argument("--min-overlap", type=float, default=0.5)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_eval_classifier)

    p = sub.add_parser("proportions", help="compare PII proportions of two corpora")
    p.add_argument("--original", required=True)
    p.add_argument("--synthetic", required=True)
    p.add_argument("--schema", choices=["doccano", "native"], default="native")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_proportions)

    p = sub.add_parser("report", help="aggregate stage outputs into summary.json")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        ValidationFailure,
        corpus.CorpusFormatError,
        annotation.AnnotationFormatError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
