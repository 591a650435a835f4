"""Command-line experiment driver.

Subcommands: `gen` (synthetic corpus), `index`, `run` (bm25 | fairqr |
fairqr-norerank | mmr), `eval`. Configuration is a JSON document; every
field can be overridden by a flag of the same name. Exit codes: 0 success,
1 usage error, 2 data error, 3 refiner/transport failure after degradation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import synthetic
from .corpus import GroupSchema, load_corpus
from .errors import FairQRError, RefinerError
from .evaluation import (
    Significance,
    evaluate_run,
    paired_t_test,
    report_to_dict,
    report_to_text,
)
from .fairness import (
    ExposureDistribution,
    FairnessTarget,
    target_from_qrels,
)
from .index import build_index, load_index, retrieve, save_index
from .llm import ChatCompletionClient
from .refine import (
    DEFAULT_PROMPT_TEMPLATE,
    LLMRefiner,
    LexiconRefiner,
    RefinerConfig,
    fair_qr,
)
from .rerank import mmr_rerank, semantic_rerank
from .trec import Qrels, parse_qrels, parse_run, write_qrels, write_run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_REFINER = 3

CONFIG_FIELDS = {
    "corpus": str,
    "schema": str,
    "queries": str,
    "qrels": str,
    "category": str,
    "k": int,
    "pool_size": int,
    "max_iterations": int,
    "refiner": str,          # lexicon | llm
    "lexicon": str,
    "template": str,
    "base_url": str,
    "model": str,
    "temperature": float,
    "weighting": str,
    "targets": str,          # explicit target file (optional)
    "out": str,
    "index_file": str,
    "seed": int,
    "jobs": int,
    "mmr_lambda": float,
}

DEFAULTS = {
    "category": "gender",
    "k": 20,
    "pool_size": 100,
    "max_iterations": 5,
    "refiner": "lexicon",
    "temperature": 0.3,
    "weighting": "uniform",
    "seed": 42,
    "jobs": 1,
    "mmr_lambda": 0.5,
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    for name, typ in CONFIG_FIELDS.items():
        parser.add_argument(f"--{name.replace('_', '-')}", type=typ,
                            dest=name, default=None)


def _merge_config(args: argparse.Namespace) -> dict:
    config = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(CONFIG_FIELDS)
        if unknown:
            raise FairQRError(f"unknown config fields: {sorted(unknown)}")
        config.update(loaded)
    for name in CONFIG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            config[name] = value
    return config


def _require(config: dict, *names: str) -> None:
    missing = [n for n in names if not config.get(n)]
    if missing:
        raise UsageError(f"missing required config fields: {missing}")


class UsageError(Exception):
    pass


def _load_queries(path) -> list[tuple[str, str]]:
    """Queries file: TSV lines `query_id<TAB>query text`."""
    queries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            query_id, _, text = line.partition("\t")
            queries.append((query_id, text))
    return queries


def _load_store_and_index(config):
    _require(config, "corpus", "schema")
    store = load_corpus(config["corpus"], config["schema"])
    if config.get("index_file") and os.path.exists(config["index_file"]):
        index = load_index(config["index_file"])
    else:
        index = build_index(store)
    return store, index


def _targets_for(config, store, qrels, query_ids) -> dict[str, FairnessTarget]:
    category = config["category"]
    schema = store.schema(category)
    targets: dict[str, FairnessTarget] = {}
    if config.get("targets"):
        with open(config["targets"], encoding="utf-8") as fh:
            explicit = json.load(fh)
        for query_id, per_cat in explicit.items():
            if category not in per_cat:
                continue
            probs = [per_cat[category].get(s, 0.0) for s in schema.subgroups]
            targets[query_id] = FairnessTarget(
                query_id, category,
                ExposureDistribution(category, probs), provenance="explicit",
            )
        return targets
    for query_id in query_ids:
        try:
            targets[query_id] = target_from_qrels(
                qrels, store, query_id, category
            )
        except FairQRError:
            pass  # queries without relevant docs are skipped downstream
    return targets


def _make_refiner(config, store):
    if config["refiner"] == "lexicon":
        _require(config, "lexicon")
        with open(config["lexicon"], encoding="utf-8") as fh:
            lexicon = json.load(fh)
        return LexiconRefiner(lexicon)
    if config["refiner"] == "llm":
        _require(config, "base_url", "model")
        template = DEFAULT_PROMPT_TEMPLATE
        if config.get("template"):
            with open(config["template"], encoding="utf-8") as fh:
                template = fh.read()
        client = ChatCompletionClient(config["base_url"], config["model"])
        subgroups = store.schema(config["category"]).subgroups
        return LLMRefiner(
            client, subgroups,
            temperature=config["temperature"], template=template,
        )
    raise UsageError(f"unknown refiner kind {config['refiner']!r}")


def cmd_gen(args) -> int:
    config = _merge_config(args)
    _require(config, "out")
    outdir = config["out"]
    os.makedirs(outdir, exist_ok=True)
    spec = synthetic.SkewSpec(
        seed=config["seed"],
        doc_count=args.docs,
        topic_count=args.topics,
        skew=args.skew,
        category=config["category"],
    )
    records, queries, qrels_rows, lexicon = synthetic.generate(spec)
    with open(os.path.join(outdir, "corpus.jsonl"), "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    with open(os.path.join(outdir, "schema.json"), "w", encoding="utf-8") as fh:
        json.dump({spec.category: list(spec.subgroups)}, fh, indent=2)
    with open(os.path.join(outdir, "queries.tsv"), "w", encoding="utf-8") as fh:
        for query_id, text in queries:
            fh.write(f"{query_id}\t{text}\n")
    qrels = Qrels()
    for query_id, doc_id, grade in qrels_rows:
        qrels.add(query_id, doc_id, grade)
    write_qrels(qrels, os.path.join(outdir, "qrels.txt"))
    with open(os.path.join(outdir, "lexicon.json"), "w", encoding="utf-8") as fh:
        json.dump(lexicon, fh, indent=2, sort_keys=True)
    print(f"generated {len(records)} documents, {len(queries)} queries "
          f"in {outdir}")
    return EXIT_OK


def cmd_index(args) -> int:
    config = _merge_config(args)
    _require(config, "corpus", "schema", "index_file")
    store = load_corpus(config["corpus"], config["schema"])
    index = build_index(store)
    save_index(index, config["index_file"])
    print(f"N={index.n_documents} avgdl={index.avgdl:.4f} "
          f"vocabulary={len(index.postings)}")
    return EXIT_OK


def _run_one_query(mode, config, store, index, refiner, qid, qtext, target):
    """Pipeline for a single query; returns (ranked list, trace dict or None)."""
    pool = config["pool_size"]
    k = config["k"]
    if mode == "bm25":
        return retrieve(index, qtext, pool, qid), None
    if mode == "mmr":
        candidates = retrieve(index, qtext, pool, qid)
        return mmr_rerank(
            candidates, qtext, store, index, config["mmr_lambda"], k
        ), None
    if mode in ("fairqr", "fairqr-norerank"):
        if target is None:
            # no derivable target: degrade to plain retrieval
            return retrieve(index, qtext, pool, qid), None
        rcfg = RefinerConfig(
            category=config["category"],
            max_iterations=config["max_iterations"],
            pool_size=pool,
            k=k,
            temperature=config["temperature"],
            weighting=config["weighting"],
        )
        fair_set, trace = fair_qr(index, store, qtext, target, rcfg,
                                  refiner, qid)
        if mode == "fairqr":
            return semantic_rerank(fair_set, qtext, index, qid), trace.to_dict()
        return fair_set, trace.to_dict()
    raise UsageError(f"unknown mode {mode!r}")


def cmd_run(args) -> int:
    config = _merge_config(args)
    mode = args.mode
    _require(config, "queries", "out")
    store, index = _load_store_and_index(config)
    queries = _load_queries(config["queries"])
    qrels = parse_qrels(config["qrels"]) if config.get("qrels") else Qrels()
    targets = {}
    refiner = None
    if mode in ("fairqr", "fairqr-norerank"):
        targets = _targets_for(config, store, qrels, [q for q, _ in queries])
        refiner = _make_refiner(config, store)

    def work(item):
        qid, qtext = item
        return qid, _run_one_query(
            mode, config, store, index, refiner, qid, qtext,
            targets.get(qid),
        )

    jobs = max(1, config["jobs"])
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(work, queries))
    else:
        results = dict(map(work, queries))

    run = {qid: ranked for qid, (ranked, _) in results.items()}
    outdir = config["out"]
    os.makedirs(outdir, exist_ok=True)
    run_path = os.path.join(outdir, f"run-{mode}.txt")
    write_run(run, run_path, tag=mode)
    n_traces = 0
    if mode in ("fairqr", "fairqr-norerank"):
        trace_dir = os.path.join(outdir, "traces")
        os.makedirs(trace_dir, exist_ok=True)
        for qid, (_, trace) in sorted(results.items()):
            if trace is None:
                continue
            with open(os.path.join(trace_dir, f"{qid}.json"), "w",
                      encoding="utf-8") as fh:
                json.dump(trace, fh, indent=2, sort_keys=True)
            n_traces += 1
    print(f"wrote {run_path} ({len(run)} queries, {n_traces} traces)")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _merge_config(args)
    _require(config, "qrels")
    store, _ = _load_store_and_index(config)
    qrels = parse_qrels(config["qrels"])
    category = config["category"]
    run_a = parse_run(args.run)
    all_query_ids = sorted(run_a)
    targets_flat = _targets_for(config, store, qrels, all_query_ids)
    targets = {qid: {category: t} for qid, t in targets_flat.items()}
    k = config["k"]
    report = evaluate_run(run_a, qrels, targets, store, k)
    if args.run_b:
        run_b = parse_run(args.run_b)
        report_b = evaluate_run(run_b, qrels, targets, store, k)
        rows_b = {r.query_id: r for r in report_b.rows}
        shared = [r.query_id for r in report.rows if r.query_id in rows_b]
        if len(shared) >= 2:
            a_ndcg = [next(r for r in report.rows if r.query_id == q).ndcg
                      for q in shared]
            b_ndcg = [rows_b[q].ndcg for q in shared]
            a_awrf = [next(r for r in report.rows if r.query_id == q).awrf[category]
                      for q in shared]
            b_awrf = [rows_b[q].awrf[category] for q in shared]
            report.significance = Significance(
                comparison_run=args.run_b,
                metrics={
                    f"ndcg@{k}": paired_t_test(a_ndcg, b_ndcg),
                    f"awrf@{k}.{category}": paired_t_test(a_awrf, b_awrf),
                },
            )
    text = report_to_text(report)
    if config.get("out"):
        os.makedirs(config["out"], exist_ok=True)
        stem = os.path.splitext(os.path.basename(args.run))[0]
        json_path = os.path.join(config["out"], f"report-{stem}.json")
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        with open(os.path.join(config["out"], f"report-{stem}.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairqr",
        description="Fairness-aware retrieval by recursive query refinement",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic collection")
    p_gen.add_argument("--docs", type=int, default=200)
    p_gen.add_argument("--topics", type=int, default=10)
    p_gen.add_argument("--skew", type=float, default=0.8)
    _add_config_flags(p_gen)
    p_gen.set_defaults(func=cmd_gen)

    p_index = sub.add_parser("index", help="build and persist the index")
    _add_config_flags(p_index)
    p_index.set_defaults(func=cmd_index)

    p_run = sub.add_parser("run", help="produce a TREC run file")
    p_run.add_argument(
        "mode", choices=["bm25", "fairqr", "fairqr-norerank", "mmr"]
    )
    _add_config_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="evaluate one or two run files")
    p_eval.add_argument("run", help="TREC run file to evaluate")
    p_eval.add_argument("--run-b", help="second run for paired t-test")
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RefinerError as exc:
        print(f"refiner failure: {exc}", file=sys.stderr)
        return EXIT_REFINER
    except (FairQRError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
