"""Command-line front end: extract, match, compare, embed-fetch.

Every output file carries a metadata block (engine version, effective
config, config hash, input hashes) and is byte-identical across reruns
with the same inputs, regardless of --jobs.

Exit codes: 0 success, 1 partial per-text failures (a failure manifest is
written next to the outputs), 2 fatal.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version-dependent import
    import tomli as tomllib

from . import __version__
from .clustering import ClusterParams
from .corpus import corpus_counts, load_corpus
from .embeddings import load_embeddings, save_embeddings
from .matching import (compare_methods, coverage_sweep, match_arguments,
                       report_from_json, report_to_json)
from .pipelines import (METHODS, CosineMatchScorer, MethodConfig,
                        ServiceMatchScorer, key_points_from_json,
                        key_points_to_json, run_all)
from .service import MODEL_URL_ENV, ServiceClient, ServiceError, ServiceProvider, configured_url

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FATAL = 2


class CliError(Exception):
    """Fatal misuse or missing input; maps to exit code 2."""


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _metadata(config: dict, inputs: list[Path]) -> dict:
    canonical = json.dumps(config, sort_keys=True)
    return {
        "engine_version": __version__,
        "config": config,
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "input_hashes": {p.name: _sha256(p) for p in sorted(set(inputs))},
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8")


def _require_file(raw: str | None, what: str) -> Path:
    if not raw:
        raise CliError(f"missing required {what}")
    path = Path(raw)
    if not path.is_file():
        raise CliError(f"{what} not found: {path}")
    return path


def _method_config(args) -> MethodConfig:
    cluster = ClusterParams(
        algorithm=args.cluster_algorithm,
        min_cluster_size=args.min_cluster_size,
        min_samples=args.min_samples,
    )
    return MethodConfig(
        match_threshold=args.threshold,
        min_threshold=args.min_threshold,
        max_threshold=args.max_threshold,
        min_support=args.min_support,
        cluster_params=cluster,
        summarizer=args.summarizer,
        extractive_fallback=args.fallback,
        candidate_rank=args.candidate_rank,
        whole_corpus=args.whole_corpus,
    )


def _config_dict(args, keys) -> dict:
    return {k: getattr(args, k) for k in sorted(keys)}


def _load_store(args, corpus):
    """Resolve the single configured embedding source."""
    url = configured_url(args.model_url)
    if args.embeddings and args.model_url:
        raise CliError("configure exactly one embedding source: "
                       "--embeddings or --model-url, not both")
    if args.embeddings:
        return load_embeddings(_require_file(args.embeddings, "embeddings file")), \
            [Path(args.embeddings)]
    if url:
        provider = ServiceProvider(ServiceClient(url))
        keyed = []
        for j in corpus:
            for arg in j.premises:
                keyed.append((arg.id, arg.text.strip()))
                for s in arg.sentences:
                    keyed.append((s.embedding_id, s.text.strip()))
        return provider.embed(keyed), []
    raise CliError(f"no embedding source: pass --embeddings, --model-url, "
                   f"or set {MODEL_URL_ENV}")


# --- commands ---------------------------------------------------------------

# jobs and out are execution mechanics, not semantics: they stay out of
# the echoed config so outputs are byte-identical across --jobs settings.
EXTRACT_CONFIG_KEYS = (
    "corpus embeddings model_url method threshold min_threshold max_threshold "
    "min_support summarizer fallback candidate_rank cluster_algorithm "
    "min_cluster_size min_samples whole_corpus"
).split()


def cmd_extract(args) -> int:
    corpus_path = _require_file(args.corpus, "corpus file")
    corpus = load_corpus(corpus_path)
    n_j, n_p, n_c = corpus_counts(corpus)
    print(f"corpus: {n_j} judgments, {n_p} premises, {n_c} conclusions")

    store, extra_inputs = _load_store(args, corpus)
    cfg = _method_config(args)
    methods = list(METHODS) if args.method == "all" else [args.method]
    client = None
    url = configured_url(args.model_url)
    if url and (cfg.summarizer == "abstractive" or cfg.match_scorer == "service"):
        client = ServiceClient(url)

    result = run_all(corpus, store, cfg, methods=methods, jobs=args.jobs,
                     client=client)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    metadata = _metadata(_config_dict(args, EXTRACT_CONFIG_KEYS),
                         [corpus_path, *extra_inputs])
    for method in methods:
        payload = key_points_to_json(method, result.key_points[method])
        payload["metadata"] = metadata
        path = out_dir / f"kp_{method}.json"
        _write_json(path, payload)
        print(f"{method}: {sum(len(j['key_points']) for j in payload['judgments'])} "
              f"key points -> {path}")

    if result.failures:
        manifest = {
            "failures": [
                {"method": f.method, "judgment_id": f.judgment_id, "error": f.error}
                for f in result.failures
            ],
            "metadata": metadata,
        }
        _write_json(out_dir / "failures.json", manifest)
        print(f"{len(result.failures)} per-text failure(s); "
              f"manifest -> {out_dir / 'failures.json'}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


MATCH_CONFIG_KEYS = (
    "corpus embeddings model_url kp threshold sweep scorer global_scope figures"
).split()


def _parse_sweep(spec: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise CliError(f"bad --sweep spec {spec!r}; expected start:stop:step")
    if step <= 0 or stop < start:
        raise CliError(f"bad --sweep spec {spec!r}")
    out = []
    t = start
    while t <= stop + 1e-12:
        out.append(round(t, 10))
        t += step
    return out


def _scorer_for(args, corpus, store):
    url = configured_url(args.model_url)
    if args.scorer == "service":
        if not url:
            raise CliError("--scorer service needs --model-url or "
                           f"{MODEL_URL_ENV}")
        texts = {}
        for j in corpus:
            for arg in j.premises:
                texts[arg.id] = arg.text.strip()
                for s in arg.sentences:
                    texts[s.embedding_id] = s.text.strip()
        return ServiceMatchScorer(ServiceClient(url), texts)
    return CosineMatchScorer(store)


def cmd_match(args) -> int:
    corpus_path = _require_file(args.corpus, "corpus file")
    corpus = load_corpus(corpus_path)
    store, extra_inputs = _load_store(args, corpus)
    args_all = [a for j in corpus for a in j.premises]
    scorer = _scorer_for(args, corpus, store)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    kp_paths = [_require_file(p, "key-point file") for p in args.kp]
    metadata = _metadata(_config_dict(args, MATCH_CONFIG_KEYS),
                         [corpus_path, *extra_inputs, *kp_paths])

    sweeps = {}
    for kp_path in kp_paths:
        method, kps = key_points_from_json(json.loads(kp_path.read_text(encoding="utf-8")))
        report = match_arguments(args_all, kps, scorer, args.threshold,
                                 method=method, global_scope=args.global_scope)
        payload = report_to_json(report)
        payload["metadata"] = metadata
        path = out_dir / f"match_{method}.json"
        _write_json(path, payload)
        print(f"method={method} threshold={args.threshold:g} "
              f"argument_coverage={report.argument_coverage:.4f} "
              f"sentence_coverage={report.sentence_coverage:.4f} -> {path}")
        if args.sweep:
            sweeps[method] = coverage_sweep(args_all, kps, scorer,
                                            _parse_sweep(args.sweep),
                                            global_scope=args.global_scope)

    if sweeps:
        from . import report as reporting
        csv_path = out_dir / "sweep.csv"
        reporting.write_sweep_csv(csv_path, sweeps)
        print(f"sweep table -> {csv_path}")
        if args.figures:
            fig_path = out_dir / "sweep.png"
            reporting.render_sweep_figure(fig_path, sweeps)
            print(f"sweep figure -> {fig_path}")
    return EXIT_OK


COMPARE_CONFIG_KEYS = "report figures argument".split()


def cmd_compare(args) -> int:
    report_paths = [_require_file(p, "match report") for p in args.report]
    reports = [report_from_json(json.loads(p.read_text(encoding="utf-8")))
               for p in report_paths]
    table = compare_methods(reports)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    payload = table.to_json()
    payload["metadata"] = _metadata(_config_dict(args, COMPARE_CONFIG_KEYS),
                                    report_paths)
    _write_json(out_dir / "comparison.json", payload)
    text = table.to_text()
    (out_dir / "comparison.txt").write_text(text + "\n", encoding="utf-8")
    print(text)

    from . import report as reporting
    reporting.write_comparison_csv(out_dir / "comparison.csv", table)
    if args.figures:
        reporting.render_comparison_figure(out_dir / "comparison.png", table)
        print(f"comparison figure -> {out_dir / 'comparison.png'}")

    if args.argument:
        listing = table.argument_view.get(args.argument)
        if listing is None:
            raise CliError(f"argument id {args.argument!r} not present in any report")
        texts = {}
        for r in reports:
            texts.update(r.kp_texts)
        print(f"\nargument {args.argument}:")
        for method in sorted(listing):
            kp_id = listing[method]
            shown = f"{kp_id}: {texts.get(kp_id, '')}" if kp_id else "(no key point)"
            print(f"  {method:10s} {shown}")
    return EXIT_OK


def cmd_embed_fetch(args) -> int:
    corpus_path = _require_file(args.corpus, "corpus file")
    corpus = load_corpus(corpus_path)
    url = configured_url(args.model_url)
    if not url:
        raise CliError(f"embed-fetch needs --model-url or {MODEL_URL_ENV}")
    provider = ServiceProvider(ServiceClient(url), model=args.model or None)
    keyed = []
    for j in corpus:
        for arg in j.premises:
            keyed.append((arg.id, arg.text.strip()))
            for s in arg.sentences:
                keyed.append((s.embedding_id, s.text.strip()))
    if args.include_kps:
        kp_path = _require_file(args.include_kps, "key-point file")
        _, kps = key_points_from_json(json.loads(kp_path.read_text(encoding="utf-8")))
        for kp in kps:
            if not kp.origin_ids:  # generated text has no stored vector yet
                keyed.append((kp.id, kp.text))
    store = provider.embed(keyed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_embeddings(store, out)
    print(f"fetched {len(store)} vectors (dim {store.dim}) -> {out}")
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_embedding_source(p):
    p.add_argument("--embeddings", help="embedding JSONL file")
    p.add_argument("--model-url", dest="model_url",
                   help=f"model service base URL (or {MODEL_URL_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kpx",
        description="Key-point extraction and matching over legal argument corpora.")
    parser.add_argument("--config", help="TOML config file; flags override it")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run extraction methods over a corpus")
    p.add_argument("--corpus", help="corpus JSON file")
    _add_embedding_source(p)
    p.add_argument("--method", default="all", choices=(*METHODS, "all"))
    p.add_argument("--threshold", type=float, default=0.9,
                   help="match threshold for method1 support")
    p.add_argument("--min-threshold", dest="min_threshold", type=float, default=0.8)
    p.add_argument("--max-threshold", dest="max_threshold", type=float, default=0.4)
    p.add_argument("--min-support", dest="min_support", type=int, default=3)
    p.add_argument("--summarizer", default="abstractive",
                   choices=("abstractive", "lexrank", "luhn", "lsa", "klsum"))
    p.add_argument("--fallback", default="lexrank",
                   choices=("lexrank", "luhn", "lsa", "klsum", "none"))
    p.add_argument("--candidate-rank", dest="candidate_rank", default="pagerank",
                   choices=("pagerank", "degree"))
    p.add_argument("--cluster-algorithm", dest="cluster_algorithm",
                   default="hdbscan", choices=("hdbscan", "agglomerative"))
    p.add_argument("--min-cluster-size", dest="min_cluster_size", type=int, default=3)
    p.add_argument("--min-samples", dest="min_samples", type=int, default=1)
    p.add_argument("--whole-corpus", dest="whole_corpus", action="store_true",
                   help="pool all texts for method1 instead of per-text runs")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("match", help="match arguments to extracted key points")
    p.add_argument("--corpus")
    _add_embedding_source(p)
    p.add_argument("--kp", nargs="+", required=True, help="key-point JSON file(s)")
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--sweep", help="threshold sweep start:stop:step")
    p.add_argument("--scorer", default="cosine", choices=("cosine", "service"))
    p.add_argument("--global", dest="global_scope", action="store_true",
                   help="let key points compete across judgments")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_match, figures=True)

    p = sub.add_parser("compare", help="compare match reports across methods")
    p.add_argument("--report", nargs="+", required=True)
    p.add_argument("--argument", help="drill down on one argument id")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compare, figures=True)

    p = sub.add_parser("embed-fetch",
                       help="pull vectors from the model service into a JSONL cache")
    p.add_argument("--corpus")
    p.add_argument("--model-url", dest="model_url")
    p.add_argument("--model", help="model id to request")
    p.add_argument("--include-kps", dest="include_kps",
                   help="also embed generated key-point texts from this file")
    p.add_argument("--out", default="embeddings.jsonl")
    p.set_defaults(func=cmd_embed_fetch)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Pre-read --config and install its values as parser defaults, so
    explicit flags still win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    path = Path(known.config)
    if not path.is_file():
        raise CliError(f"config file not found: {path}")
    with path.open("rb") as fh:
        values = tomllib.load(fh)
    valid = set()
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        for sp in action.choices.values():
            valid.update(a.dest for a in sp._actions)  # noqa: SLF001
    unknown = set(values) - valid
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        for sp in action.choices.values():
            sp.set_defaults(**{k: v for k, v in values.items()
                               if k in {a.dest for a in sp._actions}})
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FATAL
    except (ServiceError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FATAL
    except Exception as e:  # noqa: BLE001 - last-resort fatal path
        log.exception("fatal error")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
