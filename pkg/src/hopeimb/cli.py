"""Command line entry point: ``hopeimb <subcommand>``.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .augment import (DEFAULT_INTERMEDIATES, AugmentationPlan, ConfigError, Pipeline, augment_dataset,
                      train_count_mlm)
from .classifier import TextClassifier
from .corpus import DEFAULT_LABEL_STRINGS, Label, Split, compute_stats, dump_jsonl, ingest
from .overlap import Direction, FilterConfig, apply_removal, fit_removals, write_removals
from .metrics import score
from .runner import ExperimentConfig, StageError, expand_grid, run_experiment, run_grid
from .translate import GatewayConfig, HttpTranslator, MockTranslator

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3

log = logging.getLogger("hopeimb")


def _label_map(arg: str | None):
    if not arg:
        return None
    try:
        return {k: Label(v) for k, v in json.loads(arg).items()}
    except (json.JSONDecodeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"--label-map must be a JSON object of file label -> Hope/NonHope/NotEnglish: {exc}")


def _read(path: str, args, split: Split = Split.TRAIN, **kw):
    res = ingest(path, args.format, split=split, label_strings=_label_map(args.label_map), **kw)
    for err in res.errors:
        print(f"{path}:{err.line}: {err.message}", file=sys.stderr)
    return res


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["tsv", "csv", "jsonl"], help="default: from file suffix")
    p.add_argument("--label-map", help=f"JSON map of file labels, default {json.dumps({k: v.value for k, v in DEFAULT_LABEL_STRINGS.items()})}")


def _add_translate_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--translate-url", help="translation endpoint (POST {q, source, target})")
    p.add_argument("--translate-cache", help="JSON Lines translation cache file")
    p.add_argument("--from-cache", action="store_true", help="never call the network; cache misses fail")


def cmd_ingest(args) -> int:
    res = _read(args.input, args, Split(args.split), keep_not_english=args.keep_not_english)
    dump_jsonl(res.documents, args.output)
    print(json.dumps({"documents": len(res.documents), "not_english_dropped": res.n_dropped,
                      "record_errors": len(res.errors)}))
    return EXIT_OK


def cmd_stats(args) -> int:
    res = _read(args.input, args, keep_not_english=args.keep_not_english)
    stats = compute_stats(res.documents)
    payload = stats.to_dict()
    payload["not_english_dropped"] = res.n_dropped
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_filter(args) -> int:
    cfg = FilterConfig(args.tau, Direction(args.direction))
    train_docs = _read(args.train, args).documents
    removals, matrix = fit_removals(train_docs, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_removals(out / "removals.json", removals, matrix, cfg)
    summary = {"removed_words": len(removals)}
    for path, split in [(args.train, Split.TRAIN)] + [(p, Split.TEST) for p in args.apply]:
        docs = train_docs if path == args.train else _read(path, args, split).documents
        kept, dropped = apply_removal(docs, removals)
        target = out / (Path(path).stem + ".filtered.jsonl")
        dump_jsonl(kept, target)
        summary[str(target)] = {"kept": len(kept), "dropped": dropped}
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _parse_pipeline(text: str) -> list[Pipeline]:
    parts = text.split(":")
    if parts[0] == "contextual" and len(parts) <= 2:
        return [Pipeline.contextual(parts[1] if len(parts) > 1 else "count")]
    if parts[0] == "back_translate" and len(parts) == 3:
        return [Pipeline.back_translate(parts[1], parts[2])]
    if parts[0] == "back_translate" and len(parts) == 2:
        return [Pipeline.back_translate(parts[1], lang) for lang in DEFAULT_INTERMEDIATES]
    raise ConfigError(f"bad --pipeline {text!r}; use contextual[:count] or back_translate:<translator>[:<lang>]")


def cmd_augment(args) -> int:
    docs = _read(args.train, args).documents
    plan = AugmentationPlan(args.k, args.a_min, args.a_max,
                            tuple(q for p in args.pipeline for q in _parse_pipeline(p)), args.seed)
    translators: dict = {k: MockTranslator(k) for k in MockTranslator.KINDS}
    if args.translate_url or args.from_cache:
        translators["http"] = HttpTranslator(GatewayConfig(
            base_url=args.translate_url or "", cache_path=args.translate_cache, offline=args.from_cache))
    lms = {"count": train_count_mlm(docs, args.window)}
    result = augment_dataset(docs, Label(args.target), plan, lms, translators)
    dump_jsonl(result.documents, args.output)
    report = args.report or str(Path(args.output).with_suffix("")) + ".augment_report.json"
    result.write_report(report)
    print(json.dumps(result.report(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_train(args) -> int:
    docs = _read(args.train, args).documents
    model = TextClassifier(encoder=args.encoder, dim=args.dim, loss=args.loss, gamma=args.gamma,
                           epochs=args.epochs, batch_size=args.batch_size,
                           learning_rate=args.learning_rate, warmup_steps=args.warmup_steps,
                           grad_clip=args.grad_clip, adam_epsilon=args.adam_epsilon,
                           max_sequence_length=args.max_sequence_length, random_state=args.seed)
    model.fit(docs, [d.label for d in docs])
    model.save(args.output)
    print(json.dumps({"documents": len(docs), "loss_trace": model.loss_trace_}))
    return EXIT_OK


def cmd_eval(args) -> int:
    model = TextClassifier.load(args.model)
    docs = _read(args.data, args, Split.TEST).documents
    report = score(model.predict_labels(docs), [d.label for d in docs])
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        report.write(args.out_dir)
    print(report.to_csv(), end="")
    return EXIT_OK


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "output_dir", None):
        cfg.output_dir = args.output_dir
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if args.translate_url:
        cfg.translation.base_url = args.translate_url
    if args.translate_cache:
        cfg.translation.cache_path = args.translate_cache
    if args.from_cache:
        cfg.translation.offline = True
    return cfg


def cmd_run(args) -> int:
    cfg = _apply_overrides(ExperimentConfig.load(args.config), args)
    report = run_experiment(cfg)
    print(report.to_csv(), end="")
    return EXIT_OK


def cmd_grid(args) -> int:
    path = Path(args.config)
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read grid config {path}: {exc}") from exc
    configs = [_apply_overrides(c, args) for c in expand_grid(spec, path.parent)]
    out = args.output or str(Path(configs[0].output_dir).parent / "comparison.csv")
    rows = run_grid(configs, out, parallel=args.parallel)
    print(Path(out).read_text(), end="")
    return EXIT_OK if all(r.status == "ok" for r in rows) else EXIT_STAGE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hopeimb", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="read TSV/CSV and write canonical JSON Lines")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--split", default="Train", choices=[s.value for s in Split])
    p.add_argument("--keep-not-english", action="store_true")
    _add_data_args(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="class distribution and vocabulary overlap")
    p.add_argument("input")
    p.add_argument("--keep-not-english", action="store_true")
    _add_data_args(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("filter", help="fit overlapping word removal on train, apply to files")
    p.add_argument("--train", required=True)
    p.add_argument("--apply", nargs="*", default=[], help="other files to filter with the same words")
    p.add_argument("--tau", type=int, default=25)
    p.add_argument("--direction", default="symmetric", choices=[d.value for d in Direction])
    p.add_argument("--out-dir", required=True)
    _add_data_args(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("augment", help="augment minority-class train documents")
    p.add_argument("--train", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--pipeline", action="append", default=[],
                   help="contextual[:count] or back_translate:<identity|reverse_words|case_round_trip|http>[:<lang>]; "
                        "without a language, fr then es")
    p.add_argument("--target", default="Hope", choices=["Hope", "NonHope"])
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--a-min", type=int, default=3)
    p.add_argument("--a-max", type=int, default=10)
    p.add_argument("--window", type=int, default=2, help="context window of the count masked LM")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report")
    _add_data_args(p)
    _add_translate_args(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train a classifier and write a checkpoint")
    p.add_argument("--train", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--encoder", default="bow", choices=["bow", "tiny_attention"])
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--loss", default="cross_entropy", choices=["cross_entropy", "focal"])
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--learning-rate", type=float, default=3e-5)
    p.add_argument("--warmup-steps", type=int, default=1000)
    p.add_argument("--grad-clip", type=float, default=1.0)
    p.add_argument("--adam-epsilon", type=float, default=1e-8)
    p.add_argument("--max-sequence-length", type=int, default=160)
    p.add_argument("--seed", type=int, default=0)
    _add_data_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a labelled file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir")
    _add_data_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="run one experiment from experiment.json")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int)
    _add_translate_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="run a grid of experiments and write a comparison CSV")
    p.add_argument("--config", required=True)
    p.add_argument("-o", "--output", help="comparison CSV path")
    p.add_argument("--parallel", type=int, default=1)
    _add_translate_args(p)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
