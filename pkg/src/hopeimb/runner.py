"""Config-driven experiments: ingest -> filter -> augment -> train -> evaluate."""

from __future__ import annotations

import copy
import csv
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .augment import AugmentationPlan, ConfigError, augment_dataset, train_count_mlm
from .classifier import TextClassifier, TrainingConfig
from .corpus import DEFAULT_LABEL_STRINGS, Label, LabeledDocument, Split, dump_jsonl, ingest
from .losses import LossConfig, LossKind
from .metrics import EvalReport, score
from .overlap import FilterConfig, apply_removal, fit_removals, write_removals
from .translate import GatewayConfig, HttpTranslator, MockTranslator

log = logging.getLogger(__name__)

STAGES = ("ingest", "filter", "augment", "train", "evaluate")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class DataConfig:
    train: str
    validation: str | None = None
    test: str | None = None
    format: str | None = None
    label_strings: dict[str, str] | None = None


@dataclass
class TranslationConfig:
    base_url: str | None = None
    cache_path: str | None = None
    timeout_ms: int = 10_000
    max_retries: int = 3
    max_in_flight: int = 4
    offline: bool = False


@dataclass
class ExperimentConfig:
    data: DataConfig
    output_dir: str
    name: str = "experiment"
    filter: FilterConfig | None = None
    augmentation: AugmentationPlan | None = None
    minority_class: Label = Label.HOPE
    mlm_window: int = 2
    translation: TranslationConfig = field(default_factory=TranslationConfig)
    encoder_kind: str = "bow"
    dim: int = 32
    loss: LossConfig = field(default_factory=LossConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base_dir: str | Path | None = None) -> "ExperimentConfig":
        d = dict(d)
        try:
            data = dict(d.pop("data"))
            if base_dir is not None:
                for key in ("train", "validation", "test"):
                    if data.get(key):
                        data[key] = str(Path(base_dir, data[key]))
            out = d.pop("output_dir")
            if base_dir is not None:
                out = str(Path(base_dir, out))
            translation = TranslationConfig(**(d.pop("translation", None) or {}))
            if base_dir is not None and translation.cache_path:
                translation.cache_path = str(Path(base_dir, translation.cache_path))
            filt = d.pop("filter", None)
            aug = d.pop("augmentation", None)
            loss = d.pop("loss", None) or {}
            seed = int(d.pop("seed", 0))
            if aug is not None:
                aug = dict(aug)
                aug.setdefault("seed", seed)
            cfg = cls(
                data=DataConfig(**data),
                output_dir=out,
                filter=FilterConfig(**filt) if filt is not None else None,
                augmentation=AugmentationPlan(**aug) if aug is not None else None,
                minority_class=Label(d.pop("minority_class", Label.HOPE.value)),
                translation=translation,
                loss=LossConfig(LossKind(loss.get("kind", "CrossEntropy")), float(loss.get("gamma", 0.0))),
                training=TrainingConfig(**(d.pop("training", None) or {})),
                seed=seed,
                **d,
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "data": asdict(self.data),
            "output_dir": self.output_dir,
            "filter": {"tau": self.filter.tau, "direction": self.filter.direction.value} if self.filter else None,
            "augmentation": self.augmentation.to_dict() if self.augmentation else None,
            "minority_class": self.minority_class.value,
            "mlm_window": self.mlm_window,
            "translation": asdict(self.translation),
            "encoder_kind": self.encoder_kind,
            "dim": self.dim,
            "loss": self.loss.to_dict(),
            "training": asdict(self.training),
            "seed": self.seed,
        }

    def validate(self) -> None:
        for key in ("train", "validation", "test"):
            p = getattr(self.data, key)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"data.{key}: no such file {p}")
        if self.data.validation is None and self.data.test is None:
            raise ConfigError("config needs a validation or test file to evaluate on")
        if self.encoder_kind not in ("bow", "tiny_attention"):
            raise ConfigError(f"unknown encoder_kind {self.encoder_kind!r}")
        if self.augmentation is not None:
            for p in self.augmentation.pipelines:
                if p.kind == "contextual" and p.model != "count":
                    raise ConfigError(f"unknown masked LM {p.model!r}; only 'count' is built in")
                if p.kind == "back_translate" and p.model not in ("http",) + MockTranslator.KINDS:
                    raise ConfigError(f"unknown translator {p.model!r}")
                if p.model == "http" and not self.translation.base_url and not self.translation.offline:
                    raise ConfigError("http translator needs translation.base_url (or offline mode)")

    def strategy_label(self) -> str:
        parts = [self.encoder_kind]
        parts.append(f"Focal(gamma={self.loss.gamma:g})" if self.loss.kind is LossKind.FOCAL
                     else "CrossEntropy")
        if self.filter:
            parts.append(f"word removal(tau={self.filter.tau})")
        if self.augmentation:
            parts.extend(p.name for p in self.augmentation.pipelines)
        return " + ".join(parts)


def _label_map(cfg: ExperimentConfig) -> dict[str, Label]:
    if cfg.data.label_strings is None:
        return dict(DEFAULT_LABEL_STRINGS)
    return {k: Label(v) for k, v in cfg.data.label_strings.items()}


def _translators(cfg: ExperimentConfig) -> dict:
    registry: dict = {kind: MockTranslator(kind) for kind in MockTranslator.KINDS}
    t = cfg.translation
    if t.base_url or t.offline:
        registry["http"] = HttpTranslator(GatewayConfig(
            base_url=t.base_url or "", timeout_ms=t.timeout_ms, max_retries=t.max_retries,
            max_in_flight=t.max_in_flight, cache_path=t.cache_path, offline=t.offline))
    return registry


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8")


def run_experiment(cfg: ExperimentConfig) -> EvalReport:
    """Run one experiment and write its artifacts under ``cfg.output_dir``.

    Artifacts: ``model.json`` (checkpoint), ``removals.json`` when filtering,
    ``augment_report.json`` and ``train_augmented.jsonl`` when augmenting,
    ``report.json`` / ``report.csv`` for the evaluation split (test when given,
    else validation). A ``FAILED`` file marks an aborted run.
    """
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "FAILED").unlink(missing_ok=True)
    provenance: dict[str, Any] = {"config": cfg.to_dict(), "stages": [],
                                  "strategy": cfg.strategy_label()}
    stage = "ingest"
    try:
        labels = _label_map(cfg)
        splits: dict[str, list[LabeledDocument]] = {}
        counts: dict[str, dict] = {}
        for key, split in (("train", Split.TRAIN), ("validation", Split.VALIDATION), ("test", Split.TEST)):
            path = getattr(cfg.data, key)
            if path is None:
                continue
            res = ingest(path, cfg.data.format, split=split, label_strings=labels)
            splits[key] = res.documents
            counts[key] = {"documents": len(res.documents), "not_english_dropped": res.n_dropped,
                           "record_errors": len(res.errors)}
        provenance["stages"].append("ingest")
        provenance["ingest"] = counts

        if cfg.filter is not None:
            stage = "filter"
            removals, matrix = fit_removals(splits["train"], cfg.filter)
            write_removals(out / "removals.json", removals, matrix, cfg.filter)
            dropped = {}
            for key in list(splits):
                splits[key], dropped[key] = apply_removal(splits[key], removals)
            provenance["stages"].append("filter")
            provenance["filter"] = {"removed_words": len(removals), "documents_dropped": dropped}

        if cfg.augmentation is not None and cfg.augmentation.pipelines:
            stage = "augment"
            lms = {"count": train_count_mlm(splits["train"], cfg.mlm_window)}
            result = augment_dataset(splits["train"], cfg.minority_class, cfg.augmentation,
                                     lms, _translators(cfg))
            splits["train"] = result.documents
            result.write_report(out / "augment_report.json")
            dump_jsonl(result.documents, out / "train_augmented.jsonl")
            provenance["stages"].append("augment")
            provenance["augment"] = result.report()
        provenance["composed"] = cfg.filter is not None and cfg.augmentation is not None
        if provenance["composed"]:
            log.warning("filter and augmentation composed: this combination is an extrapolation")

        stage = "train"
        model = TextClassifier.from_configs(cfg.encoder_kind, cfg.loss, cfg.training,
                                            random_state=cfg.seed, dim=cfg.dim)
        train_docs = splits["train"]
        model.fit(train_docs, [d.label for d in train_docs])
        model.save(out / "model.json")
        provenance["stages"].append("train")
        provenance["loss_trace"] = model.loss_trace_

        stage = "evaluate"
        results = {}
        for key in ("validation", "test"):
            if splits.get(key):
                docs = splits[key]
                results[key] = score(model.predict_labels(docs), [d.label for d in docs])
        eval_split = "test" if "test" in results else "validation"
        if eval_split not in results:
            raise ValueError("no documents left to evaluate")
        report = results[eval_split]
        provenance["stages"].append("evaluate")
        provenance["evaluation_split"] = eval_split
        provenance["splits"] = {k: r.to_dict() for k, r in results.items()}
        payload = report.to_dict()
        payload["experiment"] = provenance
        _write_json(out / "report.json", payload)
        (out / "report.csv").write_text(report.to_csv())
        return report
    except Exception as exc:
        (out / "FAILED").write_text(f"stage: {stage}\n{type(exc).__name__}: {exc}\n")
        provenance["failed_stage"] = stage
        _write_json(out / "partial_provenance.json", provenance)
        raise StageError(stage, exc) from exc


@dataclass
class GridRow:
    name: str
    strategy: str
    macro_f1: float | None = None
    weighted_f1: float | None = None
    status: str = "ok"
    error: str = ""


def _merge(base: dict, override: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _slug(text: str) -> str:
    keep = [c.lower() if c.isalnum() else "-" for c in text]
    return "-".join(filter(None, "".join(keep).split("-")))


def expand_grid(spec: Mapping | Sequence, base_dir: str | Path | None = None) -> list[ExperimentConfig]:
    """Configs from a grid file.

    Accepts a list of full experiment configs, or ``{"base": {...}, "axes":
    {key: [value, ...]}}`` whose cartesian product overrides ``base`` (dicts
    are merged, ``null`` disables a stage). Each run writes to
    ``<base output_dir>/<slugified strategy>`` unless it names its own.
    """
    if isinstance(spec, Sequence) and not isinstance(spec, (str, bytes)):
        return [ExperimentConfig.from_dict(d, base_dir) for d in spec]
    base = dict(spec["base"])
    axes = spec.get("axes", {})
    keys = list(axes)
    configs = []
    for combo in itertools.product(*(axes[k] for k in keys)) if keys else [()]:
        d = copy.deepcopy(base)
        for k, v in zip(keys, combo):
            d[k] = _merge(d[k], v) if isinstance(v, Mapping) and isinstance(d.get(k), dict) else copy.deepcopy(v)
        cfg = ExperimentConfig.from_dict(d, base_dir)
        if keys:
            cfg.name = cfg.strategy_label()
            cfg.output_dir = str(Path(cfg.output_dir) / _slug(cfg.name))
        configs.append(cfg)
    return configs


def _run_row(cfg: ExperimentConfig) -> GridRow:
    row = GridRow(cfg.name, cfg.strategy_label())
    try:
        report = run_experiment(cfg)
        row.macro_f1, row.weighted_f1 = report.macro_f1, report.weighted_f1
    except (StageError, ConfigError) as exc:
        log.error("grid row %s failed: %s", cfg.name, exc)
        row.status, row.error = "failed", str(exc)
    return row


def run_grid(configs: Sequence[ExperimentConfig], out_csv: str | Path,
             parallel: int = 1) -> list[GridRow]:
    """Run every config and write a comparison table sorted by weighted F1 (descending).

    Ties are broken by name; failed rows go last.
    """
    if not configs:
        raise ConfigError("grid needs at least one experiment")
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError("grid experiment names must be unique")
    if parallel > 1:
        dirs = [Path(c.output_dir).resolve() for c in configs]
        if len(set(dirs)) != len(dirs):
            raise ConfigError("parallel grid runs need distinct output directories")
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_run_row, configs))
    else:
        rows = [_run_row(c) for c in configs]
    rows.sort(key=lambda r: (r.status != "ok", -(r.weighted_f1 or 0.0), r.name))
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with open(out_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "strategy", "macro_f1", "weighted_f1", "status", "error"])
        for r in rows:
            w.writerow([r.name, r.strategy,
                        "" if r.macro_f1 is None else f"{r.macro_f1:.6f}",
                        "" if r.weighted_f1 is None else f"{r.weighted_f1:.6f}",
                        r.status, r.error])
    return rows
