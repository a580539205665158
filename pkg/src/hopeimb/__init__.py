"""Imbalance-aware Hope/NonHope text classification."""

from .corpus import (CorpusStats, IngestResult, Label, LabeledDocument, Provenance, Split,
                     compute_stats, dump_jsonl, ingest, tokenize)
from .losses import LossConfig, LossKind, cross_entropy, focal_loss, focal_loss_grad
from .metrics import EvalReport, average_from_class_scores, score
from .overlap import (FilterConfig, OverlapMatrix, OverlapWordRemover, apply_removal,
                      build_overlap, select_removals)
from .augment import (AugmentationPlan, CountMaskedLM, Pipeline, augment_dataset,
                      back_translate_augment, contextual_augment, train_count_mlm)
from .translate import GatewayConfig, HttpTranslator, MockTranslator, mock_translator
from .classifier import TextClassifier, TrainingConfig, predict, train

__version__ = "0.1.0"

__all__ = [
    "AugmentationPlan", "CorpusStats", "CountMaskedLM", "EvalReport", "FilterConfig",
    "GatewayConfig", "HttpTranslator", "IngestResult", "Label", "LabeledDocument",
    "LossConfig", "LossKind", "MockTranslator", "OverlapMatrix", "OverlapWordRemover",
    "Pipeline", "Provenance", "Split", "TextClassifier", "TrainingConfig",
    "apply_removal", "augment_dataset", "average_from_class_scores", "back_translate_augment",
    "build_overlap", "compute_stats", "contextual_augment", "cross_entropy", "dump_jsonl",
    "focal_loss", "focal_loss_grad", "ingest", "mock_translator", "predict", "score",
    "select_removals", "tokenize", "train", "train_count_mlm",
]
