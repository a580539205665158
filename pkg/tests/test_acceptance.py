"""Acceptance suite. Each test is one criterion; a PASS/FAIL line per criterion
is printed in the terminal summary."""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
import requests

from hopeimb import (AugmentationPlan, FilterConfig, GatewayConfig, HttpTranslator, Label,
                     LabeledDocument, MockTranslator, Pipeline, Split, TextClassifier,
                     apply_removal, augment_dataset, average_from_class_scores,
                     back_translate_augment, build_overlap, cross_entropy, focal_loss,
                     focal_loss_grad, ingest, score, select_removals)
from hopeimb.corpus import compute_stats, dump_jsonl
from hopeimb.overlap import fit_removals
from hopeimb.runner import ExperimentConfig, run_experiment
from hopeimb.synthetic import imbalanced_corpus, separable_corpus, write_tsv

from oracles import count_threshold_removals, numeric_gradient, relative_error

pytestmark = pytest.mark.acceptance

H, N = Label.HOPE, Label.NON_HOPE


def test_c1_metric_arithmetic():
    """C1 metric arithmetic: macro 0.7858 / weighted 0.9261 and macro 0.6732 from class scores"""
    macro5 = average_from_class_scores({H: 0.6125, N: 0.9591})
    weighted5 = average_from_class_scores({H: 0.6125, N: 0.9591}, {H: 271, N: 2569}, "weighted")
    macro4 = average_from_class_scores({H: 0.6257, N: 0.7207})
    print(f"\nmacro={macro5!r} weighted={weighted5!r} second macro={macro4!r}")
    assert round(macro5, 4) == 0.7858 and abs(macro5 - 0.7858) < 1e-12
    assert abs(weighted5 - 0.9261) <= 0.0005
    assert round(macro4, 4) == 0.6732 and abs(macro4 - 0.6732) < 1e-12


def test_c2_focal_identities():
    """C2 focal loss: gamma=0 equals CE to 1e-12, FL(0.9, 2) = 0.00105361, FL < CE"""
    rng = np.random.default_rng(2)
    worst = 0.0
    for p, y in zip(rng.uniform(0, 1, 10_000), rng.integers(0, 2, 10_000)):
        worst = max(worst, abs(focal_loss(p, int(y), 0.0) - cross_entropy(p, int(y))))
    assert worst <= 1e-12
    # oracle: (1 - 0.9)^2 * -ln(0.9)
    expected = 0.01 * -math.log(0.9)
    assert abs(focal_loss(0.9, H, 2.0) - 0.00105361) <= 1e-8
    assert abs(focal_loss(0.9, H, 2.0) - expected) <= 1e-15
    for gamma in (1.0, 2.0):
        for pt in np.linspace(0.01, 0.99, 2001)[1:-1]:
            assert focal_loss(pt, H, gamma) < cross_entropy(pt, H)
            assert focal_loss(1 - pt, N, gamma) < cross_entropy(1 - pt, N)


def test_c3_gradient_verification():
    """C3 gradients: loss scalar (1000 points) and bow model (50 mini-batches) within 1e-5"""
    t0 = time.time()
    rng = np.random.default_rng(3)
    worst_scalar = 0.0
    h = 1e-6
    for _ in range(1000):
        p = rng.uniform(0.02, 0.98)
        y = int(rng.integers(0, 2))
        gamma = float(rng.choice([0.0, 0.5, 1.0, 2.0]))
        numeric = (focal_loss(p + h, y, gamma) - focal_loss(p - h, y, gamma)) / (2 * h)
        worst_scalar = max(worst_scalar, relative_error(focal_loss_grad(p, y, gamma), numeric))
    assert worst_scalar < 1e-5

    docs = separable_corpus(40, vocab_per_class=6, doc_len=5, seed=3)
    worst_model = 0.0
    for b in range(50):
        gamma = float(rng.choice([0.0, 1.0, 2.0]))
        model = TextClassifier(encoder="bow", dim=4, loss="focal", gamma=gamma, epochs=1,
                               learning_rate=0.05, warmup_steps=0, random_state=b)
        model.fit(docs, [d.label for d in docs])
        idx = rng.choice(len(docs), size=int(rng.integers(1, 9)), replace=False)
        batch = model._ids([docs[i].tokens for i in idx])
        targets = np.array([docs[i].label.index for i in idx])
        _, grads = model.loss_and_grads(batch, targets)
        analytic = np.concatenate([g.ravel() for g in grads.values()])
        worst_model = max(worst_model, relative_error(analytic, numeric_gradient(model, batch, targets)))
    print(f"\nworst scalar rel err {worst_scalar:.2e}, worst model rel err {worst_model:.2e}, "
          f"{time.time() - t0:.1f}s")
    assert worst_model < 1e-5


def random_corpus(rng):
    n_docs = int(rng.integers(2, 1001))
    vocab = int(rng.integers(1, 501))
    weights = 1.0 / np.arange(1, vocab + 1) ** rng.uniform(0.5, 1.5)
    weights /= weights.sum()
    words = [f"w{i}" for i in range(vocab)]
    docs = []
    for i in range(n_docs):
        label = H if i == 0 or (i > 1 and rng.random() < 0.3) else N
        toks = [words[j] for j in rng.choice(vocab, size=int(rng.integers(1, 15)), p=weights)]
        docs.append(LabeledDocument.from_tokens(str(i), toks, label))
    return docs


def test_c4_overlap_filter_oracle():
    """C4 overlap filter: 100 random corpora match the count-and-threshold oracle"""
    rng = np.random.default_rng(4)
    t0 = time.time()
    for _ in range(100):
        docs = random_corpus(rng)
        c1 = [d for d in docs if d.label is H]
        c2 = [d for d in docs if d.label is N]
        matrix = build_overlap(c1, c2)
        for tau in (1, 5, 25, 50):
            for direction in ("symmetric", "c1_only", "c2_only"):
                got = select_removals(matrix, FilterConfig(tau, direction))
                assert got == count_threshold_removals(c1, c2, tau, direction)
        kept, _ = apply_removal(docs, select_removals(matrix, FilterConfig(1)))
        v1 = {t for d in kept if d.label is H for t in d.tokens}
        v2 = {t for d in kept if d.label is N for t in d.tokens}
        assert not v1 & v2
    print(f"\n100 corpora in {time.time() - t0:.1f}s")


class ConstantLM:
    def predict(self, tokens, masked_index, k):
        return ["zz"]


@pytest.mark.parametrize("n", [1962, 7])
def test_c5_augmentation_counts(n):
    """C5 augmentation counts: contextual gives 2N minority docs, plus back-translation 3N"""
    docs = [LabeledDocument.from_text(f"h{i}", f"stand in hope text {i}", H) for i in range(n)]
    docs += [LabeledDocument.from_text(f"n{i}", f"majority text {i}", N) for i in range(3)]
    lms, trs = {"mock": ConstantLM()}, {"identity": MockTranslator("identity")}
    one = AugmentationPlan(a_min=1, a_max=3, pipelines=(Pipeline.contextual("mock"),))
    two = AugmentationPlan(a_min=1, a_max=3, pipelines=(Pipeline.contextual("mock"),
                                                        Pipeline.back_translate("identity", "fr")))
    for plan, factor in ((one, 2), (two, 3)):
        res = augment_dataset(docs, H, plan, lms, trs)
        assert sum(c.skipped for c in res.counts.values()) == 0
        assert sum(d.label is H for d in res.documents) == factor * n
        assert sum(d.label is N for d in res.documents) == 3


def test_c6_back_translation_round_trip(stub_server, tmp_path, monkeypatch):
    """C6 back-translation: mock round trips and byte-identical offline cache replay"""
    docs = [LabeledDocument.from_text(str(i), t, H) for i, t in
            enumerate(["Keep Going, You Can Do It", "We Stand Together", "Love wins!"])]
    for d in docs:
        assert back_translate_augment(d, MockTranslator("identity"), "fr").raw_text == d.raw_text
        assert back_translate_augment(d, MockTranslator("case_round_trip"), "fr").raw_text == d.raw_text.lower()
        assert back_translate_augment(d, MockTranslator("reverse_words"), "fr").raw_text == d.raw_text

    cache = tmp_path / "cache.jsonl"
    srv = stub_server()
    online = HttpTranslator(GatewayConfig(srv.url, cache_path=str(cache)))
    first = [back_translate_augment(d, online, "fr") for d in docs]
    dump_jsonl(first, tmp_path / "first.jsonl")
    cache_bytes = cache.read_bytes()
    srv.close()

    def no_network(*args, **kwargs):
        raise AssertionError("network used during cache replay")

    monkeypatch.setattr(requests.Session, "send", no_network)
    offline = HttpTranslator(GatewayConfig(srv.url, cache_path=str(cache), offline=True))
    replay = [back_translate_augment(d, offline, "fr") for d in docs]
    dump_jsonl(replay, tmp_path / "replay.jsonl")
    assert (tmp_path / "replay.jsonl").read_bytes() == (tmp_path / "first.jsonl").read_bytes()
    assert cache.read_bytes() == cache_bytes
    assert offline.n_requests == 0


def test_c7_directional_imbalance_experiment():
    """C7 imbalance: focal recall >= CE in >= 3/5 seeds, word removal raises macro F1 in >= 4/5"""
    kw = dict(encoder="bow", dim=16, epochs=10, learning_rate=0.01, warmup_steps=0, batch_size=8)
    recall_wins = removal_wins = 0
    for seed in range(5):
        train = imbalanced_corpus(1000, 0.05, seed=seed)
        test = imbalanced_corpus(1000, 0.05, seed=100 + seed, split=Split.TEST)
        y = [d.label for d in train]
        truth = [d.label for d in test]
        ce = TextClassifier(loss="cross_entropy", random_state=seed, **kw).fit(train, y)
        fl = TextClassifier(loss="focal", gamma=2.0, random_state=seed, **kw).fit(train, y)
        ce_report = score(ce.predict_labels(test), truth)
        fl_report = score(fl.predict_labels(test), truth)

        removals, _ = fit_removals(train, FilterConfig(1))
        train_f, _ = apply_removal(train, removals)
        test_f, _ = apply_removal(test, removals)
        filtered = TextClassifier(loss="cross_entropy", random_state=seed, **kw).fit(
            train_f, [d.label for d in train_f])
        f_report = score(filtered.predict_labels(test_f), [d.label for d in test_f])

        ce_recall, fl_recall = ce_report.per_class[H]["recall"], fl_report.per_class[H]["recall"]
        recall_wins += fl_recall >= ce_recall
        removal_wins += f_report.macro_f1 > ce_report.macro_f1
        print(f"\nseed {seed}: recall CE {ce_recall:.3f} focal {fl_recall:.3f}; "
              f"macro F1 plain {ce_report.macro_f1:.3f} removal {f_report.macro_f1:.3f}", end="")
    print(f"\nfocal recall wins {recall_wins}/5, removal wins {removal_wins}/5")
    assert recall_wins >= 3
    assert removal_wins >= 4


def test_c8_run_determinism(stub_server, tmp_path):
    """C8 determinism: two runs with the same seed and warm cache give byte-identical report.json"""
    write_tsv(imbalanced_corpus(300, 0.1, seed=8), tmp_path / "train.tsv")
    write_tsv(imbalanced_corpus(200, 0.1, seed=9, split=Split.TEST), tmp_path / "test.tsv")
    srv = stub_server()
    cfg = {"data": {"train": "train.tsv", "test": "test.tsv"}, "output_dir": "out", "seed": 5,
           "encoder_kind": "tiny_attention", "dim": 8, "filter": {"tau": 5},
           "augmentation": {"a_min": 1, "a_max": 3, "sample_top_k": True, "pipelines": [
               {"kind": "contextual"}, {"kind": "back_translate", "model": "http", "intermediate": "de"}]},
           "translation": {"base_url": srv.url, "cache_path": "cache.jsonl"},
           "loss": {"kind": "Focal", "gamma": 2},
           "training": {"epochs": 3, "learning_rate": 0.01, "warmup_steps": 5}}
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(cfg))
    run_experiment(ExperimentConfig.load(path))
    warm = len(srv.requests)
    blobs = []
    for _ in range(2):
        run_experiment(ExperimentConfig.load(path))
        blobs.append((tmp_path / "out" / "report.json").read_bytes())
    assert len(srv.requests) == warm
    assert (tmp_path / "cache.jsonl").is_file()
    assert blobs[0] == blobs[1]


HOPEEDI = os.environ.get("HOPEEDI_TRAIN")
# the released files carry a .csv suffix but are tab separated
HOPEEDI_FORMAT = os.environ.get("HOPEEDI_FORMAT", "tsv")


@pytest.mark.skipif(not HOPEEDI, reason="set HOPEEDI_TRAIN to the English train file to run")
def test_c9_hopeedi_ingestion():
    """C9 (optional): train counts 1962 / 20778 / 22 and class fractions"""
    res = ingest(Path(HOPEEDI), HOPEEDI_FORMAT, split=Split.TRAIN, keep_not_english=True)
    stats = compute_stats(res.documents)
    counts = stats.per_class_counts
    print(f"\ncounts {counts}; overlap vocabulary {len(stats.overlap_vocab)} words (not asserted)")
    assert counts[H] == 1962 and counts[N] == 20778 and counts[Label.NOT_ENGLISH] == 22
    for label, pct in ((H, 8.61), (N, 91.28), (Label.NOT_ENGLISH, 0.11)):
        assert abs(100 * stats.class_fractions[label] - pct) <= 0.1
    dropped = ingest(Path(HOPEEDI), HOPEEDI_FORMAT, split=Split.TRAIN)
    assert dropped.n_dropped == 22 and len(dropped) == 1962 + 20778
