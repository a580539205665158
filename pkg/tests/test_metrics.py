import pytest
from hypothesis import given, strategies as st
from sklearn.metrics import precision_recall_fscore_support

from hopeimb import Label, average_from_class_scores, score
from hopeimb.metrics import EvalReport

H, N = Label.HOPE, Label.NON_HOPE


def test_hand_confusion_matrix():
    r = score([H, N, H, N], [H, H, N, N])
    assert (r.confusion.tp, r.confusion.fp, r.confusion.fn, r.confusion.tn) == (1, 1, 1, 1)
    for lab in (H, N):
        assert r.per_class[lab] == {"precision": 0.5, "recall": 0.5, "f1": 0.5}
    assert r.macro_f1 == 0.5 and r.weighted_f1 == 0.5


def test_perfect_predictions():
    r = score([H, N, N], [H, N, N])
    assert all(v == 1.0 for s in r.per_class.values() for v in s.values())
    assert r.macro == r.weighted == {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    assert r.zero_division == []


def test_zero_division_flagged():
    r = score([N, N], [N, N])
    assert r.per_class[H] == {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    assert "Hope.precision" in r.zero_division and "Hope.recall" in r.zero_division


def test_errors():
    with pytest.raises(ValueError):
        score([H], [H, N])
    with pytest.raises(ValueError):
        score([], [])
    with pytest.raises(ValueError):
        average_from_class_scores({H: 0.5}, mode="macro")
    with pytest.raises(ValueError):
        average_from_class_scores({H: 0.5, N: 0.5}, {H: 1, N: 1}, mode="micro")


def test_reference_averages():
    assert average_from_class_scores({H: 0.6257, N: 0.7207}) == pytest.approx(0.6732, abs=1e-12)
    assert average_from_class_scores({H: 0.6125, N: 0.9591}) == pytest.approx(0.7858, abs=1e-12)
    # long-hand: (271 * 0.6125 + 2569 * 0.9591) / 2840
    w = average_from_class_scores({H: 0.6125, N: 0.9591}, {H: 271, N: 2569}, "weighted")
    assert w == pytest.approx(2629.9154 / 2840, abs=1e-12)
    assert round(w, 4) == 0.926
    assert abs(w - 0.9261) <= 0.0005


@given(st.floats(0, 1), st.integers(1, 1000))
def test_equal_scores_fixed_point(s, n):
    assert average_from_class_scores({H: s, N: s}) == pytest.approx(s)
    assert average_from_class_scores({H: s, N: s}, {H: n, N: 3 * n}, "weighted") == pytest.approx(s)


labels = st.lists(st.sampled_from([H, N]), min_size=1, max_size=60)


@given(st.data())
def test_report_invariants_and_sklearn_agreement(data):
    truths = data.draw(labels)
    preds = data.draw(st.lists(st.sampled_from([H, N]), min_size=len(truths), max_size=len(truths)))
    r = score(preds, truths)
    c = r.confusion
    assert c.total == len(truths)
    total = sum(r.support.values())
    for name in ("precision", "recall", "f1"):
        h, n = r.per_class[H][name], r.per_class[N][name]
        assert 0 <= h <= 1 and 0 <= n <= 1
        assert r.macro[name] == 0.5 * (h + n)
        assert r.weighted[name] == pytest.approx(r.support[H] / total * h + r.support[N] / total * n)
        assert min(h, n) - 1e-12 <= r.macro[name] <= max(h, n) + 1e-12
        assert min(h, n) - 1e-12 <= r.weighted[name] <= max(h, n) + 1e-12
    if r.support[H] == r.support[N]:
        assert r.macro == pytest.approx(r.weighted)
    p, rec, f, _ = precision_recall_fscore_support([t.value for t in truths], [q.value for q in preds],
                                                  labels=["Hope", "NonHope"], zero_division=0)
    assert [r.per_class[H]["f1"], r.per_class[N]["f1"]] == pytest.approx(list(f))
    assert [r.per_class[H]["precision"], r.per_class[N]["precision"]] == pytest.approx(list(p))


@given(st.data())
def test_permutation_invariance(data):
    truths = data.draw(labels)
    preds = data.draw(st.lists(st.sampled_from([H, N]), min_size=len(truths), max_size=len(truths)))
    perm = data.draw(st.permutations(range(len(truths))))
    a = score(preds, truths)
    b = score([preds[i] for i in perm], [truths[i] for i in perm])
    assert a.to_dict() == b.to_dict()


def test_report_serialization(tmp_path):
    r = score([H, N, N, H], [H, N, H, H])
    r.write(tmp_path)
    import json
    back = EvalReport.from_dict(json.loads((tmp_path / "report.json").read_text()))
    assert back.to_dict() == r.to_dict()
    rows = (tmp_path / "report.csv").read_text().splitlines()
    assert rows[0] == "row,precision,recall,f1,support"
    assert [line.split(",")[0] for line in rows[1:]] == ["Hope", "NonHope", "macro", "weighted"]
