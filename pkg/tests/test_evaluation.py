"""Evaluation tests.

Fleiss' kappa is checked against a pure-python rendition of the published
formula plus hand-worked tables; the productivity model against closed-form
fractions; replication and curve machinery for determinism and honest error
handling. All Monte-Carlo assertions are on seeded, reproducible draws.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clipsift.errors import (
    CapacityExceedsSet,
    EmptyInput,
    InvalidManifest,
    LengthMismatch,
    NoPredictedPositives,
    SingleClassDataset,
    SizeTooLarge,
    TooFewBags,
)
from clipsift.evaluation import (
    AgreementTable,
    CurvePoint,
    ProductivityParams,
    accuracy,
    agreement_table_from_labels,
    fleiss_kappa,
    learning_curve,
    productivity_simulate,
    productivity_theoretic,
    read_agreement_csv,
    replicate,
    write_curve_csv,
    write_json,
    write_productivity_csv,
    write_replication_csv,
)
from clipsift.mil import MilConfig
from clipsift.model import Bag, PrincipalShot


def _bag(clip_id, vectors, label=None):
    shots = tuple(
        PrincipalShot(f"{clip_id}/shot{i}", frozenset({i}), np.asarray(v, float))
        for i, v in enumerate(vectors)
    )
    return Bag(clip_id=clip_id, instances=shots, label=label)


def _separable_bags(n_pos=5, n_neg=5, seed=0):
    rng = np.random.default_rng(seed)
    bags, labels = [], {}
    for i in range(n_pos):
        cid = f"p{i:02d}"
        bags.append(_bag(cid, [np.full(3, 5.0) + rng.normal(0, 0.05, 3), rng.normal(0, 0.05, 3)]))
        labels[cid] = "pos"
    for i in range(n_neg):
        cid = f"n{i:02d}"
        bags.append(_bag(cid, [rng.normal(0, 0.05, 3) for _ in range(2)]))
        labels[cid] = "neg"
    return bags, labels


# ---------------------------------------------------------------------------
# Accuracy


def test_accuracy_counts_matches():
    assert accuracy(["pos", "neg", "pos"], ["pos", "neg", "neg"]) == pytest.approx(2 / 3)
    assert accuracy(["pos"], ["pos"]) == 1.0
    with pytest.raises(LengthMismatch):
        accuracy(["pos"], ["pos", "neg"])
    with pytest.raises(EmptyInput):
        accuracy([], [])


# ---------------------------------------------------------------------------
# Fleiss' kappa


def _kappa_oracle(rows, n):
    """[DERIVED] direct transcription of the published formula in plain
    python loops."""
    big_n = len(rows)
    p_bar = sum((sum(c * c for c in row) - n) / (n * (n - 1)) for row in rows) / big_n
    p_j = [sum(row[j] for row in rows) / (big_n * n) for j in (0, 1)]
    p_e = sum(p * p for p in p_j)
    if p_e >= 1.0:
        return 1.0
    return (p_bar - p_e) / (1.0 - p_e)


def test_kappa_hand_worked_table():
    # [DERIVED] counts [[2,0],[1,1]], 2 raters: P = [1, 0], Pbar = 1/2,
    # p = (3/4, 1/4), Pe = 5/8, kappa = (1/2 - 5/8)/(3/8) = -1/3
    table = AgreementTable(np.array([[2, 0], [1, 1]]), 2)
    assert fleiss_kappa(table) == pytest.approx(-1.0 / 3.0, abs=1e-15)


def test_kappa_perfect_agreement_is_exactly_one():
    mixed = AgreementTable(np.array([[3, 0], [0, 3], [3, 0]]), 3)
    assert fleiss_kappa(mixed) == 1.0
    unanimous = AgreementTable(np.array([[2, 0], [2, 0]]), 2)
    assert fleiss_kappa(unanimous) == 1.0  # expected agreement saturates too


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 20), st.integers(2, 10))
def test_kappa_matches_direct_formula(seed, items, raters):
    rng = np.random.default_rng(seed)
    pos = rng.integers(0, raters + 1, size=items)
    counts = np.stack([pos, raters - pos], axis=1).astype(np.int64)
    got = fleiss_kappa(AgreementTable(counts, raters))
    want = _kappa_oracle(counts.tolist(), raters)
    assert got == pytest.approx(want, abs=1e-12)
    assert got <= 1.0 + 1e-12


def test_agreement_table_validation():
    with pytest.raises(InvalidManifest):
        AgreementTable(np.array([[2, 0]]), 2)  # single item
    with pytest.raises(InvalidManifest):
        AgreementTable(np.array([[2, 0], [1, 0]]), 2)  # short row
    with pytest.raises(InvalidManifest):
        AgreementTable(np.array([[1, 0], [1, 0]]), 1)  # one rater
    with pytest.raises(InvalidManifest):
        AgreementTable(np.array([[2, -1], [2, 1]]), 1)


def test_agreement_table_from_labels_uses_common_clips():
    labels = {
        "a": {"c1": "pos", "c2": "neg", "c3": "pos"},
        "b": {"c1": "pos", "c2": "pos"},
    }
    table = agreement_table_from_labels(labels)
    # only c1 and c2 are rated by both, in sorted order
    assert table.counts.tolist() == [[2, 0], [1, 1]]
    assert table.rater_count == 2
    with pytest.raises(InvalidManifest):
        agreement_table_from_labels({"a": {"c1": "pos"}})


def test_read_agreement_csv(tmp_path):
    path = tmp_path / "votes.csv"
    path.write_text("clipId,a,b,c\nc1,pos,pos,neg\nc2,neg,neg,neg\n")
    table = read_agreement_csv(path)
    assert table.rater_count == 3
    assert table.counts.tolist() == [[2, 1], [0, 3]]

    (tmp_path / "bad.csv").write_text("clipId,a,b\nc1,pos,maybe\n")
    with pytest.raises(InvalidManifest):
        read_agreement_csv(tmp_path / "bad.csv")
    (tmp_path / "narrow.csv").write_text("clipId,a\nc1,pos\n")
    with pytest.raises(InvalidManifest):
        read_agreement_csv(tmp_path / "narrow.csv")


# ---------------------------------------------------------------------------
# Replications


def test_replicate_on_separable_bags():
    bags, labels = _separable_bags()
    report = replicate(bags, labels, MilConfig(), replications=5, seed=11)
    assert report.train_size == 5
    assert report.test_size == 5
    assert len(report.per_replication_accuracy) == 5
    assert report.mean == 1.0  # cleanly separable either way it splits
    assert report.std == 0.0


def test_replicate_is_seed_deterministic():
    bags, labels = _separable_bags(seed=1)
    a = replicate(bags, labels, MilConfig(), replications=4, seed=3)
    b = replicate(bags, labels, MilConfig(), replications=4, seed=3)
    assert a == b


def test_replicate_ignores_unlabeled_bags():
    bags, labels = _separable_bags(n_pos=5, n_neg=5)
    del labels["p04"], labels["n04"]
    report = replicate(bags, labels, MilConfig(), replications=2, seed=0)
    assert report.train_size == 4
    assert report.test_size == 4


def test_replicate_input_guards():
    bags, labels = _separable_bags(n_pos=2, n_neg=1)
    with pytest.raises(TooFewBags):
        replicate(bags, labels, MilConfig(), replications=1, seed=0)
    bags, labels = _separable_bags(n_pos=4, n_neg=4)
    single = {cid: "pos" for cid in labels}
    with pytest.raises(SingleClassDataset):
        replicate(bags, single, MilConfig(), replications=1, seed=0)
    bad = dict(labels)
    bad["p00"] = "yes"
    with pytest.raises(InvalidManifest):
        replicate(bags, bad, MilConfig(), replications=1, seed=0)


def test_replicate_report_json_shape():
    bags, labels = _separable_bags()
    report = replicate(bags, labels, MilConfig(), replications=3, seed=2)
    doc = report.to_json()
    assert doc["trainSize"] == 5 and doc["testSize"] == 5
    assert doc["perReplicationAccuracy"] == list(report.per_replication_accuracy)
    assert doc["seed"] == 2


# ---------------------------------------------------------------------------
# Learning curve


def test_learning_curve_shapes_and_determinism():
    bags, labels = _separable_bags(n_pos=6, n_neg=6)
    sizes = [2, 4, 8]
    pts = learning_curve(bags, labels, sizes, 4, MilConfig(), seed=5)
    assert [p.train_size for p in pts] == sizes
    assert all(0.0 <= p.mean <= 1.0 and p.std >= 0.0 for p in pts)
    again = learning_curve(bags, labels, sizes, 4, MilConfig(), seed=5)
    assert pts == again
    assert pts[-1].mean >= pts[0].mean - 0.02  # no collapse as data grows


def test_learning_curve_size_bounds():
    bags, labels = _separable_bags(n_pos=3, n_neg=3)
    for bad_size in (1, 6, 7):
        with pytest.raises(SizeTooLarge):
            learning_curve(bags, labels, [bad_size], 2, MilConfig(), seed=0)
    single = {cid: "neg" for cid in labels}
    with pytest.raises(SingleClassDataset):
        learning_curve(bags, single, [2], 2, MilConfig(), seed=0)


def test_curve_point_json():
    assert CurvePoint(8, 0.9, 0.05).to_json() == {
        "trainSize": 8,
        "mean": 0.9,
        "std": 0.05,
    }


# ---------------------------------------------------------------------------
# Productivity


def test_productivity_theoretic_hand_fractions():
    # [DERIVED] f=1/4, t=n=9/10: precision = .225/(.225+.075) = 3/4, so a
    # 10/3 capacity views 5/6 positives at random and 5/2 when filtered
    p = ProductivityParams(0.25, 0.9, 0.9, 10.0 / 3.0)
    random_v, filtered_v = productivity_theoretic(p)
    assert random_v == pytest.approx(5.0 / 6.0, rel=1e-12)
    assert filtered_v == pytest.approx(2.5, rel=1e-12)
    assert filtered_v / random_v == pytest.approx(3.0, rel=1e-12)


def test_productivity_theoretic_guards():
    with pytest.raises(NoPredictedPositives):
        productivity_theoretic(ProductivityParams(0.0, 0.9, 1.0, 5.0))
    with pytest.raises(InvalidManifest):
        ProductivityParams(1.5, 0.9, 0.9, 5.0).validate()
    with pytest.raises(InvalidManifest):
        ProductivityParams(0.5, 0.9, 0.9, 0.0).validate()


def test_productivity_simulate_matches_theory_at_the_boosted_composition():
    p = ProductivityParams(0.5, 0.9, 0.9, 10.0 / 3.0)
    _, filtered_v = productivity_theoretic(p)
    mean, std = productivity_simulate(p, 100, 100, replications=100, seed=0)
    assert abs(mean - filtered_v) / filtered_v <= 0.05
    assert std > 0.0


def test_productivity_simulate_recomposes_pool_by_base_rate():
    # perfect classifier, capacity = whole pool: the count of viewed
    # positives IS the recomposed positive count round(f * N)
    p = ProductivityParams(0.25, 1.0, 1.0, 200.0)
    mean, std = productivity_simulate(p, 100, 100, replications=5, seed=1)
    assert mean == 50.0
    assert std == 0.0


def test_productivity_simulate_fractional_credit():
    p = ProductivityParams(1.0, 1.0, 0.5, 10.0 / 3.0)
    mean, std = productivity_simulate(p, 5, 5, replications=3, seed=2)
    assert mean == pytest.approx(10.0 / 3.0, abs=1e-12)  # 3 whole + 1/3 credit
    assert std == 0.0
    mean_int, _ = productivity_simulate(p, 5, 5, 3, 2, integer_viewing=True)
    assert mean_int == 3.0


def test_productivity_simulate_is_deterministic():
    p = ProductivityParams(0.25, 0.9, 0.7, 10.0)
    a = productivity_simulate(p, 40, 60, replications=20, seed=9)
    b = productivity_simulate(p, 40, 60, replications=20, seed=9)
    assert a == b


def test_productivity_simulate_capacity_guard():
    p = ProductivityParams(0.5, 0.9, 0.9, 300.0)
    with pytest.raises(CapacityExceedsSet):
        productivity_simulate(p, 100, 100, replications=1, seed=0)


# ---------------------------------------------------------------------------
# Report files


def test_write_json_is_pretty_and_sorted(tmp_path):
    path = tmp_path / "report.json"
    write_json({"b": 1, "a": [1.5]}, path)
    text = path.read_text()
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [1.5], "b": 1}


def test_replication_csv_round_trips_floats(tmp_path):
    bags, labels = _separable_bags()
    report = replicate(bags, labels, MilConfig(), replications=3, seed=4)
    path = tmp_path / "reps.csv"
    write_replication_csv(report, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["replication", "accuracy"]
    assert [float(r[1]) for r in rows[1:]] == list(report.per_replication_accuracy)


def test_curve_csv_layout(tmp_path):
    pts = [CurvePoint(4, 0.7, 0.1), CurvePoint(8, 1 / 3, 0.0)]
    path = tmp_path / "curve.csv"
    write_curve_csv(pts, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["trainSize", "mean", "std"]
    assert rows[2][0] == "8"
    assert float(rows[2][1]) == 1 / 3  # repr() keeps full precision


def test_productivity_csv_fields(tmp_path):
    rows = [
        {
            "baseRate": 0.25,
            "truePositiveRate": 0.9,
            "trueNegativeRate": 0.9,
            "capacity": 10 / 3,
            "expectedRandom": 5 / 6,
            "expectedFiltered": 2.5,
            "simulatedMean": 2.48,
            "simulatedStd": 0.4,
        }
    ]
    path = tmp_path / "prod.csv"
    write_productivity_csv(rows, path)
    with open(path, newline="") as fh:
        parsed = list(csv.DictReader(fh))
    assert parsed[0]["baseRate"] == "0.25"
    assert parsed[0]["expectedFiltered"] == "2.5"

    write_productivity_csv([{"baseRate": 0.5}], path)
    with open(path, newline="") as fh:
        parsed = list(csv.DictReader(fh))
    assert parsed[0]["simulatedMean"] == ""  # absent metrics stay blank
