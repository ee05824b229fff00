"""Evaluation machinery: accuracy replications, learning curves, Fleiss'
kappa, and the productivity model (theoretic + Monte-Carlo).

Replications draw independent substreams from (seed, replication index), so
results do not depend on execution order and are reproducible bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import mil
from .errors import (
    CapacityExceedsSet,
    DegenerateExpectedAgreement,
    EmptyInput,
    InvalidManifest,
    LengthMismatch,
    NoPredictedPositives,
    SingleClassDataset,
    SizeTooLarge,
    TooFewBags,
)
from .model import LABELS, NEGATIVE, POSITIVE, Bag


def accuracy(predictions, labels) -> float:
    """Fraction of positions where prediction equals label."""
    preds = list(predictions)
    refs = list(labels)
    if len(preds) != len(refs):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(refs)} labels")
    if not preds:
        raise EmptyInput("accuracy of an empty set is undefined")
    hits = sum(1 for p, r in zip(preds, refs) if p == r)
    return hits / len(preds)


@dataclass(frozen=True)
class ReplicationReport:
    per_replication_accuracy: tuple[float, ...]
    mean: float
    std: float
    train_size: int
    test_size: int
    seed: int

    def to_json(self) -> dict:
        return {
            "perReplicationAccuracy": list(self.per_replication_accuracy),
            "mean": self.mean,
            "std": self.std,
            "trainSize": self.train_size,
            "testSize": self.test_size,
            "seed": self.seed,
        }


def _labeled_bags(bags: list[Bag], coder_labels: dict[str, str]) -> list[Bag]:
    out = []
    for bag in bags:
        label = coder_labels.get(bag.clip_id)
        if label is None:
            continue
        if label not in LABELS:
            raise InvalidManifest(f"bad label {label!r} for clip {bag.clip_id!r}")
        out.append(replace(bag, label=label))
    return out


def _stratified_split(
    labeled: list[Bag], train_size: int, rng: np.random.Generator, max_tries: int = 1000
) -> tuple[list[Bag], list[Bag]]:
    """Random split whose training half contains both classes; the draw is
    repeated on degenerate permutations rather than failing."""
    n = len(labeled)
    for _ in range(max_tries):
        order = rng.permutation(n)
        train = [labeled[i] for i in order[:train_size]]
        test = [labeled[i] for i in order[train_size:]]
        train_labels = {bag.label for bag in train}
        if POSITIVE in train_labels and NEGATIVE in train_labels:
            return train, test
    raise SingleClassDataset(
        f"could not draw a two-class training set of size {train_size}"
    )


def replicate(
    bags: list[Bag],
    coder_labels: dict[str, str],
    config: mil.MilConfig,
    replications: int,
    seed: int,
) -> ReplicationReport:
    """Equal-sized random train/test splits, one model per replication."""
    labeled = _labeled_bags(bags, coder_labels)
    if len(labeled) < 4:
        raise TooFewBags(f"need at least 4 labeled bags, got {len(labeled)}")
    label_set = {bag.label for bag in labeled}
    if label_set != {POSITIVE, NEGATIVE}:
        raise SingleClassDataset(f"labels present: {sorted(label_set)}")

    train_size = len(labeled) // 2
    accuracies = []
    for rep in range(replications):
        rng = np.random.default_rng([seed, rep])
        train, test = _stratified_split(labeled, train_size, rng)
        model = mil.train(train, config)
        preds = [mil.predict_bag(model, bag)[0] for bag in test]
        accuracies.append(accuracy(preds, [bag.label for bag in test]))

    acc = np.array(accuracies, dtype=np.float64)
    return ReplicationReport(
        per_replication_accuracy=tuple(accuracies),
        mean=float(acc.mean()),
        std=float(acc.std()),
        train_size=train_size,
        test_size=len(labeled) - train_size,
        seed=seed,
    )


@dataclass(frozen=True)
class CurvePoint:
    train_size: int
    mean: float
    std: float

    def to_json(self) -> dict:
        return {"trainSize": self.train_size, "mean": self.mean, "std": self.std}


def learning_curve(
    bags: list[Bag],
    coder_labels: dict[str, str],
    train_sizes: list[int],
    replications_per_size: int,
    config: mil.MilConfig,
    seed: int,
) -> list[CurvePoint]:
    """Mean/std test accuracy as the training set grows."""
    labeled = _labeled_bags(bags, coder_labels)
    label_set = {bag.label for bag in labeled}
    if label_set != {POSITIVE, NEGATIVE}:
        raise SingleClassDataset(f"labels present: {sorted(label_set)}")
    points = []
    for size in train_sizes:
        if not 2 <= size < len(labeled):
            raise SizeTooLarge(
                f"train size {size} must be in [2, {len(labeled) - 1}]"
            )
        accuracies = []
        for rep in range(replications_per_size):
            rng = np.random.default_rng([seed, size, rep])
            train, test = _stratified_split(labeled, size, rng)
            model = mil.train(train, config)
            preds = [mil.predict_bag(model, bag)[0] for bag in test]
            accuracies.append(accuracy(preds, [bag.label for bag in test]))
        acc = np.array(accuracies, dtype=np.float64)
        points.append(CurvePoint(size, float(acc.mean()), float(acc.std())))
    return points


# -- inter-rater agreement -----------------------------------------------------

@dataclass(frozen=True)
class AgreementTable:
    """Per-item rater counts over the two categories (positive, negative)."""

    counts: np.ndarray  # (N, 2) int64
    rater_count: int

    def __post_init__(self):
        c = self.counts
        if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 2:
            raise InvalidManifest("agreement table needs N >= 2 items x 2 categories")
        if self.rater_count < 2:
            raise InvalidManifest("agreement needs at least 2 raters")
        if np.any(c < 0) or not np.all(c.sum(axis=1) == self.rater_count):
            raise InvalidManifest("every item must have exactly raterCount ratings")


def agreement_table_from_labels(
    per_coder_labels: dict[str, dict[str, str]], clip_ids: list[str] | None = None
) -> AgreementTable:
    """Counts over the clips rated by every coder."""
    coders = sorted(per_coder_labels)
    if len(coders) < 2:
        raise InvalidManifest("agreement needs at least 2 coders")
    if clip_ids is None:
        clip_ids = sorted(
            set.intersection(*(set(per_coder_labels[c]) for c in coders))
        )
    rows = []
    for clip_id in clip_ids:
        pos = sum(1 for c in coders if per_coder_labels[c][clip_id] == POSITIVE)
        rows.append([pos, len(coders) - pos])
    return AgreementTable(np.array(rows, dtype=np.int64), len(coders))


def read_agreement_csv(path: str | Path) -> AgreementTable:
    """CSV of clipId, coder1..coderN holding pos|neg values."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 3:
            raise InvalidManifest("agreement CSV needs clipId plus >= 2 coder columns")
        rows = []
        for line in reader:
            if not line:
                continue
            votes = [v.strip() for v in line[1:]]
            if len(votes) != len(header) - 1 or any(v not in LABELS for v in votes):
                raise InvalidManifest(f"bad agreement row: {line!r}")
            pos = sum(1 for v in votes if v == POSITIVE)
            rows.append([pos, len(votes) - pos])
    return AgreementTable(np.array(rows, dtype=np.int64), len(header) - 1)


def fleiss_kappa(table: AgreementTable) -> float:
    """Fleiss' kappa over the two-category agreement table."""
    counts = table.counts.astype(np.float64)
    n = float(table.rater_count)
    big_n = counts.shape[0]
    p_i = (np.sum(counts * counts, axis=1) - n) / (n * (n - 1.0))
    p_bar = float(p_i.mean())
    p_j = counts.sum(axis=0) / (big_n * n)
    p_e = float(np.sum(p_j * p_j))
    if p_e >= 1.0:
        if p_bar >= 1.0:
            return 1.0
        raise DegenerateExpectedAgreement(
            "all ratings fall in one category yet items disagree"
        )
    return (p_bar - p_e) / (1.0 - p_e)


# -- productivity model --------------------------------------------------------

@dataclass(frozen=True)
class ProductivityParams:
    base_rate: float  # f: fraction of positives in the stream
    true_positive_rate: float  # t
    true_negative_rate: float  # n
    capacity: float  # k: clips viewable in the performance period

    def validate(self) -> None:
        rates = (self.base_rate, self.true_positive_rate, self.true_negative_rate)
        if any(not 0.0 <= r <= 1.0 for r in rates):
            raise InvalidManifest("rates must lie in [0, 1]")
        if self.capacity <= 0:
            raise InvalidManifest("capacity must be positive")


def productivity_theoretic(p: ProductivityParams) -> tuple[float, float]:
    """(expectedRandom, expectedFiltered) positives viewed within capacity.

    Random viewing yields k*f; viewing only predicted positives yields
    k*pi with precision pi = f*t / (f*t + (1-f)(1-n)), assuming predicted
    positives outnumber the capacity.
    """
    p.validate()
    f, t, n, k = p.base_rate, p.true_positive_rate, p.true_negative_rate, p.capacity
    predicted_positive_mass = f * t + (1.0 - f) * (1.0 - n)
    if predicted_positive_mass <= 0.0:
        raise NoPredictedPositives(
            "classifier predicts nothing positive; precision undefined"
        )
    precision = f * t / predicted_positive_mass
    return k * f, k * precision


def productivity_simulate(
    p: ProductivityParams,
    pos_count: int,
    neg_count: int,
    replications: int,
    seed: int,
    integer_viewing: bool = False,
) -> tuple[float, float]:
    """Monte-Carlo positives viewed under filtered ordering.

    The pool sizes fix the simulation scale N = posCount + negCount; each
    replication's stream holds round(f*N) true positives so the base rate f
    governs composition (at f = 0.5 and a 100+100 pool this is exactly the
    boosted-set protocol). Predicted positives are viewed first, shuffled
    within the group; a fractional capacity grants frac(k) credit on the
    next clip.
    """
    p.validate()
    total = pos_count + neg_count
    if total <= 0 or p.capacity > total:
        raise CapacityExceedsSet(
            f"capacity {p.capacity} exceeds the {total}-clip simulation set"
        )
    n_pos = int(round(p.base_rate * total))
    n_neg = total - n_pos

    whole = int(math.floor(p.capacity))
    frac = 0.0 if integer_viewing else p.capacity - whole

    viewed_counts = np.zeros(replications, dtype=np.float64)
    for rep in range(replications):
        rng = np.random.default_rng([seed, rep])
        truth = np.zeros(total, dtype=bool)
        truth[:n_pos] = True
        predicted_pos = np.empty(total, dtype=bool)
        predicted_pos[:n_pos] = rng.random(n_pos) < p.true_positive_rate
        predicted_pos[n_pos:] = rng.random(n_neg) >= p.true_negative_rate

        group_pos = np.where(predicted_pos)[0]
        group_neg = np.where(~predicted_pos)[0]
        order = np.concatenate([rng.permutation(group_pos), rng.permutation(group_neg)])

        viewed = float(np.count_nonzero(truth[order[:whole]]))
        if frac > 0.0 and whole < total:
            viewed += frac * float(truth[order[whole]])
        viewed_counts[rep] = viewed

    return float(viewed_counts.mean()), float(viewed_counts.std())


# -- report files --------------------------------------------------------------

def write_json(doc, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_replication_csv(report: ReplicationReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replication", "accuracy"])
        for i, acc in enumerate(report.per_replication_accuracy):
            writer.writerow([i, repr(acc)])


def write_curve_csv(points: list[CurvePoint], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trainSize", "mean", "std"])
        for pt in points:
            writer.writerow([pt.train_size, repr(pt.mean), repr(pt.std)])


def write_productivity_csv(rows: list[dict], path: str | Path) -> None:
    """One row per parameter combination."""
    fields = [
        "baseRate", "truePositiveRate", "trueNegativeRate", "capacity",
        "expectedRandom", "expectedFiltered", "simulatedMean", "simulatedStd",
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
