"""Multiple-instance learners over bags of principal shots.

Two models under the standard MIL assumption (a bag is positive iff at least
one instance is):

* LinearWitnessModel: alternating scheme in the mi-SVM family. Instance
  labels of positive bags are imputed by the current linear classifier,
  negative-bag instances stay negative, and each positive bag is forced to
  keep at least one positive witness. The inner solver is deterministic dual
  coordinate descent on the L2-regularized hinge loss.

* ConceptPointModel: diverse density with the noisy-OR bag probability
  P_i = 1 - prod_j (1 - exp(-sum_d s_d^2 (x_jd - t_d)^2)), maximized by
  gradient ascent with backtracking line search, restarted from positive-bag
  instances.

Both operate on z-scored instance vectors; the fitted Normalizer travels
with the model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatch,
    EmptyBag,
    InvalidManifest,
    MissingClass,
    SingleClassInput,
)
from .model import NEGATIVE, POSITIVE, Bag, Normalizer, fit_normalizer

MI_SVM = "miSvm"
DIVERSE_DENSITY = "diverseDensity"


@dataclass
class MilConfig:
    algorithm: str = MI_SVM
    regularization: float = 0.01  # lambda of (lambda/2)||w||^2 + mean hinge
    max_outer_iterations: int = 20
    solver_tolerance: float = 1e-6
    solver_max_iterations: int = 5000
    dd_restarts: int = 50  # cap on positive-instance restarts
    dd_max_iterations: int = 200
    # "auto" scales the all-ones s start by 1/sqrt(dim) so restarts in
    # high-dimensional z-scored space begin inside the objective's
    # unclamped region; a number is used verbatim
    dd_init_scale: float | str = "auto"
    probability_clamp: float = 1e-12
    seed: int = 0

    def validate(self) -> None:
        if self.algorithm not in (MI_SVM, DIVERSE_DENSITY):
            raise InvalidManifest(f"unknown MIL algorithm {self.algorithm!r}")
        if self.regularization <= 0:
            raise InvalidManifest("regularization must be > 0")
        if not 0 < self.probability_clamp <= 1e-6:
            raise InvalidManifest("probabilityClamp must be in (0, 1e-6]")
        if self.max_outer_iterations < 1 or self.dd_max_iterations < 1:
            raise InvalidManifest("iteration limits must be >= 1")
        if isinstance(self.dd_init_scale, str) and self.dd_init_scale != "auto":
            raise InvalidManifest("ddInitScale must be a number or 'auto'")

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "regularization": self.regularization,
            "maxOuterIterations": self.max_outer_iterations,
            "solverTolerance": self.solver_tolerance,
            "solverMaxIterations": self.solver_max_iterations,
            "ddRestarts": self.dd_restarts,
            "ddMaxIterations": self.dd_max_iterations,
            "ddInitScale": self.dd_init_scale,
            "probabilityClamp": self.probability_clamp,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MilConfig":
        cfg = cls(
            algorithm=doc.get("algorithm", MI_SVM),
            regularization=float(doc.get("regularization", 0.01)),
            max_outer_iterations=int(doc.get("maxOuterIterations", 20)),
            solver_tolerance=float(doc.get("solverTolerance", 1e-6)),
            solver_max_iterations=int(doc.get("solverMaxIterations", 5000)),
            dd_restarts=int(doc.get("ddRestarts", 50)),
            dd_max_iterations=int(doc.get("ddMaxIterations", 200)),
            dd_init_scale=doc.get("ddInitScale", "auto"),
            probability_clamp=float(doc.get("probabilityClamp", 1e-12)),
            seed=int(doc.get("seed", 0)),
        )
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class TrainingTrace:
    """Outer-iteration record of the alternating scheme.

    imputed_labels[k] holds every instance's +-1 label after imputation step
    k, aligned with instance_bag_ids; the witness constraint is assertable
    per iteration.
    """

    outer_iterations: int
    imputed_labels: tuple[tuple[int, ...], ...]
    instance_bag_ids: tuple[str, ...]

    def final_labels(self) -> tuple[int, ...]:
        return self.imputed_labels[-1]

    def to_json(self) -> dict:
        return {
            "outerIterations": self.outer_iterations,
            "imputedLabels": [list(row) for row in self.imputed_labels],
            "instanceBagIds": list(self.instance_bag_ids),
        }


@dataclass(frozen=True)
class LinearWitnessModel:
    weights: np.ndarray
    bias: float
    normalizer: Normalizer
    training_trace: TrainingTrace | None = None

    algorithm = MI_SVM

    def instance_scores(self, instances: np.ndarray) -> np.ndarray:
        z = self.normalizer.apply(instances)
        return z @ self.weights + self.bias


@dataclass(frozen=True)
class ConceptPointModel:
    target: np.ndarray
    scalings: np.ndarray
    normalizer: Normalizer
    log_likelihood: float

    algorithm = DIVERSE_DENSITY

    def instance_probabilities(self, instances: np.ndarray) -> np.ndarray:
        z = self.normalizer.apply(instances)
        diff = z - self.target
        return np.exp(-(diff * diff) @ (self.scalings * self.scalings))


def solve_linear_svm(
    instances: np.ndarray,
    labels: np.ndarray,
    regularization: float,
    tolerance: float,
    max_iterations: int = 5000,
) -> tuple[np.ndarray, float]:
    """Minimize (lambda/2)||w||^2 + (1/n) sum hinge(y (w.x + b)).

    The bias rides along as an appended constant-1 feature (so it is weakly
    regularized too); the dual box constraint is C = 1/(lambda n).
    """
    w, b, _, _ = _solve_linear_svm_detailed(
        instances, labels, regularization, tolerance, max_iterations
    )
    return w, b


def _solve_linear_svm_detailed(
    instances: np.ndarray,
    labels: np.ndarray,
    regularization: float,
    tolerance: float,
    max_iterations: int,
) -> tuple[np.ndarray, float, np.ndarray, int]:
    x = np.asarray(instances, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise DimensionMismatch(
            f"instances {x.shape} and labels {y.shape} do not line up"
        )
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClassInput("solve_linear_svm needs both label signs")
    xaug = np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)
    c = 1.0 / (regularization * x.shape[0])
    waug, _, dual_trace, sweeps = kernels.svm_dual_cd(
        np.ascontiguousarray(xaug), y, c, tolerance, max_iterations
    )
    return waug[:-1].copy(), float(waug[-1]), dual_trace, sweeps


def svm_primal_objective(
    w: np.ndarray, b: float, instances: np.ndarray, labels: np.ndarray, regularization: float
) -> float:
    margins = labels * (instances @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return 0.5 * regularization * (float(w @ w) + b * b) + float(hinge.mean())


def _stack_bags(bags: list[Bag]) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    """All instances stacked with bag offsets and per-bag positivity."""
    if not bags:
        raise MissingClass("no bags supplied")
    for bag in bags:
        if not bag.instances:
            raise EmptyBag(bag.clip_id)
        if bag.label not in (POSITIVE, NEGATIVE):
            raise InvalidManifest(f"bag {bag.clip_id!r} is unlabeled")
    mats = [bag.instance_matrix() for bag in bags]
    dims = {m.shape[1] for m in mats}
    if len(dims) != 1:
        raise DimensionMismatch(f"bags have mixed instance dimensions: {sorted(dims)}")
    x = np.concatenate(mats, axis=0)
    bag_start = np.zeros(len(bags) + 1, dtype=np.int64)
    for i, m in enumerate(mats):
        bag_start[i + 1] = bag_start[i] + m.shape[0]
    bag_pos = np.array([1 if b.label == POSITIVE else 0 for b in bags], dtype=np.uint8)
    if not bag_pos.any() or bag_pos.all():
        raise MissingClass("training needs at least one bag of each label")
    instance_bag_ids = []
    for bag in bags:
        instance_bag_ids.extend([bag.clip_id] * len(bag.instances))
    return x, bag_start, bag_pos, instance_bag_ids


def train_misvm(bags: list[Bag], config: MilConfig) -> LinearWitnessModel:
    """Alternating label imputation with a linear inner solver.

    Positive-bag instances start positive, negative-bag instances are pinned
    negative, and every positive bag keeps its best-scoring instance positive
    when the classifier votes the whole bag negative.
    """
    config.validate()
    x, bag_start, bag_pos, instance_bag_ids = _stack_bags(bags)
    normalizer = fit_normalizer(x)
    z = normalizer.apply(x)

    y = np.ones(z.shape[0], dtype=np.float64)
    for i in range(bag_pos.shape[0]):
        if not bag_pos[i]:
            y[bag_start[i] : bag_start[i + 1]] = -1.0

    history: list[tuple[int, ...]] = [tuple(int(v) for v in y)]
    w = np.zeros(z.shape[1])
    b = 0.0
    outer_done = 0
    for _ in range(config.max_outer_iterations):
        outer_done += 1
        w, b = solve_linear_svm(
            z, y, config.regularization, config.solver_tolerance,
            config.solver_max_iterations,
        )
        scores = z @ w + b
        y_new = y.copy()
        for i in range(bag_pos.shape[0]):
            if not bag_pos[i]:
                continue
            lo, hi = int(bag_start[i]), int(bag_start[i + 1])
            members = scores[lo:hi]
            y_new[lo:hi] = np.where(members > 0, 1.0, -1.0)
            if not np.any(members > 0):
                y_new[lo + int(np.argmax(members))] = 1.0
        history.append(tuple(int(v) for v in y_new))
        if np.array_equal(y_new, y):
            break
        y = y_new

    trace = TrainingTrace(
        outer_iterations=outer_done,
        imputed_labels=tuple(history),
        instance_bag_ids=tuple(instance_bag_ids),
    )
    return LinearWitnessModel(weights=w, bias=b, normalizer=normalizer, training_trace=trace)


def _dd_restart_points(z: np.ndarray, bag_start: np.ndarray, bag_pos: np.ndarray, cap: int) -> np.ndarray:
    points = []
    for i in range(bag_pos.shape[0]):
        if bag_pos[i]:
            points.extend(range(int(bag_start[i]), int(bag_start[i + 1])))
    return z[points[:cap]]


def train_dd(bags: list[Bag], config: MilConfig) -> ConceptPointModel:
    """Diverse density: best gradient-ascent run over positive restarts."""
    config.validate()
    x, bag_start, bag_pos, _ = _stack_bags(bags)
    normalizer = fit_normalizer(x)
    z = np.ascontiguousarray(normalizer.apply(x))
    dim = z.shape[1]
    log_eps = math.log(config.probability_clamp)

    if config.dd_init_scale == "auto":
        init_scale = 1.0 / math.sqrt(dim)
    else:
        init_scale = float(config.dd_init_scale)
    s0 = np.full(dim, init_scale, dtype=np.float64)

    restarts = _dd_restart_points(z, bag_start, bag_pos, config.dd_restarts)
    best_val = -np.inf
    best_theta: np.ndarray | None = None
    for r in range(restarts.shape[0]):
        theta = np.concatenate([restarts[r], s0])
        theta, val = _ascend(
            theta, z, bag_start, bag_pos, log_eps,
            config.dd_max_iterations, config.solver_tolerance,
        )
        if val > best_val:
            best_val = val
            best_theta = theta
    assert best_theta is not None
    return ConceptPointModel(
        target=best_theta[:dim].copy(),
        scalings=best_theta[dim:].copy(),
        normalizer=normalizer,
        log_likelihood=float(best_val),
    )


def _ascend(
    theta: np.ndarray,
    z: np.ndarray,
    bag_start: np.ndarray,
    bag_pos: np.ndarray,
    log_eps: float,
    max_iterations: int,
    tolerance: float,
) -> tuple[np.ndarray, float]:
    """Gradient ascent with backtracking (Armijo) line search."""
    dim = z.shape[1]
    val, grad = kernels.dd_value_grad(
        theta[:dim], theta[dim:], z, bag_start, bag_pos, log_eps
    )
    step = 1.0
    for _ in range(max_iterations):
        gnorm2 = float(grad @ grad)
        if math.sqrt(gnorm2) <= tolerance:
            break
        accepted = False
        eta = step
        while eta > 1e-18:
            cand = theta + eta * grad
            cval, cgrad = kernels.dd_value_grad(
                cand[:dim], cand[dim:], z, bag_start, bag_pos, log_eps
            )
            if cval > val + 1e-4 * eta * gnorm2:
                theta, val, grad = cand, cval, cgrad
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        step = min(eta * 2.0, 1.0)
    return theta, val


def noisy_or_probability(model: ConceptPointModel, instances: np.ndarray) -> float:
    q = model.instance_probabilities(instances)
    return float(1.0 - np.prod(1.0 - q))


def predict_bag(model, bag: Bag) -> tuple[str, float]:
    """(label, score); max margin for the linear model, noisy-OR for DD."""
    instances = bag.instance_matrix()
    if isinstance(model, LinearWitnessModel):
        if instances.shape[1] != model.weights.shape[0]:
            raise DimensionMismatch(
                f"bag {bag.clip_id!r} instances have dim {instances.shape[1]}, "
                f"model expects {model.weights.shape[0]}"
            )
        score = float(model.instance_scores(instances).max())
        return (POSITIVE if score > 0 else NEGATIVE), score
    if isinstance(model, ConceptPointModel):
        if instances.shape[1] != model.target.shape[0]:
            raise DimensionMismatch(
                f"bag {bag.clip_id!r} instances have dim {instances.shape[1]}, "
                f"model expects {model.target.shape[0]}"
            )
        score = noisy_or_probability(model, instances)
        return (POSITIVE if score > 0.5 else NEGATIVE), score
    raise InvalidManifest(f"unknown model type {type(model).__name__}")


def rank_bags(model, bags: list[Bag]) -> list[tuple[str, float]]:
    """Descending score, clipId lexicographic on ties."""
    scored = [(bag.clip_id, predict_bag(model, bag)[1]) for bag in bags]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored


def train(bags: list[Bag], config: MilConfig):
    config.validate()
    if config.algorithm == MI_SVM:
        return train_misvm(bags, config)
    return train_dd(bags, config)


# -- model files ---------------------------------------------------------------

def save_model(model, config: MilConfig, path: str | Path) -> None:
    if isinstance(model, LinearWitnessModel):
        doc = {
            "algorithm": MI_SVM,
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "normalizer": model.normalizer.to_json(),
            "config": config.to_json(),
            "trace": model.training_trace.to_json() if model.training_trace else None,
        }
    elif isinstance(model, ConceptPointModel):
        doc = {
            "algorithm": DIVERSE_DENSITY,
            "target": model.target.tolist(),
            "scalings": model.scalings.tolist(),
            "logLikelihood": model.log_likelihood,
            "normalizer": model.normalizer.to_json(),
            "config": config.to_json(),
        }
    else:
        raise InvalidManifest(f"unknown model type {type(model).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path):
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InvalidManifest(f"cannot read model file {path}: {exc}") from exc
    with fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidManifest(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_json(doc)


def model_from_json(doc: dict):
    algorithm = doc.get("algorithm")
    normalizer = Normalizer.from_json(doc["normalizer"])
    if algorithm == MI_SVM:
        trace = None
        if doc.get("trace"):
            t = doc["trace"]
            trace = TrainingTrace(
                outer_iterations=int(t["outerIterations"]),
                imputed_labels=tuple(tuple(int(v) for v in row) for row in t["imputedLabels"]),
                instance_bag_ids=tuple(t["instanceBagIds"]),
            )
        return LinearWitnessModel(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
            normalizer=normalizer,
            training_trace=trace,
        )
    if algorithm == DIVERSE_DENSITY:
        return ConceptPointModel(
            target=np.asarray(doc["target"], dtype=np.float64),
            scalings=np.asarray(doc["scalings"], dtype=np.float64),
            normalizer=normalizer,
            log_likelihood=float(doc.get("logLikelihood", 0.0)),
        )
    raise InvalidManifest(f"model file has unknown algorithm {algorithm!r}")
