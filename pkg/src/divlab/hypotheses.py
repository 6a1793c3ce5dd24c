"""Hypothesis-level measurements on datasets.

A :class:`Hypothesis` wraps either a trained model or a fixed label vector.
Everything here is a pure function of its arguments except
:func:`estimate_agreement_score`, which trains models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numerics import DimensionError, Model, ModelKind, ModelSpec, forward


@dataclass
class Dataset:
    X: np.ndarray
    y_true: np.ndarray | None = None
    y_aux: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise DimensionError("features must be a 2D array")
        n = self.X.shape[0]
        if self.y_true is not None:
            self.y_true = np.asarray(self.y_true, dtype=np.int64)
            _check_labels(self.y_true, n, "y_true")
        self.y_aux = {k: np.asarray(v, dtype=np.int64) for k, v in self.y_aux.items()}
        for k, v in self.y_aux.items():
            _check_labels(v, n, k)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.X[idx],
            None if self.y_true is None else self.y_true[idx],
            {k: v[idx] for k, v in self.y_aux.items()},
        )

    def with_labels(self, y) -> "Dataset":
        return Dataset(self.X, y, dict(self.y_aux))

    @staticmethod
    def concat(*parts: "Dataset") -> "Dataset":
        X = np.concatenate([p.X for p in parts])
        y = None
        if all(p.y_true is not None for p in parts):
            y = np.concatenate([p.y_true for p in parts])
        keys = set.intersection(*(set(p.y_aux) for p in parts)) if parts else set()
        aux = {k: np.concatenate([p.y_aux[k] for p in parts]) for k in sorted(keys)}
        return Dataset(X, y, aux)


def _check_labels(y: np.ndarray, n: int, name: str):
    if y.shape != (n,):
        raise DimensionError(f"{name} has shape {y.shape}, expected ({n},)")
    if y.size and y.min() < 0:
        raise ValueError(f"{name} contains negative labels")


@dataclass
class Hypothesis:
    """A labeling function backed by a model or by a fixed label vector.

    Fixed-label hypotheses are only meaningful on the dataset they were built
    for; their length must match the dataset they are evaluated on.
    """

    model: Model | None = None
    labels: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if (self.model is None) == (self.labels is None):
            raise ValueError("a hypothesis needs exactly one of model or labels")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)

    @classmethod
    def fixed(cls, labels, name: str = "") -> "Hypothesis":
        return cls(labels=labels, name=name)

    def probs(self, X: np.ndarray) -> np.ndarray:
        if self.model is None:
            raise TypeError("fixed-label hypotheses expose no probabilities")
        return forward(self.model, X)

    def predict(self, D: Dataset) -> np.ndarray:
        return predict_labels(self, D)


def _as_hypothesis(h) -> Hypothesis:
    if isinstance(h, Hypothesis):
        return h
    if isinstance(h, Model):
        return Hypothesis(model=h)
    return Hypothesis.fixed(h)


def predict_labels(h, D: Dataset) -> np.ndarray:
    """Argmax labels; ``np.argmax`` already resolves ties to the lowest index."""
    h = _as_hypothesis(h)
    if h.labels is not None:
        if h.labels.shape[0] != len(D):
            raise DimensionError("fixed labels do not match dataset size")
        return h.labels.copy()
    return np.argmax(forward(h.model, D.X), axis=1).astype(np.int64)


def _require_nonempty(D: Dataset):
    if len(D) == 0:
        raise ValueError("empty dataset")


def agreement(h1, h2, D: Dataset) -> float:
    _require_nonempty(D)
    return float(np.mean(predict_labels(h1, D) == predict_labels(h2, D)))


def spurious_ratio(h, D: Dataset) -> float:
    """Fraction of points where ``h`` agrees with the ground-truth labels."""
    if D.y_true is None:
        raise ValueError("spurious ratio needs ground-truth labels")
    return agreement(h, Hypothesis.fixed(D.y_true), D)


def accuracy(h, D: Dataset) -> float:
    if D.y_true is None:
        raise ValueError("accuracy needs ground-truth labels")
    return agreement(h, Hypothesis.fixed(D.y_true), D)


def group_accuracies(h, D: Dataset, groups: np.ndarray | str = "group") -> dict[int, float]:
    if D.y_true is None:
        raise ValueError("group accuracy needs ground-truth labels")
    if isinstance(groups, str):
        if groups not in D.y_aux:
            raise KeyError(f"dataset has no group column {groups!r}")
        groups = D.y_aux[groups]
    groups = np.asarray(groups)
    correct = predict_labels(h, D) == D.y_true
    return {int(g): float(correct[groups == g].mean()) for g in np.unique(groups)}


def group_ids(y_true: np.ndarray, y_spurious: np.ndarray, q: int = 2) -> np.ndarray:
    """Cross (true label, spurious label) into one group index."""
    return np.asarray(y_true, dtype=np.int64) * q + np.asarray(y_spurious, dtype=np.int64)


def worst_group_accuracy(h, D: Dataset, groups: np.ndarray | str = "group", n_groups: int | None = None) -> float:
    """Minimum per-group accuracy.

    With ``n_groups`` set, every group id in ``range(n_groups)`` must be
    populated; a missing group raises.
    """
    accs = group_accuracies(h, D, groups)
    if n_groups is not None:
        missing = set(range(n_groups)) - set(accs)
        if missing:
            raise ValueError(f"empty group(s): {sorted(missing)}")
    return min(accs.values())


# -- 2D linear boundary geometry ---------------------------------------------
#
# Convention: h(x; beta) = 1{x1 sin(beta) - x2 cos(beta) > 0}, so
# beta = pi/2 is 1{x1 > 0}, beta = 0 is 1{x2 < 0} and beta = pi is 1{x2 > 0}.


def _check_2d_linear(model: Model):
    s = model.spec
    if s.kind is not ModelKind.LINEAR or s.input_dim != 2 or s.num_classes != 2:
        raise ValueError("boundary angle needs a binary linear model on 2D inputs")


def boundary_angle(h) -> float:
    """Orientation in [0, 2 pi) of a binary 2D linear decision boundary."""
    model = h.model if isinstance(h, Hypothesis) else h
    if model is None:
        raise ValueError("boundary angle needs a model-backed hypothesis")
    _check_2d_linear(model)
    W, _ = model.layers[0]
    w = W[:, 1] - W[:, 0]
    if not np.any(w):
        raise ValueError("degenerate model: zero normal vector")
    return float(math.atan2(w[0], -w[1]) % (2 * math.pi))


def linear_from_angle(beta: float, scale: float = 1.0, bias: float = 0.0) -> Model:
    """Binary linear model implementing ``h(x; beta)`` with logit gap ``scale * n.x + bias``."""
    n = np.array([math.sin(beta), -math.cos(beta)])
    W = np.stack([-0.5 * scale * n, 0.5 * scale * n], axis=1)
    b = np.array([-0.5 * bias, 0.5 * bias])
    return Model(ModelSpec.linear(2), [(W, b)])


def angle_distance(a: float, b: float) -> float:
    """Absolute angular difference on the circle."""
    d = (a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


# -- agreement score ----------------------------------------------------------


@dataclass(frozen=True)
class AgreementScoreEstimate:
    mean: float
    std: float
    n_pairs: int
    values: tuple[float, ...] = ()


class TrainingDiverged(RuntimeError):
    pass


TrainFn = Callable[[Dataset, int], Hypothesis]


def pair_seeds(seed: int, pair: int) -> tuple[int, int]:
    """Two distinct training seeds for AS pair ``pair``."""
    ss = np.random.SeedSequence([int(seed), int(pair)])
    a, b = ss.generate_state(2)
    if a == b:
        b = b ^ 1
    return int(a), int(b)


def estimate_agreement_score(
    train: TrainFn | tuple,
    task_labels,
    D_train: Dataset,
    D_ood: Dataset,
    n_pairs: int = 5,
    seed: int = 0,
) -> AgreementScoreEstimate:
    """Mean/std over pairs of the agreement of two independently seeded runs.

    ``train`` is either a callable ``(dataset, seed) -> Hypothesis`` or a
    ``(ModelSpec, TrainSchedule)`` tuple run through ERM. The dataset handed
    to it is ``D_train`` relabeled with ``task_labels``.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    _require_nonempty(D_ood)
    if not callable(train):
        train = _erm_trainer(*train)
    task = D_train.with_labels(task_labels)
    values = []
    for p in range(n_pairs):
        s1, s2 = pair_seeds(seed, p)
        h1, h2 = train(task, s1), train(task, s2)
        values.append(agreement(h1, h2, D_ood))
    arr = np.array(values)
    return AgreementScoreEstimate(float(arr.mean()), float(arr.std()), n_pairs, tuple(values))


def _erm_trainer(spec: ModelSpec, schedule) -> TrainFn:
    from dataclasses import replace

    from .trainers import train_erm

    def run(D: Dataset, seed: int) -> Hypothesis:
        return train_erm(spec, D, replace(schedule, seed=seed), init_seed=seed)

    return run
