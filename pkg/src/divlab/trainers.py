"""ERM, sequential and simultaneous diversification, and oracle disambiguation."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .hypotheses import Dataset, Hypothesis, TrainingDiverged, accuracy, worst_group_accuracy
from .losses import (
    DiversificationConfig,
    LossKind,
    cross_entropy_logits_grad,
    label_prior,
    pairwise_loss_grad,
    objective_grad,
)
from .numerics import (
    Layer,
    ModelSpec,
    backward,
    compose,
    forward_cache,
    gd_step,
    init_model,
    softmax,
    softmax_backward,
)

log = logging.getLogger(__name__)

DEFAULT_FIT_FLOOR = 0.95


@dataclass(frozen=True)
class TrainSchedule:
    """``batch_size=None`` is full-batch gradient descent."""

    epochs: int = 500
    learning_rate: float = 0.5
    batch_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch size must be positive")


class Provenance(str, enum.Enum):
    SEQUENTIAL = "sequential"
    SIMULTANEOUS = "simultaneous"


@dataclass
class HypothesisSet:
    hyps: list[Hypothesis]
    provenance: Provenance
    config: DiversificationConfig
    train_accuracy: list[float] = field(default_factory=list)
    final_loss: float = float("nan")
    fit_floor: float = DEFAULT_FIT_FLOOR

    def __post_init__(self):
        if len(self.hyps) != self.config.K:
            raise ValueError(f"expected {self.config.K} hypotheses, got {len(self.hyps)}")

    @property
    def underfit(self) -> list[int]:
        """Indices of hypotheses whose training accuracy is below the floor."""
        return [i for i, a in enumerate(self.train_accuracy) if a < self.fit_floor]

    def __len__(self):
        return len(self.hyps)

    def __iter__(self):
        return iter(self.hyps)

    def __getitem__(self, i) -> Hypothesis:
        return self.hyps[i]


def _seed_for(seed: int, *tag: int) -> int:
    return int(np.random.SeedSequence([int(seed), *tag]).generate_state(1)[0])


def _require_labels(D: Dataset):
    if D.y_true is None:
        raise ValueError("training set needs labels")


def _check_finite(value: float, what: str):
    if not np.isfinite(value):
        raise TrainingDiverged(f"non-finite {what} loss")


def _batches(n_t: int, n_u: int, batch_size: int | None, rng: np.random.Generator):
    """Paired index batches over labeled and unlabeled sets for one epoch.

    The epoch length follows the larger set; the smaller one is cycled.
    """
    if batch_size is None:
        yield np.arange(n_t), np.arange(n_u)
        return
    n = max(n_t, n_u)
    steps = -(-n // batch_size)
    perm_t = rng.permutation(n_t)
    perm_u = rng.permutation(n_u) if n_u else np.arange(0)
    for s in range(steps):
        sl = np.arange(s * batch_size, min((s + 1) * batch_size, n))
        yield perm_t[sl % n_t], (perm_u[sl % n_u] if n_u else perm_u)


def train_erm(spec: ModelSpec, D_t: Dataset, sched: TrainSchedule, init_seed: int | None = None) -> Hypothesis:
    """Cross-entropy minimization by (mini)batch gradient descent.

    The model is initialized from ``init_seed`` (defaults to ``sched.seed``);
    minibatch order always follows ``sched.seed``.
    """
    _require_labels(D_t)
    model = init_model(spec, sched.seed if init_seed is None else init_seed)
    rng = np.random.default_rng(_seed_for(sched.seed, 1))
    y = D_t.y_true
    for _ in range(sched.epochs):
        for idx, _u in _batches(len(D_t), 0, sched.batch_size, rng):
            z, acts = forward_cache(model.layers, D_t.X[idx])
            loss, dz = cross_entropy_logits_grad(z, y[idx])
            _check_finite(loss, "ERM")
            grads, _ = backward(model.layers, acts, dz)
            model = gd_step(model, grads, sched.learning_rate)
    return Hypothesis(model=model, name="erm")


def _train_accuracies(hyps, D_t):
    return [accuracy(h, D_t) for h in hyps]


def _resolve_prior(cfg: DiversificationConfig, D_t: Dataset, q: int):
    if cfg.prior is not None:
        return np.asarray(cfg.prior)
    return label_prior(D_t.y_true, q)


def train_sequential(
    spec: ModelSpec,
    D_t: Dataset,
    D_u: Dataset,
    cfg: DiversificationConfig,
    sched: TrainSchedule,
    h1_override: Hypothesis | None = None,
) -> HypothesisSet:
    """Find hypotheses one at a time, each diversified against frozen predecessors.

    Step ``k`` minimizes ``CE(D_t) + alpha * reduce_{j<k} A(h_j, h_k)`` with
    ``reduce`` the mean (default) or sum over earlier hypotheses.
    """
    _require_labels(D_t)
    if cfg.loss_kind is LossKind.DBAT and spec.num_classes != 2:
        raise ValueError("D-BAT requires binary classification")
    hyps = [h1_override if h1_override is not None else train_erm(spec, D_t, sched)]
    prior = _resolve_prior(cfg, D_t, spec.num_classes)
    y = D_t.y_true
    n_t, n_u = len(D_t), len(D_u)
    loss = float("nan")
    for k in range(1, cfg.K):
        frozen = [h.probs(D_u.X) for h in hyps]
        weight = cfg.alpha / (k if cfg.seq_reduction == "mean" else 1)
        model = init_model(spec, _seed_for(sched.seed, 2, k))
        rng = np.random.default_rng(_seed_for(sched.seed, 3, k))
        for _ in range(sched.epochs):
            for it, iu in _batches(n_t, n_u, sched.batch_size, rng):
                X = np.concatenate([D_t.X[it], D_u.X[iu]])
                z, acts = forward_cache(model.layers, X)
                zt, zu = z[: len(it)], z[len(it) :]
                loss, dzt = cross_entropy_logits_grad(zt, y[it])
                pu = softmax(zu)
                dpu = np.zeros_like(pu)
                for pj in frozen:
                    v, _, d = pairwise_loss_grad(cfg.loss_kind, pj[iu], pu, cfg.lam, prior)
                    loss += weight * v
                    dpu += weight * d
                _check_finite(loss, "sequential")
                dz = np.concatenate([dzt, softmax_backward(pu, dpu)])
                grads, _ = backward(model.layers, acts, dz)
                model = gd_step(model, grads, sched.learning_rate)
        hyps.append(Hypothesis(model=model, name=f"h{k + 1}"))
    return HypothesisSet(hyps, Provenance.SEQUENTIAL, cfg, _train_accuracies(hyps, D_t), float(loss))


def split_trunk(spec: ModelSpec, trunk_depth: int) -> tuple[list[tuple[int, int]], ModelSpec]:
    """Layer dims of the shared trunk and the spec of each head."""
    widths = spec.hidden_widths
    if not 0 <= trunk_depth <= len(widths):
        raise ValueError(f"trunk depth {trunk_depth} outside [0, {len(widths)}]")
    trunk_dims = spec.layer_dims[:trunk_depth]
    head_in = widths[trunk_depth - 1] if trunk_depth else spec.input_dim
    rest = widths[trunk_depth:]
    head = ModelSpec.mlp(head_in, rest, spec.num_classes) if rest else ModelSpec.linear(head_in, spec.num_classes)
    return trunk_dims, head


def train_simultaneous(
    spec: ModelSpec,
    trunk_depth: int,
    D_t: Dataset,
    D_u: Dataset,
    cfg: DiversificationConfig,
    sched: TrainSchedule,
) -> HypothesisSet:
    """Jointly train K heads on a shared trunk under the full K-way objective.

    ``trunk_depth`` counts hidden layers of ``spec`` that are shared; 0 makes
    the heads fully independent models.
    """
    _require_labels(D_t)
    if cfg.loss_kind is not LossKind.DIVDIS:
        raise ValueError("simultaneous training uses the DivDis loss")
    trunk_dims, head_spec = split_trunk(spec, trunk_depth)
    trunk_model = init_model(spec, _seed_for(sched.seed, 4)) if trunk_dims else None
    trunk: list[Layer] = list(trunk_model.layers[:trunk_depth]) if trunk_model else []
    heads = [init_model(head_spec, _seed_for(sched.seed, 5, i)) for i in range(cfg.K)]
    prior = _resolve_prior(cfg, D_t, spec.num_classes)
    rng = np.random.default_rng(_seed_for(sched.seed, 6))
    y = D_t.y_true
    loss = float("nan")
    for _ in range(sched.epochs):
        for it, iu in _batches(len(D_t), len(D_u), sched.batch_size, rng):
            X = np.concatenate([D_t.X[it], D_u.X[iu]])
            nt = len(it)
            if trunk:
                H, trunk_acts = _trunk_forward(trunk, X)
            else:
                H = X
            caches = [forward_cache(h.layers, H) for h in heads]
            probs = [softmax(z) for z, _ in caches]
            loss, d_t, d_u = objective_grad(
                [p[:nt] for p in probs], y[it], [p[nt:] for p in probs], cfg, prior
            )
            _check_finite(loss, "simultaneous")
            dH = np.zeros_like(H)
            new_heads = []
            for h, (z, acts), p, dt, du in zip(heads, caches, probs, d_t, d_u):
                dz = softmax_backward(p, np.concatenate([dt, du]))
                grads, dh = backward(h.layers, acts, dz)
                dH += dh
                new_heads.append(gd_step(h, grads, sched.learning_rate))
            if trunk:
                dH = dH * (H > 0)
                tgrads, _ = backward(trunk, trunk_acts, dH)
                trunk = [(W - sched.learning_rate * gW, b - sched.learning_rate * gb) for (W, b), (gW, gb) in zip(trunk, tgrads)]
            heads = new_heads
    hyps = [Hypothesis(model=compose(trunk, h), name=f"head{i}") for i, h in enumerate(heads)]
    return HypothesisSet(hyps, Provenance.SIMULTANEOUS, cfg, _train_accuracies(hyps, D_t), float(loss))


def _trunk_forward(trunk: list[Layer], X: np.ndarray):
    """Forward through trunk layers with ReLU after every layer."""
    acts = [X]
    h = X
    for i, (W, b) in enumerate(trunk):
        h = np.maximum(h @ W + b, 0.0)
        if i < len(trunk) - 1:
            acts.append(h)
    return h, acts


def disambiguate(hs, labeled_ood: Dataset, criterion: str = "accuracy") -> tuple[int, list[float]]:
    """Oracle selection: index of the best hypothesis on labeled OOD data.

    ``criterion`` is ``"accuracy"`` or ``"worst_group"``. Ties go to the lowest
    index.
    """
    if len(labeled_ood) == 0:
        raise ValueError("empty oracle set")
    if criterion == "accuracy":
        scores = [accuracy(h, labeled_ood) for h in hs]
    elif criterion == "worst_group":
        scores = [worst_group_accuracy(h, labeled_ood) for h in hs]
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    return int(np.argmax(scores)), scores
