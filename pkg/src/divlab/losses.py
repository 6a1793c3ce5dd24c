"""Scalar objectives: cross-entropy, D-BAT disagreement, DivDis MI + prior KL.

Every loss has a ``*_grad`` twin returning the value together with the
gradient with respect to the probability matrices it consumes. Logs of
probability-like quantities are clamped at ``EPS``; the gradient of a
clamped term is zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EPS = 1e-12


class LossKind(str, enum.Enum):
    DBAT = "dbat"
    DIVDIS = "divdis"


def _clamped_log(x: np.ndarray):
    """Return ``log(max(x, EPS))`` and the derivative mask."""
    live = x > EPS
    return np.log(np.where(live, x, EPS)), live


def _check_probs(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("probabilities must be a 2D (batch, classes) array")
    return p


def _check_pair(p1, p2):
    p1, p2 = _check_probs(p1), _check_probs(p2)
    if p1.shape != p2.shape:
        raise ValueError(f"batch shapes differ: {p1.shape} vs {p2.shape}")
    if p1.shape[0] == 0:
        raise ValueError("empty batch")
    return p1, p2


def check_prior(prior, q: int | None = None) -> np.ndarray:
    prior = np.asarray(prior, dtype=np.float64)
    if prior.ndim != 1 or np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-9:
        raise ValueError(f"prior {prior} is not on the probability simplex")
    if q is not None and prior.shape[0] != q:
        raise ValueError(f"prior has {prior.shape[0]} entries, expected {q}")
    return prior


# -- cross-entropy ----------------------------------------------------------


def cross_entropy_grad(probs, labels):
    probs = _check_probs(probs)
    labels = np.asarray(labels, dtype=np.int64)
    n = probs.shape[0]
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    if n == 0:
        raise ValueError("empty batch")
    rows = np.arange(n)
    py = probs[rows, labels]
    logp, live = _clamped_log(py)
    d = np.zeros_like(probs)
    d[rows, labels] = np.where(live, -1.0 / (n * np.where(live, py, 1.0)), 0.0)
    return float(-logp.mean()), d


def cross_entropy(probs, labels) -> float:
    """Mean negative log-likelihood of ``labels``."""
    return cross_entropy_grad(probs, labels)[0]


def cross_entropy_logits_grad(z: np.ndarray, labels):
    """Cross-entropy straight from logits; stable for saturated models.

    Numerically equivalent to ``cross_entropy(softmax(z))`` whenever the
    clamp is inactive.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = z.shape[0]
    zs = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(zs).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(lse - zs[rows, labels]))
    p = np.exp(zs - lse[:, None])
    p[rows, labels] -= 1.0
    return loss, p / n


# -- D-BAT --------------------------------------------------------------------


def dbat_loss_grad(p1, p2):
    p1, p2 = _check_pair(p1, p2)
    if p1.shape[1] != 2:
        raise ValueError("D-BAT disagreement loss is defined for binary classification only")
    n = p1.shape[0]
    cross = p1[:, 0] * p2[:, 1] + p1[:, 1] * p2[:, 0]
    logc, live = _clamped_log(cross)
    w = np.where(live, -1.0 / (n * np.where(live, cross, 1.0)), 0.0)
    d1 = np.stack([w * p2[:, 1], w * p2[:, 0]], axis=1)
    d2 = np.stack([w * p1[:, 1], w * p1[:, 0]], axis=1)
    return float(-logc.mean()), d1, d2


def dbat_loss(p1, p2) -> float:
    """Mean of ``-log(p1(0) p2(1) + p1(1) p2(0))`` over the batch."""
    return dbat_loss_grad(p1, p2)[0]


# -- DivDis ---------------------------------------------------------------------


def divdis_mi_grad(p1, p2):
    p1, p2 = _check_pair(p1, p2)
    n = p1.shape[0]
    joint = p1.T @ p2 / n
    m1 = p1.mean(axis=0)
    m2 = p2.mean(axis=0)
    logj, live_j = _clamped_log(joint)
    logm1, live_1 = _clamped_log(m1)
    logm2, live_2 = _clamped_log(m2)
    ratio = logj - logm1[:, None] - logm2[None, :]
    mi = float(np.sum(joint * ratio))

    g_joint = ratio + live_j
    g_m1 = -np.where(live_1, joint.sum(axis=1) / np.where(live_1, m1, 1.0), 0.0)
    g_m2 = -np.where(live_2, joint.sum(axis=0) / np.where(live_2, m2, 1.0), 0.0)
    d1 = (p2 @ g_joint.T + g_m1[None, :]) / n
    d2 = (p1 @ g_joint + g_m2[None, :]) / n
    return mi, d1, d2


def divdis_mi(p1, p2) -> float:
    """Mutual information of the batch-averaged soft joint of two heads."""
    return divdis_mi_grad(p1, p2)[0]


def divdis_prior_kl_grad(p, prior):
    p = _check_probs(p)
    if p.shape[0] == 0:
        raise ValueError("empty batch")
    prior = check_prior(prior, p.shape[1])
    n = p.shape[0]
    m = p.mean(axis=0)
    logm, live = _clamped_log(m)
    logprior, _ = _clamped_log(prior)
    kl = float(np.sum(m * (logm - logprior)))
    g_m = logm - logprior + live
    return kl, np.broadcast_to(g_m / n, p.shape).copy()


def divdis_prior_kl(p, prior) -> float:
    """KL(batch marginal || prior)."""
    return divdis_prior_kl_grad(p, prior)[0]


# -- configuration and the K-hypothesis objective ---------------------------


@dataclass(frozen=True)
class DiversificationConfig:
    """Hyperparameters of the diversification objective.

    ``prior=None`` means "label distribution of the training set", resolved
    by the trainers. ``seq_reduction`` picks how a sequential step combines
    its pairwise terms against earlier hypotheses ("mean" or "sum").
    """

    K: int = 2
    alpha: float | None = None
    lam: float = 10.0
    loss_kind: LossKind = LossKind.DBAT
    prior: tuple[float, ...] | None = None
    seq_reduction: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))
        if self.alpha is None:
            object.__setattr__(self, "alpha", default_alpha(self.loss_kind))
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.alpha < 0 or self.lam < 0:
            raise ValueError("alpha and lambda must be non-negative")
        if self.prior is not None:
            check_prior(self.prior)
            object.__setattr__(self, "prior", tuple(float(v) for v in self.prior))
            if self.loss_kind is LossKind.DBAT and len(self.prior) != 2:
                raise ValueError("D-BAT requires q = 2")
        if self.seq_reduction not in ("mean", "sum"):
            raise ValueError("seq_reduction must be 'mean' or 'sum'")


def default_alpha(kind: LossKind) -> float:
    return 5.0 if LossKind(kind) is LossKind.DBAT else 50.0


def pairwise_loss_grad(kind: LossKind, p1, p2, lam: float = 10.0, prior=None):
    """``A(h1, h2)`` for the configured loss, plus gradients w.r.t. both inputs."""
    kind = LossKind(kind)
    if kind is LossKind.DBAT:
        return dbat_loss_grad(p1, p2)
    value, d1, d2 = divdis_mi_grad(p1, p2)
    if lam:
        if prior is None:
            prior = np.full(np.shape(p1)[1], 1.0 / np.shape(p1)[1])
        k1, g1 = divdis_prior_kl_grad(p1, prior)
        k2, g2 = divdis_prior_kl_grad(p2, prior)
        value += lam * (k1 + k2)
        d1 = d1 + lam * g1
        d2 = d2 + lam * g2
    return value, d1, d2


def pairwise_loss(kind: LossKind, p1, p2, lam: float = 10.0, prior=None) -> float:
    return pairwise_loss_grad(kind, p1, p2, lam, prior)[0]


def objective_grad(probs_t: Sequence[np.ndarray], labels, probs_u: Sequence[np.ndarray], cfg: DiversificationConfig, prior=None):
    """Value and probability-gradients of the K-hypothesis objective.

    ``sum_i CE_i + alpha / (K (K-1)) * sum_{i != j} A(h_i, h_j)`` with the
    double sum over ordered pairs.
    """
    K = len(probs_t)
    if K < 2 or len(probs_u) != K:
        raise ValueError("need at least two hypotheses with matching unlabeled batches")
    if prior is None:
        prior = cfg.prior
    value = 0.0
    d_t, d_u = [], []
    for p in probs_t:
        v, d = cross_entropy_grad(p, labels)
        value += v
        d_t.append(d)
    d_u = [np.zeros_like(p) for p in probs_u]
    scale = cfg.alpha / (K * (K - 1))
    if scale:
        for i in range(K):
            for j in range(K):
                if i == j:
                    continue
                v, di, dj = pairwise_loss_grad(cfg.loss_kind, probs_u[i], probs_u[j], cfg.lam, prior)
                value += scale * v
                d_u[i] += scale * di
                d_u[j] += scale * dj
    return value, d_t, d_u


def combined_objective(hyps, D_t, D_u, cfg: DiversificationConfig) -> float:
    """Evaluate the full K-hypothesis objective for model-backed hypotheses."""
    if len(hyps) < 2:
        raise ValueError("combined objective needs K >= 2 hypotheses")
    probs_t = [h.probs(D_t.X) for h in hyps]
    probs_u = [h.probs(D_u.X) for h in hyps]
    prior = cfg.prior
    if prior is None:
        prior = label_prior(D_t.y_true, probs_t[0].shape[1])
    return objective_grad(probs_t, D_t.y_true, probs_u, cfg, prior)[0]


def label_prior(labels, q: int) -> np.ndarray:
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=q).astype(np.float64)
    return counts / counts.sum()
