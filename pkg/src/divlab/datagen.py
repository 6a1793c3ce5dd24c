"""Seeded synthetic tasks with a controlled spurious ratio.

All generators are pure functions of their spec. Every dataset carries its
ground-truth labels in ``y_true`` and, in ``y_aux``, the labels of the
competing hypotheses plus a ``group`` column crossing the true label with
the spurious one.
"""

from __future__ import annotations

import csv
import enum
import io
import os
from dataclasses import dataclass

import numpy as np

from .hypotheses import Dataset, group_ids


def _check_ratio(r: float, name: str = "r"):
    if not (0.0 <= r <= 1.0):
        raise ValueError(f"{name}={r} outside [0, 1]")


def _check_count(n: int, name: str):
    if n < 0:
        raise ValueError(f"{name} must be non-negative")


# -- 2D quadrant task ---------------------------------------------------------


@dataclass(frozen=True)
class TwoDTaskSpec:
    n_train: int = 500
    n_unlabeled: int = 5000
    n_test: int = 2000
    r: float = 0.0
    seed: int = 0

    def __post_init__(self):
        _check_ratio(self.r)
        for k in ("n_train", "n_unlabeled", "n_test"):
            _check_count(getattr(self, k), k)


def h_star_2d(X: np.ndarray) -> np.ndarray:
    return (X[:, 0] > 0).astype(np.int64)


def h_sp_2d(X: np.ndarray) -> np.ndarray:
    return (X[:, 1] < 0).astype(np.int64)


def unlabeled_rectangles(r: float) -> list[tuple[float, float, float, float]]:
    """The two equal-area rectangles ``(x1_lo, x1_hi, x2_lo, x2_hi)`` of D_u.

    For r <= 1/2 the left edge is ``R(r) = r / (r - 1)``; above 1/2 the
    disagreement quadrants shrink instead, to width ``(1 - r) / r``. Either
    way the fraction of area where ``h_sp`` equals ``h*`` is exactly ``r``.
    """
    _check_ratio(r)
    if r <= 0.5:
        R = r / (r - 1.0)
        return [(R, 1.0, 0.0, 1.0), (-1.0, -R, -1.0, 0.0)]
    S = (1.0 - r) / r
    return [(-1.0, S, 0.0, 1.0), (-S, 1.0, -1.0, 0.0)]


def _sample_rectangles(rects, n: int, rng: np.random.Generator) -> np.ndarray:
    which = rng.integers(0, len(rects), size=n)
    u = rng.random((n, 2))
    box = np.asarray(rects)[which]
    x1 = box[:, 0] + u[:, 0] * (box[:, 1] - box[:, 0])
    x2 = box[:, 2] + u[:, 1] * (box[:, 3] - box[:, 2])
    return np.stack([x1, x2], axis=1)


def _label_2d(X: np.ndarray) -> Dataset:
    y, sp = h_star_2d(X), h_sp_2d(X)
    return Dataset(X, y, {"h_sp": sp, "group": group_ids(y, sp)})


def gen_2d_task(spec: TwoDTaskSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Return ``(D_t, D_u, D_ood)`` for the 2D quadrant task."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 2]))
    train = [(-1.0, 0.0, 0.0, 1.0), (0.0, 1.0, -1.0, 0.0)]
    square = [(-1.0, 1.0, -1.0, 1.0)]
    X_t = _sample_rectangles(train, spec.n_train, rng)
    X_u = _sample_rectangles(unlabeled_rectangles(spec.r), spec.n_unlabeled, rng)
    X_o = _sample_rectangles(square, spec.n_test, rng)
    return _label_2d(X_t), _label_2d(X_u), _label_2d(X_o)


# -- concatenated semantic/spurious blocks --------------------------------------


@dataclass(frozen=True)
class ConcatTaskSpec:
    """Feature vector ``[semantic block; spurious block]``.

    Each block places its binary attribute at ``+-margin`` along a fixed unit
    direction (the normalized all-ones vector) plus isotropic Gaussian noise.
    The spurious block's margin is ``spurious_factor * margin``. The default
    sizes give a linear model more input dimensions than training points, so
    a diversified head can fit ``D_t`` exactly while staying free on ``D_u``.
    """

    dim_semantic: int = 50
    dim_spurious: int = 50
    noise_sigma: float = 0.5
    margin: float = 1.0
    spurious_factor: float = 2.0
    n_train: int = 50
    n_unlabeled: int = 2000
    n_test: int = 2000
    r_u: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.dim_semantic < 1 or self.dim_spurious < 1:
            raise ValueError("block dimensions must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not self.margin > 0 or not self.spurious_factor > 0:
            raise ValueError("margins must be positive")
        _check_ratio(self.r_u, "r_u")
        for k in ("n_train", "n_unlabeled", "n_test"):
            _check_count(getattr(self, k), k)

    @property
    def dim(self) -> int:
        return self.dim_semantic + self.dim_spurious


def _concat_split(spec: ConcatTaskSpec, n: int, r: float, rng: np.random.Generator) -> Dataset:
    y = rng.integers(0, 2, size=n)
    same = rng.random(n) < r
    a = np.where(same, y, 1 - y)
    u_s = np.full(spec.dim_semantic, 1.0 / np.sqrt(spec.dim_semantic))
    u_p = np.full(spec.dim_spurious, 1.0 / np.sqrt(spec.dim_spurious))
    sem = spec.margin * (2 * y - 1)[:, None] * u_s + spec.noise_sigma * rng.standard_normal((n, spec.dim_semantic))
    spu = spec.spurious_factor * spec.margin * (2 * a - 1)[:, None] * u_p + spec.noise_sigma * rng.standard_normal(
        (n, spec.dim_spurious)
    )
    return Dataset(np.concatenate([sem, spu], axis=1), y, {"h_sp": a, "group": group_ids(y, a)})


def gen_concat_task(spec: ConcatTaskSpec) -> tuple[Dataset, Dataset, Dataset]:
    """``D_t`` has r = 1, ``D_u`` has r = ``r_u``, ``D_ood`` has r = 1/2."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 3]))
    return (
        _concat_split(spec, spec.n_train, 1.0, rng),
        _concat_split(spec, spec.n_unlabeled, spec.r_u, rng),
        _concat_split(spec, spec.n_test, 0.5, rng),
    )


# -- co-dependence construction -----------------------------------------------


class Variant(str, enum.Enum):
    PERP_A = "perp_a"
    PERP_B = "perp_b"
    INTERPOLATE = "interpolate"


@dataclass(frozen=True)
class CoDependenceSpec:
    """Three binary labelings over 4D features.

    Coordinate 0 carries ``h_A`` (a linear labeling), coordinates 1-2 carry
    ``h_B`` (XOR of their signs, or the sign of coordinate 1 when
    ``h_b_kind="linear"``), and coordinate 3 carries ``h*``. Each coordinate
    has magnitude ``scale * U(floor, 1)``. ``t`` is the weight of the
    ``PERP_B`` pool in the unlabeled data for ``INTERPOLATE``.
    """

    variant: Variant = Variant.PERP_A
    t: float = 0.0
    n_train: int = 1000
    n_unlabeled: int = 4000
    n_test: int = 2000
    scale_a: float = 1.0
    scale_b: float = 3.0
    scale_star: float = 0.3
    floor: float = 0.1
    h_b_kind: str = "xor"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        _check_ratio(self.t, "t")
        if self.h_b_kind not in ("xor", "linear"):
            raise ValueError("h_b_kind must be 'xor' or 'linear'")
        if not 0 <= self.floor < 1:
            raise ValueError("floor must lie in [0, 1)")
        for k in ("n_train", "n_unlabeled", "n_test"):
            _check_count(getattr(self, k), k)

    @property
    def pool_weight_b(self) -> float:
        if self.variant is Variant.PERP_A:
            return 0.0
        if self.variant is Variant.PERP_B:
            return 1.0
        return self.t


def _codep_points(spec: CoDependenceSpec, star, a, b, rng) -> Dataset:
    n = len(star)
    mag = spec.floor + (1 - spec.floor) * rng.random((n, 4))
    sign = lambda bit: 2 * np.asarray(bit) - 1  # noqa: E731
    X = np.empty((n, 4))
    X[:, 0] = spec.scale_a * mag[:, 0] * sign(a)
    X[:, 3] = spec.scale_star * mag[:, 3] * sign(star)
    if spec.h_b_kind == "xor":
        s1 = sign(rng.integers(0, 2, size=n))
        s2 = s1 * sign(b)  # same signs <=> h_B = 1
        X[:, 1] = spec.scale_b * mag[:, 1] * s1
        X[:, 2] = spec.scale_b * mag[:, 2] * s2
    else:
        X[:, 1] = spec.scale_b * mag[:, 1] * sign(b)
        X[:, 2] = spec.scale_b * mag[:, 2] * sign(rng.integers(0, 2, size=n))
    star = np.asarray(star, dtype=np.int64)
    return Dataset(X, star, {"h_A": a, "h_B": b, "group": group_ids(star, a)})


def _codep_unlabeled(spec: CoDependenceSpec, n: int, rng) -> Dataset:
    star = rng.integers(0, 2, size=n)
    from_b = rng.random(n) < spec.pool_weight_b
    other = rng.integers(0, 2, size=n)
    a = np.where(from_b, other, 1 - star)
    b = np.where(from_b, 1 - star, other)
    return _codep_points(spec, star, a, b, rng)


def gen_codependence_task(spec: CoDependenceSpec):
    """Return ``(D_t, D_u, D_ood, h_A labels on D_u, h_B labels on D_u)``.

    ``D_t`` holds only points where all three labelings agree; ``D_u`` and
    ``D_ood`` are drawn from the same variant-dependent pool mixture.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 5]))
    y = rng.integers(0, 2, size=spec.n_train)
    D_t = _codep_points(spec, y, y, y, rng)
    D_u = _codep_unlabeled(spec, spec.n_unlabeled, rng)
    D_ood = _codep_unlabeled(spec, spec.n_test, rng)
    return D_t, D_u, D_ood, D_u.y_aux["h_A"].copy(), D_u.y_aux["h_B"].copy()


# -- persistence ----------------------------------------------------------------


def dataset_to_text(D: Dataset) -> str:
    """Column-oriented CSV: ``x0..x{d-1}``, optional ``y_true``, then aux columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    aux = sorted(D.y_aux)
    header = [f"x{j}" for j in range(D.dim)]
    if D.y_true is not None:
        header.append("y_true")
    header += [f"aux:{k}" for k in aux]
    w.writerow(header)
    for i in range(len(D)):
        row = [repr(float(v)) for v in D.X[i]]
        if D.y_true is not None:
            row.append(int(D.y_true[i]))
        row += [int(D.y_aux[k][i]) for k in aux]
        w.writerow(row)
    return buf.getvalue()


def dataset_from_text(text: str) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    feat = [j for j, h in enumerate(header) if h.startswith("x")]
    X = np.array([[float(r[j]) for j in feat] for r in body], dtype=np.float64).reshape(len(body), len(feat))
    y = None
    if "y_true" in header:
        j = header.index("y_true")
        y = np.array([int(r[j]) for r in body], dtype=np.int64)
    aux = {
        h[len("aux:") :]: np.array([int(r[j]) for r in body], dtype=np.int64)
        for j, h in enumerate(header)
        if h.startswith("aux:")
    }
    return Dataset(X, y, aux)


def save_dataset(D: Dataset, path: str | os.PathLike):
    with open(path, "w", newline="") as f:
        f.write(dataset_to_text(D))


def load_dataset(path: str | os.PathLike) -> Dataset:
    with open(path, newline="") as f:
        return dataset_from_text(f.read())
