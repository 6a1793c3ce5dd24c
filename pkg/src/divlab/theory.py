"""Closed-form second-hypothesis angles and diverse-but-wrong code constructions."""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

import numpy as np


def _check_half_ratio(r: float):
    if not 0.0 <= r <= 0.5:
        raise ValueError(f"r={r} outside [0, 0.5]")


def analytic_h2_divdis_seq(r: float) -> float:
    """Boundary angle of the DivDis-Seq second hypothesis on the 2D task.

    ``pi/2 - arctan((1 - 2r) / (1 - r))``: the unique line through the origin
    that keeps the training quadrants correct and agrees with ``h_sp`` on
    exactly half of the unlabeled mass.
    """
    _check_half_ratio(r)
    return math.pi / 2 - math.atan((1 - 2 * r) / (1 - r))


def analytic_h2_dbat(r: float) -> float:
    """Hard-margin D-BAT answer: ``h*`` at r = 0, ``1 - h_sp`` otherwise."""
    _check_half_ratio(r)
    return math.pi / 2 if r == 0 else math.pi


# -- codes ----------------------------------------------------------------------


@dataclass(frozen=True)
class Code:
    q: int
    codewords: np.ndarray  # (K, N) integer symbols in [0, q)

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=np.int64)
        if cw.ndim != 2:
            raise ValueError("codewords must form a 2D array")
        if cw.size and (cw.min() < 0 or cw.max() >= self.q):
            raise ValueError("symbols outside [0, q)")
        if len({tuple(c) for c in cw}) != len(cw):
            raise ValueError("duplicate codewords")
        object.__setattr__(self, "codewords", cw)

    @property
    def length(self) -> int:
        return self.codewords.shape[1]

    def __len__(self) -> int:
        return self.codewords.shape[0]

    def __contains__(self, word) -> bool:
        return bool(np.any(np.all(self.codewords == np.asarray(word), axis=1)))


def hamming_distance(a, b) -> int:
    return int(np.count_nonzero(np.asarray(a) != np.asarray(b)))


def distance_matrix(code: Code) -> np.ndarray:
    cw = code.codewords
    return (cw[:, None, :] != cw[None, :, :]).sum(axis=2)


def min_distance(code: Code) -> int:
    d = distance_matrix(code)
    np.fill_diagonal(d, code.length + 1)
    return int(d.min())


def distance_spectrum(code: Code) -> dict[int, int]:
    d = distance_matrix(code)
    iu = np.triu_indices(len(code), 1)
    vals, counts = np.unique(d[iu], return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}


def sylvester_hadamard(N: int) -> np.ndarray:
    if N < 1 or N & (N - 1):
        raise ValueError(f"N={N} is not a power of two")
    H = np.ones((1, 1), dtype=np.int64)
    while H.shape[0] < N:
        H = np.block([[H, H], [H, -H]])
    return H


def hadamard_code(N: int) -> Code:
    """Walsh rows (+1 -> 0, -1 -> 1) and their complements: 2N words, distance N/2."""
    if N < 2:
        raise ValueError("Hadamard code needs N = 2^k with k >= 1")
    H = sylvester_hadamard(N)
    rows = (H < 0).astype(np.int64)
    return Code(2, np.concatenate([rows, 1 - rows]))


def align_code_to_target(code: Code, h_star) -> Code:
    """Shift every codeword position-wise so that the first codeword becomes ``h_star``.

    In the binary case this is a bit flip wherever the first codeword and
    ``h_star`` differ; for q-ary codes the shift is additive mod q. Both
    preserve every pairwise Hamming distance.
    """
    h_star = np.asarray(h_star, dtype=np.int64)
    if h_star.shape != (code.length,):
        raise ValueError(f"target length {h_star.shape} != code length {code.length}")
    shift = (h_star - code.codewords[0]) % code.q
    return Code(code.q, (code.codewords + shift) % code.q)


def is_prime(q: int) -> bool:
    return q >= 2 and all(q % p for p in range(2, math.isqrt(q) + 1))


def generalized_hadamard(q: int, m: int) -> Code:
    """Affine functions ``x -> a.x + b`` over GF(q)^m, evaluated at every point.

    Length ``q**m``, ``q**(m+1)`` codewords, minimum distance ``N (q-1) / q``.
    """
    if not is_prime(q):
        raise ValueError(f"q={q} is not prime")
    if m < 1:
        raise ValueError("m must be >= 1")
    points = np.array(list(itertools.product(range(q), repeat=m)), dtype=np.int64)  # (N, m)
    coeffs = np.array(list(itertools.product(range(q), repeat=m)), dtype=np.int64)  # (q^m, m)
    linear = coeffs @ points.T % q  # (q^m, N)
    words = (linear[:, None, :] + np.arange(q)[None, :, None]) % q
    return Code(q, words.reshape(-1, points.shape[0]))


@dataclass(frozen=True)
class DiversityReport:
    n_hypotheses: int
    min_distance: int
    max_pairwise_agreement: float
    max_accuracy_vs_h_star: float
    bound: float
    applicable: bool
    below_chance_bound: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _is_power_of(N: int, q: int) -> bool:
    while N > 1 and N % q == 0:
        N //= q
    return N == 1


def verify_diverse_nongeneralizing(code: Code, h_star, exclude_target: bool = True) -> DiversityReport:
    """Exhaustively check that the code minus ``h_star`` is diverse yet never beats chance.

    Agreement and accuracy are ``1 - d/N``. The bound is ``1/q``. For q > 2 the
    construction only covers lengths that are powers of q; other lengths are
    reported as not applicable. With ``exclude_target=False`` a copy of
    ``h_star`` inside the code stays among the candidates (and fails the check).
    """
    h_star = np.asarray(h_star, dtype=np.int64)
    if h_star.shape != (code.length,):
        raise ValueError(f"target length {h_star.shape} != code length {code.length}")
    N = code.length
    keep = ~np.all(code.codewords == h_star, axis=1) if exclude_target else np.ones(len(code), dtype=bool)
    cands = Code(code.q, code.codewords[keep])
    bound = 1.0 / code.q
    applicable = code.q == 2 or _is_power_of(N, code.q)
    dmin = min_distance(cands) if len(cands) >= 2 else N
    # decide in integers: 1 - d/N <= 1/q  <=>  q (N - d) <= N
    d_star = int((cands.codewords != h_star).sum(axis=1).min()) if len(cands) else N
    ok = applicable and code.q * (N - dmin) <= N and code.q * (N - d_star) <= N
    max_agree = (N - dmin) / N if len(cands) >= 2 else 0.0
    max_acc = (N - d_star) / N if len(cands) else 0.0
    return DiversityReport(len(cands), dmin, max_agree, max_acc, bound, applicable, bool(ok))


# -- persistence ----------------------------------------------------------------


def code_to_text(code: Code) -> str:
    """Plain integer matrix, one codeword per line, preceded by a ``# q=... N=...`` line."""
    lines = [f"# q={code.q} N={code.length} K={len(code)}"]
    lines += [" ".join(str(int(s)) for s in row) for row in code.codewords]
    return "\n".join(lines) + "\n"


def code_from_text(text: str, q: int | None = None) -> Code:
    rows, header_q = [], None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("q="):
                    header_q = int(tok[2:])
            continue
        rows.append([int(t) for t in line.replace(",", " ").split()])
    arr = np.array(rows, dtype=np.int64)
    q = q or header_q or int(arr.max()) + 1
    return Code(q, arr)


def save_code(code: Code, path: str | os.PathLike):
    with open(path, "w") as f:
        f.write(code_to_text(code))


def load_labels(path: str | os.PathLike) -> np.ndarray:
    """Read a label vector: integers separated by whitespace, commas or newlines."""
    with open(path) as f:
        toks = f.read().replace(",", " ").split()
    return np.array([int(t) for t in toks if not t.startswith("#")], dtype=np.int64)
