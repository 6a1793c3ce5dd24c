import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divlab.theory import (
    Code,
    align_code_to_target,
    analytic_h2_dbat,
    analytic_h2_divdis_seq,
    code_from_text,
    code_to_text,
    distance_matrix,
    distance_spectrum,
    generalized_hadamard,
    hadamard_code,
    hamming_distance,
    is_prime,
    load_labels,
    min_distance,
    save_code,
    sylvester_hadamard,
    verify_diverse_nongeneralizing,
)


def seq_criterion_by_grid(r, n_grid=200_001):
    """Independent oracle for the sequential DivDis second hypothesis on the 2D task.

    Among separators h(x; beta) through the origin that keep both training
    quadrants correct (beta in [0, pi/2]), pick the one whose agreement with
    h_sp on the unlabeled rectangles is closest to 1/2. Agreement is the
    exact area fraction of each rectangle on the agreeing side, computed
    here by direct polygon clipping.
    """
    R = r / (r - 1.0)
    rects = [(R, 1.0, 0.0, 1.0), (-1.0, -R, -1.0, 0.0)]
    best, best_gap = None, np.inf
    for beta in np.linspace(0.0, math.pi / 2, n_grid):
        s, c = math.sin(beta), math.cos(beta)
        agree, total = 0.0, 0.0
        for x_lo, x_hi, y_lo, y_hi in rects:
            area = (x_hi - x_lo) * (y_hi - y_lo)
            # h = 1 where s*x - c*y > 0; h_sp = 1 where y < 0
            pos = _halfplane_area(s, -c, x_lo, x_hi, y_lo, y_hi)
            agree += pos if y_hi <= 0 else area - pos
            total += area
        gap = abs(agree / total - 0.5)
        if gap < best_gap:
            best, best_gap = beta, gap
    return best


def _halfplane_area(a, b, x_lo, x_hi, y_lo, y_hi):
    """Area of {a x + b y > 0} inside an axis-aligned box (Sutherland-Hodgman clip)."""
    poly = [(x_lo, y_lo), (x_hi, y_lo), (x_hi, y_hi), (x_lo, y_hi)]
    out = []
    for i, p in enumerate(poly):
        q = poly[(i + 1) % len(poly)]
        fp, fq = a * p[0] + b * p[1], a * q[0] + b * q[1]
        if fp > 0:
            out.append(p)
        if (fp > 0) != (fq > 0):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    if len(out) < 3:
        return 0.0
    return 0.5 * abs(sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(out, out[1:] + out[:1])))


class TestAnalyticAngles:
    def test_divdis_seq_endpoints(self):
        assert analytic_h2_divdis_seq(0.0) == pytest.approx(math.pi / 4)
        assert analytic_h2_divdis_seq(0.5) == pytest.approx(math.pi / 2)

    def test_divdis_seq_quarter(self):
        # frozen from the grid oracle below
        assert analytic_h2_divdis_seq(0.25) == pytest.approx(0.98279, abs=1e-5)

    @pytest.mark.parametrize("r", [0.0, 0.1, 0.25, 0.4])
    def test_divdis_seq_matches_grid_oracle(self, r):
        assert analytic_h2_divdis_seq(r) == pytest.approx(seq_criterion_by_grid(r, 20_001), abs=1e-3)

    def test_divdis_seq_strictly_increasing(self):
        vals = [analytic_h2_divdis_seq(r) for r in np.linspace(0, 0.5, 51)]
        assert np.all(np.diff(vals) > 0)

    def test_dbat(self):
        assert analytic_h2_dbat(0.0) == pytest.approx(math.pi / 2)
        assert analytic_h2_dbat(0.25) == pytest.approx(math.pi)
        assert analytic_h2_dbat(0.5) == pytest.approx(math.pi)

    @pytest.mark.parametrize("fn", [analytic_h2_dbat, analytic_h2_divdis_seq])
    @pytest.mark.parametrize("r", [-0.01, 0.51, 1.0])
    def test_out_of_range(self, fn, r):
        with pytest.raises(ValueError):
            fn(r)


class TestCode:
    def test_rejects_symbols_out_of_range(self):
        with pytest.raises(ValueError):
            Code(2, [[0, 2]])

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            Code(2, [[0, 1], [0, 1]])

    def test_membership(self):
        c = Code(2, [[0, 1], [1, 1]])
        assert [1, 1] in c and [0, 0] not in c

    def test_hamming(self):
        assert hamming_distance([0, 1, 2], [0, 2, 2]) == 1


def brute_min_distance(words):
    return min(sum(a != b for a, b in zip(u, v)) for u, v in itertools.combinations(words, 2))


class TestHadamard:
    def test_sylvester_is_orthogonal(self):
        H = sylvester_hadamard(8)
        np.testing.assert_array_equal(H @ H.T, 8 * np.eye(8))

    def test_n2_enumeration(self):
        c = hadamard_code(2)
        assert {tuple(w) for w in c.codewords} == {(0, 0), (0, 1), (1, 0), (1, 1)}
        assert min_distance(c) == 1

    def test_n4(self):
        c = hadamard_code(4)
        assert len(c) == 8
        assert (0, 0, 0, 0) in {tuple(w) for w in c.codewords}
        assert (1, 1, 1, 1) in {tuple(w) for w in c.codewords}
        assert min_distance(c) == brute_min_distance(c.codewords.tolist()) == 2

    @pytest.mark.parametrize("N", [2, 4, 8, 16, 32, 64])
    def test_size_and_distance(self, N):
        c = hadamard_code(N)
        assert len(c) == 2 * N
        assert min_distance(c) == N // 2

    @pytest.mark.parametrize("N", [0, 1, 3, 6, 12])
    def test_rejects_non_power_of_two(self, N):
        with pytest.raises(ValueError):
            hadamard_code(N)


class TestAlignment:
    def test_identity_when_target_is_first_word(self):
        c = hadamard_code(8)
        np.testing.assert_array_equal(align_code_to_target(c, c.codewords[0]).codewords, c.codewords)

    def test_complement_target_complements_everything(self):
        c = hadamard_code(8)
        out = align_code_to_target(c, 1 - c.codewords[0])
        np.testing.assert_array_equal(out.codewords, 1 - c.codewords)

    @pytest.mark.parametrize("N", [2, 4, 8, 16, 32])
    def test_distances_preserved_exhaustively(self, N):
        r = np.random.default_rng(N)
        c = hadamard_code(N)
        h = r.integers(0, 2, N)
        out = align_code_to_target(c, h)
        assert h.tolist() in out.codewords.tolist()
        np.testing.assert_array_equal(distance_matrix(out), distance_matrix(c))

    def test_qary_shift_preserves_distances(self):
        c = generalized_hadamard(3, 2)
        h = np.random.default_rng(0).integers(0, 3, 9)
        out = align_code_to_target(c, h)
        np.testing.assert_array_equal(distance_matrix(out), distance_matrix(c))
        assert h in out

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            align_code_to_target(hadamard_code(4), [0, 1, 0])


class TestGeneralizedHadamard:
    @pytest.mark.parametrize("q,m", [(3, 1), (3, 2), (5, 1), (2, 2), (2, 3)])
    def test_counts_and_distance(self, q, m):
        c = generalized_hadamard(q, m)
        N = q**m
        assert c.length == N
        assert len(c) == q ** (m + 1)
        assert min_distance(c) == brute_min_distance(c.codewords.tolist()) == N * (q - 1) // q

    def test_q3_m2_agreement(self):
        c = generalized_hadamard(3, 2)
        assert min_distance(c) == 6
        assert 1 - min_distance(c) / 9 == pytest.approx(1 / 3)

    def test_binary_spectrum_matches_hadamard(self):
        assert distance_spectrum(generalized_hadamard(2, 2)) == distance_spectrum(hadamard_code(4))

    @pytest.mark.parametrize("q", [1, 4, 6, 9])
    def test_rejects_non_prime(self, q):
        with pytest.raises(ValueError):
            generalized_hadamard(q, 1)

    def test_is_prime(self):
        assert [n for n in range(20) if is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19]


def brute_report(words, h, q):
    cands = [w for w in words if list(w) != list(h)]
    N = len(h)
    agree = max((sum(a == b for a, b in zip(u, v)) / N for u, v in itertools.combinations(cands, 2)), default=0.0)
    acc = max(sum(a == b for a, b in zip(w, h)) / N for w in cands)
    return len(cands), agree, acc


class TestVerify:
    @pytest.mark.parametrize("N", [2, 4, 8, 16])
    def test_aligned_hadamard_satisfies_bound(self, N):
        h = np.random.default_rng(1).integers(0, 2, N)
        rep = verify_diverse_nongeneralizing(align_code_to_target(hadamard_code(N), h), h)
        assert rep.n_hypotheses == 2 * N - 1
        assert rep.max_pairwise_agreement <= 0.5
        assert rep.max_accuracy_vs_h_star <= 0.5
        assert rep.below_chance_bound and rep.applicable

    def test_h_star_kept_among_candidates_fails(self):
        h = np.array([0, 1, 1, 0, 1, 0, 0, 1])
        c = align_code_to_target(hadamard_code(8), h)
        rep = verify_diverse_nongeneralizing(c, h, exclude_target=False)
        assert rep.n_hypotheses == 16
        assert rep.max_accuracy_vs_h_star == 1.0
        assert not rep.below_chance_bound

    def test_code_containing_h_star_reports_full_accuracy_when_kept(self):
        c = Code(2, [[0, 0, 1, 1], [1, 1, 0, 0], [0, 1, 0, 1]])
        h = [0, 0, 1, 1]
        rep = verify_diverse_nongeneralizing(c, h)
        assert rep.n_hypotheses == 2
        assert rep.max_accuracy_vs_h_star == 0.5

    def test_random_code_matches_brute_force(self):
        r = np.random.default_rng(5)
        words = np.unique(r.integers(0, 2, (10, 8)), axis=0)
        h = r.integers(0, 2, 8)
        rep = verify_diverse_nongeneralizing(Code(2, words), h)
        n, agree, acc = brute_report(words.tolist(), h.tolist(), 2)
        assert (rep.n_hypotheses, rep.max_pairwise_agreement, rep.max_accuracy_vs_h_star) == (n, agree, acc)
        assert rep.below_chance_bound == (agree <= 0.5 and acc <= 0.5)

    def test_not_applicable_for_nonconforming_length(self):
        c = Code(3, [[0, 1, 2, 0], [1, 2, 0, 1], [2, 0, 1, 2]])
        rep = verify_diverse_nongeneralizing(c, [0, 0, 0, 0])
        assert not rep.applicable and not rep.below_chance_bound
        assert rep.bound == pytest.approx(1 / 3)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            verify_diverse_nongeneralizing(hadamard_code(4), [0, 1])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 2**31 - 1))
    def test_agreement_is_one_minus_distance_over_n(self, k, seed):
        N = 2**k
        c = hadamard_code(N)
        d = distance_matrix(c)
        agree = (c.codewords[:, None, :] == c.codewords[None, :, :]).mean(axis=2)
        np.testing.assert_allclose(agree, 1 - d / N)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        c = generalized_hadamard(3, 1)
        p = tmp_path / "code.txt"
        save_code(c, p)
        back = code_from_text(p.read_text())
        assert back.q == 3
        np.testing.assert_array_equal(back.codewords, c.codewords)

    def test_header(self):
        assert code_to_text(hadamard_code(2)).splitlines()[0] == "# q=2 N=2 K=4"

    def test_load_labels(self, tmp_path):
        p = tmp_path / "h.txt"
        p.write_text("0, 1 1\n0\n")
        np.testing.assert_array_equal(load_labels(p), [0, 1, 1, 0])
