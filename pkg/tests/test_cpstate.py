import json

import numpy as np
import pytest

from kronfft import (
    CONTROL_FIRST,
    CPState,
    KronTerm,
    RankOneTerm,
    StructuredOperator,
    apply_op_cp,
    basis_projector,
    bipartition_rank,
    compress,
    cp_basis_state,
    cp_to_dense,
    diagonal_cascade_cp,
    diagonal_decomposition,
    embed_term,
    expand,
    kron_all,
    qft_rank_experiment,
    r_gate,
    random_rank_one,
)


def dense_by_digit_indexing(state):
    """Independent oracle: evaluate sum_i w_i * prod_k v_k(j_k) entry by entry."""
    out = np.zeros(state.dim, dtype=complex)
    for j in range(state.dim):
        digits = []
        rem = j
        for _ in range(state.n):
            rem, dig = divmod(rem, state.d)
            digits.append(dig)
        digits.reverse()
        for term in state.terms:
            value = term.weight
            for vec, dig in zip(term.site_vectors, digits):
                value *= vec[dig]
            out[j] += value
    return out


def random_state(rng, n, d, terms):
    built = []
    for _ in range(terms):
        vs = tuple(
            rng.standard_normal(d) + 1j * rng.standard_normal(d) for _ in range(n)
        )
        built.append(RankOneTerm(complex(rng.standard_normal(), rng.standard_normal()), vs))
    return CPState(n, d, tuple(built))


def random_operator(rng, n, d, terms):
    built = []
    for _ in range(terms):
        fs = []
        for _ in range(n):
            m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            fs.append(m / np.linalg.norm(m, 2))
        built.append(
            KronTerm(complex(rng.standard_normal(), rng.standard_normal()), tuple(fs))
        )
    return StructuredOperator(n, d, tuple(built))


class TestBasisState:
    def test_all_zero_digits(self):
        s = cp_basis_state([0, 0, 0], 2)
        dense = cp_to_dense(s)
        want = np.zeros(8)
        want[0] = 1.0
        np.testing.assert_array_equal(dense, want)

    def test_base_three_index(self):
        s = cp_basis_state([1, 0], 3)
        dense = cp_to_dense(s)
        want = np.zeros(9)
        want[3] = 1.0  # big-endian: 1*3 + 0
        np.testing.assert_array_equal(dense, want)

    @pytest.mark.parametrize("digits,d", [([0], 2), ([1, 1], 2), ([2, 0, 1], 3)])
    def test_single_term(self, digits, d):
        assert cp_basis_state(digits, d).term_count == 1

    def test_digit_out_of_range(self):
        with pytest.raises(ValueError):
            cp_basis_state([0, 2], 2)
        with pytest.raises(ValueError):
            cp_basis_state([], 2)


class TestCpToDense:
    def test_single_term_matches_kron(self):
        rng = np.random.default_rng(0)
        vs = [rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(2)]
        s = CPState(2, 2, (RankOneTerm(1.0, tuple(vs)),))
        np.testing.assert_allclose(cp_to_dense(s), kron_all(vs), atol=1e-14)

    @pytest.mark.parametrize("n,d,terms", [(2, 2, 2), (3, 2, 3), (2, 3, 2)])
    def test_matches_digit_indexing_oracle(self, n, d, terms):
        s = random_state(np.random.default_rng(n + d + terms), n, d, terms)
        assert np.max(np.abs(cp_to_dense(s) - dense_by_digit_indexing(s))) < 1e-13

    def test_zero_weight_terms_contribute_nothing(self):
        rng = np.random.default_rng(1)
        base = random_state(rng, 2, 2, 1)
        padded = CPState(
            2, 2, base.terms + (RankOneTerm(0.0, base.terms[0].site_vectors),)
        )
        np.testing.assert_array_equal(cp_to_dense(padded), cp_to_dense(base))


class TestNormalization:
    def test_weights_absorb_magnitudes(self):
        term = RankOneTerm(2.0, (np.array([3.0, 4.0]), np.array([0.0, 2.0])))
        for v in term.site_vectors:
            assert abs(np.linalg.norm(v) - 1.0) < 1e-14
        assert abs(term.weight - 2.0 * 5.0 * 2.0) < 1e-12

    def test_zero_site_vector_zeroes_the_term(self):
        term = RankOneTerm(1.0, (np.zeros(2), np.array([1.0, 0.0])))
        assert term.weight == 0
        assert abs(np.linalg.norm(term.site_vectors[0]) - 1.0) < 1e-14


class TestApplyOpCp:
    def test_projector_branch_vanishes_on_basis_control(self):
        # control site already in the low basis state: the shifted branch dies
        factor = diagonal_decomposition(2, 2, CONTROL_FIRST).factors[0]
        s = cp_basis_state([0, 1, 1], 2)
        out = apply_op_cp(factor, s)
        assert out.term_count == 1

    def test_generic_input_doubles(self):
        factor = diagonal_decomposition(2, 2, CONTROL_FIRST).factors[0]
        s = random_rank_one(3, 2, seed=2)
        assert apply_op_cp(factor, s).term_count == 2

    @pytest.mark.parametrize("seed", range(6))
    def test_commutes_with_dense_application(self, seed):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(1, 4)), int(rng.choice([2, 3]))
        op = random_operator(rng, n, d, int(rng.integers(1, 4)))
        s = random_state(rng, n, d, int(rng.integers(1, 4)))
        lhs = cp_to_dense(apply_op_cp(op, s, prune=0.0))
        rhs = expand(op) @ cp_to_dense(s)
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_candidate_count_bound(self):
        rng = np.random.default_rng(3)
        op = random_operator(rng, 2, 2, 3)
        s = random_state(rng, 2, 2, 2)
        assert apply_op_cp(op, s, prune=0.0).term_count == 6

    def test_unitary_preserves_norm(self):
        plan_factor = diagonal_decomposition(3, 2).factors[1]
        s = random_rank_one(4, 2, seed=4)
        out = apply_op_cp(plan_factor, s)
        assert abs(np.linalg.norm(cp_to_dense(out)) - 1.0) < 1e-12

    def test_structure_mismatch(self):
        op = StructuredOperator(2, 2, (embed_term(2, 2, {}),))
        with pytest.raises(ValueError):
            apply_op_cp(op, cp_basis_state([0, 0, 0], 2))


class TestDiagonalCascade:
    def test_generic_input_stays_at_two_terms(self):
        s = random_rank_one(4, 2, seed=5)
        out, trajectory = diagonal_cascade_cp(3, 2, s)
        assert trajectory == [2, 2, 2]
        x = s.terms[0].site_vectors
        low = kron_all([basis_projector(0, 2) @ x[0]] + list(x[1:]))
        high = kron_all(
            [basis_projector(1, 2) @ x[0]]
            + [r_gate(i + 2, 2) @ v for i, v in enumerate(x[1:])]
        )
        assert np.max(np.abs(cp_to_dense(out) - (low + high))) < 1e-12
        # term-by-term: the two stored terms are exactly the two branches
        got0 = out.terms[0].weight * kron_all(out.terms[0].site_vectors)
        got1 = out.terms[1].weight * kron_all(out.terms[1].site_vectors)
        assert np.max(np.abs(got0 - low)) < 1e-12
        assert np.max(np.abs(got1 - high)) < 1e-12

    def test_basis_control_keeps_one_term(self):
        s = cp_basis_state([0, 1, 0, 1], 2)
        out, trajectory = diagonal_cascade_cp(3, 2, s)
        assert trajectory == [1, 1, 1]
        np.testing.assert_allclose(
            cp_to_dense(out), cp_to_dense(s), atol=1e-14
        )

    def test_unpruned_candidates_double_per_step(self):
        s = random_rank_one(4, 2, seed=6)
        out, trajectory = diagonal_cascade_cp(3, 2, s, prune=0.0)
        assert trajectory == [2, 4, 8]
        zero_weights = sum(1 for t in out.terms if t.weight == 0)
        assert zero_weights == 6  # all but the two real branches cancel exactly

    def test_matches_dense_target(self):
        from kronfft import diagonal_target

        s = random_rank_one(4, 2, seed=7)
        out, _ = diagonal_cascade_cp(3, 2, s)
        want = diagonal_target(3, 2) @ cp_to_dense(s)
        assert np.max(np.abs(cp_to_dense(out) - want)) < 1e-12

    def test_wrong_site_count(self):
        with pytest.raises(ValueError):
            diagonal_cascade_cp(3, 2, cp_basis_state([0, 0], 2))


class TestBipartitionRank:
    def test_rank_one_everywhere(self):
        s = random_rank_one(4, 2, seed=8)
        for cut in range(1, 4):
            assert bipartition_rank(s, cut) == 1

    def test_cascade_output_has_rank_two_across_control(self):
        s = random_rank_one(4, 2, seed=9)
        out, _ = diagonal_cascade_cp(3, 2, s)
        assert bipartition_rank(out, 1) == 2

    def test_basis_state_rank_one(self):
        s = cp_basis_state([1, 0, 1], 2)
        for cut in (1, 2):
            assert bipartition_rank(s, cut) == 1

    def test_cut_bounds(self):
        s = cp_basis_state([0, 0], 2)
        with pytest.raises(ValueError):
            bipartition_rank(s, 0)
        with pytest.raises(ValueError):
            bipartition_rank(s, 2)


class TestCompress:
    def test_proportional_terms_merge(self):
        rng = np.random.default_rng(10)
        vs = tuple(rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(3))
        phase = np.exp(0.3j)
        doubled = CPState(
            3,
            2,
            (
                RankOneTerm(1.0, vs),
                RankOneTerm(0.5, tuple(phase * v for v in vs)),
            ),
        )
        out = compress(doubled)
        assert out.term_count == 1
        assert np.max(np.abs(cp_to_dense(out) - cp_to_dense(doubled))) < 1e-12

    def test_redundant_two_site_state_compresses_via_svd(self):
        rng = np.random.default_rng(11)
        base = random_state(rng, 2, 2, 2)  # generic rank-2 two-site state
        # redundant 4-term representation of the same state
        split = []
        for t in base.terms:
            v0, v1 = t.site_vectors
            e0 = np.array([1.0, 0.0])
            e1 = np.array([0.0, 1.0])
            split.append(RankOneTerm(t.weight * v0[0], (e0, v1)))
            split.append(RankOneTerm(t.weight * v0[1], (e1, v1)))
        redundant = CPState(2, 2, tuple(split))
        assert redundant.term_count == 4
        out = compress(redundant)
        assert out.term_count == 2
        assert np.max(np.abs(cp_to_dense(out) - cp_to_dense(base))) < 1e-12

    def test_never_increases_terms_and_preserves_dense(self):
        rng = np.random.default_rng(12)
        for n, d, terms in [(2, 2, 3), (3, 2, 4), (2, 3, 2)]:
            s = random_state(rng, n, d, terms)
            out = compress(s)
            assert out.term_count <= s.term_count
            assert np.max(np.abs(cp_to_dense(out) - cp_to_dense(s))) < 1e-12

    def test_parallel_merge_without_svd(self):
        rng = np.random.default_rng(13)
        vs = tuple(rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(3))
        s = CPState(3, 2, (RankOneTerm(1.0, vs), RankOneTerm(-1.0, vs)))
        out = compress(s, svd=False)
        assert out.term_count == 1
        assert np.max(np.abs(cp_to_dense(out))) < 1e-12


class TestQftRankExperiment:
    def test_single_site_trajectory(self):
        report = qft_rank_experiment(1, 2, cp_basis_state([0], 2))
        assert [s.term_count for s in report.steps] == [1, 1]  # fourier, reversal
        assert report.residual < 1e-14

    def test_basis_state_stays_rank_one_target_first(self):
        report = qft_rank_experiment(3, 2, cp_basis_state([1, 0, 1], 2))
        assert all(s.term_count == 1 for s in report.steps)
        assert report.residual < 1e-12

    def test_basis_state_grows_per_block_control_first(self):
        report = qft_rank_experiment(
            3, 2, cp_basis_state([1, 0, 1], 2), orientation=CONTROL_FIRST
        )
        assert [s.term_count for s in report.steps] == [1, 2, 2, 2, 4, 4, 4]
        assert report.residual < 1e-12

    def test_generic_two_site_input(self):
        report = qft_rank_experiment(2, 2, random_rank_one(2, 2, seed=7))
        assert report.max_term_count <= 4
        assert report.residual < 1e-10

    def test_unpruned_counts_double_at_controlled_steps(self):
        report = qft_rank_experiment(3, 2, random_rank_one(3, 2, seed=4), prune=0.0)
        assert [s.term_count for s in report.steps] == [1, 2, 4, 4, 8, 8, 8]

    def test_csv_and_json_exports(self):
        report = qft_rank_experiment(2, 2, cp_basis_state([0, 0], 2))
        csv = report.to_csv(timing=False)
        lines = csv.splitlines()
        assert lines[0] == "step,factor_label,term_count,elapsed_ms"
        assert all(line.endswith("0.000") for line in lines[1:])
        doc = json.loads(report.to_json(timing=False))
        assert doc["n"] == 2 and doc["residual"] < 1e-12
        assert [s["term_count"] for s in doc["steps"]] == [
            s.term_count for s in report.steps
        ]

    def test_state_mismatch(self):
        with pytest.raises(ValueError):
            qft_rank_experiment(3, 2, cp_basis_state([0, 0], 2))


class TestGenericInputs:
    def test_seeded_and_reproducible(self):
        a = random_rank_one(3, 2, seed=42)
        b = random_rank_one(3, 2, seed=42)
        np.testing.assert_array_equal(cp_to_dense(a), cp_to_dense(b))

    def test_all_components_bounded_away_from_zero(self):
        for seed in range(20):
            s = random_rank_one(2, 5, seed=seed)
            for v in s.terms[0].site_vectors:
                assert np.min(np.abs(v)) > 1e-6

    def test_unit_norm(self):
        s = random_rank_one(4, 3, seed=3)
        assert abs(np.linalg.norm(cp_to_dense(s)) - 1.0) < 1e-12
