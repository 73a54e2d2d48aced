"""Hyperparameter-selection family tests: data plumbing, QP, index charts."""

import numpy as np
import pytest

from mpecq import (BhoInstance, BhoPoint, ClassificationError,
                   ConvergenceError, Dataset, FoldSplit, InputError,
                   Tolerances, assemble_feasible_point, assemble_gamma,
                   check_feasibility, check_licq_theorem,
                   check_mfcq_r_theorem, check_mpec_licq, check_mpec_mfcq_r,
                   classify_active, classify_lambda_psi, gamma_matches_generic,
                   load_dataset_csv, lower_level_solve,
                   misclassification_oracle, solve_all_folds, split_folds,
                   structured_index_sets, to_evaluation, validation_error)
from mpecq.fuzz import gen_bho_case

TOL = Tolerances()


def make_instance(seed=0, T=2, m1=2, m2=3, p=3, extra=1):
    rng = np.random.default_rng(seed)
    N = T * (m1 + m2) + extra
    dataset = Dataset(rng.normal(size=(N, p)), rng.choice([-1.0, 1.0], size=N))
    split = split_folds(dataset, T, m1, m2, seed)
    return dataset, split, BhoInstance.from_dataset(dataset, split)


def exemplar_instance():
    """One fold, every margin decided, both biactive families present.

    Training rows (1,0) and (1,0) with alpha = (C, 0) = (1, 0) give
    s = (1, 1): index 0 sits at the box bound with a tight margin,
    index 1 is inactive with a tight margin.  Validation rows (1,0)
    and (-1,0) give margins (1, -1): one correct, one misclassified.
    """
    A = np.array([[1.0, 0.0], [-1.0, 0.0]])
    B = np.array([[1.0, 0.0], [1.0, 0.0]])
    instance = BhoInstance(1, 2, 2, 2, A, B)
    alphas = [np.array([1.0, 0.0])]
    return instance, 1.0, alphas


class TestCsvLoading:
    def test_with_header_and_binary_labels(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b,y\n1.0,2.0,1\n-1.0,0.5,0\n")
        ds = load_dataset_csv(path)
        assert ds.size == 2 and ds.n_features == 2
        np.testing.assert_array_equal(ds.labels, [1.0, -1.0])

    def test_without_header_signed_labels(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,2.0,1\n-1.0,0.5,-1\n")
        ds = load_dataset_csv(path)
        np.testing.assert_array_equal(ds.labels, [1.0, -1.0])

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,2.0,1\n-1.0,-1\n")
        with pytest.raises(InputError):
            load_dataset_csv(path)

    def test_bad_labels_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,2.0,3\n-1.0,0.5,1\n")
        with pytest.raises(InputError):
            load_dataset_csv(path)

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(InputError):
            load_dataset_csv(path)


class TestFoldSplit:
    def test_deterministic_and_disjoint(self):
        rng = np.random.default_rng(1)
        ds = Dataset(rng.normal(size=(12, 2)), rng.choice([-1.0, 1.0], size=12))
        s1 = split_folds(ds, 2, 2, 3, seed=9)
        s2 = split_folds(ds, 2, 2, 3, seed=9)
        assert s1 == s2
        used = [i for t in range(2) for i in s1.validation[t] + s1.training[t]]
        assert len(used) == len(set(used)) == 10
        assert split_folds(ds, 2, 2, 3, seed=10) != s1

    def test_insufficient_data(self):
        ds = Dataset(np.zeros((3, 2)), np.ones(3))
        with pytest.raises(InputError):
            split_folds(ds, 2, 2, 3, seed=0)


class TestInstanceAssembly:
    def test_dimensions(self):
        _, _, inst = make_instance()
        assert inst.n == 2 * 2 * (2 + 3) + 1 == 21
        assert inst.A.shape == (4, 6)
        assert inst.B.shape == (6, 6)

    def test_block_diagonal_structure(self):
        _, _, inst = make_instance()
        # fold 0 rows live in fold 0 feature columns only
        assert np.all(inst.A[:2, 3:] == 0.0)
        assert np.all(inst.A[2:, :3] == 0.0)
        assert np.all(inst.B[:3, 3:] == 0.0)
        assert np.all(inst.B[3:, :3] == 0.0)

    def test_constraint_values_match_entrywise_oracle(self):
        """G/H values from the matrices equal hand-computed per-sample values."""
        dataset, split, inst = make_instance(seed=3)
        rng = np.random.default_rng(7)
        point = BhoPoint(1.7, rng.uniform(size=4), rng.uniform(size=4),
                         rng.uniform(size=6), rng.uniform(size=6))
        ev = to_evaluation(inst, point)
        T, m1, m2 = split.T, split.m1, split.m2
        nv, nt = T * m1, T * m2
        for t in range(T):
            w = np.zeros(dataset.n_features)
            for r, k in enumerate(split.training[t]):
                w += point.alpha[t * m2 + r] * dataset.labels[k] * dataset.features[k]
            for r, k in enumerate(split.validation[t]):
                i = t * m1 + r
                margin = dataset.labels[k] * float(dataset.features[k] @ w)
                assert ev.G_vals[i] == pytest.approx(point.z[i] + margin, rel=1e-12, abs=1e-12)
                assert ev.G_vals[nv + i] == pytest.approx(1.0 - point.zeta[i], abs=1e-12)
                assert ev.H_vals[i] == pytest.approx(point.zeta[i], abs=1e-12)
                assert ev.H_vals[nv + i] == pytest.approx(point.z[i], abs=1e-12)
            for r, k in enumerate(split.training[t]):
                j = t * m2 + r
                sj = dataset.labels[k] * float(dataset.features[k] @ w)
                assert ev.G_vals[2 * nv + j] == pytest.approx(
                    sj - 1.0 + point.xi[j], rel=1e-12, abs=1e-12)
                assert ev.G_vals[2 * nv + nt + j] == pytest.approx(
                    point.C - point.alpha[j], abs=1e-12)
                assert ev.H_vals[2 * nv + j] == pytest.approx(point.alpha[j], abs=1e-12)
                assert ev.H_vals[2 * nv + nt + j] == pytest.approx(point.xi[j], abs=1e-12)

    def test_constraint_matrices_reproduce_evaluation(self):
        _, _, inst = make_instance(seed=4)
        P, a, Q = inst.constraint_matrices()
        rng = np.random.default_rng(0)
        point = BhoPoint(0.8, rng.uniform(size=4), rng.uniform(size=4),
                         rng.uniform(size=6), rng.uniform(size=6))
        v = point.to_vector()
        ev = to_evaluation(inst, point)
        np.testing.assert_allclose(P @ v + a, ev.G_vals, rtol=0, atol=1e-14)
        np.testing.assert_array_equal(Q @ v, v[1:])
        np.testing.assert_array_equal(np.asarray(ev.H_vals), v[1:])
        np.testing.assert_allclose(np.asarray(ev.G_grads), P, rtol=0, atol=0)

    def test_round_trip(self):
        _, _, inst = make_instance()
        again = BhoInstance.from_dict(inst.to_dict())
        assert again.T == inst.T and again.p == inst.p
        np.testing.assert_array_equal(again.A, inst.A)
        np.testing.assert_array_equal(again.B, inst.B)


class TestLowerLevelSolve:
    def test_zero_penalty_gives_zero(self):
        _, _, inst = make_instance()
        np.testing.assert_array_equal(lower_level_solve(inst, 0, 0.0), np.zeros(3))

    def test_scalar_fold_analytic(self):
        # single training sample with |b|^2 = 4: unconstrained optimum 1/4
        inst = BhoInstance(1, 1, 1, 1, np.array([[1.0]]), np.array([[2.0]]))
        alpha = lower_level_solve(inst, 0, 10.0)
        assert alpha[0] == pytest.approx(0.25, abs=1e-9)
        # small box clips at the bound
        alpha = lower_level_solve(inst, 0, 0.1)
        assert alpha[0] == pytest.approx(0.1, abs=1e-12)

    def test_negative_penalty_rejected(self):
        _, _, inst = make_instance()
        with pytest.raises(InputError):
            lower_level_solve(inst, 0, -1.0)

    def test_budget_exhaustion_raises_with_residual(self):
        _, _, inst = make_instance()
        with pytest.raises(ConvergenceError) as exc:
            lower_level_solve(inst, 0, 1.0, budget=1)
        assert exc.value.residual > 0

    @pytest.mark.parametrize("seed,C", [(0, 0.5), (1, 1.0), (2, 10.0), (3, 0.05)])
    def test_kkt_residual_small(self, seed, C):
        _, _, inst = make_instance(seed=seed)
        for t in range(inst.T):
            alpha = lower_level_solve(inst, t, C)
            K = inst.fold_training_gram(t)
            grad = K @ alpha - 1.0
            residual = np.abs(alpha - np.clip(alpha - grad, 0.0, C)).max()
            assert residual <= 1e-9
            assert alpha.min() >= 0.0 and alpha.max() <= C


class TestAssembly:
    def test_assembled_point_is_feasible(self):
        _, _, inst = make_instance(seed=5)
        alphas = solve_all_folds(inst, 1.0)
        point, flags = assemble_feasible_point(inst, 1.0, alphas, TOL)
        assert check_feasibility(to_evaluation(inst, point), TOL).feasible

    def test_zero_margin_is_flagged(self):
        # the single validation sample is orthogonal to all training samples
        X = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        ds = Dataset(X, np.ones(3))
        split = FoldSplit(1, 1, 2, ((2,),), ((0, 1),), 0)
        inst = BhoInstance.from_dataset(ds, split)
        alphas = solve_all_folds(inst, 1.0)
        point, flags = assemble_feasible_point(inst, 1.0, alphas, TOL)
        assert flags == (0,)
        lp = classify_lambda_psi(inst, point, TOL)
        assert ("pair1_biactive", 0) in lp.assumption_flags


class TestActivityClasses:
    def test_exemplar_classes(self):
        instance, C, alphas = exemplar_instance()
        point, flags = assemble_feasible_point(instance, C, alphas, TOL)
        assert flags == ()
        lp = classify_lambda_psi(instance, point, TOL)
        assert lp.lam3_c == (0,)
        assert lp.lam1 == (1,)
        assert lp.lam2 == lp.lam3_plus == lp.lam_u == ()
        assert lp.psi2 == (0,) and lp.psi3 == (1,)
        assert lp.assumption_flags == ()
        # biactive charts follow the classes
        assert lp.i_gh3 == (1,) and lp.i_gh4 == (0,)
        assert lp.lam3 == (0,)

    def test_slack_and_interior_classes(self):
        # training rows (1,0) and (2,0): optimum alpha = (1, 0) at C = 1
        # puts index 0 at the bound with margin 1 and index 1 inactive
        # with margin 2 > 1
        A = np.array([[1.0, 0.0]])
        B = np.array([[1.0, 0.0], [2.0, 0.0]])
        instance = BhoInstance(1, 1, 2, 2, A, B)
        point, _ = assemble_feasible_point(instance, 1.0, [np.array([1.0, 0.0])], TOL)
        lp = classify_lambda_psi(instance, point, TOL)
        assert lp.lam3_c == (0,) and lp.lam2 == (1,)
        # scalar Gram 4: interior optimum 1/4 at large C, slack bound at small C
        inst1 = BhoInstance(1, 1, 1, 1, np.array([[1.0]]), np.array([[2.0]]))
        pt, _ = assemble_feasible_point(inst1, 10.0, [np.array([0.25])], TOL)
        assert classify_lambda_psi(inst1, pt, TOL).lam3_plus == (0,)
        pt, _ = assemble_feasible_point(inst1, 0.1, [np.array([0.1])], TOL)
        assert classify_lambda_psi(inst1, pt, TOL).lam_u == (0,)

    def test_inconsistent_point_rejected(self):
        # interior alpha whose optimality residual is far from zero
        instance = BhoInstance(1, 1, 2, 2, np.array([[1.0, 0.0]]), np.eye(2))
        point = BhoPoint(1.0, np.zeros(1), np.zeros(1),
                         np.array([0.5, 0.0]), np.zeros(2))
        with pytest.raises(ClassificationError):
            classify_lambda_psi(instance, point, TOL)

    def test_solved_points_classify_cleanly(self):
        for seed in range(4):
            _, _, inst = make_instance(seed=seed)
            alphas = solve_all_folds(inst, 1.0)
            point, flags = assemble_feasible_point(inst, 1.0, alphas, TOL)
            lp = classify_lambda_psi(inst, point, TOL)
            counted = (len(lp.lam1) + len(lp.lam2) + len(lp.lam3_plus)
                       + len(lp.lam3_c) + len(lp.lam_u))
            assert counted == inst.n_training
            assert len(lp.psi2) + len(lp.psi3) + len(lp.assumption_flags) \
                == inst.n_validation


class TestIndexCharts:
    @pytest.mark.parametrize("seed,C", [(0, 1.0), (1, 0.3), (2, 3.0), (5, 0.1)])
    def test_structured_sets_match_generic(self, seed, C):
        _, _, inst = make_instance(seed=seed)
        alphas = solve_all_folds(inst, C)
        point, flags = assemble_feasible_point(inst, C, alphas, TOL)
        lp = classify_lambda_psi(inst, point, TOL)
        if lp.assumption_flags:
            pytest.skip("distinct-classification assumption violated")
        sets = structured_index_sets(inst, lp)
        pattern = classify_active(to_evaluation(inst, point), TOL)
        assert sets["I_G"] == pattern.I_G
        assert sets["I_H"] == pattern.I_H
        assert sets["I_GH"] == pattern.I_GH

    def test_exemplar_sets_by_hand(self):
        instance, C, alphas = exemplar_instance()
        point, _ = assemble_feasible_point(instance, C, alphas, TOL)
        lp = classify_lambda_psi(instance, point, TOL)
        sets = structured_index_sets(instance, lp)
        # pairs: family 1 at 0..1, family 2 at 2..3, family 3 at 4..5,
        # family 4 at 6..7; biactive: family 3 of index 1, family 4 of index 0
        assert sets["I_GH"] == (5, 6)
        assert sets["I_G"] == (1, 3, 4)
        assert sets["I_H"] == (0, 2, 7)

    @pytest.mark.parametrize("seed,C", [(0, 1.0), (3, 0.5), (4, 2.0)])
    def test_gamma_matches_generic_bundle(self, seed, C):
        _, _, inst = make_instance(seed=seed)
        alphas = solve_all_folds(inst, C)
        point, flags = assemble_feasible_point(inst, C, alphas, TOL)
        lp = classify_lambda_psi(inst, point, TOL)
        if lp.assumption_flags:
            pytest.skip("distinct-classification assumption violated")
        gm = assemble_gamma(inst, lp)
        assert gm.identity_ok
        ev = to_evaluation(inst, point)
        assert gamma_matches_generic(gm, ev, classify_active(ev, TOL))

    def test_gamma_exemplar_rows_and_count(self):
        instance, C, alphas = exemplar_instance()
        point, _ = assemble_feasible_point(instance, C, alphas, TOL)
        lp = classify_lambda_psi(instance, point, TOL)
        gm = assemble_gamma(instance, lp)
        # n = 9, |I_G| = |I_H| = 3: row count 2*8 - 6 = 10
        assert gm.matrix.shape == (10, 9)
        assert gm.identity_ok
        labels = {prov[0] for prov in gm.provenance}
        assert labels == {"I_G1", "I_H1", "I_G2", "I_H2", "I_G3_bound",
                          "I_GH3_G", "I_GH3_H", "I_GH4_G", "I_GH4_H", "I_H4"}
        ev = to_evaluation(instance, point)
        assert gamma_matches_generic(gm, ev, classify_active(ev, TOL))

    def test_zero_feature_dataset_flags_everything(self):
        ds = Dataset(np.zeros((6, 2)), np.ones(6))
        split = split_folds(ds, 1, 2, 3, seed=0)
        inst = BhoInstance.from_dataset(ds, split)
        alphas = solve_all_folds(inst, 1.0)  # zero Gram: alpha hits the bound
        point, flags = assemble_feasible_point(inst, 1.0, alphas, TOL)
        assert flags == (0, 1)
        lp = classify_lambda_psi(inst, point, TOL)
        assert len(lp.assumption_flags) == 2
        assert lp.lam_u == (0, 1, 2)
        assert not assemble_gamma(inst, lp).identity_ok


class TestTheorems:
    @pytest.mark.parametrize("mode,case,seed", [
        ("plain", "no_biactive", 101), ("gh3", "single_gh3", 102),
        ("gh4", "single_gh4", 103), ("multi", "multi_biactive", 104),
        ("ahat0", "ahat_zero", 105)])
    def test_forced_branches_agree_with_generic(self, mode, case, seed):
        bundle = gen_bho_case(np.random.default_rng(seed), mode, TOL)
        point, flags = assemble_feasible_point(bundle.instance, bundle.C,
                                               bundle.alphas, TOL)
        lp = classify_lambda_psi(bundle.instance, point, TOL)
        thm = check_licq_theorem(bundle.instance, point, lp, TOL)
        if mode != "plain":
            assert thm.case == case
        if thm.status in ("holds", "fails"):
            ev = to_evaluation(bundle.instance, point)
            generic = check_mpec_licq(ev, classify_active(ev, TOL), TOL)
            assert generic.status == thm.status

    def test_exemplar_multi_biactive_fails(self):
        instance, C, alphas = exemplar_instance()
        point, _ = assemble_feasible_point(instance, C, alphas, TOL)
        lp = classify_lambda_psi(instance, point, TOL)
        thm = check_licq_theorem(instance, point, lp, TOL)
        assert thm.status == "fails" and thm.case == "multi_biactive"
        ev = to_evaluation(instance, point)
        assert check_mpec_licq(ev, classify_active(ev, TOL), TOL).status == "fails"

    def test_mfcq_r_theorem_confirmed_by_generic(self):
        hits = 0
        for seed in range(6):
            _, _, inst = make_instance(seed=seed)
            alphas = solve_all_folds(inst, 1.0)
            point, flags = assemble_feasible_point(inst, 1.0, alphas, TOL)
            lp = classify_lambda_psi(inst, point, TOL)
            thm = check_mfcq_r_theorem(inst, point, lp, TOL)
            if thm.status != "holds":
                continue
            hits += 1
            ev = to_evaluation(inst, point)
            assert check_mpec_mfcq_r(ev, classify_active(ev, TOL), TOL).status == "holds"
        assert hits > 0

    def test_flags_force_undecided(self):
        ds = Dataset(np.zeros((6, 2)), np.ones(6))
        split = split_folds(ds, 1, 2, 3, seed=0)
        inst = BhoInstance.from_dataset(ds, split)
        alphas = solve_all_folds(inst, 1.0)
        point, _ = assemble_feasible_point(inst, 1.0, alphas, TOL)
        lp = classify_lambda_psi(inst, point, TOL)
        assert check_licq_theorem(inst, point, lp, TOL).status == "undecided"
        assert check_mfcq_r_theorem(inst, point, lp, TOL).status == "undecided"


class TestValidationError:
    def test_hand_computed_case(self):
        # one training sample (2,0): alpha = 1/4, w = (1/2, 0); validation
        # samples (1,0) and (-1,1) with label +1 score margins +1/2 and -1/2
        X = np.array([[1.0, 0.0], [2.0, 0.0], [-1.0, 1.0]])
        ds = Dataset(X, np.ones(3))
        split = FoldSplit(1, 2, 1, ((0, 2),), ((1,),), 0)
        inst = BhoInstance.from_dataset(ds, split)
        alphas = solve_all_folds(inst, 1.0)
        assert alphas[0][0] == pytest.approx(0.25, abs=1e-9)
        point, flags = assemble_feasible_point(inst, 1.0, alphas, TOL)
        assert flags == ()
        np.testing.assert_array_equal(point.zeta, [0.0, 1.0])
        err = validation_error(inst, point)
        assert err == 0.5
        assert err == misclassification_oracle(ds, split, alphas)

    @pytest.mark.parametrize("seed,C", [(0, 1.0), (1, 0.2), (2, 5.0)])
    def test_matches_oracle_exactly(self, seed, C):
        dataset, split, inst = make_instance(seed=seed)
        alphas = solve_all_folds(inst, C)
        point, flags = assemble_feasible_point(inst, C, alphas, TOL)
        if flags:
            pytest.skip("flagged margins")
        assert validation_error(inst, point) == misclassification_oracle(
            dataset, split, alphas)
