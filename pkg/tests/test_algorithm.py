import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings

from moment2d import AtomicMeasure, ExtIndex, index_order, match_measures, random_measure, real_moments_of_measure
from moment2d.algorithm import (AgreementReport, StepState, assemble_step_system, build_model_space,
                                check_oracle_path, compute_M_bound, in_step_set, modified_agreement,
                                oracle_state, oracle_vectors, run_algorithm, step0_check, step_solve,
                                step_solve_modified)
from moment2d.config import RunConfig
from moment2d.gram import NotPsd

from conftest import measures

D00 = AtomicMeasure(((0.0, 0.0, 1.0),))
D12 = AtomicMeasure(((1.0, 2.0, 3.0),))
TWO = AtomicMeasure(((0.0, 0.0, 1.0), (1.0, 1.0, 1.0)))


def test_model_space_dims():
    ms = build_model_space(real_moments_of_measure(D00, 2))
    assert ms.h0_dim == 1
    assert np.allclose(np.abs(ms.h0[(0, 0)]), [1])
    assert build_model_space(real_moments_of_measure(D12, 2)).h0_dim == 1
    assert build_model_space(real_moments_of_measure(TWO, 2)).h0_dim == 2
    with pytest.raises(NotPsd):
        build_model_space(real_moments_of_measure(TWO, 2).with_entry((0, 0), -1.0))


def test_h0_reproduces_kernel():
    mu = random_measure(4, 5)
    s = real_moments_of_measure(mu, 6)
    ms = build_model_space(s)
    for a, b in itertools.product(ms.h0, repeat=2):
        assert abs(np.vdot(ms.h0[b], ms.h0[a]) - s[(a[0] + b[0], a[1] + b[1])]) <= 1e-8 * (1 + s.max_abs())


def test_M_bound_examples():
    s = real_moments_of_measure(D12, 4)
    assert compute_M_bound(s, ExtIndex(0, 1, 0, 0, 0, 0)) == 6
    assert compute_M_bound(s, ExtIndex(0, -1, 0, 0, 0, 0)) == 3
    assert compute_M_bound(s, ExtIndex(1, 0, 0, 1, 0, 0)) == s[(2, 2)]


def test_M_bound_dominates_oracle_norms():
    mu = random_measure(11, 4)
    s = real_moments_of_measure(mu, 8)
    ms = build_model_space(s)
    for j, (z, d, _) in enumerate(oracle_vectors(ms, mu, 8), start=1):
        assert d <= compute_M_bound(s, index_order(j)) * (1 + 1e-12)


def test_step0_examples():
    s = real_moments_of_measure(TWO, 4)
    rep = step0_check(build_model_space(s))
    assert rep.passed and max(rep.pairing_residual, rep.shift_residual) <= 1e-9
    bad = s.with_entry((1, 0), s[(1, 0)] + 1e-2)
    rep = step0_check(build_model_space(bad, check_psd=False), bad)
    assert not rep.passed and rep.pairing_residual > rep.tolerance
    zero = real_moments_of_measure(AtomicMeasure(), 4)
    assert step0_check(build_model_space(zero)).passed


@given(measures(1, 5))
def test_step0_passes_on_oracles(mu):
    s = real_moments_of_measure(mu, 4)
    assert step0_check(build_model_space(s)).passed


def test_step1_delta_origin():
    s = real_moments_of_measure(D00, 2)
    ms = build_model_space(s)
    st = ms.initial_state()
    sys = assemble_step_system(ms, st, 1)
    assert sys.Amat.shape[0] > 0 and sys.n_vars == 3
    M = compute_M_bound(s, index_order(1))
    res = step_solve(ms, st, sys, M)
    assert res.consistent and res.states
    (z, d, beta), = oracle_vectors(ms, D00, 1)
    w = index_order(1)
    assert any(np.abs(c.vecs[w][:-1] - z).max() <= 1e-8 and abs(c.d_values[0] - d) <= 1e-8 for c in res.states)
    assert all(c.d_values[-1] <= M * (1 + 1e-9) for c in res.states)


def test_empty_system_when_nothing_constrains():
    ms = build_model_space(real_moments_of_measure(D00, 0))
    sys = assemble_step_system(ms, ms.initial_state(), 1)
    assert sys.Amat.shape[0] == 0
    res = step_solve(ms, ms.initial_state(), sys, math.inf)
    assert res.consistent and len(res.aset.free_cols) == sys.n_vars


def test_inconsistent_system_gives_empty_step():
    ms = build_model_space(real_moments_of_measure(D00, 2))
    st = ms.initial_state()
    sys = assemble_step_system(ms, st, 1)
    broken = type(sys)(sys.r, sys.w, np.vstack([sys.Amat, np.zeros((1, sys.n_vars))]),
                       np.append(sys.f, 1.0), sys.n_z, sys.active, sys.labels + (("broken",),))
    res = step_solve(ms, st, broken, 10.0)
    assert not res.consistent and res.states == [] and res.inconsistency == pytest.approx(1.0)


def test_run_algorithm_delta_origin():
    res = run_algorithm(real_moments_of_measure(D00, 2), 1)
    assert res.verdict == "Candidates"
    assert any(abs(c.table[(0, 1, 0, 0, 0, 0)] - 1j) <= 1e-9 for c in res.candidates)


def test_run_algorithm_rejects_negative_mass():
    s = real_moments_of_measure(TWO, 4).with_entry((0, 0), -1.0)
    res = run_algorithm(s, 2)
    assert res.verdict == "NoSolution" and res.stage == "step0" and not res.candidates


def test_run_algorithm_two_atoms():
    s = real_moments_of_measure(TWO, 4)
    res = run_algorithm(s, 2)
    assert res.verdict == "Candidates"
    assert any(max(match_measures(c.measure, TWO)) <= 1e-6 for c in res.candidates)
    for c in res.candidates:
        for key in s.keys():
            assert abs(real_moments_of_measure(c.measure, 4)[key] - s[key]) <= 1e-6 * (1 + s.max_abs())


def test_depth_zero_on_non_flat_data():
    s = real_moments_of_measure(random_measure(5, 6), 4)
    res = run_algorithm(s, 0)
    assert res.verdict == "NoCandidate" and not res.candidates


def test_oracle_path_survives():
    mu = random_measure(2, 3)
    ms = build_model_space(real_moments_of_measure(mu, 6))
    rep = check_oracle_path(ms, mu, 5)
    assert rep.survived, rep
    assert max(rep.residuals) <= 1e-9


def test_modified_r1_branches_and_agreement():
    ms = build_model_space(real_moments_of_measure(D00, 2))
    root = StepState(0, ms.initial_state().vecs, (), (), ())
    res = step_solve_modified(ms, root, 1)
    assert set(res.branches) == {(0,), (1,)}
    assert sum(res.branches.values()) == len(res.states)
    rep = modified_agreement(ms, [root])
    assert rep.agree and rep.plain > 0 and rep.modified > 0


def test_forced_zero_beta_lands_in_zero_branch():
    ms = build_model_space(real_moments_of_measure(D00, 2))
    root = ms.initial_state()
    child = oracle_state(ms, D00, 1)
    assert child.beta_diag == (0.0,)
    assert in_step_set(ms, root, child)
    assert in_step_set(ms, root, child, pattern=(0,))
    assert not in_step_set(ms, root, child, pattern=(1,))


def test_pattern_count_doubles():
    mu = random_measure(8, 3)
    ms = build_model_space(real_moments_of_measure(mu, 6))
    cfg = RunConfig(flat_guess=False)
    seen = {()}
    parents = [StepState(0, ms.initial_state().vecs, (), (), ())]
    for r in (1, 2, 3):
        considered = set()
        nxt = []
        for p in parents:
            res = step_solve_modified(ms, p, r, None, cfg)
            considered |= set(res.branches)
            nxt += res.states
        assert considered == {q + (b,) for q in seen for b in (0, 1)}
        # every surviving pattern of length r-1 branches in two; with no pruning this is 2^r
        assert len(considered) == 2 * len(seen) <= 2 ** r
        by_pat = {c.sign_pattern: c for c in nxt}
        seen = set(by_pat)
        parents = list(by_pat.values())
        if not parents:
            break


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(tol_psd=0)
    with pytest.raises(ValueError):
        RunConfig(beam=0)
    assert RunConfig().with_(depth=5).depth == 5
