import math

import numpy as np
import pytest
from hypothesis import given

from moment2d import (AtomicMeasure, BoxSpec, ExtIndex, OperatorPair, build_gram_extended, build_operators,
                      cayley, check_recurrences, gns_construct, joint_spectral_measure, match_measures,
                      moments_of_measure, solve_extended, torus_transform, trig_moment)
from moment2d.core import ZERO, ExtMomentTable
from moment2d.extended import cyclic_residual, operators_from_vectors, resolvent_residual

from conftest import measures

D00 = AtomicMeasure(((0.0, 0.0, 1.0),))
D12 = AtomicMeasure(((1.0, 2.0, 3.0),))
TWO = AtomicMeasure(((0.0, 0.0, 1.0), (1.0, 1.0, 1.0)))


def _pair(a, b, c):
    A, B = np.array([[a]], complex), np.array([[b]], complex)
    return OperatorPair(A, B, np.array([c], complex), 0.0, 0.0)


def test_recurrences_delta_origin():
    u = moments_of_measure(D00, BoxSpec(2, 2, 2))
    rep = check_recurrences(u)
    assert rep.passed and rep.max_residual <= 1e-12 and rep.checked > 0


def test_recurrence_perturbation_located():
    u = moments_of_measure(D00, BoxSpec(2, 2, 2))
    idx = ExtIndex(1, 0, 0, 0, 0, 0)
    bad = u.with_entry(idx, u[idx] + 0.1)
    rep = check_recurrences(bad)
    assert not rep.passed
    assert rep.max_residual == pytest.approx(0.1, abs=1e-12)
    hits = {(v[0], v[1]) for v in rep.violations}
    assert (ZERO, "k") in hits and (ZERO, "l") in hits


def test_recurrence_empty_box():
    rep = check_recurrences(moments_of_measure(D00, BoxSpec(0, 0, 0)))
    assert rep.empty and rep.passed


def _gns(mu, box=BoxSpec(2, 2, 2), sub=BoxSpec(1, 1, 1)):
    return gns_construct(build_gram_extended(moments_of_measure(mu, box), sub))


def test_operators_single_atom():
    g = _gns(AtomicMeasure(((2.0, 0.0, 1.0),)))
    P = build_operators(g)
    assert P.dim == 1
    assert P.A[0, 0] == pytest.approx(2.0) and abs(P.B[0, 0]) < 1e-12
    assert np.allclose(P.A @ g.coords(ZERO), g.coords(ExtIndex(1, 0, 0, 0, 0, 0)))


def test_operators_two_atoms():
    P = build_operators(_gns(TWO))
    assert np.allclose(np.linalg.eigvalsh(P.A), [0, 1])
    assert np.allclose(np.linalg.eigvalsh(P.B), [0, 1])


def test_cayley_scalars():
    assert cayley(_pair(0, 0, 1)).UA[0, 0] == pytest.approx(-1)
    assert cayley(_pair(2, 0, 1)).UA[0, 0] == pytest.approx((3 - 4j) / 5)


def test_spectral_measure_examples():
    mu = joint_spectral_measure(_pair(2, 0, math.sqrt(3)))
    assert mu.atoms == ((2.0, 0.0, pytest.approx(3.0)),)
    assert len(joint_spectral_measure(_pair(2, 0, 0))) == 0
    P = build_operators(_gns(TWO))
    loc, w = match_measures(joint_spectral_measure(P), TWO)
    assert loc <= 1e-8 and w <= 1e-8


def test_spectral_measure_degenerate_A():
    # A has a double eigenvalue; B separates the atoms
    mu = AtomicMeasure(((1.0, -1.0, 1.0), (1.0, 2.0, 0.5), (-2.0, 0.0, 2.0)))
    P = build_operators(_gns(mu))
    loc, w = match_measures(joint_spectral_measure(P, seed=3), mu)
    assert loc <= 1e-8 and w <= 1e-8


def test_solve_extended_examples():
    sol = solve_extended(moments_of_measure(D12, BoxSpec(2, 2, 2)))
    assert sol.success and sol.report.reconstruction_residual <= 1e-8
    loc, w = match_measures(sol.measure, D12)
    assert loc <= 1e-8 and w <= 1e-8
    sol = solve_extended(moments_of_measure(AtomicMeasure(), BoxSpec(2, 2, 2)))
    assert sol.success and len(sol.measure) == 0
    u = moments_of_measure(D12, BoxSpec(2, 2, 2))
    bad = u.with_entry(ExtIndex(0, 1, 0, 0, 0, 0), u[ExtIndex(0, 1, 0, 0, 0, 0)] + 0.5j)
    sol = solve_extended(bad)
    assert not sol.success and sol.report.failed_stage == "hermitian"


def test_solve_extended_reports_recurrence_failure():
    u = moments_of_measure(TWO, BoxSpec(2, 2, 2))
    idx = ExtIndex(2, 0, 0, 2, 0, 0)
    sol = solve_extended(u.with_entry(idx, u[idx] + 0.05))
    assert not sol.success and sol.report.failed_stage in ("psd", "recurrence")


def test_torus_examples():
    (phi, psi, w), = torus_transform(D00)
    assert phi == pytest.approx(math.pi) and psi == pytest.approx(math.pi)
    atoms = torus_transform(D00)
    for k in range(-3, 4):
        for l in range(-3, 4):
            assert trig_moment(atoms, k, l) == pytest.approx((-1) ** (k + l))
    assert trig_moment(torus_transform(TWO), 0, 0) == pytest.approx(2.0)


def test_operators_from_vectors_matches_gns():
    g = _gns(TWO)
    vecs = {i: g.coords(i) for i in g.index_list}
    P = operators_from_vectors(vecs)
    loc, w = match_measures(joint_spectral_measure(P), TWO)
    assert loc <= 1e-8 and w <= 1e-8


@given(measures(1, 6))
def test_oracle_operator_identities(mu):
    u = moments_of_measure(mu, BoxSpec(2, 2, 3))
    sol = solve_extended(u, BoxSpec(1, 1, 1))
    assert sol.success, sol.report.message
    P, C = sol.operators, sol.cayley
    assert P.sym_residual <= 1e-8 and P.comm_residual <= 1e-8
    assert C.unitarity_residual <= 1e-10 and C.comm_residual <= 1e-9
    assert resolvent_residual(sol.gns, P) <= 1e-8
    assert cyclic_residual(sol.gns, P) <= 1e-7
    loc, w = match_measures(sol.measure, mu)
    assert loc <= 1e-7 and w <= 1e-7


@given(measures(1, 6))
def test_recurrences_hold_on_oracles(mu):
    u = moments_of_measure(mu, BoxSpec(2, 2, 2))
    assert check_recurrences(u).max_residual <= 1e-9 * (1 + u.max_abs())


@given(measures(1, 4))
def test_trig_moments_match_table(mu):
    u = moments_of_measure(mu, BoxSpec(0, 0, 3))
    atoms = torus_transform(mu)
    for k in range(-3, 4):
        for l in range(-3, 4):
            if abs(k) <= 3 and abs(l) <= 3:
                ref = u[ExtIndex(0, k, -k, 0, l, -l)] if max(abs(k), abs(l)) <= 3 else None
                assert abs(trig_moment(atoms, k, l) - ref) <= 1e-8 * (1 + abs(ref))
