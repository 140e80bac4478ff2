import numpy as np
import pytest
from hypothesis import given, strategies as st

from moment2d import AtomicMeasure, ComplexMomentTable, MomentTable2D, match_measures, real_moments_of_measure
from moment2d.complexmp import (MAX_DEGREE, ConsistencyFail, complex_moments_of_measure, complex_to_real,
                                consistency_residuals, real_to_complex, solve_complex)
from moment2d.core import pair_indices

from conftest import measures


def _table(deg, fn, cls=ComplexMomentTable):
    return cls(deg, {k: complex(fn(*k)) for k in pair_indices(deg)})


def test_delta_at_i():
    a = _table(4, lambda m, n: 1j ** (m - n))
    s = complex_to_real(a)
    assert s[(0, 1)] == pytest.approx(1)
    ref = real_moments_of_measure(AtomicMeasure(((0.0, 1.0, 1.0),)), 4)
    for k in s.keys():
        assert abs(s[k] - ref[k]) <= 1e-12


def test_delta_at_one():
    s = complex_to_real(_table(5, lambda m, n: 1.0))
    for m, n in s.keys():
        assert abs(s[(m, n)] - (1.0 if n == 0 else 0.0)) <= 1e-12


def test_constant_entry_exact():
    a = _table(0, lambda m, n: 2.5 - 1j)
    assert complex_to_real(a)[(0, 0)] == 2.5 - 1j
    s = real_moments_of_measure(AtomicMeasure(((1.0, 2.0, 3.0),)), 3)
    a = real_to_complex(s)
    assert a[(0, 0)] == s[(0, 0)]
    assert a[(1, 0)] == pytest.approx(3 + 6j)


def test_degree_cap():
    with pytest.raises(ValueError):
        complex_to_real(_table(MAX_DEGREE + 1, lambda m, n: 0.0))


@given(st.integers(0, 8), st.integers(0, 2 ** 31 - 1))
def test_roundtrip_random_tables(deg, seed):
    rng = np.random.default_rng(seed)
    a = ComplexMomentTable(deg, {k: complex(*rng.normal(size=2)) for k in pair_indices(deg)})
    back = real_to_complex(complex_to_real(a))
    assert max(abs(back[k] - a[k]) for k in a.keys()) <= 1e-9 * (1 + a.max_abs())
    s = MomentTable2D(deg, {k: complex(rng.normal()) for k in pair_indices(deg)})
    back = complex_to_real(real_to_complex(s))
    assert max(abs(back[k] - s[k]) for k in s.keys()) <= 1e-9 * (1 + s.max_abs())


@given(measures(1, 4), st.integers(0, 6))
def test_measure_tables_correspond(mu, deg):
    a = complex_moments_of_measure(mu, deg)
    s = complex_to_real(a)
    ref = real_moments_of_measure(mu, deg)
    for k in ref.keys():
        assert abs(s[k] - ref[k]) <= 1e-9 * (1 + ref.max_abs())
    assert consistency_residuals(a)[1] <= 1e-9 * (1 + a.max_abs())


def test_solve_complex_point_mass():
    mu = AtomicMeasure.from_complex([(1 + 2j, 3.0)])
    sol = solve_complex(complex_moments_of_measure(mu, 4))
    assert sol.measures
    assert any(max(match_measures(m, mu)) <= 1e-6 for m in sol.measures)


def test_solve_complex_rejects_broken_symmetry():
    a = complex_moments_of_measure(AtomicMeasure.from_complex([(1 + 2j, 3.0)]), 2)
    bad = ComplexMomentTable(a.degree, {**a.entries, (0, 1): a[(0, 1)] + 0.5})
    with pytest.raises(ConsistencyFail):
        solve_complex(bad)


def test_solve_complex_zero():
    sol = solve_complex(_table(4, lambda m, n: 0.0))
    assert sol.measures and all(len(m) == 0 for m in sol.measures)
