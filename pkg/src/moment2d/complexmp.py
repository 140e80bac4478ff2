"""Complex moments ``a[m, n]`` of ``z^m conj(z)^n`` and their real 2D counterparts.

With ``z = x1 + i x2`` both tables are related by binomial changes of basis.
Binomials are exact integers; powers of ``i`` are reduced mod 4.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

from .config import RunConfig
from .core import AtomicMeasure, ComplexMomentTable, MomentError, MomentTable2D, pair_indices
from .extended import solve_extended

MAX_DEGREE = 20
_I_POW = (1, 1j, -1, -1j)


class ConsistencyFail(MomentError):
    """The complex table is not the moment table of any measure in the plane."""


def _check_degree(deg: int):
    if deg > MAX_DEGREE:
        raise ValueError(f"degree {deg} exceeds the supported maximum {MAX_DEGREE}")


def complex_to_real(a: ComplexMomentTable) -> MomentTable2D:
    """``s[m,n] = 2^-m (2i)^-n sum_{k,j} (-1)^{n-j} C(m,k) C(n,j) a[k+j, m-k+n-j]``."""
    _check_degree(a.degree)
    out = {}
    for m, n in pair_indices(a.degree, a.rectangular):
        acc = 0j
        for k in range(m + 1):
            ck = comb(m, k)
            for j in range(n + 1):
                c = ck * comb(n, j) * (-1 if (n - j) % 2 else 1)
                acc += c * a[(k + j, m - k + n - j)]
        # (2i)^-n = 2^-n (-i)^n
        out[(m, n)] = acc * _I_POW[(-n) % 4] / 2 ** (m + n)
    return MomentTable2D(a.degree, out, a.rectangular)


def real_to_complex(s: MomentTable2D) -> ComplexMomentTable:
    """``a[m,n] = sum_{r,l} C(m,r) C(n,l) (-1)^{n-l} i^{m-r+n-l} s[r+l, m-r+n-l]``."""
    _check_degree(s.degree)
    out = {}
    for m, n in pair_indices(s.degree, s.rectangular):
        acc = 0j
        for r in range(m + 1):
            cr = comb(m, r)
            for l in range(n + 1):
                c = cr * comb(n, l) * (-1 if (n - l) % 2 else 1)
                acc += c * _I_POW[(m - r + n - l) % 4] * s[(r + l, m - r + n - l)]
        out[(m, n)] = acc
    return ComplexMomentTable(s.degree, out, s.rectangular)


def complex_moments_of_measure(mu: AtomicMeasure, degree: int) -> ComplexMomentTable:
    ent = {}
    for m, n in pair_indices(degree):
        ent[(m, n)] = complex(sum(w * z ** m * z.conjugate() ** n for z, w in mu.complex_atoms()))
    return ComplexMomentTable(degree, ent)


@dataclass
class ComplexSolution:
    measures: list
    report: dict


def consistency_residuals(a: ComplexMomentTable) -> tuple[float, float]:
    """(roundtrip residual, max |Im s|) for the real table attached to ``a``."""
    s = complex_to_real(a)
    back = real_to_complex(s)
    rt = max(abs(back[k] - a[k]) for k in a.keys())
    im = max(abs(v.imag) for v in s.entries.values())
    return rt, im


def solve_complex(a: ComplexMomentTable, config: RunConfig | None = None,
                  tol: float = 1e-9) -> ComplexSolution:
    """Measures on the complex plane with moments ``a``.

    The real table must be real-valued (equivalently ``a`` is conjugation
    symmetric) and convert back to ``a``; otherwise :class:`ConsistencyFail`.
    The real problem is then handled by :func:`run_algorithm`, and each
    candidate's atoms are read as ``z = x1 + i x2``.
    """
    from .algorithm import run_algorithm

    cfg = config or RunConfig()
    scale = 1.0 + a.max_abs()
    rt, im = consistency_residuals(a)
    if rt > tol * scale:
        raise ConsistencyFail(f"conversion roundtrip residual {rt:.3e}")
    if im > tol * scale:
        raise ConsistencyFail(f"real moments have imaginary part {im:.3e}; "
                              f"conjugation symmetry a[n,m] = conj(a[m,n]) fails")
    s = complex_to_real(a)
    s = MomentTable2D(s.degree, {k: complex(v.real) for k, v in s.entries.items()}, s.rectangular)
    res = run_algorithm(s, cfg.depth, cfg)
    report = res.to_dict()
    report["roundtrip_residual"] = rt
    report["imaginary_residual"] = im
    return ComplexSolution([c.measure for c in res.candidates], report)


def solve_complex_extended(a: ComplexMomentTable, u, config: RunConfig | None = None) -> ComplexSolution:
    """Oracle-grade route: ``a`` together with a completed extended table ``u``."""
    cfg = config or RunConfig()
    rt, im = consistency_residuals(a)
    if max(rt, im) > 1e-9 * (1.0 + a.max_abs()):
        raise ConsistencyFail(f"complex table inconsistent (roundtrip {rt:.3e}, imaginary {im:.3e})")
    sol = solve_extended(u, tol=cfg.tolerances())
    ms = [sol.measure] if sol.success else []
    return ComplexSolution(ms, sol.report.to_dict())
