"""Gaussian elimination with free variables.

Solves ``A x = f`` for finite complex systems and returns the whole
solution set as an affine parametrization: a particular solution (free
variables set to zero), one null-space vector per free column, and the
leftover right-hand side entries of eliminated rows, which must vanish
for the system to be solvable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import MomentError


class Inconsistent(MomentError):
    pass


@dataclass(frozen=True, eq=False)
class AffineSet:
    n_vars: int
    pivot_cols: tuple
    particular: np.ndarray
    null_basis: tuple
    consistency_residuals: tuple
    matrix: np.ndarray
    rhs: np.ndarray

    @property
    def free_cols(self) -> tuple:
        piv = set(self.pivot_cols)
        return tuple(c for c in range(self.n_vars) if c not in piv)

    @property
    def rank(self) -> int:
        return len(self.pivot_cols)

    def tolerance(self, tol_res: float) -> float:
        scale = 1.0
        if self.matrix.size:
            scale += float(np.abs(self.matrix).max())
        if self.rhs.size:
            scale += float(np.abs(self.rhs).max())
        return tol_res * scale

    def is_consistent(self, tol_res: float = 1e-9) -> bool:
        if not self.consistency_residuals:
            return True
        return max(abs(c) for c in self.consistency_residuals) <= self.tolerance(tol_res)

    def max_inconsistency(self) -> float:
        return max((abs(c) for c in self.consistency_residuals), default=0.0)

    def residual(self, x) -> float:
        if not self.matrix.size:
            return 0.0
        return float(np.abs(self.matrix @ np.asarray(x) - self.rhs).max())

    def null_matrix(self) -> np.ndarray:
        if not self.null_basis:
            return np.zeros((self.n_vars, 0), dtype=complex)
        return np.column_stack(self.null_basis)


def parametric_gauss(Amat, f, tol_pivot: float = 1e-10) -> AffineSet:
    """Row-echelon elimination with partial pivoting.

    A column whose largest remaining entry is at most
    ``tol_pivot * (1 + max|A|)`` is treated as zero and its variable is
    free.  Pivot variables are then eliminated upwards so each one is
    expressed through free variables only.
    """
    A0 = np.array(Amat, dtype=complex)
    if A0.ndim != 2:
        A0 = A0.reshape(-1, 0) if A0.size == 0 else np.atleast_2d(A0)
    f0 = np.array(f, dtype=complex).reshape(-1)
    rows, cols = A0.shape
    if f0.shape[0] != rows:
        raise ValueError(f"rhs length {f0.shape[0]} does not match {rows} rows")
    A = A0.copy()
    b = f0.copy()
    thresh = tol_pivot * (1.0 + (float(np.abs(A0).max()) if A0.size else 0.0))

    pivots: list[int] = []
    row = 0
    for c in range(cols):
        if row == rows:
            break
        p = row + int(np.argmax(np.abs(A[row:, c])))
        if abs(A[p, c]) <= thresh:
            A[row:, c] = 0.0
            continue
        if p != row:
            A[[row, p]] = A[[p, row]]
            b[[row, p]] = b[[p, row]]
        piv = A[row, c]
        A[row] /= piv
        b[row] /= piv
        below = A[row + 1:, c].copy()
        A[row + 1:] -= np.outer(below, A[row])
        b[row + 1:] -= below * b[row]
        A[row + 1:, c] = 0.0
        pivots.append(c)
        row += 1

    t = len(pivots)
    # back substitution: clear entries above each pivot, last pivot first
    for i in range(t - 1, -1, -1):
        c = pivots[i]
        above = A[:i, c].copy()
        A[:i] -= np.outer(above, A[i])
        b[:i] -= above * b[i]
        A[:i, c] = 0.0

    particular = np.zeros(cols, dtype=complex)
    for i, c in enumerate(pivots):
        particular[c] = b[i]
    piv_set = set(pivots)
    null = []
    for j in range(cols):
        if j in piv_set:
            continue
        v = np.zeros(cols, dtype=complex)
        v[j] = 1.0
        for i, c in enumerate(pivots):
            v[c] = -A[i, j]
        null.append(v)
    residuals = tuple(complex(x) for x in b[t:])
    return AffineSet(cols, tuple(pivots), particular, tuple(null), residuals, A0, f0)


def affine_sample(aset: AffineSet, assignment: Mapping[int, complex] | None = None,
                  tol_res: float = 1e-9) -> np.ndarray:
    """``particular + sum_j assignment[j] * null_j``; unassigned free columns stay 0."""
    if not aset.is_consistent(tol_res):
        raise Inconsistent(f"system is inconsistent (residual {aset.max_inconsistency():.3e})")
    x = aset.particular.copy()
    if not assignment:
        return x
    free = aset.free_cols
    pos = {c: i for i, c in enumerate(free)}
    for col, val in assignment.items():
        if col not in pos:
            raise KeyError(f"column {col} is not free")
        x = x + val * aset.null_basis[pos[col]]
    return x


def stacked_solve(systems: Sequence[tuple], tol_pivot: float = 1e-10) -> AffineSet:
    """Intersect the solution sets of several systems sharing one variable layout."""
    mats, rhss = [], []
    n = None
    for Amat, f in systems:
        Amat = np.asarray(Amat, dtype=complex)
        if n is None:
            n = Amat.shape[1]
        elif Amat.shape[1] != n:
            raise ValueError("systems must share the variable layout")
        mats.append(Amat)
        rhss.append(np.asarray(f, dtype=complex).reshape(-1))
    if n is None:
        raise ValueError("no systems given")
    return parametric_gauss(np.vstack(mats), np.concatenate(rhss), tol_pivot)


def null_projector(aset: AffineSet) -> np.ndarray:
    """Orthogonal projector onto the null space spanned by ``aset.null_basis``."""
    N = aset.null_matrix()
    if N.shape[1] == 0:
        return np.zeros((aset.n_vars, aset.n_vars), dtype=complex)
    Q, _ = np.linalg.qr(N)
    return Q @ Q.conj().T
