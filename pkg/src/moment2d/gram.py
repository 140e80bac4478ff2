"""Moment kernels, positivity certificates and the finite GNS space.

Inner products follow the convention linear in the first slot:
``<a, b> = b^H a``.  A GNS coordinate matrix ``X`` (one column per index)
therefore satisfies ``X[:, j]^H X[:, i] = G[i, j]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BoxSpec, ExtIndex, ExtMomentTable, MissingMoment, MomentError, MomentTable2D, enumerate_box, pair_indices


class NotHermitian(MomentError):
    pass


class NotPsd(MomentError):
    pass


@dataclass(frozen=True, eq=False)
class GramMatrix:
    index_list: tuple
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "index_list", tuple(self.index_list))

    @property
    def size(self) -> int:
        return len(self.index_list)

    def max_abs(self) -> float:
        return float(np.abs(self.entries).max()) if self.entries.size else 0.0

    def hermitian_residual(self) -> float:
        if not self.entries.size:
            return 0.0
        return float(np.abs(self.entries - self.entries.conj().T).max())


def build_gram_2d(s: MomentTable2D, deg: int, rectangular: bool = False) -> GramMatrix:
    """Hankel-type kernel ``G[(m,n), (m',n')] = s[m+m', n+n']``.

    Indices run over ``m + n <= deg`` (graded, larger m first) unless
    ``rectangular`` is set, in which case ``m, n <= deg``.
    """
    idx = pair_indices(deg, rectangular)
    N = len(idx)
    G = np.empty((N, N), dtype=complex)
    for a, (m, n) in enumerate(idx):
        for b, (mm, nn) in enumerate(idx):
            G[a, b] = s[(m + mm, n + nn)]
    return GramMatrix(idx, G)


def build_gram_extended(u: ExtMomentTable, sub_box: BoxSpec | None = None,
                        indices: Sequence[ExtIndex] | None = None) -> GramMatrix:
    """Kernel ``G[i, j] = u[i.pair(j)]`` over ``enumerate_box(sub_box)``.

    ``sub_box`` defaults to ``u.box.half()``.  An explicit ``indices`` list
    overrides the box enumeration.
    """
    if indices is None:
        sub_box = u.box.half() if sub_box is None else sub_box
        indices = enumerate_box(sub_box)
    idx = np.array(indices, dtype=int).reshape(-1, 6)
    m, k, l, n, r, t = idx.T
    S = (m[:, None] + m[None, :], k[:, None] + l[None, :], l[:, None] + k[None, :],
         n[:, None] + n[None, :], r[:, None] + t[None, :], t[:, None] + r[None, :])
    box = u.box
    K = box.k_abs_max
    inside = ((S[0] <= box.m_max) & (S[3] <= box.n_max)
              & (np.abs(S[1]) <= K) & (np.abs(S[2]) <= K)
              & (np.abs(S[4]) <= K) & (np.abs(S[5]) <= K))
    if not inside.all():
        a, b = np.argwhere(~inside)[0]
        raise MissingMoment(ExtIndex(*(int(c[a, b]) for c in S)))
    G = u.values[S[0], S[1] + K, S[2] + K, S[3], S[4] + K, S[5] + K]
    return GramMatrix([ExtIndex(*map(int, row)) for row in idx], G)


@dataclass(frozen=True)
class PsdReport:
    is_psd: bool
    min_eig: float
    rank: int
    scale: float
    hermitian_residual: float

    @property
    def margin(self) -> float:
        """min eigenvalue relative to ``1 + max|G|``."""
        return self.min_eig / (1.0 + self.scale)


def _hermitian_eigh(G: GramMatrix, tol_sym: float):
    herm = G.hermitian_residual()
    scale = G.max_abs()
    if herm > tol_sym * (1.0 + scale):
        raise NotHermitian(f"Gram matrix is not Hermitian: residual {herm:.3e}")
    H = 0.5 * (G.entries + G.entries.conj().T)
    lam, V = np.linalg.eigh(H) if H.size else (np.zeros(0), np.zeros((0, 0), complex))
    return lam, V, herm, scale


def psd_check(G: GramMatrix, tol_psd: float = 1e-9, tol_rank: float = 1e-10,
              tol_sym: float = 1e-12) -> PsdReport:
    lam, _, herm, scale = _hermitian_eigh(G, tol_sym)
    if lam.size == 0:
        return PsdReport(True, 0.0, 0, scale, herm)
    lmax = max(float(lam[-1]), 0.0)
    rank = int(np.count_nonzero(lam > tol_rank * lmax)) if lmax > 0 else 0
    min_eig = float(lam[0])
    return PsdReport(min_eig >= -tol_psd * (1.0 + scale), min_eig, rank, scale, herm)


@dataclass(frozen=True, eq=False)
class GnsSpace:
    """Finite-rank realization of the moment kernel.

    ``X[:, c]`` are the coordinates of the vector attached to
    ``index_list[c]``; ``gram_check`` is ``max |X^T conj(X) - G|``.
    """

    index_list: tuple
    X: np.ndarray
    gram_check: float
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    _lookup: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "index_list", tuple(self.index_list))
        object.__setattr__(self, "_lookup", {idx: c for c, idx in enumerate(self.index_list)})

    @property
    def dim(self) -> int:
        return self.X.shape[0]

    def coords(self, idx) -> np.ndarray:
        return self.X[:, self._lookup[idx]]

    def __contains__(self, idx) -> bool:
        return idx in self._lookup

    def column(self, idx) -> int:
        return self._lookup[idx]

    def inner(self, a, b) -> complex:
        return complex(np.vdot(self.coords(b), self.coords(a)))


def gns_construct(G: GramMatrix, tol_rank: float = 1e-10, tol_psd: float = 1e-9,
                  tol_sym: float = 1e-12) -> GnsSpace:
    """Factor ``G`` through its dominant eigenpairs.

    With ``G = V diag(lam) V^H`` the kept columns give ``X = lam^{1/2} V^T``,
    so that ``<x_i, x_j> = x_j^H x_i = G[i, j]``.
    """
    lam, V, _, scale = _hermitian_eigh(G, tol_sym)
    if lam.size and lam[0] < -tol_psd * (1.0 + scale):
        raise NotPsd(f"Gram matrix has eigenvalue {lam[0]:.3e}")
    lmax = float(lam[-1]) if lam.size else 0.0
    keep = lam > tol_rank * lmax if lmax > 0 else np.zeros(lam.shape, bool)
    lam_k = lam[keep][::-1]
    V_k = V[:, keep][:, ::-1]
    X = np.sqrt(lam_k)[:, None] * V_k.T
    resid = float(np.abs(X.T @ X.conj() - G.entries).max()) if G.entries.size else 0.0
    return GnsSpace(G.index_list, X, resid, lam_k)
