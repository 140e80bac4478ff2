"""Extended moment problem at finite rank.

Pipeline: kernel -> positivity -> GNS -> shift recurrences -> operators
``A``, ``B`` (multiplication by x1, x2) -> joint eigendecomposition ->
atomic measure, followed by re-integration against the input table.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (ZERO, AtomicMeasure, BoxSpec, ExtIndex, ExtMomentTable, MomentError,
                   moments_of_measure)
from .gram import GnsSpace, NotHermitian, NotPsd, build_gram_extended, gns_construct, psd_check

log = logging.getLogger(__name__)


class CoreDeficient(MomentError):
    """Shift sources do not span the GNS space; the operator is under-determined."""


class NotSymmetric(MomentError):
    pass


class NotCommuting(MomentError):
    pass


class SingularShift(MomentError):
    pass


class DiagonalizationFailed(MomentError):
    pass


# (shifted field, base field, sign) for u[base+1] + sign*i*u = u[shifted+1]
RECURRENCES = (
    ("k", "m", +1),
    ("l", "m", -1),
    ("r", "n", +1),
    ("t", "n", -1),
)
_AXIS = {"m": 0, "k": 1, "l": 2, "n": 3, "r": 4, "t": 5}


@dataclass
class RecurrenceReport:
    max_residual: float
    violations: list
    checked: int
    tolerance: float

    @property
    def empty(self) -> bool:
        return self.checked == 0

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance


def check_recurrences(u: ExtMomentTable, tol: float | None = None,
                      max_violations: int = 100) -> RecurrenceReport:
    """Pointwise shift identities ``u[m+1] +- i u = u[k+1 or l+1]`` and the n-analogues.

    Only base indices whose two shifts both stay in the box are checked.
    ``tol`` defaults to ``1e-9 * (1 + max|u|)``.
    """
    if tol is None:
        tol = 1e-9 * (1.0 + u.max_abs())
    v = u.values
    K = u.box.k_abs_max
    worst = 0.0
    checked = 0
    violations = []
    for shifted, base, sign in RECURRENCES:
        ab, ash = _AXIS[base], _AXIS[shifted]
        lo = [slice(None)] * 6
        up_base = [slice(None)] * 6
        up_sh = [slice(None)] * 6
        for ax in (ab, ash):
            lo[ax] = slice(0, -1)
            up_base[ax] = slice(0, -1)
            up_sh[ax] = slice(0, -1)
        up_base[ab] = slice(1, None)
        up_sh[ash] = slice(1, None)
        if v.shape[ab] < 2 or v.shape[ash] < 2:
            continue
        res = np.abs(v[tuple(up_base)] + sign * 1j * v[tuple(lo)] - v[tuple(up_sh)])
        checked += res.size
        if res.size:
            worst = max(worst, float(res.max()))
            for off in np.argwhere(res > tol)[:max_violations - len(violations)]:
                m, k, l, n, r, t = (int(c) for c in off)
                idx = ExtIndex(m, k - K, l - K, n, r - K, t - K)
                violations.append((idx, shifted, float(res[tuple(off)])))
    if checked == 0:
        log.warning("no recurrence instance fits inside %s", u.box)
    return RecurrenceReport(worst, violations, checked, tol)


@dataclass(frozen=True, eq=False)
class OperatorPair:
    A: np.ndarray
    B: np.ndarray
    cyclic: np.ndarray
    sym_residual: float
    comm_residual: float
    fit_residual: float = 0.0
    # orthonormal columns expressing the operator basis in the caller's coordinates
    basis: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class CayleyPair:
    UA: np.ndarray
    UB: np.ndarray
    unitarity_residual: float
    comm_residual: float


def fit_shift_operator(sources: np.ndarray, images: np.ndarray,
                       tol_span: float = 1e-5) -> tuple[np.ndarray, float]:
    """Least-squares operator ``T`` with ``T @ sources = images``.

    Raises :class:`CoreDeficient` when the source columns fail to span the
    ambient space (relative singular value threshold ``tol_span``).
    Returns ``(T, max |T sources - images|)``.
    """
    dim = sources.shape[0]
    if dim == 0:
        return np.zeros((0, 0), dtype=complex), 0.0
    if sources.shape[1] < dim:
        raise CoreDeficient(f"{sources.shape[1]} sources for a {dim}-dimensional space")
    sv = np.linalg.svd(sources, compute_uv=False)
    if sv[dim - 1] <= tol_span * sv[0]:
        raise CoreDeficient(f"shift sources have numerical rank below {dim}")
    T = images @ np.linalg.pinv(sources, rcond=tol_span)
    return T, float(np.abs(T @ sources - images).max())


def _pair_residuals(A, B):
    sym = max(float(np.abs(A - A.conj().T).max()), float(np.abs(B - B.conj().T).max()))
    comm = float(np.abs(A @ B - B @ A).max())
    return sym, comm


def build_operators(gns: GnsSpace, tol_op: float = 1e-7, tol_span: float | None = None,
                    check: bool = True) -> OperatorPair:
    """Operators of multiplication by x1 and x2 on the GNS space.

    ``A`` maps the vector of each index whose ``m + 1`` shift is also
    realized onto the shifted vector; ``B`` does the same for ``n + 1``.
    """
    if tol_span is None:
        tol_span = 1e-5
    idx = gns.index_list
    present = set(idx)
    dim = gns.dim
    mats = []
    fit = 0.0
    for name in ("m", "n"):
        src = [i for i in idx if i.shift(name) in present]
        S = np.column_stack([gns.coords(i) for i in src]) if src else np.zeros((dim, 0))
        T = np.column_stack([gns.coords(i.shift(name)) for i in src]) if src else np.zeros((dim, 0))
        if dim and not src:
            raise CoreDeficient(f"no index admits a {name}+1 shift")
        op, res = fit_shift_operator(S, T, tol_span)
        mats.append(op)
        fit = max(fit, res)
    A, B = mats
    cyclic = gns.coords(ZERO) if ZERO in gns else np.zeros(dim, dtype=complex)
    return _finish_pair(A, B, cyclic, fit, tol_op, check)


def _finish_pair(A, B, cyclic, fit, tol_op, check):
    sym, comm = (0.0, 0.0) if A.size == 0 else _pair_residuals(A, B)
    if check and A.size:
        scale = 1.0 + max(float(np.abs(A).max()), float(np.abs(B).max()))
        if sym > tol_op * scale:
            raise NotSymmetric(f"shift operators not Hermitian: residual {sym:.3e}")
        if comm > tol_op * scale:
            raise NotCommuting(f"shift operators do not commute: residual {comm:.3e}")
    return OperatorPair(A, B, np.asarray(cyclic, dtype=complex), sym, comm, fit)


def operators_from_vectors(vectors: Mapping[ExtIndex, np.ndarray], tol_op: float = 1e-7,
                           tol_span: float = 1e-5, check: bool = True) -> OperatorPair:
    """Shift operators from a partial family of realized vectors.

    Every relation among known vectors is used: ``A x_i = x_{i+m}``,
    ``A x_i = x_{i+k} - i x_i`` and ``A x_i = x_{i+l} + i x_i`` (and the
    x2 analogues for ``B``).  The ambient space is the span of all vectors.
    """
    keys = list(vectors)
    if not keys:
        raise CoreDeficient("no vectors")
    n = max(len(vectors[i]) for i in keys)
    vectors = {i: np.pad(np.asarray(vectors[i], dtype=complex), (0, n - len(vectors[i]))) for i in keys}
    M = np.column_stack([vectors[i] for i in keys])
    if not M.size or np.abs(M).max() == 0:
        z = np.zeros((0, 0), dtype=complex)
        return OperatorPair(z, z.copy(), np.zeros(0, complex), 0.0, 0.0)
    U, sv, _ = np.linalg.svd(M, full_matrices=False)
    dim = int(np.count_nonzero(sv > 1e-10 * sv[0]))
    basis = U[:, :dim]
    coords = {i: basis.conj().T @ np.asarray(vectors[i], dtype=complex) for i in keys}
    mats = []
    fit = 0.0
    for base, plus, minus in (("m", "k", "l"), ("n", "r", "t")):
        src, img = [], []
        for i in keys:
            x = coords[i]
            if i.shift(base) in coords:
                src.append(x)
                img.append(coords[i.shift(base)])
            if i.shift(plus) in coords:
                src.append(x)
                img.append(coords[i.shift(plus)] - 1j * x)
            if i.shift(minus) in coords:
                src.append(x)
                img.append(coords[i.shift(minus)] + 1j * x)
        if not src:
            raise CoreDeficient(f"no relation determines the {base}-shift")
        op, res = fit_shift_operator(np.column_stack(src), np.column_stack(img), tol_span)
        mats.append(op)
        fit = max(fit, res)
    A, B = mats
    cyclic = coords.get(ZERO, np.zeros(dim, dtype=complex))
    P = _finish_pair(A, B, cyclic, fit, tol_op, check)
    return OperatorPair(P.A, P.B, P.cyclic, P.sym_residual, P.comm_residual, P.fit_residual, basis)


def cayley(P: OperatorPair) -> CayleyPair:
    """``U = (A - iI)(A + iI)^{-1}`` for both operators."""
    n = P.dim
    if n == 0:
        z = np.zeros((0, 0), dtype=complex)
        return CayleyPair(z, z.copy(), 0.0, 0.0)
    eye = np.eye(n)
    out = []
    for X in (P.A, P.B):
        try:
            out.append(np.linalg.solve(X + 1j * eye, X - 1j * eye))
        except np.linalg.LinAlgError as exc:
            raise SingularShift("A + iI is singular") from exc
    UA, UB = out
    unit = max(float(np.abs(U.conj().T @ U - eye).max()) for U in out)
    comm = float(np.abs(UA @ UB - UB @ UA).max())
    return CayleyPair(UA, UB, unit, comm)


def _offdiag(M):
    if M.shape[0] < 2:
        return 0.0
    return float(np.abs(M - np.diag(np.diag(M))).max())


def _refine_basis(A, B, tol_cluster):
    lam, V = np.linalg.eigh(0.5 * (A + A.conj().T))
    groups, start = [], 0
    for p in range(1, len(lam) + 1):
        if p == len(lam) or lam[p] - lam[p - 1] > tol_cluster:
            groups.append(slice(start, p))
            start = p
    for g in groups:
        if g.stop - g.start > 1:
            Vg = V[:, g]
            Bg = Vg.conj().T @ B @ Vg
            _, W = np.linalg.eigh(0.5 * (Bg + Bg.conj().T))
            V[:, g] = Vg @ W
    return V


def joint_spectral_measure(P: OperatorPair, seed: int = 0, tol_diag: float = 1e-8,
                           tol_weight: float = 1e-10) -> AtomicMeasure:
    """Atoms at the joint eigenvalues of ``(A, B)``, weighted by ``|<v_p, cyclic>|^2``.

    A common eigenbasis comes from a random real combination of ``A`` and
    ``B``; if either operator is not diagonal in it, degenerate eigenspaces
    of ``A`` are re-diagonalized with ``B``.
    """
    n = P.dim
    if n == 0 or not np.any(P.cyclic):
        return AtomicMeasure()
    A, B = P.A, P.B
    scale = 1.0 + max(float(np.abs(A).max()), float(np.abs(B).max()))
    theta = np.random.default_rng(seed).uniform(0.1, math.pi / 2 - 0.1)
    H = math.cos(theta) * A + math.sin(theta) * B
    _, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    DA, DB = V.conj().T @ A @ V, V.conj().T @ B @ V
    if max(_offdiag(DA), _offdiag(DB)) > tol_diag * scale:
        V = _refine_basis(A, B, tol_diag * scale)
        DA, DB = V.conj().T @ A @ V, V.conj().T @ B @ V
        if max(_offdiag(DA), _offdiag(DB)) > tol_diag * scale:
            raise DiagonalizationFailed(
                f"no common eigenbasis: off-diagonal {max(_offdiag(DA), _offdiag(DB)):.3e}")
    w = np.abs(V.conj().T @ P.cyclic) ** 2
    total = float(w.sum())
    keep = w > tol_weight * total
    a = np.real(np.diag(DA))[keep]
    b = np.real(np.diag(DB))[keep]
    return AtomicMeasure(tuple(zip(a.tolist(), b.tolist(), w[keep].tolist())))


@dataclass
class ExtendedReport:
    success: bool = False
    failed_stage: str | None = None
    message: str = ""
    hermitian_residual: float | None = None
    conjugation_residual: float | None = None
    psd_min_eig: float | None = None
    psd_margin: float | None = None
    gram_rank: int | None = None
    gns_dim: int | None = None
    gns_residual: float | None = None
    recurrence_residual: float | None = None
    recurrence_tolerance: float | None = None
    recurrence_violations: int | None = None
    sym_residual: float | None = None
    comm_residual: float | None = None
    fit_residual: float | None = None
    cayley_unitarity: float | None = None
    cayley_comm: float | None = None
    reconstruction_residual: float | None = None
    reconstruction_tolerance: float | None = None
    n_atoms: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExtendedSolution:
    measure: AtomicMeasure | None
    report: ExtendedReport
    gns: GnsSpace | None = None
    operators: OperatorPair | None = None
    cayley: CayleyPair | None = None

    @property
    def success(self) -> bool:
        return self.report.success


@dataclass(frozen=True)
class Tolerances:
    tol_psd: float = 1e-9
    tol_rank: float = 1e-10
    tol_sym: float = 1e-12
    tol_op: float = 1e-7
    tol_recon: float = 1e-6
    tol_weight: float = 1e-10
    tol_recurrence: float = 1e-9
    seed: int = 0


def solve_extended(u: ExtMomentTable, sub_box: BoxSpec | None = None,
                   tol: Tolerances | None = None) -> ExtendedSolution:
    """Recover the unique representing measure of an extended moment table.

    Never raises for gate failures: the returned report names the first
    failing stage (``hermitian``, ``psd``, ``gns``, ``recurrence``,
    ``operators``, ``spectral`` or ``reconstruction``).
    """
    tol = tol or Tolerances()
    rep = ExtendedReport()
    sol = ExtendedSolution(None, rep)
    rep.conjugation_residual = u.conjugation_residual()
    scale_u = u.max_abs()

    def fail(stage, msg):
        rep.failed_stage, rep.message, rep.success = stage, msg, False
        return sol

    try:
        G = build_gram_extended(u, sub_box)
    except MomentError as exc:
        return fail("gram", str(exc))
    rep.hermitian_residual = G.hermitian_residual()
    try:
        psd = psd_check(G, tol.tol_psd, tol.tol_rank, tol.tol_sym)
    except NotHermitian as exc:
        return fail("hermitian", str(exc))
    rep.psd_min_eig, rep.psd_margin, rep.gram_rank = psd.min_eig, psd.margin, psd.rank
    if not psd.is_psd:
        return fail("psd", f"kernel is not positive semidefinite (min eigenvalue {psd.min_eig:.3e})")
    try:
        gns = gns_construct(G, tol.tol_rank, tol.tol_psd, tol.tol_sym)
    except NotPsd as exc:  # pragma: no cover - psd_check already passed
        return fail("psd", str(exc))
    sol.gns = gns
    rep.gns_dim, rep.gns_residual = gns.dim, gns.gram_check
    if gns.gram_check > 1e-9 * (1.0 + G.max_abs()) + tol.tol_rank * (1.0 + G.max_abs()):
        return fail("gns", f"GNS factorization residual {gns.gram_check:.3e}")

    rec = check_recurrences(u, tol.tol_recurrence * (1.0 + scale_u))
    rep.recurrence_residual = rec.max_residual
    rep.recurrence_tolerance = rec.tolerance
    rep.recurrence_violations = len(rec.violations)
    if not rec.passed:
        first = rec.violations[0]
        return fail("recurrence", f"shift identity ({first[1]}) violated at {first[0]} by {first[2]:.3e}")

    try:
        P = build_operators(gns, tol.tol_op, check=True)
    except MomentError as exc:
        return fail("operators", f"{type(exc).__name__}: {exc}")
    sol.operators = P
    rep.sym_residual, rep.comm_residual, rep.fit_residual = P.sym_residual, P.comm_residual, P.fit_residual
    C = cayley(P)
    sol.cayley = C
    rep.cayley_unitarity, rep.cayley_comm = C.unitarity_residual, C.comm_residual

    try:
        mu = joint_spectral_measure(P, seed=tol.seed, tol_weight=tol.tol_weight)
    except DiagonalizationFailed as exc:
        return fail("spectral", str(exc))
    sol.measure = mu
    rep.n_atoms = len(mu)
    recon = moments_of_measure(mu, u.box)
    rep.reconstruction_residual = float(np.abs(recon.values - u.values).max())
    rep.reconstruction_tolerance = tol.tol_recon * (1.0 + scale_u)
    if rep.reconstruction_residual > rep.reconstruction_tolerance:
        return fail("reconstruction", f"re-integrated moments differ by {rep.reconstruction_residual:.3e}")
    rep.success = True
    return sol


def resolvent_residual(gns: GnsSpace, P: OperatorPair) -> float:
    """max over realized indices of ``|(A +- iI)^{-1} x_i - x_{i-1}|`` (and B analogues)."""
    n = P.dim
    if n == 0:
        return 0.0
    eye = np.eye(n)
    inv = {
        "k": np.linalg.inv(P.A + 1j * eye),
        "l": np.linalg.inv(P.A - 1j * eye),
        "r": np.linalg.inv(P.B + 1j * eye),
        "t": np.linalg.inv(P.B - 1j * eye),
    }
    worst = 0.0
    for idx in gns.index_list:
        for name, R in inv.items():
            lower = idx.shift(name, -1)
            if lower in gns:
                worst = max(worst, float(np.abs(R @ gns.coords(idx) - gns.coords(lower)).max()))
    return worst


class FunctionalCalculus:
    """``A^m (A+i)^k (A-i)^l B^n (B+i)^r (B-i)^t`` applied to the cyclic vector."""

    def __init__(self, P: OperatorPair):
        self.P = P
        eye = np.eye(P.dim)
        self.factors = {"m": P.A, "k": P.A + 1j * eye, "l": P.A - 1j * eye,
                        "n": P.B, "r": P.B + 1j * eye, "t": P.B - 1j * eye}
        self.cache = {}

    def power(self, name, p):
        if (name, p) not in self.cache:
            M = self.factors[name]
            if p < 0:
                M = np.linalg.inv(M)
            self.cache[(name, p)] = np.linalg.matrix_power(M, abs(p))
        return self.cache[(name, p)]

    def vector(self, idx) -> np.ndarray:
        v = self.P.cyclic
        for name in ("t", "r", "n", "l", "k", "m"):
            p = getattr(idx, name)
            if p:
                v = self.power(name, p) @ v
        return v


def cyclic_residual(gns: GnsSpace, P: OperatorPair) -> float:
    """max over realized indices of ``|x_i - A^m (A+i)^k (A-i)^l B^n (B+i)^r (B-i)^t x_0|``."""
    if P.dim == 0:
        return 0.0
    fc = FunctionalCalculus(P)
    return max(float(np.abs(fc.vector(idx) - gns.coords(idx)).max()) for idx in gns.index_list)


def torus_transform(mu: AtomicMeasure) -> list[tuple[float, float, float]]:
    """Push atoms to the torus: ``e^{i phi} = (x1 + i)/(x1 - i)``, angles in [0, 2 pi)."""
    out = []
    for x1, x2, w in mu.atoms:
        phi = math.atan2(2.0 * x1, x1 * x1 - 1.0) % (2 * math.pi)
        psi = math.atan2(2.0 * x2, x2 * x2 - 1.0) % (2 * math.pi)
        out.append((phi, psi, w))
    return out


def trig_moment(torus_atoms: Sequence[tuple[float, float, float]], k: int, l: int) -> complex:
    return complex(sum(w * np.exp(1j * (k * phi + l * psi)) for phi, psi, w in torus_atoms))
