"""Step-wise extension of 2D power moments to extended moments, at finite depth.

The model space is ``H0 (+) span{e_1, e_2, ...}``.  ``H0`` is the GNS space
of the power-moment kernel; vectors are stored in coordinates with respect
to an orthonormal basis ``g_1..g_d0`` of ``H0`` (Gram-Schmidt over the
``h_{m,n}`` in graded order) followed by the slots ``e_1, e_2, ...``.

Step r seeks the vector attached to the r-th extended index ``w(r)``:

    h_{w(r)} = sum_n alpha_n g_n + sum_{j<r} beta_j e_j + beta_rr e_r,  beta_rr >= 0.

Every shift identity and every "pairing depends only on the index sum"
relation among already-built vectors that involves ``h_{w(r)}`` is linear
over the reals in ``(Re z, Im z, d)`` with ``z = (alpha, beta_{<r})`` and
``d = |h_{w(r)}|^2``.  The solution set is parametrized by Gaussian
elimination and sampled on a small grid; states violating
``|z|^2 <= d <= M_r`` are pruned.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import RunConfig
from .core import (ZERO, AtomicMeasure, ExtIndex, MissingMoment, MomentError, MomentTable2D,
                   index_order, moments_of_measure, pair_indices, real_moments_of_measure)
from .extended import (ExtendedReport, FunctionalCalculus, OperatorPair, joint_spectral_measure,
                       operators_from_vectors, solve_extended)
from .gram import GnsSpace, NotHermitian, NotPsd, PsdReport, build_gram_2d, gns_construct, psd_check
from .linsolve import AffineSet, parametric_gauss

log = logging.getLogger(__name__)

_SHIFT_RULES = (("k", "m", +1), ("l", "m", -1), ("r", "n", +1), ("t", "n", -1))


def omega0(m: int, n: int) -> ExtIndex:
    return ExtIndex(m, 0, 0, n, 0, 0)


def _pad(v: np.ndarray, n: int) -> np.ndarray:
    if len(v) >= n:
        return v[:n]
    out = np.zeros(n, dtype=complex)
    out[: len(v)] = v
    return out


# --------------------------------------------------------------------- model

@dataclass(frozen=True, eq=False)
class ModelSpace:
    s: MomentTable2D
    deg: int
    gns: GnsSpace
    basis: np.ndarray          # columns g_n in GNS coordinates
    h0: dict                   # (m, n) -> coordinates in the g basis
    psd: PsdReport | None = None
    hermitian_residual: float = 0.0

    @property
    def h0_dim(self) -> int:
        return self.basis.shape[1]

    def e_slots(self, r: int) -> int:
        """Adjoined directions in use after ``r`` steps (one per step)."""
        return r

    def initial_state(self) -> "StepState":
        vecs = {omega0(m, n): v for (m, n), v in self.h0.items()}
        return StepState(0, vecs, (), (), None)


def _gram_schmidt(X: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormalize columns in order, skipping numerically dependent ones."""
    scale = float(np.abs(X).max()) if X.size else 0.0
    basis = []
    for c in range(X.shape[1]):
        v = X[:, c].astype(complex)
        for _ in range(2):  # second pass for stability
            for q in basis:
                v = v - np.vdot(q, v) * q
        nv = float(np.linalg.norm(v))
        if nv > tol * (1.0 + scale):
            basis.append(v / nv)
        if len(basis) == X.shape[0]:
            break
    if not basis:
        return np.zeros((X.shape[0], 0), dtype=complex)
    return np.column_stack(basis)


def build_model_space(s: MomentTable2D, deg: int | None = None, tol_rank: float = 1e-10,
                      tol_psd: float = 1e-9, check_psd: bool = True) -> ModelSpace:
    """GNS realization of the power-moment kernel on ``m + n <= deg``.

    ``deg`` defaults to half the table degree.  With ``check_psd=False`` a
    model is built from the Hermitian part and the non-negative spectrum only,
    which is what :func:`step0_check` inspects for violations.
    """
    if deg is None:
        deg = s.degree // 2
    G = build_gram_2d(s, deg)
    if check_psd:
        psd = psd_check(G, tol_psd, tol_rank)
        if not psd.is_psd:
            raise NotPsd(f"moment kernel has eigenvalue {psd.min_eig:.3e}")
        gns = gns_construct(G, tol_rank, tol_psd)
    else:
        try:
            psd = psd_check(G, tol_psd, tol_rank)
        except NotHermitian:
            psd = None
        gns = gns_construct(G, tol_rank, tol_psd=math.inf, tol_sym=math.inf)
    Q = _gram_schmidt(gns.X, 1e-7)
    h0 = {key: Q.conj().T @ gns.coords(key) for key in gns.index_list}
    return ModelSpace(s, deg, gns, Q, h0, psd, G.hermitian_residual())


def compute_M_bound(s: MomentTable2D, idx) -> float:
    """Upper bound for ``|h_idx|^2`` from even power moments.

    Expands ``x1^{2m} (x1^2+1)^{k+ + l+} x2^{2n} (x2^2+1)^{r+ + t+}``; factors
    with negative exponent are bounded by 1.
    """
    m, k, l, n, r, t = idx
    a = max(k, 0) + max(l, 0)
    b = max(r, 0) + max(t, 0)
    total = 0.0
    for p in range(a + 1):
        for q in range(b + 1):
            total += math.comb(a, p) * math.comb(b, q) * s[(2 * m + 2 * p, 2 * n + 2 * q)].real
    return total


@dataclass(frozen=True, eq=False)
class StepState:
    """Vectors built after ``r`` steps; coordinates have length ``h0_dim + r``."""

    r: int
    vecs: dict
    d_values: tuple
    beta_diag: tuple
    sign_pattern: tuple | None = None

    def inner(self, a, b) -> complex:
        va, vb = self.vecs[a], self.vecs[b]
        n = max(len(va), len(vb))
        return complex(np.vdot(_pad(vb, n), _pad(va, n)))

    def phi(self) -> dict:
        """``phi(i) = <h_i, h_0>`` on every built index."""
        return {i: self.inner(i, ZERO) for i in self.vecs}

    def key(self, digits: int = 9) -> tuple:
        parts = []
        for j in range(1, self.r + 1):
            v = self.vecs[index_order(j)]
            parts.extend(np.round(v.real, digits).tolist())
            parts.extend(np.round(v.imag, digits).tolist())
        parts.extend(np.round(self.d_values, digits).tolist())
        return tuple(parts) + (self.sign_pattern,)

    def pattern(self, tol: float = 1e-9) -> tuple:
        return tuple(int(b > tol * (1.0 + math.sqrt(max(d, 0.0))))
                     for b, d in zip(self.beta_diag, self.d_values))


# ------------------------------------------------------------------- step 0

@dataclass
class Step0Report:
    passed: bool
    psd_ok: bool
    min_eig: float | None
    hermitian_residual: float
    pairing_residual: float
    shift_residual: float
    tolerance: float
    message: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def step0_check(ms: ModelSpace, s: MomentTable2D | None = None, tol: float = 1e-9) -> Step0Report:
    """Consistency of the monomial vectors with the data.

    Checks ``<h_a, h_b> = s[a+b]`` for all pairs of model indices whose sum
    lies in the table, and the shift identities
    ``<h_{a+e}, h_b> = <h_a, h_{b+e}>`` for both coordinate directions.
    """
    s = ms.s if s is None else s
    keys = list(ms.h0)
    scale = 1.0 + s.max_abs()
    thr = tol * scale

    def ip(a, b):
        return complex(np.vdot(ms.h0[b], ms.h0[a]))

    pair_res = 0.0
    for a in keys:
        for b in keys:
            key = (a[0] + b[0], a[1] + b[1])
            if key in s:
                pair_res = max(pair_res, abs(ip(a, b) - s[key]))
    shift_res = 0.0
    present = set(keys)
    for a in keys:
        for b in keys:
            for da, db in (((1, 0), (1, 0)), ((0, 1), (0, 1))):
                a1 = (a[0] + da[0], a[1] + da[1])
                b1 = (b[0] + db[0], b[1] + db[1])
                if a1 in present and b1 in present:
                    shift_res = max(shift_res, abs(ip(a1, b) - ip(a, b1)))
    psd_ok = ms.psd is not None and ms.psd.is_psd
    herm = ms.hermitian_residual
    msgs = []
    if herm > 1e-12 * scale:
        msgs.append(f"moment kernel not Hermitian ({herm:.3e})")
    if not psd_ok:
        eig = "n/a" if ms.psd is None else f"{ms.psd.min_eig:.3e}"
        msgs.append(f"moment kernel not positive semidefinite (min eigenvalue {eig})")
    if pair_res > thr:
        msgs.append(f"pairing depends on more than the index sum ({pair_res:.3e})")
    if shift_res > thr:
        msgs.append(f"shift identity violated ({shift_res:.3e})")
    passed = not msgs
    return Step0Report(passed, psd_ok, None if ms.psd is None else ms.psd.min_eig, herm,
                       pair_res, shift_res, thr, "; ".join(msgs) or "ok")


# ------------------------------------------------------------- step systems

@dataclass(frozen=True, eq=False)
class StepSystem:
    """Real-linear system in the unknowns ``[d, Re z, Im z]`` (``z`` restricted to ``active``)."""

    r: int
    w: ExtIndex
    Amat: np.ndarray
    f: np.ndarray
    n_z: int
    active: np.ndarray
    labels: tuple

    @property
    def n_vars(self) -> int:
        return 1 + 2 * int(self.active.sum())

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        """Real solution vector -> (full z of length n_z, d)."""
        x = np.real(np.asarray(x))
        na = int(self.active.sum())
        z = np.zeros(self.n_z, dtype=complex)
        z[self.active] = x[1:1 + na] + 1j * x[1 + na:1 + 2 * na]
        return z, float(x[0])

    def pack(self, z: np.ndarray, d: float) -> np.ndarray:
        za = np.asarray(z)[self.active]
        return np.concatenate([[d], za.real, za.imag]).astype(complex)

    def residual(self, z, d) -> float:
        if not self.Amat.size:
            return 0.0
        return float(np.abs(self.Amat @ self.pack(z, d) - self.f).max())


class _Forms:
    """Pair values <h_a, h_b> as real-linear forms in ``[d, Re z, Im z]``."""

    def __init__(self, state: StepState, w: ExtIndex, n_z: int):
        self.state, self.w, self.n_z = state, w, n_z
        self.nv = 1 + 2 * n_z
        self.vec = {i: _pad(v, n_z) for i, v in state.vecs.items()}

    def __call__(self, a, b):
        coef = np.zeros(self.nv, dtype=complex)
        n = self.n_z
        if a == self.w and b == self.w:
            coef[0] = 1.0
            return coef, 0j
        if a == self.w:
            c = np.conj(self.vec[b])
            coef[1:1 + n] = c
            coef[1 + n:] = 1j * c
            return coef, 0j
        if b == self.w:
            c = self.vec[a]
            coef[1:1 + n] = c
            coef[1 + n:] = -1j * c
            return coef, 0j
        return coef, complex(np.vdot(self.vec[b], self.vec[a]))


def assemble_step_system(ms: ModelSpace, state: StepState, r: int | None = None,
                         active: Sequence[bool] | None = None) -> StepSystem:
    """Collect every constraint instance involving ``h_{w(r)}`` among built indices.

    Pairings are grouped by their sum ``a (+) b``; the value of a sum key is
    ``s`` on monomial keys, else a pairing of two old vectors, else the first
    pairing involving ``h_{w(r)}``.  Two families of equations follow:

    * sum dependence: every pairing involving ``h_{w(r)}`` equals its key value;
    * shift identities on key values:
      ``phi(k + e_m) +- i phi(k) = phi(k + e_{k or l})`` (and x2 analogues)
      whenever all three keys are attainable.
    """
    r = state.r + 1 if r is None else r
    if r != state.r + 1:
        raise ValueError(f"state has depth {state.r}, cannot assemble step {r}")
    w = index_order(r)
    n_z = ms.h0_dim + r - 1
    act = np.ones(n_z, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    if act.shape != (n_z,):
        raise ValueError("active mask has wrong length")
    pv = _Forms(state, w, n_z)
    K = list(state.vecs) + [w]
    rows, rhs, labels = [], [], []
    zero = np.zeros(pv.nv, dtype=complex)

    def emit(terms, label):
        coef = np.zeros(pv.nv, dtype=complex)
        const = 0j
        for scal, (c, k0) in terms:
            coef += scal * c
            const += scal * k0
        rows.append(coef)
        rhs.append(-const)
        labels.append(label)

    groups: dict = {}
    for a in K:
        for b in K:
            groups.setdefault(a.pair(b), []).append((a, b))
    s = ms.s
    value = {}      # key -> (form, involves w)
    for (m, n) in s.keys():
        value[omega0(m, n)] = ((zero, s[(m, n)]), False)
    for key, pairs in groups.items():
        with_w = [p for p in pairs if w in p]
        if key in value:
            ref = value[key][0]
        else:
            old = [p for p in pairs if w not in p]
            if old:
                ref = pv(*old[0])
                value[key] = (ref, False)
            else:
                ref, with_w = pv(*with_w[0]), with_w[1:]
                value[key] = (ref, True)
        for a, b in with_w:
            emit([(1.0, pv(a, b)), (-1.0, ref)], ("sum", key, a, b))

    for rho, base, sign in _SHIFT_RULES:
        for key, (form, has_w) in value.items():
            up, side = key.shift(base), key.shift(rho)
            if up not in value or side not in value:
                continue
            if not (has_w or value[up][1] or value[side][1]):
                continue
            emit([(1.0, value[up][0]), (sign * 1j, form), (-1.0, value[side][0])],
                 ("shift", rho, key))

    sel = np.concatenate([[True], act, act])
    if rows:
        C = np.array(rows)[:, sel]
        g = np.array(rhs)
        Amat = np.vstack([C.real, C.imag]).astype(complex)
        f = np.concatenate([g.real, g.imag]).astype(complex)
        labels = tuple(labels) * 2
    else:
        Amat = np.zeros((0, int(sel.sum())), dtype=complex)
        f = np.zeros(0, dtype=complex)
        labels = ()
    return StepSystem(r, w, Amat, f, n_z, act, labels)


# ----------------------------------------------------------------- sampling

@dataclass
class StepResult:
    r: int
    states: list
    aset: AffineSet | None
    consistent: bool
    inconsistency: float
    n_equations: int
    M: float
    # modified variant only: sign pattern -> number of children, every branch listed (even empty)
    branches: dict = field(default_factory=dict)


def _bounds_ok(z, d, M, tol_bound) -> bool:
    zz = float(np.vdot(z, z).real)
    slack = tol_bound * (1.0 + abs(M) if math.isfinite(M) else 1.0 + abs(d))
    return zz <= d + slack and d <= M + slack and d >= -slack


def _child(state: StepState, w, z, d, pattern=None, beta=None, tol_bound: float = 1e-9) -> StepState:
    zz = float(np.vdot(z, z).real)
    if beta is None:
        gap = d - zz
        # a gap at rounding level means beta_rr = 0; sqrt would blow it up to ~1e-8
        if gap <= tol_bound * (1.0 + abs(d)):
            beta, d = 0.0, zz
        else:
            beta = math.sqrt(gap)
    vecs = dict(state.vecs)
    vecs[w] = np.concatenate([z, [beta]])
    return StepState(state.r + 1, vecs, state.d_values + (float(d),),
                     state.beta_diag + (beta,), pattern)


def _grid_points(sys: StepSystem, aset: AffineSet, M: float, guides=()):
    """Sample real solutions: guided points, particular point, +-scale per free axis.

    A guide ``x`` contributes ``particular + sum_c x[c] null_c`` over free
    columns, i.e. the solution sharing its free coordinates (``x`` itself if
    ``x`` solves the system).
    """
    free = [c for c in aset.free_cols if c != 0]
    d_free = 0 in aset.free_cols
    pos = {c: i for i, c in enumerate(aset.free_cols)}
    base = aset.particular.real.copy()
    zpart = base[1:]
    scale = float(np.abs(zpart).max()) if zpart.size else 0.0
    if scale == 0.0:
        scale = math.sqrt(M) if math.isfinite(M) and M > 0 else 1.0
    pts = []
    for g in guides:
        x = base.copy()
        for c in aset.free_cols:
            x = x + g[c].real * aset.null_basis[pos[c]].real
        pts.append(x)
    n_guides = len(pts)
    pts.append(base)
    for c in free:
        v = aset.null_basis[pos[c]].real
        pts.append(base + scale * v)
        pts.append(base - scale * v)
    out = []
    for i, x in enumerate(pts):
        z, d = sys.unpack(x)
        if not d_free:
            out.append((z, d))
            continue
        zz = float(np.vdot(z, z).real)
        if i < n_guides:
            out.append((z, float(guides[i][0].real)))
            continue
        if math.isfinite(M):
            ds = [zz, 0.5 * (zz + M), M]
        else:
            ds = [zz, 2.0 * zz + 1.0]
        for d in ds:
            out.append((z, d))
    return out


def flat_guess(state: StepState, w: ExtIndex, n_z: int, tol_op: float = 1e-7):
    """Prediction of ``h_w`` inside the span of the built vectors, or None.

    Fits the shift operators to the built vectors and applies the matching
    product of ``A``, ``B`` and their resolvents to ``h_0``.  This is the
    rank-preserving choice ``beta_rr = 0``.
    """
    try:
        P = operators_from_vectors(state.vecs, tol_op, check=False)
    except (MomentError, np.linalg.LinAlgError):
        return None
    if P.basis is None or P.dim == 0:
        return None
    scale = 1.0 + max(float(np.abs(P.A).max()), float(np.abs(P.B).max()))
    if max(P.fit_residual, P.sym_residual, P.comm_residual) > tol_op * scale * 100:
        return None
    try:
        v = FunctionalCalculus(P).vector(w)
    except np.linalg.LinAlgError:
        return None
    z = _pad(P.basis @ v, n_z)
    return z, float(np.vdot(v, v).real)


def step_solve(ms: ModelSpace, state: StepState, sys: StepSystem, M: float,
               config: RunConfig | None = None, oracle_point=None) -> StepResult:
    """Extend ``state`` by every sampled admissible ``h_{w(r)}``.

    ``oracle_point`` is an optional ``(z, d)``; when given, its free-variable
    values are used as an extra grid point (listed first).  With
    ``config.flat_guess`` the prediction of :func:`flat_guess` is added next.
    """
    cfg = config or RunConfig()
    aset = parametric_gauss(sys.Amat, sys.f, cfg.tol_pivot)
    bad = aset.max_inconsistency()
    if not aset.is_consistent(cfg.tol_res):
        return StepResult(sys.r, [], aset, False, bad, sys.Amat.shape[0], M)
    guides = []
    if oracle_point is not None:
        guides.append(sys.pack(*oracle_point).real)
    if cfg.flat_guess:
        fg = flat_guess(state, sys.w, sys.n_z, cfg.tol_op)
        if fg is not None:
            guides.append(sys.pack(*fg).real)
    out = []
    for z, d in _grid_points(sys, aset, M, guides):
        if _bounds_ok(z, d, M, cfg.tol_bound):
            out.append(_child(state, sys.w, z, d, tol_bound=cfg.tol_bound))
    return StepResult(sys.r, out, aset, True, bad, sys.Amat.shape[0], M)


def step_solve_modified(ms: ModelSpace, state: StepState, r: int | None = None, M: float | None = None,
                        config: RunConfig | None = None, oracle_point=None) -> StepResult:
    """Sign-pattern variant: coefficients along dead directions are fixed to zero.

    A previous direction ``e_j`` is dead when ``s_j = 0``.  Each sampled
    solution then branches into ``s_r = 0`` (``beta_rr = 0``) and ``s_r = 1``
    (``beta_rr > 0``).
    """
    cfg = config or RunConfig()
    r = state.r + 1 if r is None else r
    pattern = state.sign_pattern if state.sign_pattern is not None else ()
    if len(pattern) != r - 1:
        raise ValueError("state sign pattern does not match its depth")
    w = index_order(r)
    if M is None:
        M = _safe_M(ms.s, w)
    active = np.concatenate([np.ones(ms.h0_dim, bool), np.array(pattern, dtype=bool)])
    sys = assemble_step_system(ms, state, r, active)
    res = step_solve(ms, state, sys, M, cfg, oracle_point)
    children = []
    for ch in res.states:
        zz = ch.d_values[-1] - ch.beta_diag[-1] ** 2
        s_r = int(ch.beta_diag[-1] > cfg.tol_bound * (1.0 + math.sqrt(max(ch.d_values[-1], 0.0))))
        if not s_r:
            # beta_rr = 0: store an exact zero so the branch is unambiguous
            vecs = dict(ch.vecs)
            vecs[w] = vecs[w].copy()
            vecs[w][-1] = 0.0
            ch = StepState(ch.r, vecs, ch.d_values[:-1] + (zz,), ch.beta_diag[:-1] + (0.0,), None)
        children.append(StepState(ch.r, ch.vecs, ch.d_values, ch.beta_diag, pattern + (s_r,)))
    res.states = children
    res.branches = {pattern + (b,): sum(c.sign_pattern[-1] == b for c in children) for b in (0, 1)}
    return res


def in_step_set(ms: ModelSpace, parent: StepState, child: StepState, config: RunConfig | None = None,
                pattern: tuple | None = None) -> bool:
    """Membership of ``child``'s newest vector in the (plain or pattern) solution set of step r."""
    cfg = config or RunConfig()
    r = parent.r + 1
    w = index_order(r)
    v = child.vecs[w]
    z, beta = v[:-1], float(v[-1].real)
    d = child.d_values[-1]
    M = _safe_M(ms.s, w)
    if pattern is None:
        sys = assemble_step_system(ms, parent, r)
    else:
        if len(pattern) != r:
            return False
        active = np.concatenate([np.ones(ms.h0_dim, bool), np.array(pattern[:-1], dtype=bool)])
        if np.abs(z[~active]).max(initial=0.0) > 0.0:
            return False
        thr = cfg.tol_bound * (1.0 + math.sqrt(max(d, 0.0)))
        if (beta > thr) != bool(pattern[-1]):
            return False
        sys = assemble_step_system(ms, parent, r, active)
    scale = 1.0 + (float(np.abs(sys.Amat).max()) if sys.Amat.size else 0.0) + \
        (float(np.abs(sys.f).max()) if sys.f.size else 0.0)
    if sys.residual(z, d) > cfg.tol_res * scale * 10:
        return False
    if abs(beta * beta + float(np.vdot(z, z).real) - d) > cfg.tol_bound * (1.0 + abs(d)) * 10:
        return False
    return _bounds_ok(z, d, M, cfg.tol_bound)


def _safe_M(s: MomentTable2D, w) -> float:
    try:
        return compute_M_bound(s, w)
    except MissingMoment:
        return math.inf


# ------------------------------------------------------------------- oracle

def oracle_vectors(ms: ModelSpace, mu: AtomicMeasure, R: int, tol: float = 1e-9) -> list:
    """Images of a measure's integrands in the model space, for ``w(1..R)``.

    The isometry sends the monomial vectors of ``L^2(mu)`` onto the ``h_{m,n}``;
    the remaining part of each new integrand is orthonormalized in order into
    ``e_1, e_2, ...``.  Returns ``[(z_r, d_r, beta_rr)]``.
    """
    pts = mu.locations()
    wts = mu.weights()
    sw = np.sqrt(wts)

    def f(idx):
        m, k, l, n, r, t = idx
        x1, x2 = pts[:, 0], pts[:, 1]
        z1, z2 = x1 + 1j, x2 + 1j
        return sw * x1 ** m * z1 ** k * np.conj(z1) ** l * x2 ** n * z2 ** r * np.conj(z2) ** t

    keys = list(ms.h0)
    Y0 = np.column_stack([f(omega0(m, n)) for m, n in keys]) if len(mu) else np.zeros((0, len(keys)))
    H0 = np.column_stack([ms.h0[k] for k in keys]) if keys else np.zeros((ms.h0_dim, 0))
    P = np.linalg.pinv(Y0, rcond=1e-11) if Y0.size else np.zeros((len(keys), 0))
    out = []
    E = []
    for j in range(1, R + 1):
        y = f(index_order(j)) if len(mu) else np.zeros(0, complex)
        coef = P @ y
        alpha = H0 @ coef
        rem = y - Y0 @ coef if Y0.size else y
        betas = np.array([np.vdot(e, rem) for e in E], dtype=complex)
        for e, b in zip(E, betas):
            rem = rem - b * e
        nb = float(np.linalg.norm(rem))
        if nb > tol * (1.0 + float(np.linalg.norm(y))):
            E.append(rem / nb)
        else:
            E.append(np.zeros_like(rem))
            nb = 0.0
        z = np.concatenate([alpha, betas])
        d = float(np.vdot(y, y).real)
        out.append((z, d, nb))
    return out


def oracle_state(ms: ModelSpace, mu: AtomicMeasure, R: int) -> StepState:
    st = ms.initial_state()
    for z, d, b in oracle_vectors(ms, mu, R):
        st = _child(st, index_order(st.r + 1), z, d, beta=b)
    return st


@dataclass
class OraclePathReport:
    survived: bool
    residuals: list
    inconsistencies: list
    bound_ok: list
    d_over_M: list
    failed_at: int | None = None


def check_oracle_path(ms: ModelSpace, mu: AtomicMeasure, R: int,
                      config: RunConfig | None = None) -> OraclePathReport:
    """Does the oracle's own path satisfy every assembled step system and norm bound?"""
    cfg = config or RunConfig()
    st = ms.initial_state()
    rep = OraclePathReport(True, [], [], [], [])
    for r, (z, d, b) in enumerate(oracle_vectors(ms, mu, R), start=1):
        sys = assemble_step_system(ms, st, r)
        aset = parametric_gauss(sys.Amat, sys.f, cfg.tol_pivot)
        M = _safe_M(ms.s, sys.w)
        res = sys.residual(z, d)
        scale = aset.tolerance(cfg.tol_res)
        ok_b = _bounds_ok(z, d, M, cfg.tol_bound)
        rep.residuals.append(res)
        rep.inconsistencies.append(aset.max_inconsistency())
        rep.bound_ok.append(ok_b)
        rep.d_over_M.append(d - M)
        if not (aset.is_consistent(cfg.tol_res) and res <= scale and ok_b):
            rep.survived = False
            rep.failed_at = r if rep.failed_at is None else rep.failed_at
        st = _child(st, sys.w, z, d, beta=b)
    return rep


# --------------------------------------------------------------- candidates

@dataclass(eq=False)
class Candidate:
    measure: AtomicMeasure
    table: object
    state: StepState
    residuals: dict
    extended: ExtendedReport | None = None


@dataclass
class StepLog:
    r: int
    states_in: int
    states_out: int
    equations: int
    max_inconsistency: float


@dataclass
class AlgorithmResult:
    verdict: str                      # "Candidates", "NoCandidate" or "NoSolution"
    stage: str
    candidates: list
    step0: Step0Report | None
    steps: list = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "stage": self.stage,
            "message": self.message,
            "step0": None if self.step0 is None else self.step0.to_dict(),
            "steps": [s.__dict__ for s in self.steps],
            "candidates": [
                {"atoms": [list(a) for a in c.measure.sorted().atoms], "residuals": c.residuals}
                for c in self.candidates
            ],
        }


def _integrand_moment(mu: AtomicMeasure, idx) -> complex:
    m, k, l, n, r, t = idx
    tot = 0j
    for x1, x2, w in mu.atoms:
        z1, z2 = complex(x1, 1.0), complex(x2, 1.0)
        tot += w * x1 ** m * z1 ** k * z1.conjugate() ** l * x2 ** n * z2 ** r * z2.conjugate() ** t
    return tot


def evaluate_state(ms: ModelSpace, state: StepState, config: RunConfig | None = None):
    """Operators, measure and gates for a finished state; ``(Candidate | None, reason)``."""
    cfg = config or RunConfig()
    try:
        P = operators_from_vectors(state.vecs, cfg.tol_op)
    except MomentError as exc:
        return None, f"{type(exc).__name__}: {exc}"
    scale = 1.0 + max(float(np.abs(P.A).max(initial=0.0)), float(np.abs(P.B).max(initial=0.0)))
    if P.fit_residual > cfg.tol_op * scale * (1.0 + ms.s.max_abs()):
        return None, f"shift relations not realized by one operator (fit {P.fit_residual:.3e})"
    try:
        mu = joint_spectral_measure(P, seed=cfg.seed)
    except MomentError as exc:
        return None, str(exc)
    s = ms.s
    sm = real_moments_of_measure(mu, s.degree, s.rectangular)
    s_err = max((abs(sm[k] - s[k]) for k in s.keys()), default=0.0)
    s_tol = cfg.tol_recon * (1.0 + s.max_abs())
    if s_err > s_tol:
        return None, f"measure misses the power moments by {s_err:.3e}"
    phi = state.phi()
    phi_err = max(abs(_integrand_moment(mu, i) - v) for i, v in phi.items())
    phi_tol = cfg.tol_recon * (1.0 + max(abs(v) for v in phi.values()))
    if phi_err > phi_tol:
        return None, f"measure misses the built pairings by {phi_err:.3e}"
    table = moments_of_measure(mu, cfg.box)
    ext = solve_extended(table, tol=cfg.tolerances())
    if not ext.success:
        return None, f"extended table rejected at {ext.report.failed_stage}"
    res = {"fit": P.fit_residual, "sym": P.sym_residual, "comm": P.comm_residual,
           "s_error": s_err, "phi_error": phi_err,
           "reconstruction": ext.report.reconstruction_residual}
    return Candidate(mu, table, state, res, ext.report), "ok"


def _same_measure(a: AtomicMeasure, b: AtomicMeasure, tol: float) -> bool:
    from .core import match_measures
    loc, wt = match_measures(a, b)
    return loc <= tol and wt <= tol


def run_algorithm(s: MomentTable2D, depth: int | None = None,
                  config: RunConfig | None = None) -> AlgorithmResult:
    """Beam search over steps ``1..depth``; returns candidate measures.

    An empty candidate list means nothing was found at this depth and beam
    width; it does not prove that no measure exists.
    """
    cfg = config or RunConfig()
    R = cfg.depth if depth is None else depth
    try:
        ms = build_model_space(s, tol_rank=cfg.tol_rank, tol_psd=cfg.tol_psd)
    except (NotPsd, NotHermitian) as exc:
        try:
            rep = step0_check(build_model_space(s, tol_rank=cfg.tol_rank, check_psd=False), s)
        except MomentError:
            rep = None
        return AlgorithmResult("NoSolution", "step0", [], rep, message=str(exc))
    rep = step0_check(ms, s)
    if not rep.passed:
        return AlgorithmResult("NoSolution", "step0", [], rep, message=rep.message)

    oracle = oracle_vectors(ms, cfg.oracle, R) if cfg.oracle is not None else None
    beam = [ms.initial_state()]
    if cfg.modified:
        beam = [StepState(0, beam[0].vecs, (), (), ())]
    logs = []
    for r in range(1, R + 1):
        w = index_order(r)
        M = _safe_M(s, w)
        children, seen = [], set()
        neq, worst = 0, 0.0
        for st in beam:
            op = None if oracle is None else oracle[r - 1][:2]
            if cfg.modified:
                res = step_solve_modified(ms, st, r, M, cfg, op)
            else:
                sys = assemble_step_system(ms, st, r)
                res = step_solve(ms, st, sys, M, cfg, op)
            neq = max(neq, res.n_equations)
            worst = max(worst, res.inconsistency)
            for ch in res.states:
                key = ch.key()
                if key not in seen:
                    seen.add(key)
                    children.append(ch)
        logs.append(StepLog(r, len(beam), len(children), neq, worst))
        beam = children[: cfg.beam]
        if not beam:
            return AlgorithmResult("NoCandidate", f"step{r}", [], rep, logs,
                                   f"no admissible state survived step {r}")

    found = []
    reasons = []
    for st in beam:
        cand, why = evaluate_state(ms, st, cfg)
        if cand is None:
            reasons.append(why)
            continue
        if not any(_same_measure(cand.measure, c.measure, 1e-9) for c in found):
            found.append(cand)
    if found:
        return AlgorithmResult("Candidates", f"step{R}", found, rep, logs, f"{len(found)} candidate(s)")
    msg = "no candidate found" + (f" ({reasons[0]})" if reasons else "")
    return AlgorithmResult("NoCandidate", f"step{R}", [], rep, logs, msg)


@dataclass
class AgreementReport:
    plain: int = 0
    modified: int = 0
    plain_reduced: int = 0          # plain states with zero coefficients on dead directions
    modified_not_plain: int = 0
    plain_unmatched: int = 0        # reduced plain states in no pattern set
    plain_ambiguous: int = 0        # reduced plain states in two pattern sets

    @property
    def agree(self) -> bool:
        return self.modified_not_plain == 0 and self.plain_unmatched == 0 and self.plain_ambiguous == 0


def modified_agreement(ms: ModelSpace, parents: Sequence[StepState], config: RunConfig | None = None,
                       oracle_point=None, report: AgreementReport | None = None) -> AgreementReport:
    """Compare plain and sign-pattern solution sets of one step on sampled grids.

    * every sampled pattern-state solves the plain step;
    * every sampled plain state whose coefficients on dead directions vanish
      belongs to exactly one pattern set, the one given by its own ``beta_rr``.
    """
    cfg = config or RunConfig()
    rep = report or AgreementReport()
    for parent in parents:
        pat = parent.sign_pattern if parent.sign_pattern is not None else parent.pattern(cfg.tol_bound)
        parent = StepState(parent.r, parent.vecs, parent.d_values, parent.beta_diag, tuple(pat))
        r = parent.r + 1
        M = _safe_M(ms.s, index_order(r))
        mod = step_solve_modified(ms, parent, r, M, cfg, oracle_point).states
        plain = step_solve(ms, parent, assemble_step_system(ms, parent, r), M, cfg, oracle_point).states
        rep.plain += len(plain)
        rep.modified += len(mod)
        for ch in mod:
            if not in_step_set(ms, parent, ch, cfg):
                rep.modified_not_plain += 1
        dead = np.concatenate([np.zeros(ms.h0_dim, bool), ~np.array(pat, dtype=bool)])
        w = index_order(r)
        for ch in plain:
            z = ch.vecs[w][:-1]
            if dead.any() and np.abs(z[dead]).max() > cfg.tol_bound * (1.0 + np.abs(z).max()):
                continue
            if dead.any():
                vecs = dict(ch.vecs)
                vecs[w] = ch.vecs[w].copy()
                vecs[w][:-1][dead] = 0.0
                ch = StepState(ch.r, vecs, ch.d_values, ch.beta_diag, ch.sign_pattern)
            rep.plain_reduced += 1
            hits = sum(in_step_set(ms, parent, ch, cfg, tuple(pat) + (s_r,)) for s_r in (0, 1))
            if hits == 0:
                rep.plain_unmatched += 1
            elif hits > 1:
                rep.plain_ambiguous += 1
    return rep
