"""Index arithmetic, moment tables and atomic measures.

An extended index ``(m, k, l; n, r, t)`` labels the integrand

    x1^m (x1 + i)^k (x1 - i)^l  x2^n (x2 + i)^r (x2 - i)^t

with ``m, n >= 0`` and ``k, l, r, t`` arbitrary integers.  Indices with
``k = l = r = t = 0`` are plain monomials.
"""
from __future__ import annotations

import bisect
import functools
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np


class MomentError(Exception):
    """Base class for all errors raised by this package."""


class MissingMoment(MomentError, KeyError):
    """A moment needed by a computation is absent from its table."""

    def __init__(self, index):
        self.index = index
        super().__init__(index)

    def __str__(self):
        return f"missing moment at index {self.index}"


class ExtIndex(NamedTuple):
    m: int
    k: int
    l: int
    n: int
    r: int
    t: int

    def is_omega0(self) -> bool:
        return self.k == 0 and self.l == 0 and self.r == 0 and self.t == 0

    def weight(self) -> int:
        return self.m + self.n + abs(self.k) + abs(self.l) + abs(self.r) + abs(self.t)

    def pair(self, other: "ExtIndex") -> "ExtIndex":
        """Index of the integrand of ``y_self * conj(y_other)``.

        Conjugating ``(x + i)^k`` gives ``(x - i)^k``, so the primed k and l
        (and r and t) trade places.
        """
        return ExtIndex(self.m + other.m, self.k + other.l, self.l + other.k,
                        self.n + other.n, self.r + other.t, self.t + other.r)

    def conj(self) -> "ExtIndex":
        return ExtIndex(self.m, self.l, self.k, self.n, self.t, self.r)

    def shift(self, field_name: str, step: int = 1) -> "ExtIndex":
        return self._replace(**{field_name: getattr(self, field_name) + step})

    def valid(self) -> bool:
        return self.m >= 0 and self.n >= 0

    def __str__(self):
        return f"({self.m},{self.k},{self.l};{self.n},{self.r},{self.t})"


ZERO = ExtIndex(0, 0, 0, 0, 0, 0)


def _lex_key(idx: ExtIndex):
    return (idx.weight(), tuple(idx))


@dataclass(frozen=True)
class BoxSpec:
    """Finite box ``m <= m_max, n <= n_max, max(|k|,|l|,|r|,|t|) <= k_abs_max``."""

    m_max: int
    n_max: int
    k_abs_max: int

    def __post_init__(self):
        if min(self.m_max, self.n_max, self.k_abs_max) < 0:
            raise ValueError(f"box bounds must be non-negative, got {self}")

    def contains(self, idx) -> bool:
        m, k, l, n, r, t = idx
        K = self.k_abs_max
        return (0 <= m <= self.m_max and 0 <= n <= self.n_max
                and max(abs(k), abs(l), abs(r), abs(t)) <= K)

    @property
    def shape(self) -> tuple[int, ...]:
        s = 2 * self.k_abs_max + 1
        return (self.m_max + 1, s, s, self.n_max + 1, s, s)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def offset(self, idx) -> tuple[int, ...]:
        K = self.k_abs_max
        m, k, l, n, r, t = idx
        return (m, k + K, l + K, n, r + K, t + K)

    def core_box(self) -> "BoxSpec":
        return BoxSpec(max(self.m_max - 1, 0), max(self.n_max - 1, 0),
                       max(self.k_abs_max - 1, 0))

    def half(self) -> "BoxSpec":
        """Largest box whose pairwise ``pair`` sums stay inside this one."""
        return BoxSpec(self.m_max // 2, self.n_max // 2, self.k_abs_max // 2)

    def doubled(self) -> "BoxSpec":
        return BoxSpec(2 * self.m_max, 2 * self.n_max, 2 * self.k_abs_max)

    def __iter__(self) -> Iterator[ExtIndex]:
        return iter(enumerate_box(self))


@functools.lru_cache(maxsize=None)
def _omega_prime_of_weight(w: int) -> tuple[ExtIndex, ...]:
    out = []
    for m in range(w + 1):
        for n in range(w - m + 1):
            rest = w - m - n
            if rest == 0:
                continue  # pure monomial, lies in Omega_0
            for a in itertools.product(range(rest + 1), repeat=3):
                d = rest - sum(a)
                if d < 0:
                    continue
                mags = (*a, d)
                for signs in itertools.product((-1, 1), repeat=4):
                    if any(s < 0 and v == 0 for s, v in zip(signs, mags)):
                        continue
                    k, l, r, t = (s * v for s, v in zip(signs, mags))
                    out.append(ExtIndex(m, k, l, n, r, t))
    out.sort()
    return tuple(out)


@functools.lru_cache(maxsize=None)
def _cumulative_count(w: int) -> int:
    """Number of Omega' indices of weight strictly below ``w``."""
    return sum(len(_omega_prime_of_weight(v)) for v in range(1, w))


def index_order(j: int) -> ExtIndex:
    """The j-th element (1-based) of the fixed enumeration of Omega'.

    Indices are ordered by weight ``m+n+|k|+|l|+|r|+|t|``, ties broken
    lexicographically on ``(m, k, l, n, r, t)``.
    """
    if j < 1:
        raise ValueError("index_order is defined for j >= 1")
    w = 1
    while _cumulative_count(w + 1) < j:
        w += 1
    return _omega_prime_of_weight(w)[j - 1 - _cumulative_count(w)]


def index_position(idx) -> int:
    """Inverse of :func:`index_order`."""
    idx = ExtIndex(*idx)
    if idx.is_omega0() or not idx.valid():
        raise ValueError(f"{idx} is not in Omega'")
    w = idx.weight()
    block = _omega_prime_of_weight(w)
    pos = bisect.bisect_left(block, idx)
    if pos == len(block) or block[pos] != idx:  # pragma: no cover - defensive
        raise ValueError(f"{idx} not found in weight block {w}")
    return _cumulative_count(w) + pos + 1


@functools.lru_cache(maxsize=64)
def _enumerate_box_cached(box: BoxSpec) -> tuple[ExtIndex, ...]:
    K = box.k_abs_max
    rng = range(-K, K + 1)
    omega0, prime = [], []
    for m, n in itertools.product(range(box.m_max + 1), range(box.n_max + 1)):
        for k, l, r, t in itertools.product(rng, rng, rng, rng):
            idx = ExtIndex(m, k, l, n, r, t)
            (omega0 if idx.is_omega0() else prime).append(idx)
    omega0.sort(key=lambda i: (i.m, i.n))
    prime.sort(key=_lex_key)
    return tuple(omega0 + prime)


def enumerate_box(box: BoxSpec) -> list[ExtIndex]:
    """All indices of ``box``: monomials first (by (m, n)), then Omega' in index_order."""
    return list(_enumerate_box_cached(box))


def _power_table(x: float, m_max: int, K: int) -> np.ndarray:
    """``x^m (x+i)^k (x-i)^l`` on the grid ``m <= m_max, |k|,|l| <= K``."""
    z = complex(x, 1.0)
    ks = np.arange(-K, K + 1)
    zp = np.array([z ** int(k) for k in ks])
    zc = np.array([z.conjugate() ** int(k) for k in ks])
    xm = np.array([x ** m for m in range(m_max + 1)], dtype=float)
    P = zp[:, None] * zc[None, :]
    # force the (k,l) <-> (l,k) conjugate pairing to hold bit for bit
    lower = np.tril_indices(len(ks), -1)
    P[lower] = np.conj(P.T[lower])
    P[np.diag_indices(len(ks))] = P.diagonal().real
    return xm[:, None, None] * P[None, :, :]


def _check_pair_table(entries: dict, degree: int, rectangular: bool, what: str):
    for key in pair_indices(degree, rectangular):
        if key not in entries:
            raise MissingMoment(key)
    for key in entries:
        m, n = key
        if m < 0 or n < 0 or (m + n > degree if not rectangular else max(m, n) > degree):
            raise ValueError(f"{what}: entry {key} lies outside degree {degree}")


def pair_indices(degree: int, rectangular: bool = False) -> list[tuple[int, int]]:
    """(m, n) pairs of a table, graded: total degree first, then larger m first."""
    if rectangular:
        keys = [(m, n) for m in range(degree + 1) for n in range(degree + 1)]
    else:
        keys = [(m, d - m) for d in range(degree + 1) for m in range(d, -1, -1)]
    return sorted(keys, key=lambda p: (p[0] + p[1], -p[0]))


@dataclass(frozen=True)
class MomentTable2D:
    """Power moments ``s[m, n]`` of a plane measure.

    Total on ``m + n <= degree`` (or ``m, n <= degree`` when rectangular).
    Entries are complex so that non-real data can be represented and
    rejected by the gates rather than made impossible.
    """

    degree: int
    entries: dict
    rectangular: bool = False

    def __post_init__(self):
        ent = {(int(m), int(n)): complex(v) for (m, n), v in dict(self.entries).items()}
        object.__setattr__(self, "entries", ent)
        _check_pair_table(ent, self.degree, self.rectangular, type(self).__name__)

    def __getitem__(self, key) -> complex:
        try:
            return self.entries[tuple(key)]
        except KeyError:
            raise MissingMoment(tuple(key)) from None

    def __contains__(self, key) -> bool:
        return tuple(key) in self.entries

    def keys(self) -> list[tuple[int, int]]:
        return pair_indices(self.degree, self.rectangular)

    def max_abs(self) -> float:
        return max((abs(v) for v in self.entries.values()), default=0.0)

    def with_entry(self, key, value):
        ent = dict(self.entries)
        ent[tuple(key)] = complex(value)
        return type(self)(self.degree, ent, self.rectangular)


class ComplexMomentTable(MomentTable2D):
    """Complex moments ``a[m, n]`` of ``z^m conj(z)^n``; same layout as the 2D table."""

    def conjugation_residual(self) -> float:
        """max |conj(a[m,n]) - a[n,m]| over pairs present in both orders."""
        res = 0.0
        for (m, n), v in self.entries.items():
            if (n, m) in self.entries:
                res = max(res, abs(v.conjugate() - self.entries[(n, m)]))
        return res


@dataclass(frozen=True, eq=False)
class ExtMomentTable:
    """Extended moments ``u[m,k,l;n,r,t]``, total on a box.

    Stored densely; ``values[box.offset(idx)]`` is ``u[idx]``.
    """

    box: BoxSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.shape != self.box.shape:
            raise ValueError(f"values shape {vals.shape} does not match box {self.box.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_entries(cls, box: BoxSpec, entries: dict) -> "ExtMomentTable":
        vals = np.zeros(box.shape, dtype=complex)
        seen = np.zeros(box.shape, dtype=bool)
        for idx, v in entries.items():
            if not box.contains(idx):
                raise ValueError(f"entry {tuple(idx)} lies outside {box}")
            off = box.offset(idx)
            vals[off] = v
            seen[off] = True
        if not seen.all():
            missing = np.argwhere(~seen)[0]
            K = box.k_abs_max
            m, k, l, n, r, t = (int(v) for v in missing)
            raise MissingMoment(ExtIndex(m, k - K, l - K, n, r - K, t - K))
        return cls(box, vals)

    def __getitem__(self, idx) -> complex:
        if not self.box.contains(idx):
            raise MissingMoment(ExtIndex(*idx))
        return complex(self.values[self.box.offset(idx)])

    def __contains__(self, idx) -> bool:
        return self.box.contains(idx)

    def items(self) -> Iterator[tuple[ExtIndex, complex]]:
        for idx in enumerate_box(self.box):
            yield idx, self[idx]

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def conjugation_residual(self) -> float:
        """max |conj(u[m,k,l;n,r,t]) - u[m,l,k;n,t,r]| over the box."""
        swapped = np.transpose(self.values, (0, 2, 1, 3, 5, 4))
        return float(np.abs(np.conj(self.values) - swapped).max())

    def with_entry(self, idx, value) -> "ExtMomentTable":
        vals = self.values.copy()
        vals[self.box.offset(idx)] = value
        return ExtMomentTable(self.box, vals)

    def restrict(self, box: BoxSpec) -> "ExtMomentTable":
        if not (box.m_max <= self.box.m_max and box.n_max <= self.box.n_max
                and box.k_abs_max <= self.box.k_abs_max):
            raise MissingMoment(ExtIndex(box.m_max, box.k_abs_max, 0, box.n_max, 0, 0))
        d = self.box.k_abs_max - box.k_abs_max
        ks = slice(d, d + 2 * box.k_abs_max + 1)
        vals = self.values[: box.m_max + 1, ks, ks, : box.n_max + 1, ks, ks]
        return ExtMomentTable(box, vals)

    def omega0(self) -> MomentTable2D:
        """The monomial part as a rectangular 2D table (condition u[m,0,0;n,0,0] = s[m,n])."""
        K = self.box.k_abs_max
        deg = min(self.box.m_max, self.box.n_max)
        ent = {(m, n): complex(self.values[m, K, K, n, K, K])
               for m in range(deg + 1) for n in range(deg + 1)}
        return MomentTable2D(deg, ent, rectangular=True)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely many weighted points in the plane.

    Duplicate locations are merged by summing weights; non-positive
    weights are rejected.
    """

    atoms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        merged: dict[tuple[float, float], float] = {}
        for x1, x2, w in self.atoms:
            x1, x2, w = float(x1), float(x2), float(w)
            if not (np.isfinite(x1) and np.isfinite(x2) and np.isfinite(w)):
                raise ValueError("atom data must be finite")
            if w <= 0:
                raise ValueError(f"atom weight must be positive, got {w}")
            merged[(x1, x2)] = merged.get((x1, x2), 0.0) + w
        object.__setattr__(self, "atoms", tuple((a, b, w) for (a, b), w in merged.items()))

    def __len__(self):
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def total_mass(self) -> float:
        return float(sum(w for _, _, w in self.atoms))

    def locations(self) -> np.ndarray:
        return np.array([(a, b) for a, b, _ in self.atoms], dtype=float).reshape(-1, 2)

    def weights(self) -> np.ndarray:
        return np.array([w for _, _, w in self.atoms], dtype=float)

    def sorted(self) -> "AtomicMeasure":
        return AtomicMeasure(tuple(sorted(self.atoms)))

    def complex_atoms(self) -> list[tuple[complex, float]]:
        """Atoms under the identification z = x1 + i x2."""
        return [(complex(a, b), w) for a, b, w in self.atoms]

    @classmethod
    def from_complex(cls, atoms: Iterable[tuple[complex, float]]) -> "AtomicMeasure":
        return cls(tuple((z.real, z.imag, w) for z, w in ((complex(z), w) for z, w in atoms)))


def moments_of_measure(mu: AtomicMeasure, box: BoxSpec) -> ExtMomentTable:
    """Extended moments of an atomic measure by direct summation over atoms."""
    vals = np.zeros(box.shape, dtype=complex)
    K = box.k_abs_max
    for x1, x2, w in mu.atoms:
        p1 = _power_table(x1, box.m_max, K)
        p2 = _power_table(x2, box.n_max, K)
        vals += w * p1[:, :, :, None, None, None] * p2[None, None, None, :, :, :]
    return ExtMomentTable(box, vals)


def real_moments_of_measure(mu: AtomicMeasure, degree: int,
                            rectangular: bool = False) -> MomentTable2D:
    ent = {}
    for m, n in pair_indices(degree, rectangular):
        ent[(m, n)] = complex(sum(w * x1 ** m * x2 ** n for x1, x2, w in mu.atoms))
    return MomentTable2D(degree, ent, rectangular)


def random_measure(rng: np.random.Generator | int, n_atoms: int,
                   coord_range: float = 3.0, max_weight: float = 2.0) -> AtomicMeasure:
    """Random atoms uniform in ``[-coord_range, coord_range]^2``, weights in ``(0, max_weight]``."""
    rng = np.random.default_rng(rng)
    xy = rng.uniform(-coord_range, coord_range, size=(n_atoms, 2))
    w = max_weight - rng.uniform(0.0, max_weight, size=n_atoms)
    return AtomicMeasure(tuple((float(a), float(b), float(c)) for (a, b), c in zip(xy, w)))


def match_measures(a: AtomicMeasure, b: AtomicMeasure) -> tuple[float, float]:
    """Optimal atom matching; returns (max location error, max weight error).

    Measures with different atom counts give ``(inf, inf)``.
    """
    from scipy.optimize import linear_sum_assignment

    if len(a) != len(b):
        return float("inf"), float("inf")
    if len(a) == 0:
        return 0.0, 0.0
    la, lb = a.locations(), b.locations()
    cost = np.linalg.norm(la[:, None, :] - lb[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    loc = float(np.abs(la[rows] - lb[cols]).max())
    wt = float(np.abs(a.weights()[rows] - b.weights()[cols]).max())
    return loc, wt
