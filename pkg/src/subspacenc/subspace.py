"""Subspaces of F_q^n held in reduced row-echelon form.

A matrix here is just a 2-D int64 numpy array whose entries live in
``[0, q)``; the field travels alongside it.  :class:`RowSpace` is the
canonical immutable subspace value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .finite_field import FieldSpec


class AmbientMismatch(ValueError):
    pass


class EmptySet(ValueError):
    pass


def as_matrix(field: FieldSpec, rows, ncols: int | None = None) -> np.ndarray:
    m = np.array(rows, dtype=np.int64)
    if m.ndim == 1:
        m = m.reshape(1, -1) if m.size else np.zeros((0, ncols or 0), dtype=np.int64)
    if m.ndim != 2:
        raise ValueError("expected a 2-D array of field elements")
    if m.size and (m.min() < 0 or m.max() >= field.q):
        raise ValueError(f"entries must lie in [0, {field.q})")
    if ncols is not None and m.shape[1] != ncols and m.shape[0]:
        raise AmbientMismatch(f"rows have length {m.shape[1]}, expected {ncols}")
    if m.shape[0] == 0 and ncols is not None:
        m = np.zeros((0, ncols), dtype=np.int64)
    return np.ascontiguousarray(m)


@dataclass(frozen=True, eq=False)
class RowSpace:
    field: FieldSpec
    ambient_dim: int
    basis: np.ndarray
    pivot_cols: tuple

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __len__(self):
        return self.dim

    def __eq__(self, other):
        if not isinstance(other, RowSpace):
            return NotImplemented
        return (
            self.field == other.field
            and self.ambient_dim == other.ambient_dim
            and self.pivot_cols == other.pivot_cols
            and np.array_equal(self.basis, other.basis)
        )

    def __hash__(self):
        return hash((self.field.q, self.ambient_dim, self.pivot_cols, self.basis.tobytes()))

    def __repr__(self):
        return f"RowSpace(dim={self.dim}, n={self.ambient_dim}, {self.field!r})"

    def __contains__(self, v) -> bool:
        return contains_vector(self, v)

    def __add__(self, other: RowSpace) -> RowSpace:
        return sum_spaces(self, other)

    def __and__(self, other: RowSpace) -> RowSpace:
        return intersect(self, other)

    def __le__(self, other: RowSpace) -> bool:
        return is_subspace_of(self, other)

    def vectors(self) -> Iterable[tuple]:
        """Every vector of the space.  Exponential; meant for tiny oracles."""
        q, d = self.field.q, self.dim
        F = self.field
        for coeffs in np.ndindex(*([q] * d)) if d else [()]:
            v = np.zeros(self.ambient_dim, dtype=np.int64)
            for c, row in zip(coeffs, self.basis):
                if c:
                    v = K.matadd(v[None, :], K.matmul(np.array([[c]], dtype=np.int64), row[None, :], *F.kernel_args), F.binary, F.q)[0]
            yield tuple(int(x) for x in v)

    def to_dict(self) -> dict:
        return {
            "ambient_dim": self.ambient_dim,
            "q": self.field.q,
            "basis": self.basis.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, field: FieldSpec) -> RowSpace:
        if int(data["q"]) != field.q:
            raise ValueError(f"serialized space is over GF({data['q']}), not GF({field.q})")
        return rref(field, data["basis"], ncols=int(data["ambient_dim"]))


def _freeze(field: FieldSpec, n: int, basis: np.ndarray, pivots) -> RowSpace:
    basis = np.ascontiguousarray(basis, dtype=np.int64)
    basis.setflags(write=False)
    return RowSpace(field, n, basis, tuple(int(p) for p in pivots))


def zero_space(field: FieldSpec, n: int) -> RowSpace:
    return _freeze(field, n, np.zeros((0, n), dtype=np.int64), ())


def full_space(field: FieldSpec, n: int) -> RowSpace:
    return _freeze(field, n, np.eye(n, dtype=np.int64), range(n))


def rref(field: FieldSpec, m, ncols: int | None = None) -> RowSpace:
    """Canonical row space of ``m``."""
    if isinstance(m, RowSpace):
        return m
    a = as_matrix(field, m, ncols)
    n = a.shape[1] if ncols is None else ncols
    if a.shape[0] == 0:
        return zero_space(field, n)
    w = a.copy()
    r, piv = K.rref_inplace(w, n, *field.kernel_args)
    return _freeze(field, n, w[:r], piv)


span = rref


def _check(a: RowSpace, b: RowSpace) -> None:
    if a.ambient_dim != b.ambient_dim:
        raise AmbientMismatch(f"ambient dims {a.ambient_dim} and {b.ambient_dim} differ")
    if a.field != b.field:
        raise AmbientMismatch(f"fields {a.field!r} and {b.field!r} differ")


def sum_spaces(a: RowSpace, b: RowSpace) -> RowSpace:
    _check(a, b)
    if b.dim == 0:
        return a
    if a.dim == 0:
        return b
    return rref(a.field, np.vstack([a.basis, b.basis]), a.ambient_dim)


def sum_all(spaces: Sequence[RowSpace], field: FieldSpec | None = None, n: int | None = None) -> RowSpace:
    spaces = list(spaces)
    if not spaces:
        return zero_space(field, n)
    rows = [s.basis for s in spaces if s.dim]
    if not rows:
        return spaces[0]
    return rref(spaces[0].field, np.vstack(rows), spaces[0].ambient_dim)


def intersect(a: RowSpace, b: RowSpace) -> RowSpace:
    """Zassenhaus: rref [[A, A], [B, 0]]; rows whose left half vanishes carry
    the intersection in their right half."""
    _check(a, b)
    n = a.ambient_dim
    if a.dim == 0 or b.dim == 0:
        return zero_space(a.field, n)
    top = np.hstack([a.basis, a.basis])
    bot = np.hstack([b.basis, np.zeros_like(b.basis)])
    w = np.ascontiguousarray(np.vstack([top, bot]))
    r, _ = K.rref_inplace(w, 2 * n, *a.field.kernel_args)
    w = w[:r]
    left_zero = ~w[:, :n].any(axis=1)
    return rref(a.field, w[left_zero, n:], n)


def intersect_dim(a: RowSpace, b: RowSpace) -> int:
    _check(a, b)
    return a.dim + b.dim - join_dim(a, b)


def join_dim(a: RowSpace, b: RowSpace) -> int:
    _check(a, b)
    if a.dim < b.dim:
        a, b = b, a
    if b.dim == 0:
        return a.dim
    return int(
        K.join_rank_rref(
            a.basis, np.array(a.pivot_cols, dtype=np.int64), a.dim, b.basis, b.dim, a.ambient_dim, *a.field.kernel_args
        )
    )


def contains_vector(s: RowSpace, v) -> bool:
    v = np.asarray(v, dtype=np.int64).ravel()
    if v.shape[0] != s.ambient_dim:
        raise AmbientMismatch(f"vector length {v.shape[0]} != ambient dim {s.ambient_dim}")
    if s.dim == 0:
        return not v.any()
    return bool(
        K.is_member(s.basis, np.array(s.pivot_cols, dtype=np.int64), s.dim, np.ascontiguousarray(v), s.ambient_dim, *s.field.kernel_args)
    )


def is_subspace_of(a: RowSpace, b: RowSpace) -> bool:
    _check(a, b)
    if a.dim > b.dim:
        return False
    return all(contains_vector(b, row) for row in a.basis)


def distance_ds(a: RowSpace, b: RowSpace) -> int:
    """Subspace distance dim(a+b) - dim(a∩b)."""
    j = join_dim(a, b)
    return 2 * j - a.dim - b.dim


def set_distance_DS(A: Sequence[RowSpace], B: Sequence[RowSpace]) -> Fraction:
    """Average pairwise subspace distance between two collections."""
    A, B = list(A), list(B)
    if not A or not B:
        raise EmptySet("both collections must be nonempty")
    total = sum(distance_ds(a, b) for a in A for b in B)
    return Fraction(total, len(A) * len(B))


def sample_from(s: RowSpace, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent uniform vectors of ``s`` (uniform coefficients on
    the canonical basis)."""
    F = s.field
    if s.dim == 0:
        return np.zeros((count, s.ambient_dim), dtype=np.int64)
    coeffs = rng.integers(0, F.q, size=(count, s.dim), dtype=np.int64)
    return K.matmul(coeffs, s.basis, *F.kernel_args)


def random_vectors(field: FieldSpec, count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, field.q, size=(count, n), dtype=np.int64)


def random_subspace(field: FieldSpec, n: int, m: int, rng: np.random.Generator) -> RowSpace:
    """Span of ``m`` uniform vectors of F_q^n."""
    return rref(field, random_vectors(field, m, n, rng), n)


def gaussian_binomial(n: int, i: int, q: int) -> int:
    """Number of i-dimensional subspaces of F_q^n (exact)."""
    if not 0 <= i <= n:
        return 0
    num = den = 1
    for j in range(i):
        num *= q ** (n - j) - 1
        den *= q ** (j + 1) - 1
    return num // den


def subspace_bits(n: int, q: int) -> float:
    """Approximate bits needed to name a subspace of F_q^n: (n^2/4) log2 q."""
    return n * n / 4 * math.log2(q)


def subspace_bits_exact(n: int, q: int) -> float:
    total = sum(gaussian_binomial(n, i, q) for i in range(1, n + 1))
    return math.log2(total) if total else 0.0


class Buffer:
    """Growable RREF buffer, the mutable counterpart of RowSpace.

    With ``track`` > 0 every basis row also carries its coefficients over the
    sequence of inserted vectors (``track`` is the initial capacity of that
    log and grows on demand).
    """

    def __init__(self, field: FieldSpec, n: int, track: int = 0, max_dim: int | None = None):
        self.field = field
        self.n = n
        self.tracking = track > 0
        self._cap_log = track
        self.logged = 0
        self.max_dim = n if max_dim is None else max_dim
        width = n + (track if track else 0)
        self.rows = np.zeros((self.max_dim + 1, width), dtype=np.int64)
        self.pivots = np.zeros(self.max_dim + 1, dtype=np.int64)
        self.dim = 0

    def _grow_log(self):
        extra = max(16, self._cap_log)
        self.rows = np.hstack([self.rows, np.zeros((self.rows.shape[0], extra), dtype=np.int64)])
        self._cap_log += extra

    def insert(self, v) -> bool:
        """Add a received vector; True when it was innovative."""
        v = np.asarray(v, dtype=np.int64)
        if self.tracking:
            if self.logged >= self._cap_log:
                self._grow_log()
            w = np.zeros(self.rows.shape[1], dtype=np.int64)
            w[: self.n] = v
            w[self.n + self.logged] = 1
            self.logged += 1
        else:
            w = np.ascontiguousarray(v)
        if self.dim == self.max_dim:
            return False
        d = K.insert_row(self.rows, self.pivots, self.dim, w, self.n, *self.field.kernel_args)
        grew = d > self.dim
        self.dim = d
        return grew

    def insert_many(self, m) -> int:
        return sum(self.insert(row) for row in np.asarray(m, dtype=np.int64))

    @property
    def basis(self) -> np.ndarray:
        return self.rows[: self.dim, : self.n]

    @property
    def transform(self) -> np.ndarray:
        """Coefficients of each basis row over the logged input vectors."""
        return self.rows[: self.dim, self.n : self.n + self.logged]

    def space(self) -> RowSpace:
        return _freeze(self.field, self.n, self.basis.copy(), self.pivots[: self.dim])

    def contains(self, v) -> bool:
        return bool(
            K.is_member(self.rows[:, : self.n].copy() if self.tracking else self.rows, self.pivots, self.dim,
                        np.ascontiguousarray(v, dtype=np.int64), self.n, *self.field.kernel_args)
        )

    def copy(self) -> "Buffer":
        b = Buffer.__new__(Buffer)
        b.__dict__.update(self.__dict__)
        b.rows = self.rows.copy()
        b.pivots = self.pivots.copy()
        return b
