"""Distributions, channels and information measures on finite alphabets.

All information quantities are in bits. Containers validate on construction
(entries nonnegative, sums equal to one within ``SUM_TOL``) and never
renormalize silently; use :func:`normalize` for that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ValidationError

SUM_TOL = 1e-12
LOG2E = 1.0 / math.log(2.0)


def _frozen(values, ndim, name):
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValidationError(f"{name}: expected a {ndim}-d table, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name}: empty alphabet")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: non-finite entry")
    if np.any(arr < 0):
        idx = tuple(int(i) for i in np.argwhere(arr < 0)[0])
        raise ValidationError(f"{name}: negative entry at {idx}")
    arr.setflags(write=False)
    return arr


def _check_sum(arr, name, axis=None):
    s = arr.sum(axis=axis)
    if np.any(np.abs(s - 1.0) > SUM_TOL):
        raise ValidationError(f"{name}: entries sum to {s}, not 1")


@dataclass(frozen=True, eq=False)
class Dist:
    """Probability vector over a finite alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.probs, 1, "Dist")
        _check_sum(arr, "Dist")
        object.__setattr__(self, "probs", arr)

    @property
    def size(self):
        return self.probs.shape[0]

    def __len__(self):
        return self.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, Dist) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"Dist({np.array2string(self.probs, precision=6)})"

    @classmethod
    def bernoulli(cls, q):
        """Law of a bit equal to 1 with probability ``q``, as ``(1-q, q)``."""
        return cls([1.0 - q, q])

    @classmethod
    def uniform(cls, k):
        return cls(np.full(k, 1.0 / k))


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic table ``rows[a, b] = P(b | a)``."""

    rows: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.rows, 2, "Channel")
        _check_sum(arr, "Channel", axis=1)
        object.__setattr__(self, "rows", arr)

    @property
    def shape(self):
        return self.rows.shape

    def __array__(self, dtype=None, copy=None):
        return self.rows if dtype is None else self.rows.astype(dtype)

    def row(self, a):
        return Dist(self.rows[a])

    def joint(self, p):
        """Joint law of ``(A, B)`` when ``A ~ p`` is fed through the channel."""
        pa = _probs(p)
        return Joint2(pa[:, None] * self.rows)


@dataclass(frozen=True, eq=False)
class Joint2:
    """Joint law on a product alphabet X x Y."""

    table: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.table, 2, "Joint2")
        _check_sum(arr, "Joint2")
        object.__setattr__(self, "table", arr)

    @property
    def shape(self):
        return self.table.shape

    def __array__(self, dtype=None, copy=None):
        return self.table if dtype is None else self.table.astype(dtype)

    def marginal_x(self):
        return Dist(_renorm(self.table.sum(axis=1)))

    def marginal_y(self):
        return Dist(_renorm(self.table.sum(axis=0)))

    def conditional_y_given_x(self):
        """Channel P(y|x); rows of zero-probability x are set uniform."""
        return Channel(_rows_conditional(self.table))

    def extend(self, channel):
        """Joint3 from ``P(x,y) * W(v|x,y)``; ``channel`` has shape (X, Y, V)."""
        w = np.asarray(channel, dtype=float)
        return Joint3(self.table[:, :, None] * w)


@dataclass(frozen=True, eq=False)
class Joint3:
    """Joint law on X x Y x V."""

    table: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.table, 3, "Joint3")
        _check_sum(arr, "Joint3")
        object.__setattr__(self, "table", arr)

    @property
    def shape(self):
        return self.table.shape

    def __array__(self, dtype=None, copy=None):
        return self.table if dtype is None else self.table.astype(dtype)

    def marginal_xy(self):
        return Joint2(_renorm(self.table.sum(axis=2)))

    def marginal_xv(self):
        return Joint2(_renorm(self.table.sum(axis=1)))

    def marginal_yv(self):
        return Joint2(_renorm(self.table.sum(axis=0)))


@dataclass(frozen=True, eq=False)
class DistortionSpec:
    """Distortion matrix ``matrix[source, reconstruction]`` with a level.

    ``level`` may be a float, an int or a :class:`fractions.Fraction`; the
    exact value used by type-level comparisons is :attr:`level_exact`.
    """

    matrix: np.ndarray
    level: float = 0.0
    level_exact: Fraction = field(init=False, repr=False)

    def __post_init__(self):
        arr = _frozen(self.matrix, 2, "DistortionSpec.matrix")
        object.__setattr__(self, "matrix", arr)
        if not isinstance(self.level, Fraction) and not math.isfinite(float(self.level)):
            raise ValidationError(f"distortion level must be finite, got {self.level}")
        exact = to_fraction(self.level)
        if exact < 0:
            raise ValidationError(f"distortion level must be >= 0, got {self.level}")
        object.__setattr__(self, "level", float(self.level))
        object.__setattr__(self, "level_exact", exact)

    @property
    def d_min(self):
        """Largest row minimum: the smallest level every source symbol can meet."""
        return float(self.matrix.min(axis=1).max())

    @property
    def d_max(self):
        return float(self.matrix.max())

    @property
    def shape(self):
        return self.matrix.shape

    def with_level(self, level):
        return DistortionSpec(self.matrix, level)

    def matrix_exact(self):
        """Entries as Fractions (floats mapped through :func:`to_fraction`)."""
        return [[to_fraction(float(v)) for v in row] for row in self.matrix]

    @classmethod
    def hamming(cls, k, level=0.0, m=None):
        """Hamming distortion between a k-ary source and an m-ary reconstruction."""
        m = k if m is None else m
        mat = np.ones((k, m))
        for i in range(min(k, m)):
            mat[i, i] = 0.0
        return cls(mat, level)

    @classmethod
    def trivial(cls, k, m=None, level=0.0):
        """The all-zero distortion, i.e. no constraint at all."""
        return cls(np.zeros((k, k if m is None else m)), level)


def to_fraction(x):
    """Exact rational for a user-supplied number.

    Floats that sit within 1e-12 of a rational with denominator <= 10**6 are
    snapped to it, so ``1/3`` typed as ``0.3333333333333333`` compares equal
    to ``2/6`` at blocklength 6.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    x = float(x)
    exact = Fraction(x)
    snapped = exact.limit_denominator(10**6)
    if abs(float(snapped) - x) <= 1e-12 * max(1.0, abs(x)):
        return snapped
    return exact


def normalize(values):
    """Explicit renormalization to a :class:`Dist` (entries must be >= 0)."""
    arr = np.asarray(values, dtype=float)
    if np.any(arr < 0) or arr.sum() <= 0:
        raise ValidationError("normalize: need nonnegative entries with positive sum")
    return Dist(_renorm(arr))


def _renorm(arr):
    arr = np.asarray(arr, dtype=float)
    return arr / arr.sum()


def _rows_conditional(table):
    t = np.asarray(table, dtype=float)
    s = t.sum(axis=1, keepdims=True)
    out = np.where(s > 0, t / np.where(s > 0, s, 1.0), 1.0 / t.shape[1])
    return out / out.sum(axis=1, keepdims=True)


def _probs(p):
    if isinstance(p, Dist):
        return p.probs
    return np.asarray(p, dtype=float)


def _table(j):
    if isinstance(j, (Joint2, Joint3)):
        return j.table
    return np.asarray(j, dtype=float)


def _plogp(a):
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    pos = a > 0
    out[pos] = a[pos] * np.log2(a[pos])
    return out


def entropy(p):
    """Shannon entropy in bits, with 0 log 0 = 0."""
    return float(max(0.0, -_plogp(_probs(p)).sum()))


def binary_entropy(q):
    """H_b(q) for q in [0, 1]."""
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"binary_entropy: {q} is outside [0, 1]")
    return entropy([q, 1.0 - q])


def kl_divergence(q, p):
    """D(q || p) in bits; ``math.inf`` when q charges a zero of p."""
    qa, pa = _probs(q), _probs(p)
    if qa.shape != pa.shape:
        raise ValidationError(f"kl_divergence: alphabet mismatch {qa.shape} vs {pa.shape}")
    pos = qa > 0
    if np.any(pa[pos] <= 0):
        return math.inf
    val = float(np.sum(qa[pos] * np.log2(qa[pos] / pa[pos])))
    return max(val, 0.0)


def mutual_information(j):
    """I(X;Y) of a joint table."""
    t = _table(j)
    px, py = t.sum(axis=1), t.sum(axis=0)
    val = -_plogp(px).sum() - _plogp(py).sum() + _plogp(t).sum()
    return float(max(val, 0.0))


def conditional_mutual_information(j):
    """I(X;V|Y) of a table indexed ``[x, y, v]``."""
    t = _table(j)
    pxy, pyv, py = t.sum(axis=2), t.sum(axis=0), t.sum(axis=(0, 2))
    val = _plogp(t).sum() + _plogp(py).sum() - _plogp(pxy).sum() - _plogp(pyv).sum()
    return float(max(val, 0.0))


def conditional_entropy(j):
    """H(X|Y) of a table indexed ``[x, y]``."""
    t = _table(j)
    return float(max(0.0, -_plogp(t).sum() + _plogp(t.sum(axis=0)).sum()))


def expected_distortion(j, spec):
    """E d(X, V) for a joint table ``[x, v]`` (or ``[x, y, v]``, summed over y)."""
    t = _table(j)
    if t.ndim == 3:
        t = t.sum(axis=1)
    mat = spec.matrix if isinstance(spec, DistortionSpec) else np.asarray(spec, dtype=float)
    if t.shape != mat.shape:
        raise ValidationError(f"expected_distortion: shape {t.shape} vs matrix {mat.shape}")
    return float(np.sum(t * mat))
