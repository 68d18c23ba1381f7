"""Method-of-types machinery at small blocklength.

Counts are exact integers and every distortion or rate comparison at the type
level is made in rational arithmetic, so a joint type sitting exactly on the
boundary ``E d = D`` is always counted as feasible. Floating point appears
only in information quantities that are compared with a tolerance.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import EmptyFeasibleSetError, GuardExceeded, PersistentEventError, ValidationError
from .rd import conditional_rd
from .simplex import DistortionSpec, Dist, kl_divergence, _probs

ENUM_GUARD = 10**7
SEQ_GUARD = 10**6
INFO_TOL = 1e-12
MAX_RETRIES = 32


@dataclass(frozen=True)
class TypeVec:
    """Composition of ``n`` into ``len(counts)`` nonnegative parts."""

    counts: tuple

    def __post_init__(self):
        c = tuple(int(v) for v in self.counts)
        if not c or any(v < 0 for v in c):
            raise ValidationError(f"TypeVec: counts must be nonnegative, got {self.counts}")
        if sum(c) < 1:
            raise ValidationError("TypeVec: blocklength must be >= 1")
        object.__setattr__(self, "counts", c)

    @property
    def n(self):
        return sum(self.counts)

    @property
    def k(self):
        return len(self.counts)

    def probs(self):
        return np.array(self.counts, dtype=float) / self.n

    def dist(self):
        return Dist(self.probs())

    def fractions(self):
        return tuple(Fraction(c, self.n) for c in self.counts)

    def __repr__(self):
        return f"TypeVec{self.counts}"


@dataclass(frozen=True, eq=False)
class JointTypeVec:
    """Integer count table over X x Y (or X x Y x V)."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.array(self.counts, dtype=np.int64)
        if arr.ndim not in (2, 3):
            raise ValidationError(f"JointTypeVec: expected a 2-d or 3-d table, got {arr.shape}")
        if np.any(arr < 0) or arr.sum() < 1:
            raise ValidationError("JointTypeVec: counts must be nonnegative with positive total")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def shape(self):
        return self.counts.shape

    def table(self):
        return self.counts / self.n

    def marginal(self, axes):
        """TypeVec or JointTypeVec on the kept axes, e.g. ``(0,)`` or ``(1, 2)``."""
        drop = tuple(a for a in range(self.counts.ndim) if a not in axes)
        m = self.counts.sum(axis=drop)
        return TypeVec(m) if m.ndim == 1 else JointTypeVec(m)

    def key(self):
        return (self.counts.shape, self.counts.tobytes())

    def digest(self):
        return hashlib.sha256(repr((self.counts.shape, self.counts.tolist())).encode()).hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, JointTypeVec) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"JointTypeVec({self.counts.tolist()})"


# ------------------------------------------------------------- enumeration


def _compositions(n, k):
    """All compositions of n into k parts in lexicographic order."""
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def enum_types(n, k):
    """Types with denominator ``n`` on a ``k``-letter alphabet, lexicographic."""
    if n < 1 or k < 1:
        raise ValidationError(f"enum_types: need n >= 1 and k >= 1, got n={n}, k={k}")
    count = math.comb(n + k - 1, k - 1)
    if count > ENUM_GUARD:
        raise GuardExceeded("enum_types", count, ENUM_GUARD)
    return [TypeVec(c) for c in _compositions(n, k)]


def type_class_size(t):
    """|T_Q| = n! / prod(counts!)."""
    t = t if isinstance(t, TypeVec) else TypeVec(t)
    out, left = 1, t.n
    for c in t.counts:
        out *= math.comb(left, c)
        left -= c
    return out


def _multinomial(counts):
    out, left = 1, int(sum(counts))
    for c in counts:
        out *= math.comb(left, int(c))
        left -= int(c)
    return out


def _guard_product(parts, what, limit=ENUM_GUARD):
    size = 1
    for p in parts:
        size *= p
    if size > limit:
        raise GuardExceeded(what, size, limit)


def _scaled_matrix(spec):
    """Integer version ``(dint, scale)`` of the matrix, ``d = dint / scale``.

    A count table ``c`` meets the level iff ``sum(c * dint)`` is at most
    :func:`_level_bound`, which is an integer, so the test is exact.
    """
    fr = spec.matrix_exact()
    scale = 1
    for row in fr:
        for v in row:
            scale = scale * v.denominator // math.gcd(scale, v.denominator)
    dint = np.array([[int(v * scale) for v in row] for row in fr], dtype=object)
    return dint, scale


def _level_bound(spec, n, scale):
    return math.floor(spec.level_exact * n * scale)


def _rows_tables(rows_totals, width, what):
    """All integer tables whose row sums are ``rows_totals``."""
    parts = [math.comb(int(t) + width - 1, width - 1) for t in rows_totals]
    _guard_product(parts, what)
    per_row = [list(_compositions(int(t), width)) for t in rows_totals]
    for combo in itertools.product(*per_row):
        yield np.array(combo, dtype=np.int64)


def joint_types_given_marginal_x(q, ysize, spec_d):
    """Joint types with X-marginal ``q`` and ``E d(X,Y) <= D`` (exact)."""
    q = q if isinstance(q, TypeVec) else TypeVec(q)
    if spec_d.shape != (q.k, ysize):
        raise ValidationError(f"distortion matrix shape {spec_d.shape} vs ({q.k}, {ysize})")
    dint, scale = _scaled_matrix(spec_d)
    dnum = np.array(dint.tolist(), dtype=object)
    bound = _level_bound(spec_d, q.n, scale)
    out = []
    for tab in _rows_tables(q.counts, ysize, "joint_types_given_marginal_x"):
        if int((tab.astype(object) * dnum).sum()) <= bound:
            out.append(JointTypeVec(tab))
    return out


def joint_types_given_marginal_y(qy, xsize, spec_d):
    """Joint types ``[x, y]`` with Y-marginal ``qy`` and ``E d(X,Y) <= D``."""
    qy = qy if isinstance(qy, TypeVec) else TypeVec(qy)
    if spec_d.shape != (xsize, qy.k):
        raise ValidationError(f"distortion matrix shape {spec_d.shape} vs ({xsize}, {qy.k})")
    dint, scale = _scaled_matrix(spec_d)
    dnum = np.array(dint.tolist(), dtype=object)
    bound = _level_bound(spec_d, qy.n, scale)
    out = []
    for tab in _rows_tables(qy.counts, xsize, "joint_types_given_marginal_y"):
        tab = tab.T.copy()
        if int((tab.astype(object) * dnum).sum()) <= bound:
            out.append(JointTypeVec(tab))
    # lexicographic on the [x, y] table
    out.sort(key=lambda j: tuple(j.counts.ravel()))
    return out


# ------------------------------------------------------ information of types


def _plogp_counts(c):
    c = np.asarray(c, dtype=float)
    out = np.zeros_like(c)
    pos = c > 0
    out[pos] = c[pos] * np.log2(c[pos])
    return out


def type_mutual_information(jt):
    """I(X;Y) of a 2-d joint type, in bits."""
    c = jt.counts if isinstance(jt, JointTypeVec) else np.asarray(jt)
    n = c.sum()
    val = (_plogp_counts(c).sum() - _plogp_counts(c.sum(1)).sum()
           - _plogp_counts(c.sum(0)).sum() + _plogp_counts(n)) / n
    return float(max(val, 0.0))


def _cmi_batch(ext):
    """I(X;V|Y) for a batch of count tables ``ext[m, x, y, v]``."""
    n = ext.sum(axis=(1, 2, 3)).astype(float)
    pl = _plogp_counts
    val = (pl(ext).sum(axis=(1, 2, 3)) + pl(ext.sum(axis=(1, 3))).sum(axis=1)
           - pl(ext.sum(axis=3)).sum(axis=(1, 2)) - pl(ext.sum(axis=1)).sum(axis=(1, 2)))
    return np.maximum(val / n, 0.0)


def type_cmi(jt3):
    """I(X;V|Y) of a 3-d joint type ``[x, y, v]``, in bits."""
    c = jt3.counts if isinstance(jt3, JointTypeVec) else np.asarray(jt3)
    return float(_cmi_batch(c[None].astype(np.int64))[0])


def exp2_n_cmi(jt3):
    """2^{n I(X;V|Y)} as an exact rational."""
    c = jt3.counts
    cxy, cyv, cy = c.sum(axis=2), c.sum(axis=0), c.sum(axis=(0, 2))
    out = Fraction(1)
    for (x, y, v), k in np.ndenumerate(c):
        if k:
            out *= Fraction(int(k) * int(cy[y]), int(cxy[x, y]) * int(cyv[y, v])) ** int(k)
    return out


# ------------------------------------------------------ discrete optimizers


def _extensions(jt, vsize):
    """All ``[x, y, v]`` count tables extending the 2-d joint type ``jt``."""
    cells = jt.counts.ravel()
    parts = [math.comb(int(c) + vsize - 1, vsize - 1) for c in cells]
    _guard_product(parts, "pstar_n extensions")
    per_cell = [np.array(list(_compositions(int(c), vsize)), dtype=np.int64) for c in cells]
    grids = np.meshgrid(*[np.arange(len(p)) for p in per_cell], indexing="ij")
    idx = [g.ravel() for g in grids]
    ext = np.stack([per_cell[i][idx[i]] for i in range(len(cells))], axis=1)
    return ext.reshape((-1,) + jt.shape + (vsize,))


def _spec_key(spec):
    return (spec.matrix.shape, spec.matrix.tobytes(), spec.level_exact)


@lru_cache(maxsize=4096)
def _pstar_cached(jt_key, spec_key):
    shape, raw = jt_key
    jt = JointTypeVec(np.frombuffer(raw, dtype=np.int64).reshape(shape))
    mshape, mraw, level = spec_key
    spec = DistortionSpec(np.frombuffer(mraw, dtype=float).reshape(mshape), level)
    vsize = spec.shape[1]
    ext = _extensions(jt, vsize)
    dint, scale = _scaled_matrix(spec)
    bound = _level_bound(spec, jt.n, scale)
    dx = np.array(dint.tolist(), dtype=object)
    xv = ext.sum(axis=2)
    if max(abs(int(v)) for v in dx.ravel()) * jt.n < 2**62:
        tot = np.einsum("mxv,xv->m", xv, dx.astype(np.int64))
        feas = tot <= bound
    else:
        feas = np.array([int((t.astype(object) * dx).sum()) <= bound for t in xv])
    if not feas.any():
        raise EmptyFeasibleSetError(
            f"no V-extension of {jt!r} meets D_e = {spec.level_exact} at n = {jt.n}"
        )
    ext = ext[feas]
    vals = _cmi_batch(ext)
    best = vals.min()
    ties = np.flatnonzero(vals <= best + INFO_TOL)
    flat = ext[ties].reshape(len(ties), -1)
    pick = ties[np.lexsort(flat.T[::-1])[0]]
    return JointTypeVec(ext[pick]), float(vals[pick])


def pstar_n(jt, spec_e):
    """argmin of I(X;V|Y) over integer V-extensions of ``jt`` with E d_e <= D_e.

    Exhaustive; ties go to the lexicographically smallest count table. Raises
    :class:`EmptyFeasibleSetError` when no extension meets the level.
    """
    if spec_e.shape[0] != jt.shape[0]:
        raise ValidationError(f"d_e has {spec_e.shape[0]} source rows, joint type {jt.shape}")
    return _pstar_cached(jt.key(), _spec_key(spec_e))[0]


def pstar_value(jt, spec_e):
    """The minimum I(X;V|Y) reached by :func:`pstar_n`, in bits."""
    return _pstar_cached(jt.key(), _spec_key(spec_e))[1]


def _argmax_lex(cands, vals):
    vals = np.asarray(vals, dtype=float)
    best = vals.max()
    ties = [c for c, v in zip(cands, vals) if v >= best - INFO_TOL]
    return min(ties, key=lambda j: tuple(j.counts.ravel()))


def qstar(q, spec_d, spec_e):
    """Joint type maximizing the pstar value over Q^n_XY(q, D) (exhaustive)."""
    q = q if isinstance(q, TypeVec) else TypeVec(q)
    cands = joint_types_given_marginal_x(q, spec_d.shape[1], spec_d)
    if not cands:
        raise EmptyFeasibleSetError(f"no joint type with marginal {q!r} meets D = {spec_d.level}")
    return _argmax_lex(cands, [pstar_value(j, spec_e) for j in cands])


def qstar_rate(q, rprime, spec_d, spec_e, return_value=False):
    """argmax of R(Q_XY, D_e) over Q^n_XY(q, D) with I(X;Y) <= ``rprime``.

    The objective is the continuous conditional rate-distortion function of
    each candidate joint type. With ``return_value`` the pair
    ``(joint type, objective)`` is returned.
    """
    q = q if isinstance(q, TypeVec) else TypeVec(q)
    cands = [j for j in joint_types_given_marginal_x(q, spec_d.shape[1], spec_d)
             if type_mutual_information(j) <= rprime + INFO_TOL]
    if not cands:
        raise EmptyFeasibleSetError(
            f"no joint type with marginal {q!r} meets D = {spec_d.level} and I <= {rprime}"
        )
    vals = [conditional_rd(j.table(), spec_e).value for j in cands]
    best = _argmax_lex(cands, vals)
    if return_value:
        return best, vals[next(i for i, j in enumerate(cands) if j == best)]
    return best


# --------------------------------------------------------------- sequences


def type_class_sequences(t, guard=SEQ_GUARD):
    """Every sequence of type ``t`` as rows of an int array, lexicographic."""
    t = t if isinstance(t, TypeVec) else TypeVec(t)
    size = type_class_size(t)
    if size > guard:
        raise GuardExceeded("type class enumeration", size, guard)
    out = np.empty((size, t.n), dtype=np.int64)
    seq = []
    for sym, c in enumerate(t.counts):
        seq.extend([sym] * c)
    cur = list(seq)
    for i in range(size):
        out[i] = cur
        # next permutation in lexicographic order
        j = len(cur) - 2
        while j >= 0 and cur[j] >= cur[j + 1]:
            j -= 1
        if j < 0:
            break
        m = len(cur) - 1
        while cur[m] <= cur[j]:
            m -= 1
        cur[j], cur[m] = cur[m], cur[j]
        cur[j + 1:] = reversed(cur[j + 1:])
    return out


def all_sequences(k, n, guard=SEQ_GUARD):
    """All of ``range(k)**n`` as rows, lexicographic."""
    if k**n > guard:
        raise GuardExceeded("sequence enumeration", k**n, guard)
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((k,) * n).reshape(n, -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)


def sequence_type(seq, k):
    return TypeVec(np.bincount(np.asarray(seq, dtype=np.int64), minlength=k))


def pair_joint_type(xs, ys, xsize, ysize):
    """Joint type of two equal-length sequences."""
    xs, ys = np.asarray(xs), np.asarray(ys)
    if xs.shape != ys.shape:
        raise ValidationError(f"sequence lengths differ: {xs.shape} vs {ys.shape}")
    c = np.bincount(xs * ysize + ys, minlength=xsize * ysize).reshape(xsize, ysize)
    return JointTypeVec(c)


def _pair_match(X, Y, jt):
    """Boolean matrix ``[i, j]``: (X[i], Y[j]) has joint type ``jt``."""
    nx, ny = jt.shape
    target = jt.counts.ravel()
    out = np.zeros((X.shape[0], Y.shape[0]), dtype=bool)
    rows = max(1, 4_000_000 // max(1, Y.shape[0] * X.shape[1]))
    for s in range(0, X.shape[0], rows):
        codes = X[s:s + rows, None, :] * ny + Y[None, :, :]
        ok = np.ones(codes.shape[:2], dtype=bool)
        for sym in range(nx * ny):
            ok &= (codes == sym).sum(axis=2) == target[sym]
        out[s:s + rows] = ok
    return out


@dataclass(frozen=True, eq=False)
class CoverCode:
    """Codewords covering T_{Q_X} at an exact joint type.

    ``cover_index[x]`` lists, for the ``x``-th sequence of ``x_sequences``, the
    indices of the codewords forming that joint type with it (``C(x^n)``).
    """

    codewords: np.ndarray
    joint_type: JointTypeVec
    x_sequences: np.ndarray
    cover_index: tuple
    diagnostics: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.codewords.shape[0]

    def counts(self):
        """N_{x^n} for every x^n in the type class."""
        return np.array([len(c) for c in self.cover_index], dtype=np.int64)

    def covers_all(self):
        return all(len(c) > 0 for c in self.cover_index)

    def digest(self):
        h = hashlib.sha256()
        h.update(self.joint_type.digest().encode())
        h.update(np.ascontiguousarray(self.codewords).tobytes())
        return h.hexdigest()[:16]


def _cover_index(match, chosen):
    sub = match[:, chosen]
    return tuple(tuple(int(i) for i in np.flatnonzero(row)) for row in sub)


def greedy_cover(jt, guard=SEQ_GUARD):
    """Greedy set cover of T_{Q_X} by sequences of T_{Q_Y} at joint type ``jt``.

    At every step the candidate covering the most uncovered source sequences
    is added; ties go to the lowest candidate index.
    """
    if jt.counts.ndim != 2:
        raise ValidationError("greedy_cover expects a 2-d joint type")
    qx, qy = jt.marginal((0,)), jt.marginal((1,))
    X = type_class_sequences(qx, guard)
    Y = type_class_sequences(qy, guard)
    match = _pair_match(X, Y, jt)
    uncovered = np.ones(X.shape[0], dtype=bool)
    chosen = []
    gain = match.sum(axis=0)
    while uncovered.any():
        j = int(np.argmax(gain))
        if gain[j] == 0:
            raise AssertionError("greedy_cover: a source sequence cannot be covered")
        chosen.append(j)
        newly = match[:, j] & uncovered
        uncovered &= ~newly
        gain -= match[newly].sum(axis=0)
    code = CoverCode(
        codewords=Y[chosen],
        joint_type=jt,
        x_sequences=X,
        cover_index=_cover_index(match, chosen),
        diagnostics={
            "size": len(chosen),
            "type_class_size": X.shape[0],
            "rate_bound": 2 ** (jt.n * type_mutual_information(jt)),
        },
    )
    if not code.covers_all():
        raise AssertionError("greedy_cover: coverage verification failed")
    return code


# ---------------------------------------------------------- keyed codebooks


@dataclass(frozen=True, eq=False)
class KeyedCodebooks:
    """Independent random codebooks, one per key value.

    ``event_E_flags[k]`` records whether book ``k`` still had an uncovered or
    over-covered source sequence after ``retries[k]`` regenerations.
    ``event_Etilde_flag`` is ``None`` until a per-message evaluation is run.
    """

    books: tuple
    epsilon: float
    event_E_flags: tuple
    event_Etilde_flag: object
    retries: tuple
    N: int
    r_disc: float
    seed: int
    joint_type: JointTypeVec
    y_type_class: np.ndarray = field(repr=False)

    @property
    def n_books(self):
        return len(self.books)

    def with_etilde(self, flag):
        return KeyedCodebooks(self.books, self.epsilon, self.event_E_flags, bool(flag),
                              self.retries, self.N, self.r_disc, self.seed, self.joint_type,
                              self.y_type_class)


def key_space_size(n, r_disc):
    """2^{n r_disc}, which must be an integer."""
    size = 2.0 ** (n * r_disc)
    k = int(round(size))
    if r_disc < 0 or abs(size - k) > 1e-9 * max(1.0, size):
        raise ValidationError(f"2^(n r) = {size} is not an integer for n={n}, r={r_disc}")
    return k


def codebook_size(jt, epsilon):
    """ceil(2^{n(I + eps)}), clipped to |T_{Q_Y}|."""
    n = jt.n
    raw = math.ceil(2.0 ** (n * (type_mutual_information(jt) + epsilon)) - 1e-9)
    return int(min(raw, type_class_size(jt.marginal((1,)))))


def _event_E(counts, n, epsilon):
    return bool(np.any(counts == 0) or np.any(counts > 2.0 ** (2 * n * epsilon)))


def keyed_codebooks(jt, r_disc, epsilon=0.5, seed=0, strict=False, guard=SEQ_GUARD):
    """Draw ``2^{n r_disc}`` codebooks of N codewords uniformly from T_{Q_Y}.

    Every book whose draw lands in event E (some N_{x^n} is 0 or exceeds
    2^{2 n eps}) is redrawn from a fresh sub-seed, up to 32 times. Book ``b``,
    attempt ``a`` uses ``SeedSequence(seed, spawn_key=(b, a))``, so the result
    does not depend on the order in which books are generated. With
    ``strict`` a book still in E raises :class:`PersistentEventError`.
    """
    n = jt.n
    n_books = key_space_size(n, r_disc)
    N = codebook_size(jt, epsilon)
    qx, qy = jt.marginal((0,)), jt.marginal((1,))
    X = type_class_sequences(qx, guard)
    Y = type_class_sequences(qy, guard)
    match = _pair_match(X, Y, jt)
    books, flags, retries = [], [], []
    for b in range(n_books):
        for a in range(MAX_RETRIES + 1):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(b, a)))
            idx = rng.integers(0, Y.shape[0], size=N)
            index = _cover_index(match, idx)
            counts = np.array([len(c) for c in index])
            bad = _event_E(counts, n, epsilon)
            if not bad:
                break
        books.append(CoverCode(codewords=Y[idx], joint_type=jt, x_sequences=X, cover_index=index,
                               diagnostics={"draw_indices": idx}))
        flags.append(bad)
        retries.append(a)
    out = KeyedCodebooks(tuple(books), float(epsilon), tuple(flags), None, tuple(retries), N,
                         float(r_disc), seed, jt, Y)
    if strict and any(flags):
        raise PersistentEventError(
            f"event E persists after {MAX_RETRIES} redraws in books "
            f"{[i for i, f in enumerate(flags) if f]} (n={n}, eps={epsilon}); "
            "epsilon is too small for this blocklength",
            books=out,
        )
    return out


# ------------------------------------------------------------ exact checks


def lemma2_ratio(jt3):
    """|T_{V|XY}(x,y)| / |T_{V|Y}(y)| for any (x, y) of the X-Y marginal type."""
    c = jt3.counts
    num = 1
    for x in range(c.shape[0]):
        for y in range(c.shape[1]):
            num *= _multinomial(c[x, y])
    den = 1
    cyv = c.sum(axis=0)
    for y in range(c.shape[1]):
        den *= _multinomial(cyv[y])
    return Fraction(num, den)


def lemma2_holds(jt3, exponent=None):
    """Exact test of ratio >= (n+1)^{-exponent} 2^{-n I(X;V|Y)}."""
    k = int(np.prod(jt3.shape)) if exponent is None else exponent
    return lemma2_ratio(jt3) * Fraction(jt3.n + 1) ** k * exp2_n_cmi(jt3) >= 1


def conditional_ratio_bound_check(jt3, xs, ys):
    """Exact conditional-type ratio for a pair of sequences and its lower bound.

    Returns ``(ratio, bound, holds)`` with ``ratio`` a Fraction,
    ``bound = (n+1)^{-|X||Y||V|} 2^{-n I(X;V|Y)}`` as a float and ``holds`` the
    exact comparison.
    """
    xsize, ysize, _ = jt3.shape
    if pair_joint_type(xs, ys, xsize, ysize) != jt3.marginal((0, 1)):
        raise ValidationError("(x^n, y^n) is not in the X-Y type class of the joint type")
    ratio = lemma2_ratio(jt3)
    n = jt3.n
    k = int(np.prod(jt3.shape))
    bound = float((n + 1) ** -k * 2.0 ** (-n * type_cmi(jt3)))
    return ratio, bound, lemma2_holds(jt3)


def low_prob_types(p, n, alpha, delta=0.0):
    """Types Q with D(Q||p) <= alpha + delta; the rest go to the dummy message."""
    if not alpha >= 0:
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    pa = _probs(p)
    types = enum_types(n, pa.shape[0])
    if math.isinf(alpha):
        return types
    lim = alpha + delta
    return [t for t in types if kl_divergence(t.probs(), pa) <= lim + 1e-12]


def ball_membership(xs, vs, spec_e):
    """True iff (1/n) sum d_e(x_i, v_i) <= D_e, decided exactly."""
    xs, vs = np.asarray(xs, dtype=np.int64), np.asarray(vs, dtype=np.int64)
    if xs.shape != vs.shape:
        raise ValidationError(f"sequence lengths differ: {xs.shape} vs {vs.shape}")
    dint, scale = _scaled_matrix(spec_e)
    total = sum(int(dint[a, b]) for a, b in zip(xs, vs))
    return total <= _level_bound(spec_e, xs.shape[0], scale)


def types_table(p, n, spec_d, spec_e):
    """Per-type rows: counts, class size, D(Q||p), qstar digest, pstar value."""
    pa = _probs(p)
    rows = []
    for t in enum_types(n, pa.shape[0]):
        jt = qstar(t, spec_d, spec_e)
        val = pstar_value(jt, spec_e)
        div = kl_divergence(t.probs(), pa)
        rows.append({
            "counts": t.counts,
            "class_size": type_class_size(t),
            "divergence": div,
            "qstar": jt,
            "qstar_digest": jt.digest(),
            "pstar_value": val,
            "contribution": div + val,
        })
    return rows


def discrete_exponent(p, n, spec_d, spec_e):
    """min over types of D(Q||p) + pstar value of qstar(Q)."""
    rows = types_table(p, n, spec_d, spec_e)
    best = min(rows, key=lambda r: r["contribution"])
    return best["contribution"], best
