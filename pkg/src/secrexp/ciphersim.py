"""Exact small-blocklength schemes and eavesdropper strategies.

Source probabilities are turned into exact rationals (see
:func:`secrexp.simplex.to_fraction`), every sequence weight is an integer
over a common denominator, and success probabilities come out as
:class:`fractions.Fraction`. The optimal (MAP) guess for an observation is
the reconstruction whose distortion ball carries the most posterior mass;
for binary Hamming problems all balls are evaluated at once with a
Walsh-Hadamard XOR convolution, otherwise V^n is scanned in chunks.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import GuardExceeded, InfeasibleError, ValidationError
from .rd import rd_function, conditional_rd
from .simplex import Dist, DistortionSpec, _probs, to_fraction
from .typelab import (
    SEQ_GUARD,
    JointTypeVec,
    KeyedCodebooks,
    TypeVec,
    _extensions,
    _level_bound,
    _multinomial,
    _scaled_matrix,
    all_sequences,
    enum_types,
    exp2_n_cmi,
    greedy_cover,
    joint_types_given_marginal_y,
    keyed_codebooks,
    key_space_size,
    low_prob_types,
    pstar_n,
    qstar,
    qstar_rate,
    type_cmi,
)

SCHEMA_VERSION = 1
V_GUARD = 10**6
I64_LIMIT = 2**62


# ------------------------------------------------------------ exact weights


def exact_source(p):
    """Integer letter weights ``a`` and their total ``L``: P(x) = a[x] / L."""
    fr = [to_fraction(float(v)) for v in _probs(p)]
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    a = [int(f * den) for f in fr]
    # the rationals may miss 1 by a rounding hair; renormalize exactly
    return a, sum(a)


def sequence_weights(a, seqs):
    """prod_i a[x_i] for every row, as int64 when safe and Python ints otherwise."""
    n = seqs.shape[1]
    if max(a) ** n < I64_LIMIT:
        return np.prod(np.asarray(a, dtype=np.int64)[seqs], axis=1)
    arr = np.asarray(a, dtype=object)[seqs]
    out = np.ones(seqs.shape[0], dtype=object)
    for i in range(n):
        out = out * arr[:, i]
    return out


def _seq_index(seqs, k):
    n = seqs.shape[1]
    pw = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return seqs @ pw


def _is_binary_hamming(spec_e):
    m = spec_e.matrix
    return m.shape == (2, 2) and m[0, 0] == 0 and m[1, 1] == 0 and m[0, 1] == 1 and m[1, 0] == 1


def _wht(a):
    a = a.copy()
    h = 1
    n = a.shape[0]
    while h < n:
        a = a.reshape(-1, 2, h)
        a = np.concatenate([a[:, :1, :] + a[:, 1:, :], a[:, :1, :] - a[:, 1:, :]], axis=1)
        h *= 2
    return a.reshape(n)


def _ball_best_hamming(x_seqs, W, n, thr):
    """Binary Hamming: best ball mass per column of W via XOR convolution."""
    size = 1 << n
    idx = _seq_index(x_seqs, 2)
    pop = np.array([bin(z).count("1") for z in range(size)])
    ball = (pop <= thr).astype(np.int64)
    totals = [sum(int(v) for v in W[:, j]) for j in range(W.shape[1])]
    use_obj = max(totals, default=0) * size * size >= I64_LIMIT or W.dtype == object
    dtype = object if use_obj else np.int64
    hb = _wht(ball.astype(dtype))
    best, arg = [], []
    for j in range(W.shape[1]):
        w = np.zeros(size, dtype=dtype)
        w[idx] = W[:, j]
        mass = _wht(_wht(w) * hb)
        mass = mass // size if dtype is np.int64 else np.array([int(m) // size for m in mass],
                                                                dtype=object)
        k = int(np.argmax(mass))
        best.append(int(mass[k]))
        arg.append(k)
    vseq = ((np.asarray(arg)[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int64)
    return best, vseq


def _ball_best_general(x_seqs, W, spec_e, n):
    vsize = spec_e.shape[1]
    if vsize**n > V_GUARD:
        raise GuardExceeded("exact MAP over V^n", vsize**n, V_GUARD)
    dint, scale = _scaled_matrix(spec_e)
    thr = _level_bound(spec_e, n, scale)
    D = np.array(dint.tolist(), dtype=np.int64)
    V = all_sequences(vsize, n)
    nobs = W.shape[1]
    best = [-1] * nobs
    arg = [0] * nobs
    use_obj = W.dtype == object
    rows = max(1, 2_000_000 // max(1, x_seqs.shape[0]))
    for s in range(0, V.shape[0], rows):
        Vc = V[s:s + rows]
        tot = np.zeros((Vc.shape[0], x_seqs.shape[0]), dtype=np.int64)
        for i in range(n):
            tot += D[x_seqs[None, :, i], Vc[:, None, i]]
        inside = tot <= thr
        mass = inside.astype(object) @ W if use_obj else inside.astype(np.int64) @ W
        k = np.argmax(mass, axis=0) if not use_obj else [
            max(range(mass.shape[0]), key=lambda r: (mass[r, j], -r)) for j in range(nobs)]
        for j in range(nobs):
            m = int(mass[k[j], j])
            if m > best[j]:
                best[j], arg[j] = m, s + int(k[j])
    return best, V[np.asarray(arg, dtype=np.int64)]


def ball_best(x_seqs, W, spec_e, n):
    """For each observation column of ``W`` (integer weights over ``x_seqs``),
    the largest total weight inside one distortion ball and its centre.

    Returns ``(masses, centres)``; ties go to the lexicographically smallest
    centre.
    """
    if x_seqs.shape[1] != n:
        raise ValidationError("sequence length mismatch")
    if _is_binary_hamming(spec_e):
        return _ball_best_hamming(x_seqs, W, n, math.floor(spec_e.level_exact * n))
    return _ball_best_general(x_seqs, W, spec_e, n)


def inside_ball(x_seqs, v_seqs, spec_e):
    """Row-wise exact test d_e(x, v) <= D_e."""
    n = x_seqs.shape[1]
    dint, scale = _scaled_matrix(spec_e)
    D = np.array(dint.tolist(), dtype=object)
    tot = D[x_seqs, v_seqs].sum(axis=1)
    thr = _level_bound(spec_e, n, scale)
    return np.array([int(t) <= thr for t in tot], dtype=bool)


# ------------------------------------------------------------------ reports


@dataclass(frozen=True)
class AdversaryReport:
    """Success probability of one eavesdropper strategy.

    ``per_type`` maps each source type to its contribution to
    ``success_probability``. ``ci_radius`` is ``None`` for exact values.
    """

    strategy: str
    success_probability: Fraction
    n: int
    exact: bool = True
    ci_radius: float = None
    per_type: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def success_float(self):
        return float(self.success_probability)

    @property
    def empirical_exponent(self):
        s = self.success_probability
        return math.inf if s <= 0 else -math.log2(s) / self.n

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "strategy": self.strategy,
            "n": self.n,
            "exact": self.exact,
            "success": _fraction_str(self.success_probability),
            "success_float": self.success_float,
            "empirical_exponent": _finite(self.empirical_exponent),
            "ci_radius": self.ci_radius,
            "per_type": {",".join(map(str, t.counts)): _fraction_str(v)
                         for t, v in self.per_type.items()},
            "details": _jsonable(self.details),
        }


def _fraction_str(f):
    f = Fraction(f)
    return f"{f.numerator}/{f.denominator}"


def _finite(x):
    return x if math.isfinite(x) else "inf"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {_json_key(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return _fraction_str(obj)
    if isinstance(obj, (TypeVec,)):
        return list(obj.counts)
    if isinstance(obj, JointTypeVec):
        return obj.counts.tolist()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else str(obj)
    return obj


def _json_key(k):
    if isinstance(k, TypeVec):
        return ",".join(map(str, k.counts))
    if isinstance(k, tuple):
        return ",".join(map(str, k))
    return str(k)


def _report(strategy, num, den, n, per_type_num=None, details=None):
    per = {t: Fraction(v, den) for t, v in (per_type_num or {}).items()}
    return AdversaryReport(strategy, Fraction(num, den), n, per_type=per, details=details or {})


# ------------------------------------------------------------- blur system


@dataclass(frozen=True, eq=False)
class BlurSystem:
    """Type-by-type covering encoder without a key.

    ``x_all`` lists X^n lexicographically; ``y_index[i]`` points into
    ``outputs`` for the encoding of ``x_all[i]``.
    """

    source: Dist
    n: int
    spec_d: DistortionSpec
    spec_e: DistortionSpec
    per_type_code: dict
    x_all: np.ndarray = field(repr=False)
    y_index: np.ndarray = field(repr=False)
    outputs: np.ndarray = field(repr=False)
    rule: str = "qstar"
    encoder_tie_rule: str = "lowest-index"

    def encode(self, xs):
        i = int(_seq_index(np.asarray(xs, dtype=np.int64)[None, :], self.spec_d.shape[0])[0])
        return self.outputs[self.y_index[i]].copy()

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "kind": "blur",
            "n": self.n,
            "rule": self.rule,
            "source": self.source.probs.tolist(),
            "types": {",".join(map(str, t.counts)): {"joint_type": jt.counts.tolist(),
                                                     "code_size": code.size,
                                                     "code_digest": code.digest()}
                      for t, (jt, code) in self.per_type_code.items()},
        }


def _x_types(x_all, k):
    counts = np.stack([(x_all == s).sum(axis=1) for s in range(k)], axis=1)
    return [TypeVec(c) for c in counts]


def _constant_joint_type(t, spec_d, symbol=0):
    tab = np.zeros((t.k, spec_d.shape[1]), dtype=np.int64)
    tab[:, symbol] = t.counts
    jt = JointTypeVec(tab)
    dint, scale = _scaled_matrix(spec_d)
    tot = sum(int(c) * int(dint[x, y]) for (x, y), c in np.ndenumerate(tab))
    if tot > _level_bound(spec_d, t.n, scale):
        raise InfeasibleError(f"constant output violates D for type {t!r}")
    return jt


def build_blur_system(p, n, spec_d, spec_e, rule="qstar", guard=SEQ_GUARD):
    """Covering encoder: each type gets a joint type and a greedy cover.

    ``rule="qstar"`` picks the joint type maximizing the eavesdropper's
    smallest achievable I(X;V|Y); ``rule="constant"`` puts every output on
    the first reconstruction letter (valid only if that meets D). The source
    law is stored for evaluation and never used by the construction.
    """
    src = p if isinstance(p, Dist) else Dist(_probs(p))
    k = src.size
    if spec_d.shape[0] != k or spec_e.shape[0] != k:
        raise ValidationError("source and distortion alphabets differ")
    x_all = all_sequences(k, n, guard)
    per_type = {}
    lookup = {}
    for t in enum_types(n, k):
        jt = qstar(t, spec_d, spec_e) if rule == "qstar" else _constant_joint_type(t, spec_d)
        code = greedy_cover(jt, guard)
        per_type[t] = (jt, code)
        for xs, cov in zip(code.x_sequences, code.cover_index):
            lookup[tuple(xs)] = code.codewords[cov[0]]
    outs, y_index, seen = [], np.empty(x_all.shape[0], dtype=np.int64), {}
    for i, xs in enumerate(x_all):
        y = tuple(int(v) for v in lookup[tuple(xs)])
        if y not in seen:
            seen[y] = len(outs)
            outs.append(y)
        y_index[i] = seen[y]
    return BlurSystem(src, n, spec_d, spec_e, per_type, x_all, y_index,
                      np.array(outs, dtype=np.int64).reshape(len(outs), n), rule)


def encoder_distortion_ok(system):
    """Exhaustive check that d(x^n, f(x^n)) <= D for every x^n."""
    ys = system.outputs[system.y_index]
    return bool(np.all(inside_ball(system.x_all, ys, system.spec_d)))


def _map_eval(system_x, weights, obs, nobs, spec_e, n, x_types, strategy, den, extra=None):
    W = np.zeros((system_x.shape[0], nobs), dtype=weights.dtype)
    W[np.arange(system_x.shape[0]), obs] = weights
    best, centres = ball_best(system_x, W, spec_e, n)
    hit = inside_ball(system_x, centres[obs], spec_e)
    per = {}
    for i in np.flatnonzero(hit):
        per[x_types[i]] = per.get(x_types[i], 0) + int(weights[i])
    details = {"observations": nobs}
    details.update(extra or {})
    return _report(strategy, sum(best), den, n, per, details)


def map_adversary(system):
    """Optimal guess from the encoder output alone, exact."""
    a, L = exact_source(system.source)
    w = sequence_weights(a, system.x_all)
    xt = _x_types(system.x_all, system.source.size)
    return _map_eval(system.x_all, w, system.y_index, system.outputs.shape[0], system.spec_e,
                     system.n, xt, "map", L**system.n)


def genie_map_adversary(system):
    """Optimal guess from the encoder output and the true source type."""
    a, L = exact_source(system.source)
    w = sequence_weights(a, system.x_all)
    xt = _x_types(system.x_all, system.source.size)
    type_id = {t: i for i, t in enumerate(sorted(set(xt), key=lambda t: t.counts))}
    keys = {}
    obs = np.empty(len(xt), dtype=np.int64)
    for i, t in enumerate(xt):
        obs[i] = keys.setdefault((int(system.y_index[i]), type_id[t]), len(keys))
    return _map_eval(system.x_all, w, obs, len(keys), system.spec_e, system.n, xt, "genie_map",
                     L**system.n)


# ------------------------------------------------------- two-stage guessing


class _TwoStage:
    """Success of the two-stage guess as a function of the pair's joint type."""

    def __init__(self, spec_d, spec_e):
        self.spec_d, self.spec_e = spec_d, spec_e
        self.xsize, self.ysize = spec_d.shape
        self.vsize = spec_e.shape[1]
        dint, self.scale = _scaled_matrix(spec_e)
        self.dint = np.array(dint.tolist(), dtype=np.int64)
        self.cache = {}
        self.g1 = {}

    def guesses(self, qy):
        if qy not in self.g1:
            self.g1[qy] = [(J, pstar_n(J, self.spec_e))
                           for J in joint_types_given_marginal_y(qy, self.xsize, self.spec_d)]
        return self.g1[qy]

    def count_v(self, qxy, pyv):
        """#{v^n : (y^n, v^n) has joint type pyv and d_e(x^n, v^n) <= D_e}."""
        ext = _extensions(qxy, self.vsize)
        ext = ext[np.all(ext.sum(axis=1) == pyv[None], axis=(1, 2))]
        if ext.shape[0] == 0:
            return 0
        tot = np.einsum("mxyv,xv->m", ext, self.dint)
        ext = ext[tot <= _level_bound(self.spec_e, qxy.n, self.scale)]
        total = 0
        for e in ext:
            prod = 1
            for cell in e.reshape(-1, self.vsize):
                prod *= _multinomial(cell)
            total += prod
        return total

    def success(self, qxy):
        key = qxy.key()
        if key not in self.cache:
            g = self.guesses(qxy.marginal((1,)))
            if not g:
                self.cache[key] = Fraction(0)
            else:
                acc = Fraction(0)
                for _, P in g:
                    pyv = P.counts.sum(axis=0)
                    den = 1
                    for row in pyv:
                        den *= _multinomial(row)
                    acc += Fraction(self.count_v(qxy, pyv), den)
                self.cache[key] = acc / len(g)
        return self.cache[key]


def _pair_type(xs, ys, xsize, ysize):
    c = np.bincount(xs * ysize + ys, minlength=xsize * ysize).reshape(xsize, ysize)
    return JointTypeVec(c)


def two_stage_adversary(system, lemma4_exponent=None):
    """Uniform joint-type guess followed by a uniform conditional-type guess.

    The success probability is averaged exactly over both random stages. For
    every pair ``(x^n, f(x^n))`` meeting D the report also checks
    ``success >= (n+1)^{-k} 2^{-n I}`` with ``I`` the pstar value of the
    pair's joint type and ``k = lemma4_exponent`` (default
    ``|X||Y|(|V|+1)``); violations are listed in ``details``.
    """
    ts = _TwoStage(system.spec_d, system.spec_e)
    xsize, ysize = system.spec_d.shape
    k = xsize * ysize * (system.spec_e.shape[1] + 1) if lemma4_exponent is None else lemma4_exponent
    n = system.n
    a, L = exact_source(system.source)
    den = L**n
    total = Fraction(0)
    per = {}
    violations = []
    checked = 0
    min_margin = None
    for x_idx, ys, wx in _pairs(system, a):
        xs = system.x_all[x_idx]
        qxy = _pair_type(xs, ys, xsize, ysize)
        s = ts.success(qxy)
        contrib = s * wx
        total += contrib
        t = TypeVec(qxy.counts.sum(axis=1))
        per[t] = per.get(t, Fraction(0)) + contrib
        if inside_ball(xs[None], ys[None], system.spec_d)[0]:
            star = pstar_n(qxy, system.spec_e)
            margin = s * Fraction(n + 1) ** k * exp2_n_cmi(star)
            checked += 1
            min_margin = margin if min_margin is None else min(min_margin, margin)
            if margin < 1:
                violations.append((xs.tolist(), ys.tolist()))
    rep = AdversaryReport("two_stage", total / den, n,
                          per_type={t: v / den for t, v in per.items()},
                          details={"lemma4_exponent": k, "lemma4_pairs": checked,
                                   "lemma4_violations": violations,
                                   "lemma4_min_margin": float(min_margin or 0)})
    return rep


def _pairs(system, a):
    """(x index, reconstruction, integer weight) for every reachable pair."""
    if isinstance(system, BlurSystem):
        w = sequence_weights(a, system.x_all)
        for i in range(system.x_all.shape[0]):
            if w[i]:
                yield i, system.outputs[system.y_index[i]], Fraction(int(w[i]))
        return
    for i, k, msg, weight in system.message_weights(a):
        yield i, system.reconstruct(msg, k), weight


# ------------------------------------------------------------ keyed system


DUMMY = (-1, 0)


@dataclass(frozen=True, eq=False)
class KeyedSystem:
    """Keyed covering encoder with a dummy message for unlikely types.

    Messages are pairs ``(type index, codeword index)``; :data:`DUMMY` is the
    dummy message ``m_0``, reconstructed as the all-zero sequence.
    """

    source: Dist
    n: int
    spec_d: DistortionSpec
    spec_e: DistortionSpec
    R: float
    r_disc: float
    alpha: float
    delta: float
    epsilon: float
    seed: int
    rprime: float
    books: dict
    type_index: dict
    n_keys: int
    bits_required: int
    dummy_mass: Fraction
    x_all: np.ndarray = field(repr=False)
    codebook: str = "random"

    def reconstruct(self, msg, k):
        if msg == DUMMY:
            return np.zeros(self.n, dtype=np.int64)
        t = self._types[msg[0]]
        return self.books[t].books[k].codewords[msg[1]]

    @property
    def _types(self):
        return {i: t for t, i in self.type_index.items()}

    def message_weights(self, a):
        """Yield ``(x index, key, message, weight)`` with exact probability
        ``weight / (L^n)``."""
        K = self.n_keys
        xt = _x_types(self.x_all, self.source.size)
        w = sequence_weights(a, self.x_all)
        pos = {}
        for t, kb in self.books.items():
            pos[t] = {tuple(s): j for j, s in enumerate(kb.books[0].x_sequences)}
        for i, t in enumerate(xt):
            wi = Fraction(int(w[i]))
            if not wi:
                continue
            if t not in self.books:
                for k in range(K):
                    yield i, k, DUMMY, wi / K
                continue
            kb = self.books[t]
            j = pos[t][tuple(self.x_all[i])]
            tid = self.type_index[t]
            for k in range(K):
                if self.codebook == "greedy":
                    yield i, k, (tid, kb.books[k].cover_index[j][0]), wi / K
                elif kb.event_E_flags[k]:
                    for m in range(kb.N):
                        yield i, k, (tid, m), wi / (K * kb.N)
                else:
                    cov = kb.books[k].cover_index[j]
                    for m in cov:
                        yield i, k, (tid, m), wi / (K * len(cov))

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "kind": "keyed",
            "n": self.n,
            "R": self.R,
            "r_disc": self.r_disc,
            "alpha": _finite(self.alpha),
            "delta": self.delta,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "rprime": self.rprime,
            "n_keys": self.n_keys,
            "codebook": self.codebook,
            "bits_required": self.bits_required,
            "dummy_mass": _fraction_str(self.dummy_mass),
            "types": {",".join(map(str, t.counts)): {
                "joint_type": kb.joint_type.counts.tolist(),
                "N": kb.N,
                "event_E": list(kb.event_E_flags),
                "retries": list(kb.retries),
                "book_digests": [b.digest() for b in kb.books]}
                for t, kb in self.books.items()},
        }


def build_keyed_system(p, n, spec_d, spec_e, R, r_disc, alpha, delta=0.0, seed=0, epsilon=0.5,
                       rprime=None, joint_types=None, codebook=None, guard=SEQ_GUARD):
    """Keyed encoder: random keyed codebooks for likely types, ``m_0`` otherwise.

    ``rprime`` (default ``R``) caps I(X;Y) of the joint type picked for each
    surviving type; ``joint_types`` may override that choice per type. Raises
    :class:`ValidationError` when the message does not fit in ``n R`` bits and
    :class:`InfeasibleError` when the dummy mass exceeds ``2^{-n alpha}``.
    Books still in event E after the redraws are kept and flagged.

    ``codebook="random"`` draws the keyed books; ``"greedy"`` (the default
    when ``r_disc == 0``) uses the deterministic greedy cover as the single
    book over the :func:`qstar` joint type and sends its first covering
    codeword, so with infinite ``alpha`` it is the blur encoder with the type
    index made public.
    """
    if codebook is None:
        codebook = "greedy" if r_disc == 0 else "random"
    if codebook not in ("random", "greedy"):
        raise ValidationError(f"unknown codebook rule {codebook!r}")
    src = p if isinstance(p, Dist) else Dist(_probs(p))
    k = src.size
    n_keys = key_space_size(n, r_disc)
    if codebook == "greedy" and n_keys != 1:
        raise ValidationError("the greedy codebook needs r_disc = 0")
    rprime = R if rprime is None else rprime
    all_types = enum_types(n, k)
    keep = low_prob_types(src, n, alpha, delta)
    type_index = {t: i for i, t in enumerate(all_types)}
    books = {}
    for t in keep:
        if joint_types is not None and t in joint_types:
            jt = joint_types[t]
        elif codebook == "greedy":
            jt = qstar(t, spec_d, spec_e)
        else:
            jt = qstar_rate(t, rprime, spec_d, spec_e)
        if codebook == "greedy":
            code = greedy_cover(jt, guard)
            books[t] = KeyedCodebooks((code,), float(epsilon), (False,), None, (0,), code.size,
                                      0.0, seed, jt, None)
        else:
            books[t] = keyed_codebooks(jt, r_disc, epsilon, seed=_type_seed(seed, t), guard=guard)
    type_bits = math.ceil(math.log2(len(all_types))) if len(all_types) > 1 else 0
    code_bits = max((math.ceil(math.log2(kb.N)) if kb.N > 1 else 0 for kb in books.values()),
                    default=0)
    bits = type_bits + code_bits
    if bits > n * R + 1e-9:
        raise ValidationError(
            f"message needs {bits} bits ({type_bits} for the type, {code_bits} for the index) "
            f"but the budget is n R = {n * R:.4f}"
        )
    a, L = exact_source(src)
    dummy = Fraction(0)
    for t in all_types:
        if t not in books:
            dummy += _type_probability(a, L, t)
    if math.isfinite(alpha) and dummy > 2.0 ** (-n * alpha):
        raise InfeasibleError(
            f"dummy-message probability {float(dummy):.3g} exceeds 2^(-n alpha) = "
            f"{2.0 ** (-n * alpha):.3g}"
        )
    x_all = all_sequences(k, n, guard)
    return KeyedSystem(src, n, spec_d, spec_e, float(R), float(r_disc), float(alpha),
                       float(delta), float(epsilon), seed, float(rprime), books, type_index,
                       n_keys, bits, dummy, x_all, codebook)


def _type_seed(seed, t):
    return int.from_bytes(hashlib.sha256(repr((seed, t.counts)).encode()).digest()[:8], "big")


def _type_probability(a, L, t):
    num = 1
    for c, ai in zip(t.counts, a):
        num *= ai**c
    left, mult = t.n, 1
    for c in t.counts:
        mult *= math.comb(left, c)
        left -= c
    return Fraction(mult * num, L**t.n)


def _message_table(system, a):
    msgs, rows = {}, {}
    for i, k, msg, wgt in system.message_weights(a):
        j = msgs.setdefault(msg, len(msgs))
        rows[(i, j)] = rows.get((i, j), Fraction(0)) + wgt
    return msgs, rows


def keyed_map_adversary(system):
    """Optimal guess from the public message alone (the key is unknown).

    ``details["per_message"]`` holds, for every message of a surviving type,
    the largest conditional success probability given the message together
    with the bound ``2^{-n(min{R_e, r + R(Q_XY, D_e)} - 8 eps)}``;
    ``details["etilde"]`` flags the types whose books violate it.
    """
    a, L = exact_source(system.source)
    msgs, rows = _message_table(system, a)
    den = 1
    for v in rows.values():
        den = den * v.denominator // math.gcd(den, v.denominator)
    nx = system.x_all.shape[0]
    W = np.zeros((nx, len(msgs)), dtype=object)
    for (i, j), v in rows.items():
        W[i, j] = int(v * den)
    if all(int(v) < I64_LIMIT // max(1, nx) for v in W.ravel()):
        W = W.astype(np.int64)
    best, centres = ball_best(system.x_all, W, system.spec_e, system.n)
    xt = _x_types(system.x_all, system.source.size)
    types = system._types
    per = {}
    per_msg = {}
    etilde = {}
    bounds = {}
    col_tot = [sum(int(W[i, j]) for i in range(nx)) for j in range(len(msgs))]
    hitmask = {}
    for msg, j in msgs.items():
        cond = Fraction(best[j], col_tot[j])
        if msg != DUMMY:
            t = types[msg[0]]
            if t not in bounds:
                bounds[t] = _etilde_exponent(system, t)
            expo = bounds[t]
            ok = cond == 0 or math.log2(cond) <= -system.n * expo + 1e-9
            per_msg[msg] = {"success": cond, "bound_exponent": expo, "holds": ok}
            etilde[t] = etilde.get(t, False) or not ok
        hitmask[j] = inside_ball(system.x_all, np.repeat(centres[j][None], nx, axis=0),
                                 system.spec_e)
    for (i, j), v in rows.items():
        if hitmask[j][i]:
            per[xt[i]] = per.get(xt[i], Fraction(0)) + v
    total = Fraction(sum(best), den)
    w = L**system.n
    return AdversaryReport("keyed_map", total / w, system.n,
                           per_type={t: v / w for t, v in per.items()},
                           details={"messages": len(msgs), "per_message": per_msg,
                                    "etilde": etilde,
                                    "etilde_any": any(etilde.values())})


def _etilde_exponent(system, t):
    """min{R_e(Q_X, D_e), r + R(Q_XY, D_e)} - 8 eps for the books of type ``t``."""
    kb = system.books[t]
    re = rd_function(t.probs(), system.spec_e).value
    rc = conditional_rd(kb.joint_type.table(), system.spec_e).value
    return min(re, system.r_disc + rc) - 8 * system.epsilon


def key_guess_adversary(system, seed=0):
    """Guess the key uniformly, decode, then run the two-stage guess.

    Exact: the average runs over the true key, the encoder's choice, the
    guessed key and both two-stage draws. ``seed`` is recorded only; no
    sampling takes place.
    """
    ts = _TwoStage(system.spec_d, system.spec_e)
    xsize, ysize = system.spec_d.shape
    a, L = exact_source(system.source)
    K = system.n_keys
    total = Fraction(0)
    per = {}
    correct = Fraction(0)
    xt = _x_types(system.x_all, system.source.size)
    for i, k, msg, wgt in system.message_weights(a):
        xs = system.x_all[i]
        acc = Fraction(0)
        for kg in range(K):
            s = ts.success(_pair_type(xs, system.reconstruct(msg, kg), xsize, ysize))
            acc += s
            if kg == k:
                correct += wgt * s
        contrib = wgt * acc / K
        total += contrib
        per[xt[i]] = per.get(xt[i], Fraction(0)) + contrib
    w = L**system.n
    return AdversaryReport("key_guess", total / w, system.n,
                           per_type={t: v / w for t, v in per.items()},
                           details={"seed": seed, "keys": K,
                                    "correct_key_success": correct / w})


# ------------------------------------------------------------ blind guess


def _poly_mul(pa, pb, cap):
    out = {}
    for i, u in pa.items():
        for j, v in pb.items():
            if i + j <= cap:
                out[i + j] = out.get(i + j, 0) + u * v
    return out


def _poly_pow(p, e, cap):
    out = {0: 1}
    base = p
    while e:
        if e & 1:
            out = _poly_mul(out, base, cap)
        base = _poly_mul(base, base, cap)
        e >>= 1
    return out


def blind_adversary(p, n, spec_e):
    """Best single guess with no observation: max over v^n of P(d_e(X^n, v^n) <= D_e).

    The probability depends on v^n only through its type, so the search runs
    over V-types; for each, the distortion sum's law is an exact convolution.
    """
    a, L = exact_source(p)
    if spec_e.shape[0] != len(a):
        raise ValidationError("source and d_e alphabets differ")
    vsize = spec_e.shape[1]
    dint, scale = _scaled_matrix(spec_e)
    thr = _level_bound(spec_e, n, scale)
    letter = []
    for b in range(vsize):
        poly = {}
        for x, ax in enumerate(a):
            if ax:
                d = int(dint[x, b])
                poly[d] = poly.get(d, 0) + ax
        letter.append(poly)
    best, best_t, values = -1, None, {}
    for t in enum_types(n, vsize):
        poly = {0: 1}
        for b, c in enumerate(t.counts):
            if c:
                poly = _poly_mul(poly, _poly_pow(letter[b], c, thr), thr)
        mass = sum(poly.values())
        values[t] = Fraction(mass, L**n)
        if mass > best:
            best, best_t = mass, t
    centre = np.repeat(np.arange(vsize), best_t.counts)
    return AdversaryReport("blind", Fraction(best, L**n), n,
                           details={"best_v_type": best_t, "centre": centre,
                                    "per_v_type": {",".join(map(str, t.counts)): v
                                                   for t, v in values.items()}})


# ------------------------------------------------------------------ trends


@dataclass(frozen=True)
class TrendRow:
    n: int
    success: Fraction
    success_float: float
    empirical_exponent: float
    theory_exponent: float
    gap: float


@dataclass(frozen=True)
class TrendTable:
    rows: tuple
    exponents_increasing: bool
    gaps_decreasing: bool
    below_theory: bool

    COLUMNS = ("n", "success_num", "success_den", "success_float", "empirical_exponent",
               "theory_exponent", "gap")

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.COLUMNS)
        for r in self.rows:
            wr.writerow([r.n, r.success.numerator, r.success.denominator, _g17(r.success_float),
                         _g17(r.empirical_exponent), _g17(r.theory_exponent), _g17(r.gap)])
        return buf.getvalue()


def _g17(x):
    if x is None:
        return ""
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return f"{x:.17g}"


def exponent_trend(report_fn, n_list, theory=None):
    """Exact success and empirical exponent for each n.

    ``report_fn(n)`` must return an :class:`AdversaryReport`. With a
    ``theory`` exponent the gap ``theory - empirical`` is tabulated and the
    flags tell whether exponents increase, gaps strictly decrease and every
    exponent stays at or below ``theory``.
    """
    rows = []
    for n in n_list:
        rep = report_fn(n)
        e = rep.empirical_exponent
        gap = None if theory is None else theory - e
        rows.append(TrendRow(n, rep.success_probability, rep.success_float, e,
                             theory, gap))
    exps = [r.empirical_exponent for r in rows]
    inc = all(b >= a for a, b in zip(exps, exps[1:]))
    if theory is None:
        dec = below = False
    else:
        gaps = [r.gap for r in rows]
        dec = all(b < a for a, b in zip(gaps, gaps[1:]))
        below = all(e <= theory + 1e-12 for e in exps)
    return TrendTable(tuple(rows), inc, dec, below)


def binomial_tail(n, k):
    """P(Bin(n, 1/2) <= k) as an exact rational."""
    return Fraction(sum(math.comb(n, i) for i in range(0, max(-1, k) + 1)), 2**n)


def to_json(obj):
    """Serialize a system or report to a JSON string."""
    return json.dumps(_jsonable(obj.to_dict()), indent=2, sort_keys=True)
