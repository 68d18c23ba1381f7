"""Randomized invariants of every module."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import h2, seq_joint_counts, type_class
from secrexp.ciphersim import (
    blind_adversary,
    build_blur_system,
    build_keyed_system,
    encoder_distortion_ok,
    genie_map_adversary,
    keyed_map_adversary,
    map_adversary,
    two_stage_adversary,
)
from secrexp.errors import InfeasibleError
from secrexp.exponents import exponent_key, exponent_perfect, r_blur, r_blur_rate
from secrexp.rd import conditional_rd, rd_function
from secrexp.simplex import (
    DistortionSpec,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    kl_divergence,
    mutual_information,
)
from secrexp.typelab import (
    JointTypeVec,
    TypeVec,
    greedy_cover,
    joint_types_given_marginal_x,
    keyed_codebooks,
    lemma2_holds,
)

seeds = st.integers(0, 2**32 - 1)


def rng_of(seed):
    return np.random.default_rng(seed)


def dirichlet(rng, shape):
    a = rng.dirichlet(np.ones(int(np.prod(shape))))
    return a.reshape(shape)


def ham(level, k=2):
    return DistortionSpec.hamming(k, level)


# ---------------------------------------------------------------- simplex


@settings(max_examples=1000)
@given(seeds, st.integers(2, 5))
def test_kl_nonnegative(seed, k):
    rng = rng_of(seed)
    q, p = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
    assert kl_divergence(q, p) >= -1e-10
    assert abs(kl_divergence(p, p)) <= 1e-10
    if np.abs(q - p).max() > 1e-3:
        assert kl_divergence(q, p) > 0


@settings(max_examples=200)
@given(seeds, st.integers(2, 6), st.floats(0, 1))
def test_entropy_concave(seed, k, lam):
    rng = rng_of(seed)
    p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
    mix = lam * p + (1 - lam) * q
    assert entropy(mix / mix.sum()) >= lam * entropy(p) + (1 - lam) * entropy(q) - 1e-12


@settings(max_examples=200)
@given(seeds, st.integers(2, 4), st.integers(1, 3), st.integers(2, 4))
def test_cmi_nonnegative_and_degenerate(seed, kx, ky, kv):
    rng = rng_of(seed)
    j = dirichlet(rng, (kx, ky, kv))
    assert conditional_mutual_information(j) >= 0
    if ky == 1:
        assert conditional_mutual_information(j) == pytest.approx(
            mutual_information(j[:, 0, :]), abs=1e-10)


@settings(max_examples=200)
@given(seeds, st.integers(2, 4), st.integers(2, 4), st.integers(2, 4))
def test_chain_identity(seed, kx, ky, kv):
    rng = rng_of(seed)
    j = dirichlet(rng, (kx, ky, kv))
    h_xy = entropy(j.sum(axis=2).ravel()) - entropy(j.sum(axis=(0, 2)))
    h_xvy = entropy(j.ravel()) - entropy(j.sum(axis=0).ravel())
    assert conditional_mutual_information(j) == pytest.approx(h_xy - h_xvy, abs=1e-10)
    assert conditional_entropy(j.sum(axis=2)) == pytest.approx(h_xy, abs=1e-10)


# --------------------------------------------------------- conditional RD


def crd_instance(seed):
    rng = rng_of(seed)
    kx, ky, kv = (int(v) for v in rng.integers(2, 4, size=3))
    j = dirichlet(rng, (kx, ky))
    de = rng.uniform(0, 1, size=(kx, kv))
    lo, hi = de.min(axis=1).max(), de.max()
    return rng, j, de, lo, hi


@settings(max_examples=60)
@given(seeds, st.floats(0, 1))
def test_crd_upper_bound(seed, t):
    _, j, de, lo, hi = crd_instance(seed)
    spec = DistortionSpec(de, lo + t * (hi - lo))
    val = conditional_rd(j, spec).value
    assert 0 <= val <= rd_function(j.sum(axis=1), spec).value + 1e-6


@settings(max_examples=60)
@given(seeds, st.floats(0, 1), st.floats(0, 1))
def test_crd_convex_and_monotone(seed, a, b):
    _, j, de, lo, hi = crd_instance(seed)
    a, b = sorted((a, b))
    la, lb = lo + a * (hi - lo), lo + b * (hi - lo)
    f = lambda lev: conditional_rd(j, DistortionSpec(de, lev)).value
    fa, fb, fm = f(la), f(lb), f(0.5 * (la + lb))
    assert fm <= 0.5 * (fa + fb) + 1e-6
    assert fa >= fb - 1e-8


@settings(max_examples=100)
@given(seeds, st.floats(0.05, 0.95))
def test_crd_continuity(seed, t):
    rng, j, de, lo, hi = crd_instance(seed)
    spec = DistortionSpec(de, lo + t * (hi - lo))
    # move total variation 1e-3 toward a random table
    other = dirichlet(rng, j.shape)
    pert = j + 1e-3 * (other - j) / (0.5 * np.abs(other - j).sum())
    assert abs(conditional_rd(pert, spec).value - conditional_rd(j, spec).value) < 0.05


# --------------------------------------------------------------- exponents


@settings(max_examples=10)
@given(seeds)
def test_blur_sandwich(seed):
    rng = rng_of(seed)
    k, m, v = (int(x) for x in rng.integers(2, 4, size=3))
    p = rng.dirichlet(np.ones(k))
    d, de = rng.uniform(0, 1, (k, m)), rng.uniform(0, 1, (k, v))
    sd = DistortionSpec(d, d.min(1).max() + rng.uniform(0.1, 0.9) * (d.max() - d.min(1).max()))
    se = DistortionSpec(de, de.min(1).max() + rng.uniform(0.1, 0.9) * (de.max() - de.min(1).max()))
    re, rl = rd_function(p, se).value, rd_function(p, sd).value
    blur = r_blur(p, sd, se).value
    assert max(0.0, re - rl) - 1e-3 <= blur <= re + 1e-3
    assert r_blur_rate(p, rl + 0.2, sd, se).value <= blur + 1e-3


@settings(max_examples=8)
@given(st.floats(0.05, 0.5), st.floats(0.02, 0.3))
def test_blur_rate_monotone_in_rate(q, step):
    p, sd, se = [1 - q, q], ham(0.25), ham(0.1)
    r0 = rd_function(p, sd).value
    lo = r_blur_rate(p, r0 + 0.01, sd, se)
    hi = r_blur_rate(p, r0 + 0.01 + step, sd, se, warm_start=lo.argmax_channel.rows)
    assert lo.value <= hi.value + 1e-3


@settings(max_examples=4)
@given(st.floats(0.2, 0.5), st.sampled_from([(0.25, 0.1), (0.3, 0.15), (0.2, 0.05)]))
def test_key_exponent_dominance(q, levels):
    D, De = levels
    p, sd, se = [1 - q, q], ham(D), ham(De)
    perfect = exponent_perfect(p, se).value
    prev = -math.inf
    for r in (0.0, 0.1, 0.3, 0.6):
        res = exponent_key(p, sd, se, 1.0, r, math.inf)
        assert res.value <= perfect + 1e-3
        assert res.value >= prev - 1e-3
        assert res.diagnostics["rewrite_gap"] <= 2e-3
        prev = res.value


# --------------------------------------------------------------- types lab


@st.composite
def small_joint(draw, kx=2, ky=2, nmax=6):
    n = draw(st.integers(1, nmax))
    cuts = sorted(draw(st.lists(st.integers(0, n), min_size=kx * ky - 1, max_size=kx * ky - 1)))
    parts = np.diff([0] + cuts + [n])
    return JointTypeVec(np.array(parts).reshape(kx, ky))


@settings(max_examples=40)
@given(small_joint(2, 2, 7))
def test_greedy_cover_always_covers(jt):
    code = greedy_cover(jt)
    for x in type_class(jt.marginal((0,)).counts):
        assert any(np.array_equal(seq_joint_counts([x, tuple(y)], jt.shape), jt.counts)
                   for y in code.codewords)


@settings(max_examples=20)
@given(small_joint(2, 3, 5))
def test_greedy_cover_ternary_outputs(jt):
    code = greedy_cover(jt)
    assert code.covers_all()
    assert code.size <= len(type_class(jt.marginal((0,)).counts))


@settings(max_examples=200)
@given(small_joint(2, 4, 6))
def test_lemma2_random_joint_types(jt):
    assert lemma2_holds(JointTypeVec(jt.counts.reshape(2, 2, 2)))


@settings(max_examples=10)
@given(seeds, st.sampled_from([0.0, 0.25, 0.5]))
def test_keyed_codebooks_deterministic(seed, r):
    jt = JointTypeVec([[1, 1], [1, 1]])
    a, b = keyed_codebooks(jt, r, 0.5, seed), keyed_codebooks(jt, r, 0.5, seed)
    assert a.event_E_flags == b.event_E_flags and a.retries == b.retries
    assert all(np.array_equal(x.codewords, y.codewords) for x, y in zip(a.books, b.books))
    for book, flag in zip(a.books, a.event_E_flags):
        counts = book.counts()
        if not flag:
            assert counts.min() >= 1 and counts.max() <= 2 ** (2 * 4 * 0.5)


# --------------------------------------------------------------- ciphers


levels = st.sampled_from([Fraction(0), Fraction(1, 6), Fraction(1, 4), Fraction(1, 3),
                          Fraction(1, 2)])


@settings(max_examples=15)
@given(st.floats(0.05, 0.95), st.integers(2, 6), levels, levels)
def test_blur_system_invariants(q, n, D, De):
    p = [1 - q, q]
    sys_ = build_blur_system(p, n, ham(float(D)), ham(float(De)))
    assert encoder_distortion_ok(sys_)
    m, g, t = map_adversary(sys_), genie_map_adversary(sys_), two_stage_adversary(sys_)
    assert 0 <= t.success_probability <= m.success_probability <= g.success_probability <= 1
    assert m.success_probability >= blind_adversary(p, n, ham(float(De))).success_probability
    assert t.details["lemma4_violations"] == []
    again = map_adversary(build_blur_system(p, n, ham(float(D)), ham(float(De))))
    assert again.success_probability == m.success_probability


@settings(max_examples=15)
@given(st.floats(0.1, 0.9), st.integers(2, 6), st.floats(0.0, 0.5))
def test_keyed_dummy_mass(q, n, alpha):
    try:
        sys_ = build_keyed_system([1 - q, q], n, ham(0.5), ham(0.25), R=3.0, r_disc=0.0,
                                  alpha=alpha)
    except InfeasibleError:
        return
    assert float(sys_.dummy_mass) <= 2 ** (-n * alpha) * (1 + 1e-12)


@settings(max_examples=5)
@given(seeds, st.sampled_from([(4, 0.25), (4, 0.5), (8, 0.25)]))
def test_keyed_per_message_bound(seed, case):
    n, r = case
    sys_ = build_keyed_system([0.5, 0.5], n, ham(0.5), ham(0.25), R=2.0, r_disc=r,
                              alpha=math.inf, seed=seed, epsilon=0.5)
    rep = keyed_map_adversary(sys_)
    flagged = any(any(kb.event_E_flags) for kb in sys_.books.values())
    if not flagged:
        assert all(v["holds"] for v in rep.details["per_message"].values())
        assert rep.details["etilde_any"] is False
