import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from oracles import (
    cmi_counts,
    crd_bruteforce,
    h2,
    lemma3,
    min_cover_size,
    pstar_bruteforce,
    seq_joint_counts,
    type_class,
)
from secrexp.errors import (
    EmptyFeasibleSetError,
    GuardExceeded,
    PersistentEventError,
    ValidationError,
)
from secrexp.exponents import exponent_nokey
from secrexp.rd import rd_function
from secrexp.simplex import DistortionSpec
from secrexp.typelab import (
    JointTypeVec,
    TypeVec,
    ball_membership,
    conditional_ratio_bound_check,
    discrete_exponent,
    enum_types,
    greedy_cover,
    joint_types_given_marginal_x,
    joint_types_given_marginal_y,
    keyed_codebooks,
    lemma2_holds,
    lemma2_ratio,
    low_prob_types,
    pstar_n,
    pstar_value,
    qstar,
    qstar_rate,
    type_class_size,
    type_cmi,
    type_mutual_information,
)


def ham(level, k=2):
    return DistortionSpec.hamming(k, level)


def tables_with_rows(rows, width):
    """Integer tables with the given row sums, by plain nested products."""
    per = [[c for c in itertools.product(range(r + 1), repeat=width) if sum(c) == r]
           for r in rows]
    return [np.array(t) for t in itertools.product(*per)]


def hamming_cost(t):
    return int(t.sum() - np.trace(t))


def pair_mi(t):
    n = t.sum()
    s = 0.0
    for (x, y), c in np.ndenumerate(t):
        if c:
            s += c * math.log2(c * n / (t[x].sum() * t[:, y].sum()))
    return s / n


# ------------------------------------------------------------------ types


def test_enum_types_examples():
    assert [t.counts for t in enum_types(2, 2)] == [(0, 2), (1, 1), (2, 0)]
    assert [t.counts for t in enum_types(1, 1)] == [(1,)]
    assert len(enum_types(4, 3)) == 15
    with pytest.raises(ValidationError):
        enum_types(0, 2)
    with pytest.raises(GuardExceeded):
        enum_types(300, 5)


def test_type_class_size_examples_and_bounds():
    assert type_class_size(TypeVec((2, 2))) == 6
    assert type_class_size(TypeVec((4, 0))) == 1
    assert type_class_size(TypeVec((3, 2, 1))) == 60
    for t in enum_types(7, 3):
        p = np.array(t.counts) / t.n
        H = -sum(x * math.log2(x) for x in p if x > 0)
        size = type_class_size(t)
        assert (t.n + 1) ** -3 * 2 ** (t.n * H) <= size <= 2 ** (t.n * H) * (1 + 1e-12)
        assert size == len(type_class(t.counts))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_type_class_sizes_sum_to_all_sequences(k):
    for n in range(1, 13):
        assert sum(type_class_size(t) for t in enum_types(n, k)) == k**n


def test_typevec_validation():
    with pytest.raises(ValidationError):
        TypeVec((1, -1))
    with pytest.raises(ValidationError):
        TypeVec((0, 0))
    jt = JointTypeVec([[1, 2], [0, 3]])
    assert jt.marginal((0,)).counts == (3, 3)
    assert jt.marginal((1,)).counts == (1, 5)


# ------------------------------------------------------------ joint types


@pytest.mark.parametrize("q,D,want", [((2, 2), 0.0, 1), ((2, 2), 1.0, 9), ((4, 0), 0.25, 2)])
def test_joint_types_given_x_examples(q, D, want):
    got = joint_types_given_marginal_x(TypeVec(q), 2, ham(D))
    oracle = [t for t in tables_with_rows(q, 2) if hamming_cost(t) <= D * sum(q)]
    assert len(got) == want == len(oracle)
    assert {tuple(j.counts.ravel()) for j in got} == {tuple(t.ravel()) for t in oracle}


@pytest.mark.parametrize("qy,D,want", [((2, 2), 0.0, 1), ((2, 2), 1.0, 9), ((4, 0), 0.25, 2)])
def test_joint_types_given_y_examples(qy, D, want):
    got = joint_types_given_marginal_y(TypeVec(qy), 2, ham(D))
    oracle = [t.T for t in tables_with_rows(qy, 2) if hamming_cost(t) <= D * sum(qy)]
    assert len(got) == want == len(oracle)
    assert {tuple(j.counts.ravel()) for j in got} == {tuple(t.ravel()) for t in oracle}
    assert all(j.marginal((1,)).counts == qy for j in got)


def test_joint_types_boundary_is_exact():
    # one mismatch out of three sits exactly on D = 1/3
    got = joint_types_given_marginal_x(TypeVec((3, 0)), 2, ham(1 / 3))
    assert sorted(tuple(j.counts.ravel()) for j in got) == [(2, 1, 0, 0), (3, 0, 0, 0)]


def test_joint_types_ternary_against_enumeration():
    spec = DistortionSpec([[0, 1, 2], [1, 0, 1], [2, 1, 0]], 0.5)
    q = (2, 1, 1)
    got = joint_types_given_marginal_x(TypeVec(q), 3, spec)
    cost = np.array(spec.matrix)
    oracle = [t for t in tables_with_rows(q, 3) if (t * cost).sum() <= 0.5 * 4 + 1e-12]
    assert {tuple(j.counts.ravel()) for j in got} == {tuple(t.ravel()) for t in oracle}


# ----------------------------------------------------------------- pstar


def test_pstar_identity_coupling():
    jt = JointTypeVec([[2, 0], [0, 2]])
    ext = pstar_n(jt, ham(0.0))
    assert pstar_value(jt, ham(0.0)) == 0.0
    assert ext.counts[:, :, 0].sum() + ext.counts[:, :, 1].sum() == 4
    # V = X on every cell
    assert ext.counts[0, 0, 0] == 2 and ext.counts[1, 1, 1] == 2


def test_pstar_independent_large_level():
    jt = JointTypeVec([[1, 1], [1, 1]])
    assert pstar_value(jt, ham(1.0)) == pytest.approx(0.0, abs=1e-12)


def test_pstar_matches_exhaustive_oracle():
    jt = JointTypeVec([[2, 1], [1, 2]])
    de_int = np.array([[0, 1], [1, 0]])
    oracle = pstar_bruteforce(jt.counts, de_int, 1)
    assert pstar_value(jt, ham(1 / 6)) == pytest.approx(oracle, abs=1e-12)
    ext = pstar_n(jt, ham(1 / 6))
    assert np.array_equal(ext.counts.sum(axis=2), jt.counts)
    assert cmi_counts(ext.counts) == pytest.approx(oracle, abs=1e-12)


@pytest.mark.parametrize("counts,De", [
    ([[1, 2], [2, 1]], 1 / 3), ([[3, 0], [1, 2]], 1 / 6), ([[1, 1, 0], [0, 1, 2]], 0.2),
])
def test_pstar_random_oracle(counts, De):
    jt = JointTypeVec(counts)
    n = jt.n
    de_int = np.array([[0, 1], [1, 0]])
    thr = math.floor(De * n + 1e-12)
    assert pstar_value(jt, ham(De)) == pytest.approx(pstar_bruteforce(jt.counts, de_int, thr),
                                                     abs=1e-12)


def test_pstar_empty_feasible_set():
    spec = DistortionSpec([[1, 2], [2, 1]], 0.5)
    with pytest.raises(EmptyFeasibleSetError):
        pstar_n(JointTypeVec([[1, 1], [1, 1]]), spec)


# ----------------------------------------------------------------- qstar


def qstar_oracle(q, D, De):
    n = sum(q)
    de_int = np.array([[0, 1], [1, 0]])
    thr = math.floor(De * n + 1e-12)
    best = -1.0
    for t in tables_with_rows(q, 2):
        if hamming_cost(t) <= D * n + 1e-12:
            best = max(best, pstar_bruteforce(t, de_int, thr))
    return best


def test_qstar_binary_example():
    q = TypeVec((3, 3))
    jt = qstar(q, ham(1 / 3), ham(1 / 6))
    val = pstar_value(jt, ham(1 / 6))
    assert val == pytest.approx(qstar_oracle((3, 3), 1 / 3, 1 / 6), abs=1e-12)
    assert abs(val - lemma3(0.5, 1 / 3, 1 / 6)) <= 2 * math.log2(7) / 6
    assert jt.marginal((0,)).counts == (3, 3)


def test_qstar_max_distortion_is_unconstrained():
    q = TypeVec((2, 2))
    jt = qstar(q, ham(1.0), ham(0.25))
    de_int = np.array([[0, 1], [1, 0]])
    best = max(pstar_bruteforce(t, de_int, 1) for t in tables_with_rows((2, 2), 2))
    assert pstar_value(jt, ham(0.25)) == pytest.approx(best, abs=1e-12)


def test_qstar_at_minimal_distortion():
    jt = qstar(TypeVec((2, 2)), ham(0.0), ham(0.25))
    assert np.array_equal(jt.counts, [[2, 0], [0, 2]])


def test_qstar_rate_unconstrained_reports_both_objectives():
    q = TypeVec((3, 3))
    jt, obj = qstar_rate(q, 1.0, ham(1 / 3), ham(1 / 6), return_value=True)
    jq = qstar(q, ham(1 / 3), ham(1 / 6))
    # different objectives: both maximizers are feasible for each other's problem
    assert obj >= crd_bruteforce(jq.table(), np.array([[0.0, 1], [1, 0]]), 1 / 6) - 5e-3
    assert pstar_value(jq, ham(1 / 6)) >= pstar_value(jt, ham(1 / 6)) - 1e-12
    print(f"qstar_rate objective {obj:.6f}, qstar pstar value {pstar_value(jq, ham(1 / 6)):.6f}")


def test_qstar_rate_zero_forces_independence():
    q = TypeVec((2, 4))
    jt, obj = qstar_rate(q, 0.0, ham(0.5), ham(0.1), return_value=True)
    assert type_mutual_information(jt) == pytest.approx(0.0, abs=1e-12)
    want = max(0.0, h2(4 / 6) - h2(0.1))
    assert obj == pytest.approx(want, abs=1e-4)
    assert obj == pytest.approx(rd_function([1 / 3, 2 / 3], ham(0.1)).value, abs=1e-6)


def test_qstar_rate_exhaustive_oracle():
    q, D, De, Rp = (3, 3), 1 / 3, 1 / 6, 0.5
    de = np.array([[0.0, 1.0], [1.0, 0.0]])
    best = -1.0
    for t in tables_with_rows(q, 2):
        if hamming_cost(t) <= D * 6 + 1e-12 and pair_mi(t) <= Rp + 1e-12:
            best = max(best, crd_bruteforce(t / 6, de, De))
    jt, obj = qstar_rate(TypeVec(q), Rp, ham(D), ham(De), return_value=True)
    assert type_mutual_information(jt) <= Rp + 1e-12
    assert obj == pytest.approx(best, abs=5e-3)


def test_qstar_rate_empty():
    with pytest.raises(EmptyFeasibleSetError):
        qstar_rate(TypeVec((3, 3)), 0.0, ham(0.0), ham(0.1))


# ----------------------------------------------------------------- covers


def verify_cover(code, jt):
    """Independent pairwise check that every x^n has a codeword at type jt."""
    X = type_class(jt.marginal((0,)).counts)
    xs, ys = jt.shape
    for x in X:
        ok = [i for i, y in enumerate(code.codewords)
              if np.array_equal(seq_joint_counts([x, tuple(y)], (xs, ys)), jt.counts)]
        if not ok:
            return False
    return True


def test_greedy_cover_diagonal_uses_whole_class():
    jt = JointTypeVec([[2, 0], [0, 2]])
    code = greedy_cover(jt)
    assert code.size == 6
    assert sorted(map(tuple, code.codewords)) == type_class((2, 2))
    assert all(len(c) == 1 for c in code.cover_index)


def test_greedy_cover_independent_near_minimal():
    jt = JointTypeVec([[1, 1], [1, 1]])
    code = greedy_cover(jt)
    X = type_class((2, 2))
    sets = [frozenset(i for i, x in enumerate(X)
                      if np.array_equal(seq_joint_counts([x, y], (2, 2)), jt.counts))
            for y in X]
    opt = min_cover_size(sets, range(len(X)))
    assert verify_cover(code, jt)
    assert opt <= code.size <= (1 + math.log(6)) * opt


def test_greedy_cover_unused_symbol():
    jt = JointTypeVec([[2, 0, 0], [1, 1, 0]])
    code = greedy_cover(jt)
    assert not np.any(code.codewords == 2)
    assert verify_cover(code, jt)


def test_greedy_cover_guard():
    with pytest.raises(GuardExceeded):
        greedy_cover(JointTypeVec([[5, 5], [5, 5]]), guard=100)


def test_greedy_cover_size_bound():
    for jt in joint_types_given_marginal_x(TypeVec((3, 3)), 2, ham(1 / 3)):
        code = greedy_cover(jt)
        n = jt.n
        assert code.size <= (n + 1) ** 4 * 2 ** (n * type_mutual_information(jt))
        assert code.size <= type_class_size(jt.marginal((0,)))


# --------------------------------------------------------------- keyed books


def test_keyed_codebooks_diagonal_event_detected():
    jt = JointTypeVec([[2, 0], [0, 2]])
    books = keyed_codebooks(jt, 0.0, epsilon=0.05, seed=3)
    assert books.n_books == 1
    assert books.event_E_flags == (True,)
    assert books.retries == (32,)
    with pytest.raises(PersistentEventError) as err:
        keyed_codebooks(jt, 0.0, epsilon=0.05, seed=3, strict=True)
    assert err.value.books is not None


def test_keyed_codebooks_independent_counts():
    jt = JointTypeVec([[2, 2], [2, 2]])
    books = keyed_codebooks(jt, 0.25, epsilon=0.5, seed=1)
    assert books.n_books == 4
    X = type_class((4, 4))
    for book, flag in zip(books.books, books.event_E_flags):
        counts = [sum(np.array_equal(seq_joint_counts([x, tuple(y)], (2, 2)), jt.counts)
                      for y in book.codewords) for x in X]
        assert counts == list(book.counts())
        assert flag == (min(counts) < 1 or max(counts) > 2**8)
    assert not any(books.event_E_flags)


def test_keyed_codebooks_deterministic():
    jt = JointTypeVec([[2, 1], [1, 2]])
    a = keyed_codebooks(jt, 1 / 3, epsilon=0.3, seed=7)
    b = keyed_codebooks(jt, 1 / 3, epsilon=0.3, seed=7)
    assert a.event_E_flags == b.event_E_flags and a.retries == b.retries
    assert all(np.array_equal(x.codewords, y.codewords) for x, y in zip(a.books, b.books))
    c = keyed_codebooks(jt, 1 / 3, epsilon=0.3, seed=8)
    assert any(not np.array_equal(x.codewords, y.codewords) for x, y in zip(a.books, c.books))


def test_keyed_codebooks_key_rate_must_be_integral():
    with pytest.raises(ValidationError):
        keyed_codebooks(JointTypeVec([[1, 1], [1, 1]]), 0.3)


# --------------------------------------------------------- conditional ratio


def count_conditional(x, y, jt3):
    """|T_{V|XY}(x,y)| and |T_{V|Y}(y)| by enumerating every v^n."""
    xs, ys, vs = jt3.shape
    num = den = 0
    cyv = jt3.counts.sum(axis=0)
    for v in itertools.product(range(vs), repeat=len(x)):
        if np.array_equal(seq_joint_counts([x, y, v], (xs, ys, vs)), jt3.counts):
            num += 1
        if np.array_equal(seq_joint_counts([y, v], (ys, vs)), cyv):
            den += 1
    return Fraction(num, den)


@pytest.mark.parametrize("counts", [
    [[[1, 1], [0, 1]], [[1, 0], [1, 1]]],
    [[[2, 0], [0, 1]], [[0, 1], [1, 1]]],
    [[[1, 0, 1], [1, 0, 0]], [[0, 1, 0], [1, 1, 0]]],
])
def test_lemma2_ratio_matches_enumeration(counts):
    jt3 = JointTypeVec(counts)
    c = jt3.counts
    x, y = [], []
    for (a, b), k in np.ndenumerate(c.sum(axis=2)):
        x += [a] * k
        y += [b] * k
    assert lemma2_ratio(jt3) == count_conditional(tuple(x), tuple(y), jt3)
    ratio, bound, holds = conditional_ratio_bound_check(jt3, x, y)
    assert holds and float(ratio) >= bound


def test_lemma2_v_determined_by_y():
    # V = Y on every cell
    jt3 = JointTypeVec([[[2, 0], [0, 1]], [[1, 0], [0, 2]]])
    ratio, bound, holds = conditional_ratio_bound_check(jt3, [0, 0, 0, 1, 1, 1], [0, 0, 1, 0, 1, 1])
    assert ratio == 1 and bound <= 1 and holds


def test_lemma2_zero_cmi_polynomial_bound():
    jt3 = JointTypeVec([[[1, 1], [1, 1]], [[1, 1], [1, 1]]])
    assert type_cmi(jt3) == pytest.approx(0.0, abs=1e-12)
    assert lemma2_ratio(jt3) >= Fraction(1, 9**8)


def test_lemma2_membership_precondition():
    jt3 = JointTypeVec([[[1, 1], [0, 1]], [[1, 0], [1, 1]]])
    with pytest.raises(ValidationError):
        conditional_ratio_bound_check(jt3, [0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0])


def test_lemma2_exhaustive_small():
    for n in range(1, 5):
        for flat in itertools.product(range(n + 1), repeat=8):
            if sum(flat) == n:
                assert lemma2_holds(JointTypeVec(np.reshape(flat, (2, 2, 2))))


# ------------------------------------------------------------ misc helpers


def test_low_prob_types_examples():
    assert len(low_prob_types([0.5, 0.5], 6, math.inf)) == 7
    assert [t.counts for t in low_prob_types([0.5, 0.5], 6, 0.0)] == [(3, 3)]
    got = sorted(t.counts[1] for t in low_prob_types([0.5, 0.5], 8, 0.1))
    assert got == [k for k in range(9) if 1 - h2(k / 8) <= 0.1] == [3, 4, 5]
    with pytest.raises(ValidationError):
        low_prob_types([0.5, 0.5], 4, -1.0)


def test_ball_membership_examples():
    assert ball_membership([0, 1, 1, 0], [0, 1, 1, 0], ham(0.0))
    assert not ball_membership([0, 1, 1, 0], [1, 0, 0, 1], ham(0.9))
    assert ball_membership([0, 0, 0, 0], [1, 0, 0, 0], ham(0.25))
    assert not ball_membership([0, 0, 0, 0], [1, 1, 0, 0], ham(0.25))
    with pytest.raises(ValidationError):
        ball_membership([0, 1], [0], ham(0.5))


# ------------------------------------------------------------- convergence


def test_discrete_exponent_convergence():
    """Discrete values approach the no-key exponent within C log(n+1)/n."""
    sd, se = ham(1 / 3), ham(1 / 6)
    target = exponent_nokey([0.5, 0.5], sd, se).value
    ns = [6, 9, 12]
    gaps = [abs(discrete_exponent([0.5, 0.5], n, sd, se)[0] - target) for n in ns]
    C = max(g * n / math.log2(n + 1) for g, n in zip(gaps, ns))
    print(f"target {target:.6f} gaps {[round(g, 6) for g in gaps]} fitted C {C:.4f}")
    assert all(g <= C * math.log2(n + 1) / n + 1e-12 for g, n in zip(gaps, ns))
    assert all(b < a for a, b in zip(gaps, gaps[1:])), f"gap not strictly decreasing: {gaps}"
