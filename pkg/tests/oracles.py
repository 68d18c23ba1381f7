"""Independent reference computations used by the tests.

Nothing here imports the package: every value is obtained by direct
enumeration, closed-form evaluation or a general-purpose optimizer.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize


def h2(q):
    if q <= 0 or q >= 1:
        return 0.0
    return -q * math.log2(q) - (1 - q) * math.log2(1 - q)


def entropy_bits(p):
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def kl_bits(q, p):
    return sum(a * math.log2(a / b) for a, b in zip(q, p) if a > 0)


def binary_rd(q, D):
    """Rate-distortion function of Ber(q) under Hamming distortion."""
    return max(0.0, h2(q) - h2(D)) if D < min(q, 1 - q) else 0.0


def lemma3(q, D, De):
    """Binary Hamming blur value for D_e <= D < 1/2."""
    hq = h2(q)
    if hq <= h2(De):
        return 0.0
    if hq <= h2(D):
        return hq - h2(De)
    return h2(D) - h2(De)


def binomial_tail(n, k, num=1, den=2):
    """Pr(Bin(n, num/den) <= k) as a Fraction."""
    p = Fraction(num, den)
    return sum(Fraction(math.comb(n, i)) * p**i * (1 - p) ** (n - i) for i in range(k + 1))


# ------------------------------------------------------------ conditional RD


def _cmi_slice(px_y, a, b):
    """I(X;V | Y=y) in bits for binary X, V; a = P(V=1|x=0), b = P(V=1|x=1)."""
    p0, p1 = px_y
    pv1 = p0 * a + p1 * b
    out = np.zeros(np.broadcast(a, b).shape)
    for px, w in ((p0, a), (p1, b)):
        for pv, wv in ((pv1, w), (1 - pv1, 1 - w)):
            with np.errstate(divide="ignore", invalid="ignore"):
                term = px * wv * np.log2(np.where(wv > 0, wv / pv, 1.0))
            out = out + np.where(wv > 0, term, 0.0)
    return out


def crd_bruteforce(pxy, de, De, step=0.005, bins=2001):
    """min I(X;V|Y) s.t. E d_e <= De for 2x2x2, by gridding each slice's channel.

    Each y-slice gets its own distortion-vs-information Pareto curve on a grid
    of (P(V=1|x=0,y), P(V=1|x=1,y)); the slices are then combined over every
    split of the distortion budget, and the best split is polished with SLSQP
    on the four channel parameters.
    """
    pxy = np.asarray(pxy, dtype=float)
    de = np.asarray(de, dtype=float)
    py = pxy.sum(axis=0)
    g = np.arange(0.0, 1.0 + 1e-12, step)
    A, B = np.meshgrid(g, g, indexing="ij")
    levels = np.linspace(0.0, de.max(), bins)
    curves = []
    for y in range(2):
        if py[y] <= 0:
            curves.append(np.zeros(bins))
            continue
        px_y = pxy[:, y] / py[y]
        info = _cmi_slice(px_y, A, B).ravel()
        dist = (px_y[0] * ((1 - A) * de[0, 0] + A * de[0, 1])
                + px_y[1] * ((1 - B) * de[1, 0] + B * de[1, 1])).ravel()
        order = np.argsort(dist)
        env = np.minimum.accumulate(info[order])
        pos = np.searchsorted(dist[order], levels, side="right") - 1
        curves.append(np.where(pos >= 0, env[np.clip(pos, 0, None)], np.inf))
    best, best_t = math.inf, None
    for i, t0 in enumerate(levels):
        if py[1] > 0:
            t1 = (De - py[0] * t0) / py[1]
            if t1 < 0:
                continue
            j = min(np.searchsorted(levels, t1, side="right") - 1, bins - 1)
            val = py[0] * curves[0][i] + py[1] * curves[1][j]
        else:
            if t0 > De:
                continue
            val = py[0] * curves[0][i]
        if val < best:
            best, best_t = val, t0
    return min(best, _crd_polish(pxy, de, De, best))


def _crd_polish(pxy, de, De, start_val):
    py = pxy.sum(axis=0)

    def parts(z):
        tot, dist = 0.0, 0.0
        for y in range(2):
            if py[y] <= 0:
                continue
            px_y = pxy[:, y] / py[y]
            a, b = z[2 * y], z[2 * y + 1]
            tot += py[y] * float(_cmi_slice(px_y, np.array(a), np.array(b)))
            dist += py[y] * (px_y[0] * ((1 - a) * de[0, 0] + a * de[0, 1])
                             + px_y[1] * ((1 - b) * de[1, 0] + b * de[1, 1]))
        return tot, dist

    best = start_val
    rng = np.random.default_rng(0)
    for z0 in [np.full(4, 0.5)] + [rng.uniform(0, 1, 4) for _ in range(6)]:
        res = minimize(lambda z: parts(z)[0], z0, method="SLSQP", bounds=[(0, 1)] * 4,
                       constraints=[{"type": "ineq", "fun": lambda z: De - parts(z)[1]}])
        val, dist = parts(np.clip(res.x, 0, 1))
        if dist <= De + 1e-9:
            best = min(best, val)
    return best


# -------------------------------------------------------------------- types


def seq_joint_counts(seqs, sizes):
    """Count table of the tuples formed by zipping the sequences."""
    t = np.zeros(sizes, dtype=np.int64)
    for sym in zip(*seqs):
        t[sym] += 1
    return t


def cmi_counts(t):
    """I(X;V|Y) in bits of a count table t[x, y, v]."""
    n = t.sum()
    s = 0.0
    for x, y, v in itertools.product(*[range(k) for k in t.shape]):
        c = t[x, y, v]
        if c:
            s += c * math.log2(c * t[:, y, :].sum() / (t[x, y, :].sum() * t[:, y, v].sum()))
    return s / n


def pstar_bruteforce(jt, de_int, thr):
    """min I(X;V|Y) over all V-extensions with sum d_e <= thr (integer units)."""
    jt = np.asarray(jt)
    xs, ys = jt.shape
    vs = de_int.shape[1]
    cells = [(x, y) for x in range(xs) for y in range(ys)]
    choices = []
    for x, y in cells:
        c = int(jt[x, y])
        choices.append([comp for comp in itertools.product(range(c + 1), repeat=vs)
                        if sum(comp) == c])
    best = math.inf
    for combo in itertools.product(*choices):
        t = np.zeros((xs, ys, vs), dtype=np.int64)
        cost = 0
        for (x, y), comp in zip(cells, combo):
            t[x, y] = comp
            cost += sum(comp[v] * int(de_int[x, v]) for v in range(vs))
        if cost <= thr:
            best = min(best, cmi_counts(t))
    return best


def type_class(counts):
    """All sequences with the given symbol counts, lexicographically."""
    n = sum(counts)
    return sorted({s for s in itertools.permutations(
        [a for a, c in enumerate(counts) for _ in range(c)], n)})


def min_cover_size(sets, universe):
    """Exact minimum number of sets covering the universe (tiny instances)."""
    universe = frozenset(universe)
    for k in range(1, len(sets) + 1):
        for combo in itertools.combinations(sets, k):
            if frozenset().union(*combo) >= universe:
                return k
    return None


def exact_map(x_weights, observe, vsize, n, inside):
    """Exact MAP success by enumerating every v^n for every observation.

    ``x_weights`` maps x^n to its Fraction probability, ``observe`` maps x^n
    to a list of (observation, Fraction conditional probability) pairs.
    """
    groups = {}
    for x, w in x_weights.items():
        for obs, pr in observe(x):
            groups.setdefault(obs, []).append((x, w * pr))
    total = Fraction(0)
    vs = list(itertools.product(range(vsize), repeat=n))
    for members in groups.values():
        total += max(sum((w for x, w in members if inside(x, v)), Fraction(0)) for v in vs)
    return total


def iid_weights(p, n):
    """Fraction probability of every x^n under i.i.d. p (p given as Fractions)."""
    out = {}
    for x in itertools.product(range(len(p)), repeat=n):
        w = Fraction(1)
        for s in x:
            w *= p[s]
        out[x] = w
    return out


def pstar_argmin_bruteforce(jt, de_int, thr):
    """Lexicographically smallest V-extension attaining the pstar minimum."""
    jt = np.asarray(jt)
    xs, ys = jt.shape
    vs = de_int.shape[1]
    choices = [[comp for comp in itertools.product(range(int(jt[x, y]) + 1), repeat=vs)
                if sum(comp) == jt[x, y]] for x in range(xs) for y in range(ys)]
    found = []
    for combo in itertools.product(*choices):
        t = np.array(combo).reshape(xs, ys, vs)
        if sum(t[x, y, v] * int(de_int[x, v]) for x, y, v in np.ndindex(t.shape)) <= thr:
            found.append((cmi_counts(t), tuple(t.ravel())))
    best = min(v for v, _ in found)
    flat = min(f for v, f in found if v <= best + 1e-12)
    return best, np.array(flat).reshape(xs, ys, vs)


def two_stage_pair(x, y, xsize, de_int, thr, d_int, dthr, vsize):
    """Exact two-stage success for one (x^n, y^n) by enumerating every v^n.

    Stage one draws a joint type uniformly among those with y's marginal and
    total distortion at most ``dthr``; stage two draws v^n uniformly from the
    sequences whose joint type with y^n matches the pstar extension.
    """
    n = len(x)
    ysize = d_int.shape[1]
    qy = np.bincount(y, minlength=ysize)
    cands = []
    for cols in itertools.product(*[[c for c in itertools.product(range(k + 1), repeat=xsize)
                                      if sum(c) == k] for k in qy]):
        t = np.array(cols).T
        if sum(t[a, b] * int(d_int[a, b]) for a, b in np.ndindex(t.shape)) <= dthr:
            cands.append(t)
    if not cands:
        return Fraction(0)
    vs = list(itertools.product(range(vsize), repeat=n))
    total = Fraction(0)
    for t in cands:
        _, ext = pstar_argmin_bruteforce(t, de_int, thr)
        pyv = ext.sum(axis=0)
        good = hits = 0
        for v in vs:
            if np.array_equal(seq_joint_counts([y, v], (ysize, vsize)), pyv):
                good += 1
                hits += sum(int(de_int[a, b]) for a, b in zip(x, v)) <= thr
        total += Fraction(hits, good)
    return total / len(cands)
