"""Worst-side-information values, secrecy exponents and the minimum key rate.

The blur value

    R(P, D, D_e) = max  R(P * P_{Y|X}, D_e)   over P_{Y|X} with E d(X,Y) <= D,

optionally with I(X;Y) <= R, is maximized by projected gradient ascent from
several starting channels. The exponents are then minimizations over the
source law Q of D(Q||P) plus such a value. For a binary source this is a 1-D
search (coarse grid, finer grid around the best cells, golden section);
larger alphabets use Nelder-Mead from several starts on softmax logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from . import _kernels as K
from .errors import InfeasibleError, ValidationError
from .rd import DEFAULT_OPTIONS, LN2, CondRDResult, _as_spec, _c, conditional_rd, rd_function
from .simplex import (
    Channel,
    Dist,
    DistortionSpec,
    binary_entropy,
    conditional_mutual_information,
    kl_divergence,
    _probs,
)

TOL = 1e-3
AGREE_TOL = 2e-3
TIE_TOL = 1e-9


@dataclass(frozen=True)
class SearchOptions:
    """Knobs of the nonconvex searches.

    ``random_starts`` Dirichlet(1) channels are added to the two structured
    starts of every blur maximization. Inside an outer search over Q the
    cheaper ``profile_starts`` is used and the neighbouring maximizer is
    passed on as a warm start; the final argmin is re-evaluated with the full
    set. For |X| >= 3 every Nelder-Mead start first gets ``nm_probe_fev``
    evaluations, only the ``nm_keep`` best continue up to ``nm_maxfev``, and
    the ascent inside the search stops at ``profile_rtol`` or
    ``profile_max_steps`` with inner solves at ``profile_tol``.
    """

    random_starts: int = 16
    profile_starts: int = 2
    eta0: float = 0.5
    max_steps: int = 400
    rtol: float = 1e-7
    coarse_step: float = 0.01
    fine_step: float = 1e-3
    fine_cells: int = 3
    golden_xtol: float = 1e-6
    simplex_starts: int = 8
    nm_maxfev: int = 200
    nm_probe_fev: int = 30
    nm_keep: int = 2
    profile_rtol: float = 1e-5
    profile_max_steps: int = 100
    profile_tol: float = 1e-8


DEFAULT_SEARCH = SearchOptions()


@dataclass(frozen=True)
class BlurValue:
    value: float
    argmax_channel: Channel
    inner: CondRDResult
    starts_used: int
    start_values: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class ExponentResult:
    value: float
    argmin_q: Dist
    branch: str
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RefinabilityReport:
    """Outcome of :func:`successive_refinability_probe`.

    ``markov_defect`` is I(X;Y|V) under ``Q * P_{Y|X} * P_{V|XY}`` with the
    rate-distortion test channel and its conditional optimum; it vanishes when
    X - V - Y is a Markov chain.
    """

    refinable: bool
    blur_value: float
    gap_bound: float
    value_at_rd_channel: float
    rd_channel_near_optimal: bool
    markov_defect: float


# ---------------------------------------------------------------- blur value


def _check_levels(spec_d, spec_e):
    if spec_d.level < spec_d.d_min - 1e-12:
        raise InfeasibleError(f"legitimate level {spec_d.level} below D_min = {spec_d.d_min}")
    if spec_e.level < spec_e.d_min - 1e-12:
        raise InfeasibleError(f"eavesdropper level {spec_e.level} below D_e,min = {spec_e.d_min}")
    if spec_d.shape[0] != spec_e.shape[0]:
        raise ValidationError(
            f"source alphabets differ: d is {spec_d.shape}, d_e is {spec_e.shape}"
        )


def _start_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _blur_core(px, dmat, d_level, de, de_level, cap_bits, seed, n_random, extra=(),
               search=DEFAULT_SEARCH, options=DEFAULT_OPTIONS):
    """Multistart ascent on raw arrays. Returns ``(C, value_bits, n_starts, start_values)``."""
    px, dmat, de = _c(px), _c(dmat), _c(de)
    nx, ny = dmat.shape
    beta_max = options.beta_max(de)
    A = _c(px[:, None] * dmat)
    rd = rd_function(px, DistortionSpec(dmat, d_level), options)
    C_rd = K.project_feasible(_c(rd.argmin_channel.rows), A, d_level)
    i_rd = K.mi_nats(px, C_rd)
    cap = math.inf if not math.isfinite(cap_bits) else max(cap_bits * LN2, i_rd)

    def admit(C):
        C = K.project_feasible(_c(C), A, d_level)
        if cap < math.inf:
            C = K.rate_clip(px, C_rd, C, cap)
        return _c(C)

    starts = [C_rd]
    qy = C_rd.T @ px
    starts.append(admit(np.tile(qy, (nx, 1))))
    for C in extra:
        if C is not None and np.shape(C) == (nx, ny):
            starts.append(admit(C))
    for i in range(n_random):
        starts.append(admit(_start_rng(seed, i).dirichlet(np.ones(ny), size=nx)))

    best_C, best_f, values = None, -math.inf, []
    for C0 in starts:
        C, f, _, _ = K.blur_ascent(px, C0, dmat, float(d_level), de, float(de_level),
                                    float(cap), float(search.eta0), int(search.max_steps),
                                    float(search.rtol), float(options.tol), int(options.maxit),
                                    float(beta_max))
        values.append(f / LN2)
        if f > best_f + 1e-12:
            best_C, best_f = C, f
    return best_C, max(best_f, 0.0) / LN2, len(starts), tuple(values)


def _wrap_blur(px, C, value, n_starts, values, spec_e, options):
    C = np.clip(C, 0.0, None)
    C = C / C.sum(axis=1, keepdims=True)
    inner = conditional_rd(px[:, None] * C, spec_e, options)
    return BlurValue(value=value, argmax_channel=Channel(C), inner=inner,
                     starts_used=n_starts, start_values=values)


def r_blur(p, spec_d, spec_e, seed=0, warm_start=None, search=DEFAULT_SEARCH,
           options=DEFAULT_OPTIONS):
    """max over P_{Y|X} with E d <= D of R(P_X P_{Y|X}, D_e), in bits."""
    px = _probs(p)
    spec_d, spec_e = _as_spec(spec_d), _as_spec(spec_e)
    _check_levels(spec_d, spec_e)
    C, val, k, vals = _blur_core(px, spec_d.matrix, spec_d.level, spec_e.matrix, spec_e.level,
                                 math.inf, seed, search.random_starts,
                                 () if warm_start is None else (warm_start,), search, options)
    return _wrap_blur(px, C, val, k, vals, spec_e, options)


def _rate_is_slack(px, ny, rate):
    support = int(np.count_nonzero(px))
    return rate >= math.log2(max(1, min(support, ny))) - 1e-12


def r_blur_rate(p, rate, spec_d, spec_e, seed=0, warm_start=None, search=DEFAULT_SEARCH,
                options=DEFAULT_OPTIONS):
    """The blur value with the extra constraint I(X;Y) <= ``rate`` bits.

    Raises :class:`InfeasibleError` when ``rate`` is below R(p, D) by more
    than the solver tolerance.
    """
    px = _probs(p)
    spec_d, spec_e = _as_spec(spec_d), _as_spec(spec_e)
    _check_levels(spec_d, spec_e)
    if rate < 0:
        raise ValidationError(f"rate must be >= 0, got {rate}")
    if _rate_is_slack(px, spec_d.shape[1], rate):
        return r_blur(px, spec_d, spec_e, seed, warm_start, search, options)
    r_min = rd_function(px, spec_d, options).value
    if rate < r_min - TOL:
        raise InfeasibleError(f"rate {rate} below R(P, D) = {r_min:.6f}")
    C, val, k, vals = _blur_core(px, spec_d.matrix, spec_d.level, spec_e.matrix, spec_e.level,
                                 rate, seed, search.random_starts,
                                 () if warm_start is None else (warm_start,), search, options)
    return _wrap_blur(px, C, val, k, vals, spec_e, options)


# ------------------------------------------------------------ closed forms


def closed_form_binary(q, D, De):
    """Blur value of a Ber(q) source under Hamming distortions, D_e <= D < 1/2."""
    if not 0.0 < q < 1.0:
        raise ValidationError(f"closed_form_binary: q must lie in (0, 1), got {q}")
    if not 0.0 <= De <= D < 0.5:
        raise ValidationError(f"closed_form_binary: need 0 <= D_e <= D < 1/2, got D={D}, D_e={De}")
    hq, hd, he = binary_entropy(q), binary_entropy(D), binary_entropy(De)
    if hq <= he:
        return 0.0
    if hq >= hd:
        return hd - he
    return hq - he


# ------------------------------------------------------------ outer search


def _alpha_interval(p1, alpha):
    """Set of q with D(Ber(q) || Ber(p1)) <= alpha, as an interval."""
    if not math.isfinite(alpha):
        return 0.0, 1.0

    def g(q):
        return kl_divergence([1 - q, q], [1 - p1, p1]) - alpha

    lo = 0.0 if g(0.0) <= 0 else brentq(g, 0.0, p1, xtol=1e-15)
    hi = 1.0 if g(1.0) <= 0 else brentq(g, p1, 1.0, xtol=1e-15)
    return lo, hi


class _Profile:
    """Memoized evaluations q -> (divergence, value, channel) on one interval."""

    def __init__(self, p1, fn, lo, hi):
        self.p1, self.fn, self.lo, self.hi = p1, fn, lo, hi
        self.points = {}

    def nearest_channel(self, q):
        if not self.points:
            return None
        key = min(self.points, key=lambda k: abs(k - q))
        return self.points[key][2]

    def at(self, q):
        q = min(max(float(q), self.lo), self.hi)
        key = round(q, 12)
        if key not in self.points:
            qd = np.array([1.0 - key, key])
            div = kl_divergence(qd, [1.0 - self.p1, self.p1])
            val, chan = self.fn(qd, self.nearest_channel(key))
            self.points[key] = (div, val, chan)
        return self.points[key]

    def grid(self, step):
        n = max(1, int(math.ceil((self.hi - self.lo) / step)))
        return np.linspace(self.lo, self.hi, n + 1)


def _minimize_binary(prof, combine, search):
    """Minimize ``combine(div, val)`` over the profile's interval."""

    def obj(q):
        div, val, _ = prof.at(q)
        return combine(div, val)

    coarse = prof.grid(search.coarse_step)
    vals = np.array([obj(q) for q in coarse])
    order = np.argsort(vals, kind="stable")[: search.fine_cells]
    h = coarse[1] - coarse[0] if len(coarse) > 1 else 0.0
    cand = []
    for i in order:
        a, b = max(prof.lo, coarse[i] - h), min(prof.hi, coarse[i] + h)
        n = max(1, int(round((b - a) / search.fine_step)))
        cand.extend(np.linspace(a, b, n + 1))
    cand = np.unique(np.concatenate([coarse, cand]))
    fv = np.array([obj(q) for q in cand])
    i = int(np.argmin(fv))
    a = cand[max(i - 1, 0)]
    b = cand[min(i + 1, len(cand) - 1)]
    if b > a:
        res = minimize_scalar(obj, bounds=(a, b), method="bounded",
                              options={"xatol": search.golden_xtol})
        if res.fun < fv[i]:
            cand = np.append(cand, res.x)
            fv = np.append(fv, res.fun)
    best = fv.min()
    ties = cand[fv <= best + TIE_TOL]
    # smallest lexicographic (1-q, q) is the largest q
    q_star = float(ties.max())
    return q_star, obj(q_star)


def _simplex_points(p, alpha, search, seed):
    k = p.shape[0]
    pts = [p.copy(), np.full(k, 1.0 / k)]
    for i in range(search.simplex_starts):
        pts.append(_start_rng(seed, 10_000 + i).dirichlet(np.ones(k)))
    return pts


def _minimize_simplex(p, fn, alpha, search, seed, sign=1.0):
    """Nelder-Mead on logits for ``sign * fn(Q)`` subject to D(Q||p) <= alpha."""
    best_q, best_f = None, math.inf

    def q_of(z):
        z = np.concatenate([[0.0], z])
        e = np.exp(z - z.max())
        return e / e.sum()

    def obj(z):
        q = q_of(z)
        div = kl_divergence(q, p)
        if div > alpha:
            return 1e6 + (div - alpha)
        return sign * fn(q, div)

    def run(z0, fev):
        res = minimize(obj, z0, method="Nelder-Mead",
                       options={"maxfev": fev, "xatol": 1e-5, "fatol": 1e-8})
        return res.x, float(res.fun)

    probes = []
    for q0 in _simplex_points(p, alpha, search, seed):
        q0 = np.clip(q0, 1e-9, None)
        probes.append(run(np.log(q0[1:] / q0[0]), search.nm_probe_fev))
    probes.sort(key=lambda t: t[1])
    finals = [run(z, search.nm_maxfev) for z, _ in probes[:search.nm_keep]] + probes
    for z, _ in finals:
        q = q_of(z)
        f = obj(z)
        if f < best_f - TIE_TOL or (abs(f - best_f) <= TIE_TOL and tuple(q) < tuple(best_q)):
            best_q, best_f = q, f
    return best_q, sign * best_f


def _check_source(p):
    pa = _probs(p)
    Dist(pa)
    if np.any(pa <= 0):
        raise ValidationError("source law must have full support")
    return pa


def exponent_perfect(p, spec_e, search=DEFAULT_SEARCH, options=DEFAULT_OPTIONS, seed=0):
    """E_0 = min_Q D(Q||p) + R_e(Q, D_e), in bits."""
    pa = _check_source(p)
    spec_e = _as_spec(spec_e)
    if spec_e.level < spec_e.d_min - 1e-12:
        raise InfeasibleError(f"eavesdropper level {spec_e.level} below D_e,min = {spec_e.d_min}")

    def re(q):
        return rd_function(q, spec_e, options).value

    if pa.shape[0] == 2:
        prof = _Profile(pa[1], lambda q, _c: (re(q), None), 0.0, 1.0)
        q1, val = _minimize_binary(prof, lambda d, v: d + v, search)
        q = np.array([1.0 - q1, q1])
    else:
        q, val = _minimize_simplex(pa, lambda q, d: d + re(q), math.inf, search, seed)
    return ExponentResult(value=max(val, 0.0), argmin_q=Dist(q), branch="perfect",
                          diagnostics={"divergence": kl_divergence(q, pa), "rate_e": re(q)})


def _blur_fn(spec_d, spec_e, rate, seed, search, options, starts):
    """q, warm -> (blur value, channel) using ``starts`` random starts."""

    def fn(q, warm):
        cap = math.inf if rate is None or _rate_is_slack(q, spec_d.shape[1], rate) else rate
        C, val, _, _ = _blur_core(q, spec_d.matrix, spec_d.level, spec_e.matrix, spec_e.level,
                                  cap, seed, starts, (warm,) if warm is not None else (),
                                  search, options)
        return val, C

    return fn


def _full_blur(q, spec_d, spec_e, rate, seed, search, options, warm=None):
    if rate is None:
        return r_blur(q, spec_d, spec_e, seed, warm, search, options)
    return r_blur_rate(q, max(rate, rd_function(q, spec_d, options).value), spec_d, spec_e,
                       seed, warm, search, options)


def exponent_nokey(p, spec_d, spec_e, seed=0, search=DEFAULT_SEARCH, options=DEFAULT_OPTIONS):
    """min_Q D(Q||p) + R(Q, D, D_e): the exponent without a key, in bits."""
    pa = _check_source(p)
    spec_d, spec_e = _as_spec(spec_d), _as_spec(spec_e)
    _check_levels(spec_d, spec_e)
    prof = _blur_profile(pa, spec_d, spec_e, None, math.inf, seed, search, options)
    q, value, blur = prof.minimize(lambda d, v: d + v)
    return ExponentResult(value=max(value, 0.0), argmin_q=Dist(q), branch="blur",
                          diagnostics={"divergence": kl_divergence(q, pa), "blur": blur.value,
                                       "starts_used": blur.starts_used})


class _BlurProfile:
    """Blur values over {Q : D(Q||p) <= alpha}, shared across key rates."""

    def __init__(self, pa, spec_d, spec_e, rate, alpha, seed, search, options):
        self.pa, self.spec_d, self.spec_e = pa, spec_d, spec_e
        self.rate, self.alpha, self.seed = rate, alpha, seed
        self.search, self.options = search, options
        fn = _blur_fn(spec_d, spec_e, rate, seed, search, options, search.profile_starts)
        if pa.shape[0] == 2:
            lo, hi = _alpha_interval(pa[1], alpha)
            self.prof = _Profile(pa[1], fn, lo, hi)
        else:
            loose = replace(search, rtol=search.profile_rtol, max_steps=search.profile_max_steps)
            self.fn = _blur_fn(spec_d, spec_e, rate, seed, loose,
                               replace(options, tol=max(options.tol, search.profile_tol)),
                               search.profile_starts)
            self.memo = {}

    def value(self, q):
        if self.pa.shape[0] == 2:
            return self.prof.at(q[1])[1]
        key = tuple(np.round(q, 12))
        if key not in self.memo:
            warm = None
            if self.memo:
                near = min(self.memo, key=lambda k: float(np.abs(np.subtract(k, key)).sum()))
                warm = self.memo[near][1]
            self.memo[key] = self.fn(np.asarray(q), warm)
        return self.memo[key][0]

    def minimize(self, combine):
        """Returns ``(Q, combined value, full BlurValue at Q)``."""
        if self.pa.shape[0] == 2:
            q1, _ = _minimize_binary(self.prof, combine, self.search)
            q = np.array([1.0 - q1, q1])
            warm = self.prof.at(q1)[2]
        else:
            q, _ = _minimize_simplex(self.pa, lambda q, d: combine(d, self.value(q)),
                                     self.alpha, self.search, self.seed)
            warm = None
        blur = _full_blur(q, self.spec_d, self.spec_e, self.rate, self.seed, self.search,
                          self.options, warm)
        div = kl_divergence(q, self.pa)
        return q, combine(div, blur.value), blur

    def points(self):
        """Evaluated ``(q, divergence, value)`` triples (binary only)."""
        if self.pa.shape[0] != 2:
            return []
        return [(k, v[0], v[1]) for k, v in sorted(self.prof.points.items())]


_PROFILES = {}


def _spec_key(spec):
    return (spec.matrix.tobytes(), spec.matrix.shape, spec.level)


def _blur_profile(pa, spec_d, spec_e, rate, alpha, seed, search, options):
    key = (pa.tobytes(), _spec_key(spec_d), _spec_key(spec_e), rate, alpha, seed, search,
           options)
    if key not in _PROFILES:
        if len(_PROFILES) > 64:
            _PROFILES.clear()
        _PROFILES[key] = _BlurProfile(pa, spec_d, spec_e, rate, alpha, seed, search, options)
    return _PROFILES[key]


@lru_cache(maxsize=256)
def _perfect_cached(pbytes, k, e_key, search, options):
    pa = np.frombuffer(pbytes, dtype=float)
    mat = np.frombuffer(e_key[0], dtype=float).reshape(e_key[1])
    return exponent_perfect(pa, DistortionSpec(mat, e_key[2]), search, options)


def _perfect(pa, spec_e, search, options):
    return _perfect_cached(pa.tobytes(), pa.shape[0], _spec_key(spec_e), search, options)


def compute_R_alpha(p, spec_d, alpha, search=DEFAULT_SEARCH, options=DEFAULT_OPTIONS, seed=0):
    """max over {Q : D(Q||p) <= alpha} of R(Q, D), in bits."""
    if alpha < 0:
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    pa = _check_source(p)
    spec_d = _as_spec(spec_d)

    def rq(q):
        return rd_function(q, spec_d, options).value

    if alpha == 0:
        return rq(pa)
    if pa.shape[0] == 2:
        lo, hi = _alpha_interval(pa[1], alpha)
        prof = _Profile(pa[1], lambda q, _c: (rq(q), None), lo, hi)
        _, val = _minimize_binary(prof, lambda d, v: -v, search)
        return -val
    _, val = _minimize_simplex(pa, lambda q, d: rq(q), alpha, search, seed, sign=-1.0)
    return max(val, rq(pa))


def _key_setup(p, spec_d, spec_e, rate, alpha, search, options):
    pa = _check_source(p)
    spec_d, spec_e = _as_spec(spec_d), _as_spec(spec_e)
    _check_levels(spec_d, spec_e)
    if not alpha > 0:
        raise ValidationError(f"alpha must be > 0, got {alpha}")
    r_alpha = compute_R_alpha(pa, spec_d, alpha, search, options)
    if rate <= r_alpha - 1e-9:
        raise InfeasibleError(
            f"channel rate R = {rate} does not exceed R_alpha = {r_alpha:.6f}; "
            "the legitimate distortion cannot be met"
        )
    return pa, spec_d, spec_e, r_alpha


def exponent_key(p, spec_d, spec_e, rate, r, alpha, seed=0, search=DEFAULT_SEARCH,
                 options=DEFAULT_OPTIONS):
    """Secrecy exponent of the lossy cipher system with key rate ``r``.

    ``min{E_0, r + min_{D(Q||p) <= alpha} [D(Q||p) + R(Q, R, D, D_e)]}``. The
    diagnostics also hold the same quantity written as a single minimum over
    Q (split at ``D(Q||p) = alpha``), evaluated on the points visited by the
    search; the two agree within 2e-3 when the search is adequate.
    """
    if r < 0:
        raise ValidationError(f"key rate must be >= 0, got {r}")
    pa, spec_d, spec_e, r_alpha = _key_setup(p, spec_d, spec_e, rate, alpha, search, options)
    e0 = _perfect(pa, spec_e, search, options)
    prof = _blur_profile(pa, spec_d, spec_e, rate, alpha, seed, search, options)
    q, inner, blur = prof.minimize(lambda d, v: d + v)
    keyed = r + inner
    if keyed < e0.value:
        value, branch, q_arg = keyed, "keyed", q
    else:
        value, branch, q_arg = e0.value, "perfect", e0.argmin_q.probs
    rewrite = _rewrite_value(pa, spec_e, r, alpha, prof, e0, q, inner, options)
    diag = {
        "E0": e0.value,
        "blur_min": inner,
        "blur_at_argmin": blur.value,
        "R_alpha": r_alpha,
        "rewrite": rewrite,
        "rewrite_gap": abs(rewrite - value),
        "rewrite_agrees": abs(rewrite - value) <= AGREE_TOL,
    }
    return ExponentResult(value=max(value, 0.0), argmin_q=Dist(q_arg), branch=branch,
                          diagnostics=diag)


def _rewrite_value(pa, spec_e, r, alpha, prof, e0, q_blur, inner, options):
    """Single minimum over Q of the split objective, over the visited points."""
    best = math.inf
    re_cache = {}

    def re(q):
        key = tuple(np.round(q, 12))
        if key not in re_cache:
            re_cache[key] = rd_function(q, spec_e, options).value
        return re_cache[key]

    cands = [(e0.argmin_q.probs, None), (q_blur, inner - kl_divergence(q_blur, pa))]
    for q1, _, v in prof.points():
        cands.append((np.array([1.0 - q1, q1]), v))
    for q, v in cands:
        div = kl_divergence(q, pa)
        if div >= alpha:
            best = min(best, div + re(q))
        if div <= alpha:
            term = re(q) if v is None else min(r + v, re(q))
            best = min(best, div + term)
    return best


def min_key_rate(p, spec_d, spec_e, rate, alpha, seed=0, search=DEFAULT_SEARCH,
                 options=DEFAULT_OPTIONS):
    """r_0 = max(0, E_0 - min_{D(Q||p) <= alpha} [D(Q||p) + R(Q, R, D, D_e)])."""
    pa, spec_d, spec_e, _ = _key_setup(p, spec_d, spec_e, rate, alpha, search, options)
    e0 = _perfect(pa, spec_e, search, options)
    prof = _blur_profile(pa, spec_d, spec_e, rate, alpha, seed, search, options)
    _, inner, _ = prof.minimize(lambda d, v: d + v)
    return max(0.0, e0.value - inner)


def successive_refinability_probe(q, spec_d, spec_e, seed=0, search=DEFAULT_SEARCH,
                                  options=DEFAULT_OPTIONS):
    """Check whether the blur value equals R_e(q, D_e) - R(q, D)."""
    qa = _probs(q)
    spec_d, spec_e = _as_spec(spec_d), _as_spec(spec_e)
    blur = r_blur(qa, spec_d, spec_e, seed, search=search, options=options)
    rd = rd_function(qa, spec_d, options)
    re = rd_function(qa, spec_e.with_level(spec_e.level), options).value
    gap = max(0.0, re - rd.value)
    C = rd.argmin_channel.rows
    inner = conditional_rd(qa[:, None] * C, spec_e, options)
    at_rd = inner.value
    t = qa[:, None, None] * C[:, :, None] * inner.argmin_channel
    t = t / t.sum()
    # I(X;Y|V): move V into the conditioning slot
    defect = conditional_mutual_information(np.transpose(t, (0, 2, 1)))
    return RefinabilityReport(
        refinable=abs(blur.value - gap) <= AGREE_TOL,
        blur_value=blur.value,
        gap_bound=gap,
        value_at_rd_channel=at_rd,
        rd_channel_near_optimal=abs(at_rd - blur.value) <= AGREE_TOL,
        markov_defect=defect,
    )
