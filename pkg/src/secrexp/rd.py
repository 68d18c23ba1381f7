"""Rate-distortion, distortion-rate and conditional rate-distortion solvers.

The conditional function with side information Y,

    R(P_XY, D_e) = min  I(X;V|Y)  over P_{V|X,Y} with E d_e(X,V) <= D_e,

splits, for a fixed Lagrange slope, into one Blahut-Arimoto problem per
value of y (source P(x|y), cost slope * d_e). The slices only interact
through the total distortion, so a scalar root-finder on the slope meets the
constraint. The ordinary rate-distortion function is the same problem with a
one-letter Y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import InfeasibleError, ValidationError
from .simplex import Channel, DistortionSpec, Dist, Joint2, _probs, _table

LN2 = math.log(2.0)
FEAS_TOL = 1e-12

_MODE_NAMES = {
    K.MODE_ZERO: "zero-rate",
    K.MODE_CORNER: "corner",
    K.MODE_SLOPE: "slope",
    K.MODE_SHARE: "time-share",
}


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances shared by every solve.

    ``tol`` is the relative change of the Lagrangian that stops the inner
    fixed point, ``maxit`` its iteration cap.
    """

    tol: float = 1e-11
    maxit: int = 5000
    beta_scale: float = 50.0

    def beta_max(self, matrix):
        mat = np.asarray(matrix, dtype=float)
        span = float(mat.max() - mat.min(axis=1).max())
        return self.beta_scale / (span + 1e-9)


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True)
class RDResult:
    value: float
    argmin_channel: Channel
    lagrange_slope: float
    achieved_distortion: float
    iterations: int
    converged: bool
    mode: str = "slope"


@dataclass(frozen=True)
class CondRDResult:
    """Conditional rate-distortion value with its minimizing ``P_{V|X,Y}``.

    ``argmin_channel[x, y, v]`` is the reproduction law; ``per_y_slopes`` holds
    the shared slope (bits per unit distortion) for occupied slices and NaN
    for empty ones.
    """

    value: float
    argmin_channel: np.ndarray
    per_y_slopes: np.ndarray
    achieved_distortion: float
    iterations: int = 0
    converged: bool = True
    mode: str = "slope"
    extras: dict = field(default_factory=dict, compare=False, repr=False)


def min_distortion_levels(matrix):
    """``(d_min, d_max)``: the largest row minimum and the largest entry."""
    mat = matrix.matrix if isinstance(matrix, DistortionSpec) else np.asarray(matrix, dtype=float)
    if np.any(mat < 0):
        raise ValidationError("distortion matrix has a negative entry")
    return float(mat.min(axis=1).max()), float(mat.max())


def _as_spec(spec, level=None):
    if isinstance(spec, DistortionSpec):
        return spec if level is None else spec.with_level(level)
    return DistortionSpec(spec, 0.0 if level is None else level)


def _c(a):
    # writable float64 copies keep the compiled kernels to a single signature
    return np.array(a, dtype=np.float64, order="C")


def solve_conditional(pxy, matrix, level, options=DEFAULT_OPTIONS):
    """Unchecked kernel call on raw arrays; returns the raw tuple in nats."""
    mat = _c(matrix)
    return K.crd_solve(_c(pxy), mat, float(level), float(options.tol), int(options.maxit),
                       float(options.beta_max(mat)))


def conditional_rd(j, spec_e, options=DEFAULT_OPTIONS):
    """R(P_XY, D_e) in bits for a joint law on X x Y.

    Raises :class:`InfeasibleError` when ``spec_e.level`` is below the matrix's
    ``d_min``.
    """
    pxy = _table(j)
    if isinstance(j, Joint2) is False:
        Joint2(pxy)
    spec_e = _as_spec(spec_e)
    if pxy.shape[0] != spec_e.shape[0]:
        raise ValidationError(
            f"conditional_rd: joint has {pxy.shape[0]} source symbols, matrix has {spec_e.shape[0]}"
        )
    if spec_e.level < spec_e.d_min - FEAS_TOL:
        raise InfeasibleError(
            f"eavesdropper level {spec_e.level} below D_e,min = {spec_e.d_min}"
        )
    info, W, beta, ach, it, ok, mode = solve_conditional(pxy, spec_e.matrix, spec_e.level, options)
    py = pxy.sum(axis=0)
    slopes = np.where(py > 0, beta / LN2, np.nan)
    return CondRDResult(
        value=info / LN2,
        argmin_channel=np.transpose(W, (1, 0, 2)).copy(),
        per_y_slopes=slopes,
        achieved_distortion=float(ach),
        iterations=int(it),
        converged=bool(ok),
        mode=_MODE_NAMES[mode],
    )


def rd_function(p, spec, options=DEFAULT_OPTIONS):
    """Rate-distortion function R(p, D) in bits.

    Zero-probability symbols are allowed and ignored when checking the level
    against the smallest attainable distortion.
    """
    pa = _probs(p)
    if not isinstance(p, Dist):
        Dist(pa)
    spec = _as_spec(spec)
    if pa.shape[0] != spec.shape[0]:
        raise ValidationError(f"rd_function: source size {pa.shape[0]} vs matrix {spec.shape}")
    support_min = float(spec.matrix[pa > 0].min(axis=1).max())
    if spec.level < support_min - FEAS_TOL:
        raise InfeasibleError(f"level {spec.level} below the minimum distortion {support_min}")
    info, W, beta, ach, it, ok, mode = solve_conditional(pa[:, None], spec.matrix, spec.level, options)
    rows = W[0]
    return RDResult(
        value=info / LN2,
        argmin_channel=Channel(rows / rows.sum(axis=1, keepdims=True)),
        lagrange_slope=beta / LN2,
        achieved_distortion=float(ach),
        iterations=int(it),
        converged=bool(ok),
        mode=_MODE_NAMES[mode],
    )


def distortion_rate(p, matrix, rate, options=DEFAULT_OPTIONS):
    """D(R): least E d(X, Y) over channels with I(X;Y) <= ``rate`` bits."""
    if rate < 0:
        raise ValidationError(f"distortion_rate: rate must be >= 0, got {rate}")
    pa = _probs(p)
    mat = _c(matrix.matrix if isinstance(matrix, DistortionSpec) else matrix)
    pxy = _c(pa[:, None])
    nv = mat.shape[1]
    W = np.empty((1, pa.shape[0], nv))
    d_zero = K._zero_rate(pxy, mat, W)
    if rate <= 0:
        return float(d_zero)
    cap = rate * LN2

    def at(beta, corner=False):
        q = np.full((1, nv), 1.0 / nv)
        dist, info, _, _ = K._solve_at(pxy, mat, float(beta), corner, q, W, float(options.tol),
                                       int(options.maxit))
        return dist, info

    d_c, i_c = at(0.0, corner=True)
    if cap >= i_c - 1e-13:
        return float(d_c)
    lo, hi = 0.0, options.beta_max(mat)
    d_lo, i_lo = float(d_zero), 0.0
    d_hi, i_hi = at(hi)
    while i_hi < cap and hi < K.BETA_CEIL:
        lo, d_lo, i_lo = hi, d_hi, i_hi
        hi *= 4.0
        d_hi, i_hi = at(hi)
    for _ in range(200):
        if hi - lo <= K.WIDTH_TOL or abs(i_hi - cap) <= 1e-12:
            break
        mid = 0.5 * (lo + hi)
        d_m, i_m = at(mid)
        if abs(i_m - cap) <= 1e-12:
            return float(d_m)
        if i_m < cap:
            lo, d_lo, i_lo = mid, d_m, i_m
        else:
            hi, d_hi, i_hi = mid, d_m, i_m
    if i_hi - i_lo <= 1e-15:
        return float(d_hi)
    t = (cap - i_lo) / (i_hi - i_lo)
    return float(d_lo + t * (d_hi - d_lo))
