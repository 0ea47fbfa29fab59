"""Closed forms for distance preservation and feature selection.

Two unrelated epsilons appear in this area and are kept apart here:
``JLBoundParams.eps`` is the norm distortion, while
``SignalModel.epsilon_sign`` is the probability that a difference
coordinate flips sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.special import erfc, gammaln, logsumexp

from .ensembles import EnsembleKind, EnsembleSpec

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_EXACT_S_MAX = 50


def normal_cdf(x):
    """Standard normal CDF via erfc; no cancellation in the lower tail."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True)
class SignalModel:
    """Inter-class difference vector: ``d_f`` signal coordinates ``+-N(mu, sigma^2)``, the rest zero."""

    d: int
    d_f: int
    mu: float
    sigma: float = 0.0

    def __post_init__(self):
        if not 1 <= self.d_f <= self.d:
            raise ValueError(f"need 1 <= d_f <= d, got d_f={self.d_f}, d={self.d}")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @property
    def d_r(self) -> int:
        return self.d - self.d_f

    @property
    def epsilon_sign(self) -> float:
        if self.sigma == 0:
            return 0.0
        return float(normal_cdf(-self.mu / self.sigma))


@dataclass(frozen=True)
class JLBoundParams:
    """``k`` output dimensions, row weight ``s`` (so ``B = k/s``), distortion ``eps``."""

    k: int
    s: float
    eps: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        if not 1 <= self.s <= self.k:
            raise ValueError(f"need 1 <= s <= k, got s={self.s}, k={self.k}")

    @classmethod
    def for_fourth_moment(cls, k: int, B: float, eps: float) -> "JLBoundParams":
        return cls(k, k / B, eps)

    @classmethod
    def for_ensemble(cls, spec: EnsembleSpec, eps: float) -> "JLBoundParams":
        return cls.for_fourth_moment(spec.k, spec.fourth_moment, eps)

    @property
    def B(self) -> float:
        return self.k / self.s

    @property
    def L(self) -> float:
        return math.sqrt(2.0 * self.k / self.s)


class UpperTailBound(NamedTuple):
    bound: float
    first_form: float
    second_form: float
    L_squared: float


def jl_lower_tail_bound(p: JLBoundParams) -> float:
    """Bound on ``Pr(|v'|^2 <= (1 - eps)|v|^2)``; grows with the fourth moment ``B``."""
    if not 0 < p.eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {p.eps}")
    e = p.eps
    return math.exp(-(e * e - e**3) * p.k / (2.0 * (p.B + 1.0)))


def jl_upper_tail_bound(p: JLBoundParams) -> UpperTailBound:
    if not p.eps > 0:
        raise ValueError(f"eps must be positive, got {p.eps}")
    e, k = p.eps, p.k
    first = math.exp(0.5 * k * (math.log1p(e) - e))
    second = math.exp(-(e * e - e**3) * k / 4.0)
    return UpperTailBound(min(first, second), first, second, p.L**2)


# -- feature selection: sparse rows against a two-point difference vector ------


def _central_binom_factor_exact(s: int) -> Fraction:
    h = (s + 1) // 2
    return Fraction(h * math.comb(s, h), 2**s)


def normalized_abs_dot_sparse(s):
    """``E|<r, z>| / (mu sqrt(d))`` for a row with ``s`` nonzeros ``+-sqrt(d/s)``.

    Equal to 1 at ``s = 1`` and tends to ``sqrt(2/pi)`` as ``s`` grows.
    Accepts a scalar or an array of row weights.
    """
    s_arr = np.asarray(s)
    if np.any(s_arr < 1) or np.any(s_arr != np.floor(s_arr)):
        raise ValueError("row weight s must be a positive integer")
    flat = s_arr.astype(np.int64).ravel()
    out = np.empty(flat.shape, dtype=float)
    small = flat <= _EXACT_S_MAX
    for idx in np.flatnonzero(small):
        si = int(flat[idx])
        out[idx] = float(2 * _central_binom_factor_exact(si)) / math.sqrt(si)
    big = flat[~small].astype(float)
    if big.size:
        h = np.ceil(big / 2)
        log_c = gammaln(big + 1) - gammaln(h + 1) - gammaln(big - h + 1)
        out[~small] = 2.0 * h / np.sqrt(big) * np.exp(log_c - big * math.log(2.0))
    return out.reshape(s_arr.shape) if s_arr.ndim else float(out[0])


def expected_abs_dot_sparse(d: int, s, mu: float):
    """``E|<r, z>|`` with ``z = +-mu`` coordinates and a row of ``s`` nonzeros ``+-sqrt(d/s)``."""
    s_arr = np.asarray(s)
    if np.any(s_arr < 1) or np.any(s_arr > d):
        raise ValueError(f"row weight must lie in [1, {d}]")
    if not mu > 0:
        raise ValueError("mu must be positive")
    return mu * math.sqrt(d) * normalized_abs_dot_sparse(s)


def expected_abs_dot_gaussian(d: int, mu: float) -> float:
    if d < 1 or not mu > 0:
        raise ValueError("need d >= 1 and mu > 0")
    return mu * math.sqrt(2.0 * d / math.pi)


def _abs_normal_mean(m, sd):
    """``E|X|`` for ``X ~ N(m, sd^2)``, elementwise; ``sd = 0`` gives ``|m|``."""
    m = np.abs(np.asarray(m, dtype=float))
    sd = np.asarray(sd, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(sd > 0, m / np.where(sd > 0, sd, 1.0), np.inf)
        folded = SQRT_2_OVER_PI * sd * np.exp(-0.5 * ratio**2) + m * (1.0 - 2.0 * normal_cdf(-ratio))
    return np.where(sd > 0, folded, m)


def expected_abs_truncnorm(mu: float, sigma: float) -> float:
    """Mean of ``|x|`` for ``x ~ N(mu, sigma^2)`` (folded normal)."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return float(mu)
    return float(_abs_normal_mean(mu, sigma))


def expected_abs_dot_mixture(d: int, s: int, model: SignalModel) -> float:
    """``E|<r, z>|`` when every coordinate of ``z`` is ``+-x`` with ``x ~ N(mu, sigma^2)``.

    Conditioning on the number ``i`` of negative products gives a normal
    with mean ``(s - 2i) mu`` and variance ``s sigma^2``; the binomial
    weights are combined in log space.
    """
    if not 1 <= s <= d:
        raise ValueError(f"row weight must lie in [1, {d}]")
    s = int(s)
    i = np.arange(s + 1, dtype=float)
    log_w = gammaln(s + 1.0) - gammaln(i + 1.0) - gammaln(s - i + 1.0) - s * math.log(2.0)
    e_abs = _abs_normal_mean((s - 2 * i) * model.mu, math.sqrt(s) * model.sigma)
    terms = np.exp(log_w) * e_abs
    return math.sqrt(d / s) * math.fsum(terms.tolist())


class Lemma4Check(NamedTuple):
    holds: bool
    lhs: float


def lemma4_sufficient_condition(model: SignalModel) -> Lemma4Check:
    """Sufficient (not necessary) condition for a single nonzero per row to be optimal."""
    if not model.sigma > 0:
        raise ValueError("sigma must be positive")
    r = model.sigma / model.mu
    lhs = (9.0 / 8.0) ** 1.5 * (SQRT_2_OVER_PI + (1.0 + math.sqrt(3.0) / 4.0) * (2.0 / math.pi) * r)
    lhs += 2.0 * float(normal_cdf(-model.mu / model.sigma))
    return Lemma4Check(lhs <= 1.0, lhs)


# -- how often a row touches exactly one feature ------------------------------


def row_weight(d: int, k: int, column_weight: int) -> int:
    """Nonzeros per row implied by ``column_weight`` per column; must be integral."""
    if not 1 <= column_weight <= k:
        raise ValueError(f"column weight must lie in [1, {k}]")
    num = column_weight * d
    if num % k:
        raise ValueError(f"row weight {column_weight}*{d}/{k} is not an integer")
    w = num // k
    if not 1 <= w <= d:
        raise ValueError(f"row weight {w} outside [1, {d}]")
    return w


def _log_comb(n, r):
    return gammaln(n + 1.0) - gammaln(r + 1.0) - gammaln(n - r + 1.0)


def feature_hit_ratio(d: int, d_f: int, k: int, column_weight: int) -> float:
    """``Pr(row hits exactly one feature) / Pr(row hits two or more)``.

    The denominator is summed term by term (a hypergeometric tail in log
    space) instead of by subtracting from ``C(d, w)``, so it keeps full
    relative precision when it is tiny.
    """
    w = row_weight(d, k, column_weight)
    if d_f < 2 or d_f > d:
        raise ValueError("need 2 <= d_f <= d")
    d_r = d - d_f
    if d_r < w - 1:
        # every support holds at least two features
        return 0.0
    log_p1 = math.log(d_f) + _log_comb(d_r, w - 1)
    j = np.arange(2, min(w, d_f) + 1, dtype=float)
    j = j[w - j <= d_r]
    if j.size == 0:
        return math.inf
    log_ge2 = logsumexp(_log_comb(d_f, j) + _log_comb(d_r, w - j))
    return math.exp(log_p1 - log_ge2)


def expected_feature_hits(d: int, d_f: int, k: int, column_weight: int) -> float:
    """Expected number of feature coordinates a row touches: ``s' d_f / k``."""
    row_weight(d, k, column_weight)
    if not 0 <= d_f <= d:
        raise ValueError("need 0 <= d_f <= d")
    return column_weight * d_f / k


# -- distance preservation: exact second moments ------------------------------


def norm_ratio_variance(spec: EnsembleSpec, sum_v4: float | None = None) -> float:
    """Exact ``Var(|v'|^2 / |v|^2)`` for one fixed unit vector ``v``.

    ``sum_v4`` is ``sum(v_i^4)``; when omitted its mean over uniformly random
    unit vectors, ``3 / (d + 2)``, is used, which gives the variance over
    random vectors as well (the conditional mean is exactly 1).

    For i.i.d. entries with fourth moment ``B`` this is
    ``(2 + (B - 3) sum_v4) / k``; for a fixed column weight it is
    ``2 (1 - sum_v4) / k`` whatever the weight.
    """
    if sum_v4 is None:
        sum_v4 = 3.0 / (spec.d + 2.0)
    if spec.kind is EnsembleKind.FIXED_COLUMN_WEIGHT:
        return 2.0 * (1.0 - sum_v4) / spec.k
    return (2.0 + (spec.fourth_moment - 3.0) * sum_v4) / spec.k
