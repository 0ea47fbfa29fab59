"""Brute-force references for the closed forms: Monte Carlo and exhaustive enumeration.

Nothing here imports :mod:`sparse_rp.theory`. Monte Carlo work is cut
into fixed-size chunks, each with its own RNG stream derived from the
seed and the chunk index, so results do not depend on how many workers
run them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import kernels
from ._csvio import write_csv
from ._rng import JL_VECTORS, MATRIX, MONTE_CARLO, derive_seed, generator
from .ensembles import EnsembleSpec, build_matrix, project_batch

CHUNK = 1 << 15
ENUMERATION_LIMIT = 10**7


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    std_error: float
    n: int
    seed: int

    def z_score(self, reference: float) -> float:
        diff = self.mean - reference
        if self.std_error == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.std_error


def summarize(samples: np.ndarray, seed: int) -> MonteCarloResult:
    """Mean and standard error with compensated sums (order-insensitive)."""
    samples = np.asarray(samples, dtype=float).ravel()
    n = samples.size
    if n < 2:
        raise ValueError("need at least two samples")
    mean = math.fsum(samples.tolist()) / n
    dev = samples - mean
    ss = math.fsum((dev * dev).tolist())
    return MonteCarloResult(mean, math.sqrt(ss / (n - 1) / n), n, seed)


# -- row and difference-vector descriptions -----------------------------------


@dataclass(frozen=True)
class SparseRow:
    """``s`` nonzeros at uniformly random distinct positions, each ``+-sqrt(d/s)``."""

    d: int
    s: int

    def __post_init__(self):
        if not 1 <= self.s <= self.d:
            raise ValueError(f"need 1 <= s <= d, got s={self.s}, d={self.d}")


@dataclass(frozen=True)
class GaussianRow:
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")


@dataclass(frozen=True)
class TwoPoint:
    """Every coordinate is ``+mu`` or ``-mu`` with equal probability."""

    mu: float


@dataclass(frozen=True)
class Mixture:
    """The first ``n_features`` coordinates are ``+-(mu + sigma * N(0,1))``, the rest zero.

    ``n_features=None`` means every coordinate is a feature.
    """

    mu: float
    sigma: float
    n_features: int | None = None


def _z_params(row, z_model):
    if isinstance(z_model, TwoPoint):
        return z_model.mu, 0.0, row.d
    nf = row.d if z_model.n_features is None else z_model.n_features
    if not 0 <= nf <= row.d or z_model.sigma < 0:
        raise ValueError("bad mixture parameters")
    return z_model.mu, z_model.sigma, nf


def _sparse_chunk(row: SparseRow, mu, sigma, nf, m, rng):
    s = row.s
    u = rng.random((m, s))
    sign_r = np.where(rng.random((m, s)) < 0.5, 1.0, -1.0)
    sign_z = np.where(rng.random((m, s)) < 0.5, 1.0, -1.0)
    noise = rng.standard_normal((m, s))
    return kernels.floyd_abs_dot(u, sign_r, sign_z, noise, row.d, nf, mu, sigma, math.sqrt(row.d / s))


def _gaussian_chunk(row: GaussianRow, mu, sigma, nf, m, rng):
    out = np.empty(m)
    step = max(1, (1 << 20) // row.d)
    for lo in range(0, m, step):
        hi = min(m, lo + step)
        r = rng.standard_normal((hi - lo, row.d))
        sign_z = np.where(rng.random((hi - lo, nf)) < 0.5, 1.0, -1.0)
        noise = rng.standard_normal((hi - lo, nf)) if sigma > 0 else 0.0
        z = sign_z * (mu + sigma * noise)
        out[lo:hi] = np.abs(np.einsum("ij,ij->i", r[:, :nf], z))
    return out


def mc_abs_dot(row, z_model, n: int, seed: int = 0, workers: int = 1) -> MonteCarloResult:
    """Estimate ``E|<r, z>|`` from ``n`` independent (row, difference vector) pairs."""
    if n < 1000:
        raise ValueError("n must be at least 1000")
    if isinstance(row, SparseRow):
        draw = _sparse_chunk
    elif isinstance(row, GaussianRow):
        draw = _gaussian_chunk
    else:
        raise TypeError(f"unknown row description {row!r}")
    mu, sigma, nf = _z_params(row, z_model)

    def run(c):
        m = min(CHUNK, n - c * CHUNK)
        return draw(row, mu, sigma, nf, m, generator(seed, MONTE_CARLO, c))

    chunks = range(math.ceil(n / CHUNK))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return summarize(np.concatenate(parts), seed)


# -- distance preservation ----------------------------------------------------


class JLDistortion(NamedTuple):
    empirical_lower_tail: float
    lower_tail_se: float
    empirical_var: float
    var_se: float
    n: int


def random_unit_vectors(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def norm_ratios(spec: EnsembleSpec, n_vectors: int, n_draws: int, seed: int = 0, vectors=None) -> np.ndarray:
    """``|v'|^2 / |v|^2`` as an ``(n_draws, n_vectors)`` array, with a fresh matrix per draw.

    Without ``vectors`` each draw also gets fresh unit vectors.
    """
    out = np.empty((n_draws, n_vectors if vectors is None else len(vectors)))
    for t in range(n_draws):
        m = build_matrix(EnsembleSpec(spec.kind, spec.k, spec.d, spec.q, spec.column_weight,
                                      derive_seed(seed, MATRIX, t)))
        V = vectors if vectors is not None else random_unit_vectors(
            n_vectors, spec.d, generator(seed, JL_VECTORS, t))
        Y = project_batch(m, V)
        out[t] = np.einsum("ij,ij->i", Y, Y) / np.einsum("ij,ij->i", V, V)
    return out


def mc_jl_distortion(spec: EnsembleSpec, n_vectors: int, n_draws: int, eps: float, seed: int = 0,
                     vectors=None, batches: int = 20) -> JLDistortion:
    """Empirical lower-tail frequency ``Pr(|v'|^2 <= (1-eps)|v|^2)`` and variance of the norm ratio.

    The variance standard error comes from batch means over draws, because
    vectors sharing a matrix are not independent.
    """
    if n_vectors * n_draws < 10**4:
        raise ValueError("need n_vectors * n_draws >= 10^4")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    ratios = norm_ratios(spec, n_vectors, n_draws, seed, vectors)
    flat = ratios.ravel()
    n = flat.size
    tail = float(np.count_nonzero(flat <= 1.0 - eps)) / n
    tail_se = math.sqrt(tail * (1 - tail) / n)
    mean = math.fsum(flat.tolist()) / n
    var = math.fsum(((flat - mean) ** 2).tolist()) / (n - 1)
    batches = max(2, min(batches, n_draws))
    per_batch = [b.ravel().var(ddof=1) for b in np.array_split(ratios, batches)]
    var_se = float(np.std(per_batch, ddof=1) / math.sqrt(batches))
    return JLDistortion(tail, tail_se, var, var_se, n)


# -- exhaustive enumeration of row supports -----------------------------------


class FeatureHits(NamedTuple):
    p0: Fraction
    p1: Fraction
    p_ge2: Fraction
    total: int

    @property
    def ratio(self) -> float:
        return math.inf if self.p_ge2 == 0 else float(self.p1 / self.p_ge2)


@lru_cache(maxsize=64)
def _pair_histogram(d: int, w: int) -> np.ndarray:
    h = kernels.pair_histogram(d, w)
    h.flags.writeable = False
    return h


def enumerate_feature_hits(d: int, d_f: int, w: int) -> FeatureHits:
    """Visit every ``w``-subset of ``range(d)`` and count how many of the first ``d_f`` it contains.

    A subset hits no feature iff its smallest element is ``>= d_f`` and
    hits two or more iff its second smallest is ``< d_f``, so one
    histogram of (smallest, second smallest) per ``(d, w)`` answers every
    ``d_f`` at once.
    """
    if not 1 <= w <= d or not 0 <= d_f <= d:
        raise ValueError("need 1 <= w <= d and 0 <= d_f <= d")
    total = math.comb(d, w)
    if total > ENUMERATION_LIMIT:
        raise ValueError(f"C({d},{w}) = {total} exceeds the enumeration limit {ENUMERATION_LIMIT}")
    h = _pair_histogram(d, w)
    n_ge2 = int(h[:d_f, :d_f].sum())
    n1 = int(h[:d_f, d_f:].sum())
    n0 = int(h[d_f:, :].sum())
    if n0 + n1 + n_ge2 != total:
        raise AssertionError("enumeration count mismatch")
    return FeatureHits(Fraction(n0, total), Fraction(n1, total), Fraction(n_ge2, total), total)


# -- report rows --------------------------------------------------------------


class OracleRow(NamedTuple):
    name: str
    params: str
    estimate: float
    std_error: float
    closed_form: float
    z_score: float


REPORT_HEADER = list(OracleRow._fields)


def compare(name: str, params: str, result: MonteCarloResult, closed_form: float) -> OracleRow:
    return OracleRow(name, params, result.mean, result.std_error, closed_form, result.z_score(closed_form))


def exact_row(name: str, params: str, estimate: float, closed_form: float, rel_tol: float = 1e-9) -> OracleRow:
    """A deterministic check: ``z`` is 0 when the values agree to ``rel_tol`` and infinite otherwise."""
    if math.isinf(estimate) or math.isinf(closed_form):
        ok = estimate == closed_form
    else:
        ok = abs(estimate - closed_form) <= rel_tol * max(abs(closed_form), 1e-300)
    return OracleRow(name, params, estimate, 0.0, closed_form, 0.0 if ok else math.inf)


def write_report(path, rows) -> None:
    write_csv(path, "oracle_report", REPORT_HEADER, [[repr(x) if isinstance(x, float) else x for x in r] for r in rows])
