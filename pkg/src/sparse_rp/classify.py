"""Projection + linear SVM evaluation with majority voting over independent matrices.

A run draws (or loads) data, splits each class in half, and then scores
every ensemble at every ``k`` on that same split. Each of the ``votes``
matrices is trained on separately; the test label is the majority vote.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import kernels
from ._csvio import read_csv, write_csv
from ._rng import MATRIX, SPLIT, SVM, DATA, derive_seed, generator
from .ensembles import EnsembleFamily, build_matrix, project_batch
from .synth import Dataset, SyntheticSpec, generate


@dataclass(frozen=True)
class SvmHyper:
    """Soft-margin linear SVM: minimise ``0.5|w|^2 + C * mean(hinge)``.

    The bias is learned as the weight of a constant feature 1, so it is
    regularised like any other weight. ``solver`` is ``"dcd"`` (dual
    coordinate descent, the default) or ``"pegasos"`` (averaged
    stochastic subgradient).
    """

    C: float = 1.0
    max_epochs: int = 100
    tol: float = 1e-5
    solver: str = "dcd"

    def __post_init__(self):
        if not self.C > 0 or self.max_epochs < 1 or not self.tol >= 0:
            raise ValueError("need C > 0, max_epochs >= 1, tol >= 0")
        if self.solver not in ("dcd", "pegasos"):
            raise ValueError(f"unknown solver {self.solver!r}")


@dataclass(frozen=True, eq=False)
class SvmModel:
    weights: np.ndarray
    bias: float
    hyper: SvmHyper
    epochs: int
    converged: bool
    objective_history: np.ndarray = field(repr=False)
    trained: bool = True


def _check_xy(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be n x k with one label per row")
    if X.shape[0] < 2:
        raise ValueError("need at least two samples")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain NaN or infinity")
    labels = set(np.unique(y).tolist())
    if not labels <= {-1, 1}:
        raise ValueError(f"labels must be -1/+1, got {sorted(labels)}")
    if len(labels) < 2:
        raise ValueError("training data holds a single class")
    return X, y.astype(np.float64)


def _epoch_orders(n: int, epochs: int, seed: int) -> np.ndarray:
    rng = generator(seed)
    return rng.permuted(np.tile(np.arange(n, dtype=np.int64), (epochs, 1)), axis=1)


_KKT_TOL = 1e-9


def _polish(Q: np.ndarray, alpha: np.ndarray, upper: np.ndarray):
    """Solve exactly on the active set DCD found; ``None`` if that set is not optimal."""
    at0 = alpha <= 1e-10 * upper
    atU = alpha >= upper * (1 - 1e-10)
    free = ~(at0 | atU)
    a = np.where(atU, upper, 0.0)
    if free.any():
        rhs = 1.0 - Q[np.ix_(free, atU)] @ a[atU]
        sol = scipy.linalg.lstsq(Q[np.ix_(free, free)], rhs, lapack_driver="gelsy", check_finite=False)[0]
        if np.any(sol < 0) or np.any(sol > upper[free]):
            return None
        a[free] = sol
    g = Q @ a - 1.0
    if np.any(g[at0] < -_KKT_TOL) or np.any(g[atU] > _KKT_TOL) or np.any(np.abs(g[free]) > _KKT_TOL):
        return None
    return a


def train_svm(X, y, hyper: SvmHyper = SvmHyper(), seed: int = 0) -> SvmModel:
    """Fit the SVM; the sample visiting order in each epoch comes from ``seed``.

    After coordinate descent stops, the dual is re-solved exactly on the
    set of free and bounded multipliers it settled on; the exact answer
    replaces the iterate whenever it satisfies the optimality conditions.
    If it does not, descent is rerun with a tighter stopping tolerance.
    """
    X, yf = _check_xy(X, y)
    n = X.shape[0]
    orders = _epoch_orders(n, hyper.max_epochs, seed)
    if hyper.solver == "dcd":
        G = X @ X.T + 1.0
        Q = np.ascontiguousarray(G * np.outer(yf, yf))
        upper = np.full(n, hyper.C / n)
        # tighten the stopping rule until the active set is the optimal one
        for tol in (hyper.tol, hyper.tol * 1e-3, hyper.tol * 1e-6, 0.0):
            alpha, epochs, hist = kernels.dcd_svm(Q, upper, orders, tol)
            exact = _polish(Q, alpha, upper)
            if exact is not None:
                alpha = exact
                break
            if epochs == hyper.max_epochs:
                break
        coef = alpha * yf
        w = X.T @ coef
        b = float(coef.sum())
    else:
        Z = np.hstack([X, np.ones((n, 1))])
        wz, epochs, hist = kernels.pegasos_svm(Z, yf, 1.0 / hyper.C, orders, hyper.tol)
        w, b = wz[:-1].copy(), float(wz[-1])
    converged = epochs < hyper.max_epochs
    return SvmModel(w, b, hyper, int(epochs), converged, hist)


def decision_function(model: SvmModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise ValueError(f"expected {model.weights.shape[0]} features, got shape {X.shape}")
    return X @ model.weights + model.bias


def predict(model: SvmModel, X) -> np.ndarray:
    """Labels ``sign(w.x + b)``; an exact zero counts as +1."""
    return np.where(decision_function(model, X) >= 0, 1, -1)


def svm_objective(model: SvmModel, X, y) -> float:
    """Primal objective of ``model`` on ``(X, y)``."""
    margins = np.asarray(y, dtype=float) * decision_function(model, X)
    hinge = np.maximum(0.0, 1.0 - margins)
    reg = 0.5 * (float(model.weights @ model.weights) + model.bias**2)
    return reg + model.hyper.C * float(hinge.mean())


# -- voting -------------------------------------------------------------------


def standardize(train: np.ndarray, test: np.ndarray):
    """Z-score each column with the training mean and spread (zero spread is left unscaled)."""
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0] = 1.0
    return (train - mu) / sd, (test - mu) / sd


def matrix_seed(run_seed: int, ens_idx: int, vote: int, k_idx: int | None) -> int:
    """Seed of one matrix. Prefix-stable families pass ``k_idx=None`` and share it across ``k``."""
    key = (MATRIX, ens_idx, vote) if k_idx is None else (MATRIX, ens_idx, vote, k_idx)
    return derive_seed(run_seed, *key)


def _vote_and_score(P_train_list, P_test_list, y_train, y_test, hyper, svm_seeds, scale):
    ballots = np.zeros(len(y_test), dtype=np.int64)
    for P_tr, P_te, s in zip(P_train_list, P_test_list, svm_seeds):
        if scale:
            P_tr, P_te = standardize(P_tr, P_te)
        model = train_svm(P_tr, y_train, hyper, seed=s)
        ballots += predict(model, P_te)
    final = np.where(ballots > 0, 1, -1)
    return 100.0 * float(np.mean(final == y_test))


def voted_classify(train: Dataset, test: Dataset, family, k: int, votes: int = 5, seed: int = 0,
                   hyper: SvmHyper = SvmHyper(), scale: bool = True, ens_idx: int = 0,
                   k_idx: int = 0) -> float:
    """Percent of ``test`` labelled correctly by a ``votes``-way majority of projected SVMs.

    ``family`` is an :class:`EnsembleFamily` or a preset name. With
    ``scale`` each projected coordinate is z-scored on the training set
    before the SVM sees it.
    """
    if votes < 1 or votes % 2 == 0:
        raise ValueError("votes must be a positive odd number")
    if train.d != test.d:
        raise ValueError("train and test widths differ")
    train.require_two_classes()
    if isinstance(family, str):
        family = EnsembleFamily.parse(family)
    P_tr, P_te, seeds = [], [], []
    for v in range(votes):
        probe = family.resolve(k, train.d)
        ms = matrix_seed(seed, ens_idx, v, None if probe.prefix_stable else k_idx)
        m = build_matrix(family.resolve(k, train.d, ms))
        P = project_batch(m, np.vstack([train.X, test.X]))
        P_tr.append(P[:train.n])
        P_te.append(P[train.n:])
        seeds.append(derive_seed(seed, SVM, ens_idx, k_idx, v))
    return _vote_and_score(P_tr, P_te, train.y, test.y, hyper, seeds, scale)


# -- experiments --------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    ensembles: tuple = ("GM", "SM", "VSM", "StM")
    k_values: tuple = (50, 100, 200, 400, 600, 800, 1000, 1500, 2000)
    votes: int = 5
    runs: int = 500
    split_fraction: float = 0.5
    seed: int = 0
    scale: bool = True
    hyper: SvmHyper = SvmHyper()
    workers: int = 1

    def __post_init__(self):
        fams = tuple(e if isinstance(e, EnsembleFamily) else EnsembleFamily.parse(e) for e in self.ensembles)
        object.__setattr__(self, "ensembles", fams)
        ks = tuple(int(k) for k in self.k_values)
        object.__setattr__(self, "k_values", ks)
        if not fams or not ks:
            raise ValueError("need at least one ensemble and one k")
        if len({f.name for f in fams}) != len(fams):
            raise ValueError("ensemble names must be unique")
        if any(k < 1 for k in ks) or len(set(ks)) != len(ks):
            raise ValueError("k values must be distinct positive integers")
        if self.votes < 1 or self.votes % 2 == 0:
            raise ValueError("votes must be a positive odd number")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must lie in (0, 1)")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.ensembles]


@dataclass(frozen=True, eq=False)
class AccuracyTable:
    """Per-run accuracies (percent) with shape ``(runs, ensembles, k)``."""

    names: tuple
    k_values: tuple
    per_run: np.ndarray
    split_hashes: np.ndarray = field(repr=False)

    @property
    def runs(self) -> int:
        return self.per_run.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.per_run.mean(axis=0)

    @property
    def std_err(self) -> np.ndarray:
        if self.runs < 2:
            return np.full(self.per_run.shape[1:], np.nan)
        return self.per_run.std(axis=0, ddof=1) / math.sqrt(self.runs)

    def cell(self, name: str, k: int) -> tuple[float, float]:
        i, j = self.names.index(name), self.k_values.index(k)
        return float(self.mean[i, j]), float(self.std_err[i, j])

    def rows(self):
        mean, se = self.mean, self.std_err
        for i, name in enumerate(self.names):
            for j, k in enumerate(self.k_values):
                yield name, k, float(mean[i, j]), float(se[i, j]), self.runs

    def to_csv(self, path) -> None:
        write_csv(path, "accuracy_table", ["ensemble", "k", "mean_acc", "std_err", "runs"],
                  [[n, k, repr(m), repr(s), r] for n, k, m, s, r in self.rows()])

    def paired(self) -> bool:
        """True when every ensemble in each run was scored on the same split."""
        return bool(np.all(self.split_hashes == self.split_hashes[:, :1]))


def read_accuracy_csv(path) -> list[tuple]:
    _, rows = read_csv(path)
    return [(r["ensemble"], int(r["k"]), float(r["mean_acc"]), float(r["std_err"]), int(r["runs"])) for r in rows]


def crossover_k(table: AccuracyTable, name: str = "StM"):
    """Smallest ``k`` from which ``name`` is the strict best at every larger grid ``k``.

    Returns ``None`` unless ``name`` is the strict best at the largest ``k``
    and is not the strict best at the smallest.
    """
    i = table.names.index(name)
    mean = table.mean
    others = np.delete(mean, i, axis=0)
    best = mean[i] > others.max(axis=0)
    if not best[-1] or best[0]:
        return None
    j = len(best)
    while j > 0 and best[j - 1]:
        j -= 1
    return table.k_values[j]


def split_indices(y: np.ndarray, fraction: float, rng: np.random.Generator):
    """Per-class random split; returns sorted (train, test) index arrays."""
    train = []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        n_tr = int(math.floor(fraction * idx.size))
        if not 1 <= n_tr < idx.size:
            raise ValueError(f"class {c} has too few samples to split")
        train.append(idx[:n_tr])
    train = np.sort(np.concatenate(train))
    test = np.setdiff1d(np.arange(y.size), train)
    return train, test


def _split_hash(train, test) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(train, dtype=np.int64).tobytes())
    h.update(b"|")
    h.update(np.asarray(test, dtype=np.int64).tobytes())
    return h.hexdigest()[:16]


def _run_data(source, run_seed: int, rng: np.random.Generator) -> Dataset:
    if isinstance(source, SyntheticSpec):
        return generate(source.with_seed(derive_seed(run_seed, DATA)))
    if source.is_binary:
        return source
    classes = source.classes
    if classes.size < 2:
        raise ValueError("dataset holds a single class")
    a, b = sorted(rng.choice(classes, size=2, replace=False).tolist())
    return source.pair(a, b)


def evaluate_run(cfg: ExperimentConfig, source, run: int):
    """Accuracies ``(ensembles, k)`` for one run plus the split hash each ensemble used."""
    run_seed = derive_seed(cfg.seed, run)
    rng = generator(run_seed, SPLIT)
    ds = _run_data(source, run_seed, rng)
    ds.require_two_classes()
    if max(cfg.k_values) > ds.d:
        raise ValueError(f"k={max(cfg.k_values)} exceeds the data dimension {ds.d}")
    tr, te = split_indices(ds.y, cfg.split_fraction, rng)
    Xtr, Xte, ytr, yte = ds.X[tr], ds.X[te], ds.y[tr], ds.y[te]
    Xall = np.ascontiguousarray(np.vstack([Xtr, Xte]))
    n_tr = len(tr)
    split_id = _split_hash(tr, te)
    K = cfg.k_values
    k_max = max(K)
    acc = np.empty((len(cfg.ensembles), len(K)))
    for e, fam in enumerate(cfg.ensembles):
        prefix = fam.resolve(k_max, ds.d).prefix_stable
        proj = {j: ([], []) for j in range(len(K))}
        for v in range(cfg.votes):
            if prefix:
                # one tall matrix per vote; smaller k use its leading rows
                m = build_matrix(fam.resolve(k_max, ds.d, matrix_seed(run_seed, e, v, None)))
                P = project_batch(m, Xall, scaled=False)
                for j, k in enumerate(K):
                    Pk = P[:, :k] / math.sqrt(k)
                    proj[j][0].append(Pk[:n_tr])
                    proj[j][1].append(Pk[n_tr:])
            else:
                for j, k in enumerate(K):
                    m = build_matrix(fam.resolve(k, ds.d, matrix_seed(run_seed, e, v, j)))
                    Pk = project_batch(m, Xall)
                    proj[j][0].append(Pk[:n_tr])
                    proj[j][1].append(Pk[n_tr:])
        for j in range(len(K)):
            seeds = [derive_seed(run_seed, SVM, e, j, v) for v in range(cfg.votes)]
            acc[e, j] = _vote_and_score(proj[j][0], proj[j][1], ytr, yte, cfg.hyper, seeds, cfg.scale)
    return acc, [split_id] * len(cfg.ensembles)


def run_experiment(cfg: ExperimentConfig, source, progress=None) -> AccuracyTable:
    """Run ``cfg.runs`` independent runs on synthetic data or a loaded :class:`Dataset`.

    Results are stored by run index, so the table does not depend on
    ``cfg.workers`` or scheduling.
    """
    per_run = np.empty((cfg.runs, len(cfg.ensembles), len(cfg.k_values)))
    hashes = np.empty((cfg.runs, len(cfg.ensembles)), dtype=object)

    def one(r):
        acc, h = evaluate_run(cfg, source, r)
        per_run[r] = acc
        hashes[r] = h
        if progress is not None:
            progress(r)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            list(ex.map(one, range(cfg.runs)))
    else:
        for r in range(cfg.runs):
            one(r)
    return AccuracyTable(tuple(cfg.names), cfg.k_values, per_run, hashes)


def baseline_accuracy(train: Dataset, test: Dataset, hyper: SvmHyper = SvmHyper(), seed: int = 0,
                      scale: bool = True) -> float:
    """Accuracy of the same SVM on the unprojected features."""
    Xtr, Xte = (standardize(train.X, test.X) if scale else (train.X, test.X))
    model = train_svm(Xtr, train.y, hyper, seed=seed)
    return 100.0 * float(np.mean(predict(model, Xte) == test.y))


__all__: Sequence[str] = [
    "AccuracyTable",
    "ExperimentConfig",
    "SvmHyper",
    "SvmModel",
    "baseline_accuracy",
    "crossover_k",
    "decision_function",
    "evaluate_run",
    "predict",
    "run_experiment",
    "svm_objective",
    "train_svm",
    "voted_classify",
]
