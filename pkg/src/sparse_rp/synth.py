"""Two-class synthetic data and the dataset file formats.

Class +1 samples scatter around a random sign template ``v``; class -1
samples scatter around ``w``, which is ``v`` with its first ``d_f``
coordinates negated. Only those first ``d_f`` coordinates separate the
classes.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._csvio import atomic_write_text
from ._rng import DATA, generator


class DataFormatError(ValueError):
    def __init__(self, path, lineno, msg):
        self.path, self.lineno = path, lineno
        where = f"{path}:{lineno}" if lineno else str(path)
        super().__init__(f"{where}: {msg}")


@dataclass(frozen=True)
class SyntheticSpec:
    d: int
    d_f: int
    sigma_f: float
    sigma_r: float
    n_per_class: int
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.d_f <= self.d:
            raise ValueError(f"need 1 <= d_f <= d, got d_f={self.d_f}, d={self.d}")
        if self.sigma_f < 0 or self.sigma_r < 0:
            raise ValueError("noise levels must be non-negative")
        if self.n_per_class < 2:
            raise ValueError("need at least two samples per class")

    def with_seed(self, seed: int) -> "SyntheticSpec":
        return dataclasses.replace(self, seed=seed)


def _freeze(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Samples ``X`` (n x d) with labels ``y``.

    Binary data uses labels -1/+1. Files with more than two classes keep
    integer class codes ``0..C-1`` (names in ``meta["classes"]``) and must
    be reduced with :meth:`pair` before classification.
    """

    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.int64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError("X must be n x d and y of length n")
        object.__setattr__(self, "X", _freeze(X))
        object.__setattr__(self, "y", _freeze(y))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.y)

    @property
    def is_binary(self) -> bool:
        return set(self.classes.tolist()) == {-1, 1}

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.meta)

    def pair(self, a: int, b: int) -> "Dataset":
        """Keep classes ``a`` (-> -1) and ``b`` (-> +1) of a multi-class dataset."""
        keep = (self.y == a) | (self.y == b)
        y = np.where(self.y[keep] == b, 1, -1)
        return Dataset(self.X[keep], y, {**self.meta, "pair": [int(a), int(b)]})

    def require_two_classes(self):
        if not self.is_binary:
            raise ValueError(f"classification needs labels -1/+1, found classes {self.classes.tolist()}")


def generate(spec: SyntheticSpec) -> Dataset:
    """Draw ``n_per_class`` samples per class; rows are class +1 first, then class -1."""
    rng = generator(spec.seed, DATA)
    d, d_f, n = spec.d, spec.d_f, spec.n_per_class
    v = np.where(rng.random(d) < 0.5, 1.0, -1.0)
    w = v.copy()
    w[:d_f] *= -1.0
    scale = np.full(d, float(spec.sigma_r))
    scale[:d_f] = spec.sigma_f
    X = np.empty((2 * n, d))
    X[:n] = v + scale * rng.standard_normal((n, d))
    X[n:] = w + scale * rng.standard_normal((n, d))
    y = np.r_[np.ones(n, dtype=np.int64), -np.ones(n, dtype=np.int64)]
    return Dataset(X, y, {"source": "synthetic", **dataclasses.asdict(spec)})


def downsample(ds: Dataset, target_d: int) -> Dataset:
    """Keep coordinates ``floor(j * d / target_d)`` for ``j < target_d``."""
    if target_d <= 0 or target_d > ds.d:
        raise ValueError(f"target dimension must lie in [1, {ds.d}], got {target_d}")
    keep = (np.arange(target_d) * ds.d) // target_d
    return Dataset(ds.X[:, keep], ds.y, {**ds.meta, "downsampled_from": ds.d})


# -- files --------------------------------------------------------------------


def _label_map(tags: list[str], path):
    """Map raw label tokens to -1/+1 (two classes) or codes 0..C-1."""
    uniq = sorted(set(tags), key=lambda t: _tag_key(t))
    nums = {t: _as_number(t) for t in uniq}
    if set(nums.values()) == {-1.0, 1.0}:
        return {t: int(nums[t]) for t in uniq}, None
    if len(uniq) == 1:
        warnings.warn(f"{path}: only one class present; the dataset cannot be used for classification")
        return {uniq[0]: 1 if nums[uniq[0]] != -1.0 else -1}, None
    if len(uniq) == 2:
        return {uniq[0]: -1, uniq[1]: 1}, None
    return {t: i for i, t in enumerate(uniq)}, uniq


def _as_number(tag: str):
    try:
        return float(tag)
    except ValueError:
        return None


def _tag_key(tag: str):
    x = _as_number(tag)
    return (0, x, "") if x is not None else (1, 0.0, tag)


def _content_lines(path: Path):
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if line:
            yield lineno, line


def load_dataset(path, fmt: str | None = None, d: int | None = None) -> Dataset:
    """Read ``dense_csv`` (label first) or ``sparse_indexvalue`` (``label idx:val``, 1-based).

    The format defaults from the suffix (``.csv`` is dense). For sparse files
    the dimension is the largest index unless ``d`` or a ``# d=<int>``
    header says otherwise.
    """
    path = Path(path)
    if fmt is None:
        fmt = "dense_csv" if path.suffix.lower() == ".csv" else "sparse_indexvalue"
    if fmt not in ("dense_csv", "sparse_indexvalue"):
        raise ValueError(f"unknown dataset format {fmt!r}")
    tags, rows = [], []
    header_d = None
    width = None
    for lineno, line in _content_lines(path):
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("d="):
                try:
                    header_d = int(body[2:])
                except ValueError:
                    raise DataFormatError(path, lineno, f"bad dimension header {line!r}") from None
            continue
        if fmt == "dense_csv":
            parts = [p.strip() for p in line.split(",")]
            try:
                vals = [float(p) for p in parts[1:]]
            except ValueError as exc:
                raise DataFormatError(path, lineno, str(exc)) from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DataFormatError(path, lineno, f"expected {width} features, found {len(vals)}")
            rows.append(vals)
        else:
            parts = line.split()
            entries = {}
            for tok in parts[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    j = int(idx)
                    x = float(val)
                except ValueError:
                    raise DataFormatError(path, lineno, f"bad entry {tok!r}") from None
                if not sep or j < 1:
                    raise DataFormatError(path, lineno, f"bad entry {tok!r} (indices are 1-based)")
                entries[j - 1] = x
            rows.append(entries)
        tags.append(parts[0])
    if not rows:
        raise DataFormatError(path, 0, "no samples")
    if fmt == "dense_csv":
        X = np.array(rows, dtype=float)
    else:
        max_idx = max((max(r) + 1 for r in rows if r), default=0)
        dim = d if d is not None else header_d if header_d is not None else max_idx
        if max_idx > dim:
            raise DataFormatError(path, 0, f"index {max_idx} exceeds dimension {dim}")
        X = np.zeros((len(rows), dim))
        for i, r in enumerate(rows):
            if r:
                X[i, list(r)] = list(r.values())
    if not np.all(np.isfinite(X)):
        raise DataFormatError(path, 0, "non-finite feature values")
    mapping, classes = _label_map(tags, path)
    y = np.array([mapping[t] for t in tags], dtype=np.int64)
    meta = {"source": str(path), "format": fmt}
    if classes is not None:
        meta["classes"] = classes
    return Dataset(X, y, meta)


def _label_token(ds: Dataset, y: int) -> str:
    classes = ds.meta.get("classes")
    if classes is not None:
        return str(classes[y])
    return "+1" if y == 1 else str(y)


def save_dataset(ds: Dataset, path, fmt: str | None = None) -> None:
    """Write ``ds``; values use ``repr`` so a load gives back the same floats."""
    path = Path(path)
    if fmt is None:
        fmt = "dense_csv" if path.suffix.lower() == ".csv" else "sparse_indexvalue"
    lines = ["# sparse_rp dataset v1"]
    if fmt == "dense_csv":
        for xi, yi in zip(ds.X, ds.y.tolist()):
            lines.append(",".join([_label_token(ds, yi)] + [repr(float(x)) for x in xi]))
    elif fmt == "sparse_indexvalue":
        lines.append(f"# d={ds.d}")
        for xi, yi in zip(ds.X, ds.y.tolist()):
            nz = np.flatnonzero(xi)
            lines.append(" ".join([_label_token(ds, yi)] + [f"{j + 1}:{float(xi[j])!r}" for j in nz]))
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def feature_difference_stats(ds: Dataset, d_f: int):
    """Cross-class coordinate differences, pairing the i-th sample of each class.

    Returns ``(feature_diffs, redundant_diffs)`` as flat arrays.
    """
    pos = ds.X[ds.y == 1]
    neg = ds.X[ds.y == -1]
    m = min(len(pos), len(neg))
    diff = pos[:m] - neg[:m]
    return diff[:, :d_f].ravel(), diff[:, d_f:].ravel()


def expected_cross_class_sq_distance(spec: SyntheticSpec) -> float:
    """Mean squared distance between samples of opposite classes."""
    return 4.0 * spec.d_f + 2.0 * (spec.d_f * spec.sigma_f**2 + (spec.d - spec.d_f) * spec.sigma_r**2)


__all__ = [
    "DataFormatError",
    "Dataset",
    "SyntheticSpec",
    "downsample",
    "generate",
    "load_dataset",
    "save_dataset",
]
