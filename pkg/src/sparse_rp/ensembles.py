"""Random projection matrix families and the scaled projection ``v' = R v / sqrt(k)``.

Four named families are provided:

* ``GM``  -- dense, i.i.d. standard normal entries;
* ``SM``  -- i.i.d. entries ``sqrt(q) * {+1, 0, -1}`` with ``q = 3``;
* ``VSM`` -- the same with ``q = sqrt(d)``;
* ``StM`` -- exactly one nonzero per column, ``+-sqrt(k)``.

Every family has entry mean 0 and entry second moment 1.

Generation is *row-prefix stable* for the i.i.d. families: the first
``k'`` rows of a ``k x d`` matrix are bit-identical to the ``k' x d``
matrix built from the same seed. The experiment harness relies on this
to project once at the largest ``k`` and slice.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import kernels
from ._rng import generator

SPARSE_FILL_THRESHOLD = 0.25
_BLOCK = 1 << 22


class EnsembleKind(str, Enum):
    GAUSSIAN = "GAUSSIAN"
    SPARSE_IID = "SPARSE_IID"
    FIXED_COLUMN_WEIGHT = "FIXED_COLUMN_WEIGHT"


@dataclass(frozen=True)
class EnsembleSpec:
    """Which matrix to draw.

    ``q`` is only meaningful for ``SPARSE_IID`` and ``column_weight`` only
    for ``FIXED_COLUMN_WEIGHT``.
    """

    kind: EnsembleKind
    k: int
    d: int
    q: float | None = None
    column_weight: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", EnsembleKind(self.kind))
        if int(self.k) != self.k or int(self.d) != self.d:
            raise ValueError("k and d must be integers")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "d", int(self.d))
        if self.k < 1 or self.d < 1:
            raise ValueError(f"dimensions must be positive, got k={self.k}, d={self.d}")
        if self.k > self.d:
            raise ValueError(f"k={self.k} exceeds d={self.d}")
        if self.kind is EnsembleKind.SPARSE_IID:
            if self.q is None or not math.isfinite(self.q) or self.q < 1:
                raise ValueError(f"SPARSE_IID needs q >= 1, got {self.q}")
            object.__setattr__(self, "q", float(self.q))
        if self.kind is EnsembleKind.FIXED_COLUMN_WEIGHT:
            s = self.column_weight
            if s is None or int(s) != s or not 1 <= s <= self.k:
                raise ValueError(f"column_weight must be an integer in [1, {self.k}], got {s}")
            object.__setattr__(self, "column_weight", int(s))
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @classmethod
    def preset(cls, name: str, k: int, d: int, seed: int = 0) -> "EnsembleSpec":
        return PRESETS[name].resolve(k, d, seed)

    @property
    def expected_fill(self) -> float:
        if self.kind is EnsembleKind.GAUSSIAN:
            return 1.0
        if self.kind is EnsembleKind.SPARSE_IID:
            return 1.0 / self.q
        return self.column_weight / self.k

    @property
    def fourth_moment(self) -> float:
        """``E(r^4)`` of a single entry (the ``B`` of the JL lower-tail bound)."""
        if self.kind is EnsembleKind.GAUSSIAN:
            return 3.0
        if self.kind is EnsembleKind.SPARSE_IID:
            return self.q
        return self.k / self.column_weight

    @property
    def nonzero_magnitude(self) -> float | None:
        if self.kind is EnsembleKind.SPARSE_IID:
            return math.sqrt(self.q)
        if self.kind is EnsembleKind.FIXED_COLUMN_WEIGHT:
            return math.sqrt(self.k / self.column_weight)
        return None

    @property
    def prefix_stable(self) -> bool:
        return self.kind is not EnsembleKind.FIXED_COLUMN_WEIGHT


@dataclass(frozen=True)
class EnsembleFamily:
    """A dimension-free ensemble description (a preset or an explicit triple).

    ``q`` may be the string ``"sqrt_d"`` to mean ``q = sqrt(d)`` once ``d``
    is known.
    """

    name: str
    kind: EnsembleKind
    q: float | str | None = None
    column_weight: int | None = None

    def resolve(self, k: int, d: int, seed: int = 0) -> EnsembleSpec:
        q = self.q
        if q == "sqrt_d":
            q = math.sqrt(d)
        return EnsembleSpec(self.kind, k, d, q=q, column_weight=self.column_weight, seed=seed)

    @classmethod
    def parse(cls, text: str) -> "EnsembleFamily":
        """Parse ``GM``/``SM``/``VSM``/``StM`` or ``KIND[:q=..|:s=..]``.

        >>> EnsembleFamily.parse("SPARSE_IID:q=5").q
        5.0
        """
        text = text.strip()
        if text in PRESETS:
            return PRESETS[text]
        kind_txt, _, arg = text.partition(":")
        try:
            kind = EnsembleKind(kind_txt.upper())
        except ValueError:
            raise ValueError(f"unknown ensemble {text!r}") from None
        if kind is EnsembleKind.GAUSSIAN:
            if arg:
                raise ValueError("GAUSSIAN takes no parameter")
            return cls(text, kind)
        key, _, val = arg.partition("=")
        if kind is EnsembleKind.SPARSE_IID and key == "q":
            return cls(text, kind, q="sqrt_d" if val == "sqrt_d" else float(val))
        if kind is EnsembleKind.FIXED_COLUMN_WEIGHT and key == "s":
            return cls(text, kind, column_weight=int(val))
        raise ValueError(f"bad ensemble parameter in {text!r}")


PRESETS: dict[str, EnsembleFamily] = {
    "GM": EnsembleFamily("GM", EnsembleKind.GAUSSIAN),
    "SM": EnsembleFamily("SM", EnsembleKind.SPARSE_IID, q=3.0),
    "VSM": EnsembleFamily("VSM", EnsembleKind.SPARSE_IID, q="sqrt_d"),
    "StM": EnsembleFamily("StM", EnsembleKind.FIXED_COLUMN_WEIGHT, column_weight=1),
}


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """A realised ``k x d`` matrix in dense or CSC storage.

    Arrays are marked read-only, so a built matrix can be shared freely.
    ``spec`` is ``None`` for matrices loaded from files without provenance.
    """

    k: int
    d: int
    spec: EnsembleSpec | None = None
    dense: np.ndarray | None = field(default=None, repr=False)
    indptr: np.ndarray | None = field(default=None, repr=False)
    indices: np.ndarray | None = field(default=None, repr=False)
    data: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if (self.dense is None) == (self.indptr is None):
            raise ValueError("exactly one of dense or CSC arrays must be given")
        if self.dense is not None:
            if self.dense.shape != (self.k, self.d):
                raise ValueError("dense array shape does not match (k, d)")
            _readonly(self.dense)
        else:
            if len(self.indptr) != self.d + 1 or len(self.indices) != len(self.data):
                raise ValueError("malformed CSC arrays")
            for a in (self.indptr, self.indices, self.data):
                _readonly(a)

    @property
    def storage(self) -> str:
        return "dense" if self.dense is not None else "sparse"

    @property
    def nnz(self) -> int:
        if self.dense is not None:
            return int(np.count_nonzero(self.dense))
        return int(self.indptr[-1])

    def toarray(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense.copy()
        out = np.zeros((self.k, self.d))
        cols = np.repeat(np.arange(self.d), np.diff(self.indptr))
        out[self.indices, cols] = self.data
        return out

    def column_weights(self) -> np.ndarray:
        if self.dense is not None:
            return np.count_nonzero(self.dense, axis=0)
        return np.diff(self.indptr)

    def as_storage(self, storage: str) -> "ProjectionMatrix":
        if storage == self.storage:
            return self
        if storage == "dense":
            return ProjectionMatrix(self.k, self.d, self.spec, dense=self.toarray())
        if storage == "sparse":
            return _from_dense_to_csc(self.dense, self.spec)
        raise ValueError(f"unknown storage {storage!r}")


def _from_dense_to_csc(dense: np.ndarray, spec: EnsembleSpec | None) -> ProjectionMatrix:
    k, d = dense.shape
    rows, cols = np.nonzero(dense.T)  # column-major order
    cols, rows = rows, cols
    indptr = np.zeros(d + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=d), out=indptr[1:])
    return ProjectionMatrix(
        k, d, spec,
        indptr=indptr,
        indices=rows.astype(np.int64),
        data=dense[rows, cols].astype(np.float64),
    )


def _coo_to_matrix(spec, rows, cols, vals, storage) -> ProjectionMatrix:
    """Assemble from COO triples already sorted by (col, row)."""
    k, d = spec.k, spec.d
    if storage == "dense":
        dense = np.zeros((k, d))
        dense[rows, cols] = vals
        return ProjectionMatrix(k, d, spec, dense=dense)
    indptr = np.zeros(d + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=d), out=indptr[1:])
    return ProjectionMatrix(
        k, d, spec, indptr=indptr, indices=rows.astype(np.int64), data=vals.astype(np.float64)
    )


def _sparse_iid_positions(spec: EnsembleSpec):
    """Bernoulli(1/q) support over the row-major flattened matrix.

    Dense fills use one uniform per entry (value and sign together);
    sparse fills skip ahead by geometric gaps so the cost is O(nnz).
    Both walk the entries in row-major order, which is what makes the
    draw prefix stable in ``k``.
    """
    total = spec.k * spec.d
    p = 1.0 / spec.q
    if p > SPARSE_FILL_THRESHOLD:
        u = generator(spec.seed, 2).random(total)
        flat = np.flatnonzero(u < p)
        signs = np.where(u[flat] < 0.5 * p, 1.0, -1.0)
        return flat, signs
    gap_rng = generator(spec.seed, 0)
    sign_rng = generator(spec.seed, 1)
    chunk = max(1024, int(total * p * 1.02) + 64)
    flat_parts = []
    last = -1
    while last < total - 1:
        gaps = gap_rng.geometric(p, size=chunk)
        pos = last + np.cumsum(gaps)
        flat_parts.append(pos)
        last = int(pos[-1])
    flat = np.concatenate(flat_parts)
    flat = flat[flat < total]
    signs = np.where(sign_rng.random(flat.size) < 0.5, 1.0, -1.0)
    return flat, signs


def build_matrix(spec: EnsembleSpec, storage: str | None = None) -> ProjectionMatrix:
    """Draw one matrix from ``spec``; deterministic in ``spec.seed``.

    ``storage`` defaults to sparse when the expected fill is at most 25%.
    Dense and sparse builds of the same spec hold identical entries.
    """
    if storage is None:
        storage = "sparse" if spec.expected_fill <= SPARSE_FILL_THRESHOLD else "dense"
    if storage not in ("dense", "sparse"):
        raise ValueError(f"unknown storage {storage!r}")
    k, d = spec.k, spec.d

    if spec.kind is EnsembleKind.GAUSSIAN:
        rng = generator(spec.seed)
        dense = np.empty((k, d))
        rows_per_block = max(1, _BLOCK // d)
        for lo in range(0, k, rows_per_block):
            hi = min(k, lo + rows_per_block)
            rng.standard_normal(out=dense[lo:hi])
        m = ProjectionMatrix(k, d, spec, dense=dense)
        return m if storage == "dense" else m.as_storage("sparse")

    if spec.kind is EnsembleKind.SPARSE_IID:
        flat, signs = _sparse_iid_positions(spec)
        vals = math.sqrt(spec.q) * signs
        if storage == "dense":
            dense = np.zeros(k * d)
            dense[flat] = vals
            return ProjectionMatrix(k, d, spec, dense=dense.reshape(k, d))
        rows, cols = np.divmod(flat, d)
        # positions arrive in row-major order; a stable sort by column gives CSC order
        order = np.argsort(cols, kind="stable")
        return _coo_to_matrix(spec, rows[order], cols[order], vals[order], storage)

    s = spec.column_weight
    rng = generator(spec.seed)
    if s == 1:
        rows = rng.integers(0, k, size=d)
        rows = rows[:, None]
    else:
        keys = rng.random((d, k))
        rows = np.sort(np.argpartition(keys, s - 1, axis=1)[:, :s], axis=1)
    signs = np.where(rng.random((d, s)) < 0.5, 1.0, -1.0)
    cols = np.repeat(np.arange(d), s)
    vals = math.sqrt(k / s) * signs.ravel()
    return _coo_to_matrix(spec, rows.ravel(), cols, vals, storage)


def _as_samples(m: ProjectionMatrix, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.d:
        raise ValueError(f"expected samples of width {m.d}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("samples contain non-finite values")
    return X


def project_batch(m: ProjectionMatrix, X, scaled: bool = True) -> np.ndarray:
    """Project every row of ``X`` (n x d); returns n x k.

    ``scaled=False`` skips the ``1/sqrt(k)`` factor and returns ``X R^T``.
    """
    X = _as_samples(m, X)
    if m.dense is not None:
        Y = X @ m.dense.T
    else:
        Y = kernels.csc_project(m.indptr, m.indices, m.data, X, m.k)
    if scaled:
        Y /= math.sqrt(m.k)
    return Y


def project(m: ProjectionMatrix, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != m.d:
        raise ValueError(f"expected a vector of length {m.d}, got shape {v.shape}")
    return project_batch(m, v[None, :])[0]


# -- file formats -------------------------------------------------------------

_SQRT_TOKEN = re.compile(r"^([+-])sqrt\((.+)\)$")
_HEADER = "# sparse_rp matrix v1"


def _spec_comment(spec: EnsembleSpec | None) -> str:
    if spec is None:
        return _HEADER
    return (
        f"{_HEADER} kind={spec.kind.value} k={spec.k} d={spec.d} q={spec.q!r} "
        f"column_weight={spec.column_weight} seed={spec.seed}"
    )


def _parse_spec_comment(line: str) -> EnsembleSpec | None:
    fields = dict(tok.split("=", 1) for tok in line.split() if "=" in tok)
    if "kind" not in fields:
        return None
    q = None if fields.get("q", "None") == "None" else float(fields["q"])
    cw = None if fields.get("column_weight", "None") == "None" else int(fields["column_weight"])
    return EnsembleSpec(fields["kind"], int(fields["k"]), int(fields["d"]), q, cw, int(fields["seed"]))


def _value_token(spec: EnsembleSpec | None, value: float) -> str:
    if spec is not None and spec.kind is not EnsembleKind.GAUSSIAN:
        sq = spec.q if spec.kind is EnsembleKind.SPARSE_IID else spec.k / spec.column_weight
        return f"{'+' if value > 0 else '-'}sqrt({sq!r})"
    return repr(float(value))


def _parse_value(tok: str) -> float:
    m = _SQRT_TOKEN.match(tok)
    if m:
        mag = math.sqrt(float(m.group(2)))
        return mag if m.group(1) == "+" else -mag
    return float(tok)


def save_matrix(m: ProjectionMatrix, path, fmt: str = "triples") -> None:
    """Write ``m`` as sparse triples (``k d nnz`` header, 0-based ``row col value``) or dense CSV.

    Sparse-family values are written as ``+sqrt(q)``/``-sqrt(q)`` so the
    round trip is exact by construction.
    """
    from ._csvio import atomic_write_text

    if fmt == "triples":
        sp = m.as_storage("sparse")
        cols = np.repeat(np.arange(m.d), np.diff(sp.indptr))
        lines = [_spec_comment(m.spec), f"{m.k} {m.d} {sp.nnz}"]
        lines += [
            f"{r} {c} {_value_token(m.spec, v)}"
            for r, c, v in zip(sp.indices.tolist(), cols.tolist(), sp.data.tolist())
        ]
    elif fmt == "csv":
        dense = m.toarray()
        lines = [_spec_comment(m.spec)]
        lines += [",".join(repr(float(x)) for x in row) for row in dense]
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_matrix(path, fmt: str | None = None) -> ProjectionMatrix:
    """Read a matrix written by :func:`save_matrix` (format inferred from the suffix by default)."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "triples"
    spec = None
    body = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith(_HEADER):
                spec = _parse_spec_comment(line)
            continue
        body.append((lineno, line))
    if fmt == "csv":
        dense = np.array([[float(x) for x in line.split(",")] for _, line in body])
        k, d = dense.shape
        return ProjectionMatrix(k, d, spec, dense=dense)
    if not body:
        raise ValueError(f"{path}: missing 'k d nnz' header")
    lineno, header = body[0]
    try:
        k, d, nnz = (int(x) for x in header.split())
    except ValueError:
        raise ValueError(f"{path}:{lineno}: bad header {header!r}") from None
    if len(body) - 1 != nnz:
        raise ValueError(f"{path}: header says {nnz} entries, found {len(body) - 1}")
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    for i, (lineno, line) in enumerate(body[1:]):
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'row col value'")
        rows[i], cols[i], vals[i] = int(parts[0]), int(parts[1]), _parse_value(parts[2])
    if nnz and (rows.min() < 0 or rows.max() >= k or cols.min() < 0 or cols.max() >= d):
        raise ValueError(f"{path}: index out of range")
    if spec is not None and (spec.k, spec.d) != (k, d):
        raise ValueError(f"{path}: provenance comment disagrees with header")
    order = np.lexsort((rows, cols))
    indptr = np.zeros(d + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=d), out=indptr[1:])
    return ProjectionMatrix(k, d, spec, indptr=indptr, indices=rows[order], data=vals[order])
