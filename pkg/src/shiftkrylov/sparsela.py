"""Complex vectors, compressed-row sparse matrices and Matrix Market I/O.

Vectors are plain ``numpy`` arrays of dtype ``complex128``. Matrices are
:class:`SparseComplexMatrix` instances; the heavy lifting of the product is
delegated to ``scipy.sparse`` while the row structure stays inspectable.
"""
from __future__ import annotations

import os
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseComplexMatrix",
    "ShiftedOperator",
    "MatrixMarketError",
    "as_vector",
    "dot",
    "norm2",
    "matvec",
    "read_matrix_market",
    "write_matrix_market",
    "make_bidiagonal_test",
    "example_5_3_diagonal",
    "random_sparse",
]


class MatrixMarketError(ValueError):
    """Raised for malformed Matrix Market input; carries the offending line."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def as_vector(x, n: Optional[int] = None) -> np.ndarray:
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ValueError(f"dimension mismatch: expected length {n}, got {v.shape[0]}")
    return v


def dot(u, v) -> complex:
    """Inner product ``sum(conj(u_i) * v_i)``; the first argument is conjugated."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return complex(np.vdot(u, v))


def norm2(v) -> float:
    v = np.asarray(v)
    return float(np.sqrt(np.vdot(v, v).real))


class SparseComplexMatrix:
    """Immutable complex matrix in compressed-row storage.

    Column indices inside each row are strictly increasing. Explicitly
    stored zeros are kept as they are read; they do not change products.

    Parameters
    ----------
    indptr, indices, data : array_like
        Standard CSR arrays.
    shape : (int, int)
    """

    def __init__(self, indptr, indices, data, shape):
        n_rows, n_cols = (int(s) for s in shape)
        if n_rows <= 0 or n_cols <= 0:
            raise ValueError(f"shape must be positive, got {shape}")
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        data = np.asarray(data, dtype=np.complex128)
        if indptr.shape != (n_rows + 1,) or indptr[0] != 0 or np.any(np.diff(indptr) < 0):
            raise ValueError("invalid row pointer array")
        if indices.shape != data.shape or indices.shape[0] != indptr[-1]:
            raise ValueError("indices/data length does not match row pointers")
        if indices.size and (indices.min() < 0 or indices.max() >= n_cols):
            raise ValueError("column index out of range")
        for i in range(n_rows):
            row = indices[indptr[i]:indptr[i + 1]]
            if row.size > 1 and np.any(np.diff(row) <= 0):
                raise ValueError(f"column indices of row {i} are not strictly increasing")
        self.shape = (n_rows, n_cols)
        self.indptr = indptr
        self.indices = indices
        self.data = data
        for arr in (self.indptr, self.indices, self.data):
            arr.setflags(write=False)
        self._csr = sp.csr_matrix((data, indices, indptr), shape=self.shape)
        # transpose view (CSC) for adjoint products, no copy
        self._csr_t = self._csr.T

    dtype = np.dtype(np.complex128)

    @property
    def n_rows(self) -> int:
        return self.shape[0]

    @property
    def n_cols(self) -> int:
        return self.shape[1]

    @property
    def nnz(self) -> int:
        """Number of stored entries, explicit zeros included."""
        return int(self.indices.size)

    @classmethod
    def from_coo(cls, rows, cols, values, shape) -> "SparseComplexMatrix":
        """Build from triplets. Duplicate coordinates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.complex128)
        n_rows, n_cols = shape
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows
                          or cols.min() < 0 or cols.max() >= n_cols):
            raise ValueError("triplet index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if rows.size:
            new = np.ones(rows.size, dtype=bool)
            new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(new)
            values = np.add.reduceat(values, starts)
            rows, cols = rows[starts], cols[starts]
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(indptr, cols, values, shape)

    @classmethod
    def from_dense(cls, a, keep_zeros: bool = False) -> "SparseComplexMatrix":
        a = np.asarray(a, dtype=np.complex128)
        if a.ndim != 2:
            raise ValueError("expected a 2-d array")
        if keep_zeros:
            rows, cols = np.indices(a.shape)
            rows, cols = rows.ravel(), cols.ravel()
        else:
            rows, cols = np.nonzero(a)
        return cls.from_coo(rows, cols, a[rows, cols], a.shape)

    @classmethod
    def from_scipy(cls, m) -> "SparseComplexMatrix":
        coo = sp.coo_matrix(m)
        return cls.from_coo(coo.row, coo.col, coo.data, coo.shape)

    @classmethod
    def identity(cls, n: int) -> "SparseComplexMatrix":
        idx = np.arange(n)
        return cls(np.arange(n + 1), idx, np.ones(n), (n, n))

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr.copy()

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def row(self, i: int):
        """Return ``(column_indices, values)`` of row ``i``."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def triplets(self):
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.indptr))
        return rows, self.indices.copy(), self.data.copy()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def matvec(self, x) -> np.ndarray:
        x = as_vector(x, self.n_cols)
        return self._csr @ x

    def rmatvec(self, x) -> np.ndarray:
        """Product with the conjugate transpose, ``A^H x``."""
        x = as_vector(x, self.n_rows)
        return np.conj(self._csr_t @ np.conj(x))

    def __matmul__(self, x):
        return self.matvec(x)

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "SparseComplexMatrix":
        return SparseComplexMatrix.from_scipy(self._csr[np.asarray(rows)][:, np.asarray(cols)])

    def without_diagonal(self) -> "SparseComplexMatrix":
        r, c, v = self.triplets()
        keep = r != c
        return SparseComplexMatrix.from_coo(r[keep], c[keep], v[keep], self.shape)

    def __repr__(self):
        return f"SparseComplexMatrix(shape={self.shape}, nnz={self.nnz})"


class ShiftedOperator:
    """The operator ``v -> base @ v + shift * v``; ``A + shift*I`` is never formed."""

    def __init__(self, base, shift: complex):
        self.base = base
        self.shift = complex(shift)
        self.shape = base.shape
        self.dtype = np.dtype(np.complex128)

    def apply(self, v) -> np.ndarray:
        return self.base @ v + self.shift * v

    __matmul__ = apply


def matvec(A, x) -> np.ndarray:
    """``y = A x`` with a dimension check."""
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix has {A.shape[1]} columns, vector has {x.shape[0]} entries")
    return A @ x


# ---------------------------------------------------------------- Matrix Market

_FIELDS = ("real", "complex", "integer", "pattern")
_SYMMETRIES = ("general", "symmetric", "hermitian", "skew-symmetric")


def read_matrix_market(path: Union[str, os.PathLike]) -> SparseComplexMatrix:
    """Read a coordinate Matrix Market file (optionally gzip-compressed).

    Symmetric, skew-symmetric and Hermitian storage is expanded to general
    storage. Pattern entries get the value ``1``.
    """
    path = os.fspath(path)
    if path.endswith(".gz"):
        import gzip
        with gzip.open(path, "rt", encoding="ascii") as fh:
            return _parse_matrix_market(fh)
    with open(path, "r", encoding="ascii") as fh:
        return _parse_matrix_market(fh)


def _parse_matrix_market(lines: Iterable[str]) -> SparseComplexMatrix:
    it = iter(enumerate(lines, start=1))
    try:
        lineno, header = next(it)
    except StopIteration:
        raise MatrixMarketError("empty file", 1) from None
    tokens = header.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
        raise MatrixMarketError(f"bad header {header.strip()!r}", lineno)
    if tokens[2] != "coordinate":
        raise MatrixMarketError(f"unsupported format {tokens[2]!r}, only coordinate", lineno)
    field, symmetry = tokens[3], tokens[4]
    if field not in _FIELDS:
        raise MatrixMarketError(f"unknown field {field!r}", lineno)
    if symmetry not in _SYMMETRIES:
        raise MatrixMarketError(f"unknown symmetry {symmetry!r}", lineno)
    if symmetry == "hermitian" and field != "complex":
        raise MatrixMarketError("hermitian storage requires complex field", lineno)

    size = None
    for lineno, line in it:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"bad size line {s!r}", lineno)
        try:
            size = tuple(int(p) for p in parts)
        except ValueError:
            raise MatrixMarketError(f"bad size line {s!r}", lineno) from None
        break
    if size is None:
        raise MatrixMarketError("missing size line", lineno)
    n_rows, n_cols, nnz = size
    if n_rows <= 0 or n_cols <= 0 or nnz < 0:
        raise MatrixMarketError(f"invalid sizes {size}", lineno)

    width = {"real": 3, "integer": 3, "complex": 4, "pattern": 2}[field]
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.complex128)
    k = 0
    for lineno, line in it:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        if k == nnz:
            raise MatrixMarketError("more entries than declared", lineno)
        parts = s.split()
        if len(parts) != width:
            raise MatrixMarketError(f"expected {width} fields, got {len(parts)}", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            if field == "pattern":
                val = 1.0 + 0.0j
            elif field == "complex":
                val = complex(float(parts[2]), float(parts[3]))
            elif field == "integer":
                val = complex(int(parts[2]))
            else:
                val = complex(float(parts[2]))
        except ValueError:
            raise MatrixMarketError(f"unparsable entry {s!r}", lineno) from None
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            raise MatrixMarketError(f"index ({i}, {j}) out of range for {n_rows}x{n_cols}", lineno)
        if symmetry != "general" and i < j:
            raise MatrixMarketError(f"entry ({i}, {j}) above the diagonal in {symmetry} storage", lineno)
        rows[k], cols[k], vals[k] = i - 1, j - 1, val
        k += 1
    if k < nnz:
        raise MatrixMarketError(f"truncated entry list: {k} of {nnz} entries", lineno)

    if symmetry != "general":
        off = rows != cols
        if symmetry == "symmetric":
            mirrored = vals[off]
        elif symmetry == "skew-symmetric":
            mirrored = -vals[off]
        else:
            mirrored = np.conj(vals[off])
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, mirrored]))
    return SparseComplexMatrix.from_coo(rows, cols, vals, (n_rows, n_cols))


def write_matrix_market(path, A: SparseComplexMatrix, field: str = "complex",
                        comment: Optional[str] = None) -> None:
    """Write ``A`` in general coordinate storage.

    Values use ``repr`` so finite floats survive a round trip unchanged.
    """
    if field not in ("real", "complex"):
        raise ValueError("field must be 'real' or 'complex'")
    rows, cols, vals = A.triplets()
    if field == "real" and np.any(vals.imag != 0):
        raise ValueError("matrix has non-zero imaginary parts; use field='complex'")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate {field} general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{A.n_rows} {A.n_cols} {A.nnz}\n")
        for i, j, v in zip(rows, cols, vals):
            if field == "complex":
                fh.write(f"{i + 1} {j + 1} {float(v.real)!r} {float(v.imag)!r}\n")
            else:
                fh.write(f"{i + 1} {j + 1} {float(v.real)!r}\n")


# ------------------------------------------------------------------ generators

def make_bidiagonal_test(n: int, diag_values, super_value=1.0) -> SparseComplexMatrix:
    """Upper bidiagonal matrix with the given diagonal and a constant superdiagonal."""
    d = np.asarray(diag_values, dtype=np.complex128)
    if d.shape != (n,):
        raise ValueError(f"need {n} diagonal values, got {d.size}")
    rows = np.concatenate([np.arange(n), np.arange(n - 1)])
    cols = np.concatenate([np.arange(n), np.arange(1, n)])
    vals = np.concatenate([d, np.full(n - 1, super_value, dtype=np.complex128)])
    return SparseComplexMatrix.from_coo(rows, cols, vals, (n, n))


def example_5_3_diagonal(case: int) -> np.ndarray:
    """Diagonal of the structural-dynamics bidiagonal test matrix.

    Four small leading entries followed by consecutive integers from 10;
    ``case=1`` has length 100, ``case=2`` length 1000.
    """
    if case == 1:
        small, n = 1e-3, 100
    elif case == 2:
        small, n = 1e-4, 1000
    else:
        raise ValueError("case must be 1 or 2")
    head = small * np.arange(1, 5)
    return np.concatenate([head, np.arange(10, 10 + n - 4, dtype=float)])


def random_sparse(n: int, density: float = 0.2, rng=None, diag_shift: float = 0.0,
                  scale: float = 1.0) -> SparseComplexMatrix:
    """Random complex sparse matrix ``scale * G + diag_shift * I``.

    ``G`` has roughly ``density * n`` entries per row with independent
    standard complex normal values divided by ``sqrt(density * n)``, so its
    spectral radius is about one.
    """
    rng = np.random.default_rng(rng)
    mask = rng.random((n, n)) < density
    rows, cols = np.nonzero(mask)
    vals = (rng.standard_normal(rows.size) + 1j * rng.standard_normal(rows.size)) / np.sqrt(2)
    vals *= scale / np.sqrt(max(density * n, 1.0))
    rows = np.concatenate([rows, np.arange(n)])
    cols = np.concatenate([cols, np.arange(n)])
    vals = np.concatenate([vals, np.full(n, diag_shift, dtype=np.complex128)])
    return SparseComplexMatrix.from_coo(rows, cols, vals, (n, n))
