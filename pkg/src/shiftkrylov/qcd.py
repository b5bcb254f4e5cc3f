"""Wilson-fermion style problems: odd-even reduction and hopping-parameter families.

The quark matrix is ``A = I - k D`` with ``D`` a nearest-neighbour hopping
matrix. Ordering the lattice sites by parity puts ``D`` into the block form
``[[0, D_eo], [D_oe, 0]]`` and eliminating the even sites leaves

    (I - k^2 D_oe D_eo) x_o = b_o + k D_oe b_e,    x_e = b_e + k D_eo x_o.

Dividing by ``k^2`` turns the reduced systems for several ``k`` into one
shifted family ``(k_seed^-2 I - M) + sigma_i I`` with
``sigma_i = k_i^-2 - k_seed^-2`` and ``M = D_oe D_eo``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .shift_engine import ShiftFamily
from .sparsela import SparseComplexMatrix, as_vector

__all__ = [
    "CRITICAL_HOPPING",
    "DatasetInfo",
    "load_manifest",
    "StructureError",
    "OddEvenSplit",
    "odd_even_split",
    "bipartite_parity",
    "lattice_parity",
    "ReducedOperator",
    "FamilyOperator",
    "ReducedSystem",
    "reduce",
    "back_substitute",
    "hopping_shifts",
    "family_from_hoppings",
    "wilson_hopping_matrix",
    "critical_hopping",
]

CRITICAL_HOPPING = {
    "conf5.4-00l4x4-1400": 0.20328,
    "conf5.4-00l4x4-1800": 0.20265,
}


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    n_rows: int
    n_cols: int
    field: str
    kc: Optional[float]
    description: str


def load_manifest() -> Dict[str, DatasetInfo]:
    """Read the bundled dataset manifest (``datasets.txt``)."""
    text = resources.files("shiftkrylov").joinpath("datasets.txt").read_text(encoding="ascii")
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, rows, cols, field, kc, desc = line.split(None, 5)
        out[name] = DatasetInfo(name, int(rows), int(cols), field,
                                None if kc == "-" else float(kc), desc)
    return out


class StructureError(ValueError):
    """The matrix does not couple only opposite parities."""


@dataclass(frozen=True)
class OddEvenSplit:
    D_eo: SparseComplexMatrix  # rows even, columns odd
    D_oe: SparseComplexMatrix  # rows odd, columns even
    even: np.ndarray
    odd: np.ndarray

    @property
    def n(self) -> int:
        return self.even.size + self.odd.size

    def split_vector(self, v):
        v = as_vector(v, self.n)
        return v[self.even], v[self.odd]

    def join_vector(self, v_even, v_odd) -> np.ndarray:
        out = np.zeros(self.n, dtype=np.complex128)
        out[self.even] = v_even
        out[self.odd] = v_odd
        return out

    def reconstruct(self) -> SparseComplexMatrix:
        """Undo the permutation and return ``D``."""
        r1, c1, v1 = self.D_eo.triplets()
        r2, c2, v2 = self.D_oe.triplets()
        rows = np.concatenate([self.even[r1], self.odd[r2]])
        cols = np.concatenate([self.odd[c1], self.even[c2]])
        return SparseComplexMatrix.from_coo(rows, cols, np.concatenate([v1, v2]), (self.n, self.n))


ParityLike = Union[Sequence[int], np.ndarray, Callable[[int], int]]


def odd_even_split(D: SparseComplexMatrix, parity: ParityLike, tol: float = 1e-14) -> OddEvenSplit:
    """Split ``D`` into its even-odd and odd-even blocks.

    ``parity`` is an array of 0 (even) / 1 (odd) per index or a callable
    giving it. Raises :class:`StructureError` if a stored entry larger than
    ``tol`` couples two indices of equal parity.
    """
    n = D.shape[0]
    if D.shape != (n, n):
        raise ValueError("D must be square")
    if callable(parity):
        par = np.array([int(parity(i)) % 2 for i in range(n)])
    else:
        par = np.asarray(parity, dtype=np.int64) % 2
        if par.shape != (n,):
            raise ValueError("parity must have one entry per row")
    rows, cols, vals = D.triplets()
    same = (par[rows] == par[cols]) & (np.abs(vals) > tol)
    if np.any(same):
        k = int(np.flatnonzero(same)[0])
        raise StructureError(f"entry ({rows[k]}, {cols[k]}) couples equal parities; "
                             f"{int(same.sum())} such entries")
    even = np.flatnonzero(par == 0)
    odd = np.flatnonzero(par == 1)
    return OddEvenSplit(D.submatrix(even, odd), D.submatrix(odd, even), even, odd)


def bipartite_parity(D: SparseComplexMatrix, tol: float = 1e-14) -> np.ndarray:
    """Two-colour the sparsity graph of ``D`` breadth-first.

    Entries with magnitude at most ``tol`` and the diagonal are ignored.
    Each connected component starts with colour 0 at its lowest index.
    """
    n = D.shape[0]
    rows, cols, vals = D.triplets()
    keep = (rows != cols) & (np.abs(vals) > tol)
    rows, cols = rows[keep], cols[keep]
    # symmetrise the pattern
    r = np.concatenate([rows, cols])
    c = np.concatenate([cols, rows])
    order = np.argsort(r, kind="stable")
    r, c = r[order], c[order]
    ptr = np.searchsorted(r, np.arange(n + 1))
    colour = np.full(n, -1, dtype=np.int64)
    for start in range(n):
        if colour[start] >= 0:
            continue
        colour[start] = 0
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in c[ptr[i]:ptr[i + 1]]:
                if colour[j] < 0:
                    colour[j] = 1 - colour[i]
                    queue.append(j)
                elif colour[j] == colour[i]:
                    raise StructureError(f"sparsity graph is not bipartite (edge {i}-{j})")
    return colour


def lattice_parity(dims: Sequence[int], dof_per_site: int = 12) -> np.ndarray:
    """Site parity ``sum(coords) mod 2`` for lexicographic site order."""
    coords = np.indices(dims).reshape(len(dims), -1)
    site_par = coords.sum(axis=0) % 2
    return np.repeat(site_par, dof_per_site)


class ReducedOperator:
    """``M v = D_oe (D_eo v)`` acting on the odd sites; never materialised."""

    def __init__(self, split: OddEvenSplit):
        self.split = split
        n = split.odd.size
        self.shape = (n, n)
        self.dtype = np.dtype(np.complex128)

    def __matmul__(self, v):
        return self.split.D_oe @ (self.split.D_eo @ v)


class FamilyOperator:
    """``k^-2 v - M v``, the reduced operator normalised as a shift-family seed."""

    def __init__(self, M: ReducedOperator, k: float):
        if k <= 0:
            raise ValueError("hopping parameter must be positive")
        self.M = M
        self.k = float(k)
        self.diag = 1.0 / self.k ** 2
        self.shape = M.shape
        self.dtype = M.dtype

    def __matmul__(self, v):
        return self.diag * v - (self.M @ v)


@dataclass
class ReducedSystem:
    """Odd-site family ``(k_seed^-2 I - M + sigma_i I) y_i = rhs_reduced``."""

    M: ReducedOperator
    k_seed: float
    shifts: List[float]
    rhs_reduced: np.ndarray
    hoppings: List[float]

    @property
    def operator(self) -> FamilyOperator:
        return FamilyOperator(self.M, self.k_seed)

    def family(self) -> ShiftFamily:
        return ShiftFamily(self.operator, self.shifts, self.rhs_reduced)


def _reduced_rhs(split: OddEvenSplit, k: float, b) -> np.ndarray:
    b_e, b_o = split.split_vector(b)
    return b_o + k * (split.D_oe @ b_e)


def reduce(split: OddEvenSplit, k: float, b) -> ReducedSystem:
    """Odd-even reduction of ``(I - k D) x = b`` for a single ``k``.

    The returned system is normalised by ``k^-2`` so its solution is
    ``x_o`` itself: ``(k^-2 I - M) x_o = k^-2 (b_o + k D_oe b_e)``.
    """
    if k <= 0:
        raise ValueError("hopping parameter must be positive")
    rhs = _reduced_rhs(split, k, b) / k ** 2
    return ReducedSystem(ReducedOperator(split), float(k), [0.0], rhs, [float(k)])


def back_substitute(split: OddEvenSplit, k: float, b, x_odd) -> np.ndarray:
    """Full solution from the odd part: ``x_e = b_e + k D_eo x_o``."""
    b_e, _ = split.split_vector(b)
    x_odd = as_vector(x_odd, split.odd.size)
    return split.join_vector(b_e + k * (split.D_eo @ x_odd), x_odd)


def hopping_shifts(k_list: Sequence[float]):
    """Seed hopping (the largest) and shifts ``k_i^-2 - k_seed^-2``."""
    ks = [float(k) for k in k_list]
    if not ks:
        raise ValueError("need at least one hopping parameter")
    if any(k <= 0 for k in ks):
        raise ValueError("hopping parameters must be positive")
    k_seed = max(ks)
    return k_seed, [k ** -2 - k_seed ** -2 for k in ks]


def family_from_hoppings(split: OddEvenSplit, k_list: Sequence[float], b) -> ReducedSystem:
    """Shifted family for several hopping parameters sharing one right-hand side.

    The right-hand side is the reduced vector of the seed system (largest
    ``k``), so the seed solution is its ``x_o``. Shifts follow ``k_list``
    order.
    """
    k_seed, shifts = hopping_shifts(k_list)
    rhs = _reduced_rhs(split, k_seed, b) / k_seed ** 2
    return ReducedSystem(ReducedOperator(split), k_seed, shifts, rhs, [float(k) for k in k_list])


# ------------------------------------------------------------ synthetic lattice

def _gammas():
    s1 = np.array([[0, 1], [1, 0]], dtype=complex)
    s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
    s3 = np.array([[1, 0], [0, -1]], dtype=complex)
    z = np.zeros((2, 2))
    g = [np.block([[z, -1j * s], [1j * s, z]]) for s in (s1, s2, s3)]
    g.append(np.block([[z, np.eye(2)], [np.eye(2), z]]))
    return g


def _random_su3(rng, disorder):
    h = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    h = (h + h.conj().T) / 2
    h -= np.trace(h) / 3 * np.eye(3)
    return scipy.linalg.expm(1j * disorder * h)


def wilson_hopping_matrix(dims: Sequence[int] = (4, 4, 4, 4), disorder: float = 1.0,
                          rng=None) -> SparseComplexMatrix:
    """Wilson hopping matrix on a periodic lattice with random SU(3) links.

    ``D_{x,x+mu} = (1 - gamma_mu) U_mu(x)`` and
    ``D_{x,x-mu} = (1 + gamma_mu) U_mu(x-mu)^H``. Links are
    ``exp(i * disorder * H)`` with ``H`` random traceless Hermitian, so
    ``disorder = 0`` is the free field. Unknowns are ordered
    site-major, then spin, then colour (12 per site); a 4^4 lattice gives
    3072 unknowns. Every ``dims`` entry must be even for the lattice to be
    two-colourable.
    """
    rng = np.random.default_rng(rng)
    dims = tuple(int(d) for d in dims)
    nd = len(dims)
    gam = _gammas()[:nd] if nd <= 4 else None
    if gam is None:
        raise ValueError("at most four dimensions")
    n_sites = int(np.prod(dims))
    coords = np.indices(dims).reshape(nd, -1).T
    links = np.array([[_random_su3(rng, disorder) for _ in range(nd)] for _ in range(n_sites)])
    eye4 = np.eye(4)
    rows, cols, vals = [], [], []
    local = np.arange(12)
    for site in range(n_sites):
        x = coords[site]
        for mu in range(nd):
            fwd = x.copy()
            fwd[mu] = (fwd[mu] + 1) % dims[mu]
            bwd = x.copy()
            bwd[mu] = (bwd[mu] - 1) % dims[mu]
            j_f = int(np.ravel_multi_index(fwd, dims))
            j_b = int(np.ravel_multi_index(bwd, dims))
            blocks = ((j_f, np.kron(eye4 - gam[mu], links[site, mu])),
                      (j_b, np.kron(eye4 + gam[mu], links[j_b, mu].conj().T)))
            for j, blk in blocks:
                ii, jj = np.nonzero(np.abs(blk) > 1e-15)
                rows.append(site * 12 + local[ii])
                cols.append(j * 12 + local[jj])
                vals.append(blk[ii, jj])
    n = n_sites * 12
    return SparseComplexMatrix.from_coo(np.concatenate(rows), np.concatenate(cols),
                                        np.concatenate(vals), (n, n))


def critical_hopping(D: SparseComplexMatrix) -> float:
    """``1 / max Re(lambda(D))``: below it ``I - k D`` is positive real."""
    from scipy.sparse.linalg import eigs

    vals = eigs(D.to_scipy(), k=1, which="LR", return_eigenvectors=False, tol=1e-8)
    return float(1.0 / vals.real.max())
