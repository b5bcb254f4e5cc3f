"""Shifted Krylov solvers for families ``(A + sigma I) x = b`` sharing one seed run."""
from .history import HistoryRecord, ResidualHistory
from .qcd import (OddEvenSplit, ReducedSystem, back_substitute, bipartite_parity,
                  family_from_hoppings, lattice_parity, load_manifest, odd_even_split, reduce,
                  wilson_hopping_matrix)
from .seed_krylov import SeedBiCGStab, SeedBreakdown, bicg_solve, bicgstab
from .shift_engine import (ShiftFamily, ShiftedSolveResult, assemble_qmr_system,
                           quasi_residual_bound, shifted_bicgstab, sqmrcgstab)
from .signfun import PartialFractionSpec, apply_rational, read_coefficients, write_coefficients
from .sparsela import (MatrixMarketError, SparseComplexMatrix, example_5_3_diagonal,
                       make_bidiagonal_test, random_sparse, read_matrix_market,
                       write_matrix_market)

__version__ = "0.1.0"

__all__ = [
    "HistoryRecord", "ResidualHistory",
    "OddEvenSplit", "ReducedSystem", "back_substitute", "bipartite_parity",
    "family_from_hoppings", "lattice_parity", "load_manifest", "odd_even_split", "reduce",
    "wilson_hopping_matrix",
    "SeedBiCGStab", "SeedBreakdown", "bicg_solve", "bicgstab",
    "ShiftFamily", "ShiftedSolveResult", "assemble_qmr_system", "quasi_residual_bound",
    "shifted_bicgstab", "sqmrcgstab",
    "PartialFractionSpec", "apply_rational", "read_coefficients", "write_coefficients",
    "MatrixMarketError", "SparseComplexMatrix", "example_5_3_diagonal", "make_bidiagonal_test",
    "random_sparse", "read_matrix_market", "write_matrix_market",
]
