"""Rational matrix functions ``f(A) b ~ sum_i w_i (A - p_i I)^{-1} b`` by one shifted solve."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .shift_engine import ShiftFamily, ShiftedSolveResult, shifted_bicgstab, sqmrcgstab

__all__ = [
    "PartialFractionSpec",
    "RationalConvergenceError",
    "RationalResult",
    "apply_rational",
    "read_coefficients",
    "write_coefficients",
]

_SOLVERS = {"sbicgstab": shifted_bicgstab, "sqmrcgstab": sqmrcgstab}


@dataclass(frozen=True)
class PartialFractionSpec:
    """Weights ``w_i`` and poles ``p_i`` of ``g(t) = sum_i w_i / (t - p_i)``."""

    weights: tuple
    poles: tuple

    def __init__(self, weights: Sequence[complex], poles: Sequence[complex]):
        w = tuple(complex(x) for x in weights)
        p = tuple(complex(x) for x in poles)
        if len(w) != len(p):
            raise ValueError("weights and poles must have equal length")
        if not w:
            raise ValueError("need at least one pole")
        if len(set(p)) != len(p):
            raise ValueError("poles must be pairwise distinct")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "poles", p)

    def __len__(self):
        return len(self.poles)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.complex128)
        return sum(w / (t - p) for w, p in zip(self.weights, self.poles))


class RationalConvergenceError(RuntimeError):
    def __init__(self, message, result: "RationalResult"):
        super().__init__(message)
        self.result = result


@dataclass
class RationalResult:
    value: np.ndarray
    statuses: List[str]
    solve: ShiftedSolveResult


def pole_tolerance(spec: PartialFractionSpec, tol: float) -> float:
    """Per-pole tolerance ``tol / (s max|w| / sum|w|)``."""
    mags = np.abs(spec.weights)
    return tol / (len(spec) * mags.max() / mags.sum())


def apply_rational(A, b, spec: PartialFractionSpec, solver: str = "sqmrcgstab",
                   tol: float = 1e-8, maxit=None, **kwargs) -> RationalResult:
    """Evaluate ``sum_i w_i x_i`` where ``(A - p_i I) x_i = b``.

    All poles share one seed run on ``A`` with shifts ``-p_i``. Raises
    :class:`RationalConvergenceError` (carrying the partial result) when a
    pole's system does not converge.
    """
    try:
        run = _SOLVERS[solver]
    except KeyError:
        raise ValueError(f"unknown solver {solver!r}; use one of {sorted(_SOLVERS)}") from None
    family = ShiftFamily(A, [-p for p in spec.poles], b)
    res = run(family, tol=pole_tolerance(spec, tol), maxit=maxit, **kwargs)
    value = np.zeros(family.n, dtype=np.complex128)
    for w, tr in zip(spec.weights, res.tracks):
        value += w * tr.x
    out = RationalResult(value, res.statuses, res)
    bad = [i for i, st in enumerate(res.statuses) if st != "converged"]
    if bad:
        raise RationalConvergenceError(
            f"poles {[spec.poles[i] for i in bad]} did not converge ({[res.statuses[i] for i in bad]})", out)
    return out


def read_coefficients(path) -> PartialFractionSpec:
    """Read ``omega_re omega_im sigma_re sigma_im`` lines; ``#`` starts a comment."""
    weights, poles = [], []
    with open(os.fspath(path), encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 numbers, got {len(parts)}")
            wr, wi, pr, pi = (float(p) for p in parts)
            weights.append(complex(wr, wi))
            poles.append(complex(pr, pi))
    return PartialFractionSpec(weights, poles)


def write_coefficients(path, spec: PartialFractionSpec) -> None:
    with open(os.fspath(path), "w", encoding="ascii") as fh:
        for w, p in zip(spec.weights, spec.poles):
            fh.write(f"{w.real!r} {w.imag!r} {p.real!r} {p.imag!r}\n")
