"""Krylov engines for the unshifted seed system ``A x = b``.

:func:`bicg_solve` is plain BiCG with the adjoint recurrence.
:class:`SeedBiCGStab` runs BiCGstab one iteration at a time and hands out
the per-iteration scalars and vectors that drive the shifted solvers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .history import ResidualHistory
from .sparsela import as_vector, norm2

__all__ = [
    "BreakdownReport",
    "SeedBreakdown",
    "SeedIterationRecord",
    "SeedBiCGStab",
    "bicgstab_step",
    "BiCGResult",
    "bicg_solve",
    "bicgstab",
    "BREAKDOWN_TOL",
]

BREAKDOWN_TOL = 1e-14


@dataclass(frozen=True)
class BreakdownReport:
    kind: str  # "rho_zero", "pivot_zero" or "omega_zero"
    iteration: int
    magnitude: float


class SeedBreakdown(RuntimeError):
    def __init__(self, report: BreakdownReport):
        self.report = report
        super().__init__(f"{report.kind} breakdown at iteration {report.iteration} "
                         f"(relative magnitude {report.magnitude:.3e})")


@dataclass(frozen=True)
class SeedIterationRecord:
    """Everything one BiCGstab iteration produced.

    ``alpha_prev`` and ``chi_prev`` are the step lengths of the previous
    iteration (both 1 before the first), which the shifted coefficient
    recurrences need alongside the current ones.
    """

    m: int
    rho: complex
    beta: complex
    alpha: complex
    chi: complex
    alpha_prev: complex
    chi_prev: complex
    u: np.ndarray
    v: np.ndarray
    s: np.ndarray
    t: np.ndarray
    r: np.ndarray
    exact: bool = False  # s vanished: the half-step iterate solves the system


def _apply(A, x):
    return np.asarray(A @ x, dtype=np.complex128)


class SeedBiCGStab:
    """Iteration state of BiCGstab on ``A x = b`` with zero initial guess.

    Parameters
    ----------
    A : operator supporting ``A @ v`` and ``shape``
    b : right-hand side
    shadow : optional shadow vector; defaults to ``b``
    breakdown_tol : relative threshold for the breakdown tests
    """

    def __init__(self, A, b, shadow=None, breakdown_tol: float = BREAKDOWN_TOL):
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("operator must be square")
        self.A = A
        self.b = as_vector(b, n)
        self.shadow = self.b.copy() if shadow is None else as_vector(shadow, n)
        if np.any(self.b) and abs(np.vdot(self.shadow, self.b)) == 0:
            raise ValueError("shadow vector is orthogonal to b")
        self.breakdown_tol = breakdown_tol
        self._shadow_norm = norm2(self.shadow)
        self.x = np.zeros(n, dtype=np.complex128)
        self.x_half = self.x
        self.r = self.b.copy()
        self.u = np.zeros(n, dtype=np.complex128)
        self.v = np.zeros(n, dtype=np.complex128)
        self.rho = 1.0 + 0j
        self.alpha = 1.0 + 0j
        self.chi = 1.0 + 0j
        self.m = 0
        self.matvecs = 0

    def _matvec(self, x):
        self.matvecs += 1
        return _apply(self.A, x)

    def _breakdown(self, kind, value, scale):
        mag = abs(value) / scale if scale > 0 else 0.0
        if mag <= self.breakdown_tol:
            raise SeedBreakdown(BreakdownReport(kind, self.m + 1, mag))

    def step(self) -> SeedIterationRecord:
        """Advance one iteration (two products with ``A``)."""
        r = self.r
        rho = np.vdot(self.shadow, r)
        self._breakdown("rho_zero", rho, self._shadow_norm * norm2(r))
        beta = rho * self.alpha / (self.rho * self.chi)
        u = r + beta * (self.u - self.chi * self.v)
        v = self._matvec(u)
        sv = np.vdot(self.shadow, v)
        self._breakdown("pivot_zero", sv, self._shadow_norm * norm2(v))
        alpha = rho / sv
        s = r - alpha * v
        t = self._matvec(s)
        s_norm = norm2(s)
        exact = s_norm == 0.0
        if exact:
            chi = 0.0 + 0j
        else:
            ts = np.vdot(t, s)
            self._breakdown("omega_zero", ts, norm2(t) * s_norm)
            chi = ts / np.vdot(t, t).real
        self.x_half = self.x + alpha * u
        self.x = self.x_half + chi * s
        r_new = s - chi * t
        self.m += 1
        rec = SeedIterationRecord(self.m, complex(rho), complex(beta), complex(alpha), complex(chi),
                                  self.alpha, self.chi, u, v, s, t, r_new, exact)
        self.rho, self.alpha, self.chi = complex(rho), complex(alpha), complex(chi)
        self.u, self.v, self.r = u, v, r_new
        return rec


def bicgstab_step(state: SeedBiCGStab) -> SeedIterationRecord:
    return state.step()


@dataclass
class BiCGResult:
    x: np.ndarray
    status: str  # "converged", "maxit" or "breakdown"
    iterations: int
    matvecs: int
    history: ResidualHistory
    breakdown: Optional[BreakdownReport] = None
    alphas: List[complex] = field(default_factory=list)
    betas: List[complex] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def bicgstab(A, b, tol: float = 1e-8, maxit: Optional[int] = None, shadow=None,
             callback: Optional[Callable] = None) -> BiCGResult:
    """Unshifted BiCGstab driven by :class:`SeedBiCGStab`.

    Stops at the half-step iterate when ``||s|| <= tol ||b||``.
    ``callback(record, state)`` is called after every iteration.
    """
    state = SeedBiCGStab(A, b, shadow)
    bnorm = norm2(state.b)
    maxit = 10 * A.shape[0] if maxit is None else maxit
    hist = ResidualHistory()
    hist.append(0, 1.0)
    status, report = "maxit", None
    if bnorm == 0:
        return BiCGResult(state.x, "converged", 0, 0, hist)
    for _ in range(maxit):
        try:
            rec = state.step()
        except SeedBreakdown as exc:
            status, report = "breakdown", exc.report
            break
        hist.append(state.matvecs - 1, norm2(rec.s) / bnorm)
        hist.append(state.matvecs, norm2(rec.r) / bnorm)
        if callback is not None:
            callback(rec, state)
        if rec.exact or norm2(rec.s) <= tol * bnorm:
            return BiCGResult(state.x_half, "converged", state.m, state.matvecs, hist)
        if norm2(rec.r) <= tol * bnorm:
            status = "converged"
            break
    return BiCGResult(state.x, status, state.m, state.matvecs, hist, report)


def bicg_solve(A, b, shadow=None, tol: float = 1e-10, maxit: Optional[int] = None,
               breakdown_tol: float = BREAKDOWN_TOL,
               callback: Optional[Callable] = None) -> BiCGResult:
    """Biconjugate gradients with zero initial guess.

    The shadow sequence uses ``A^H`` through ``A.rmatvec``; no transposed
    copy is made. ``callback(m, x, r)`` sees every iterate, ``m = 0``
    included. Both products per iteration are counted as matvecs.
    """
    n = A.shape[0]
    b = as_vector(b, n)
    rs = b.copy() if shadow is None else as_vector(shadow, n)
    bnorm = norm2(b)
    maxit = 10 * n if maxit is None else maxit
    x = np.zeros(n, dtype=np.complex128)
    r = b.copy()
    u = r.copy()
    us = rs.copy()
    hist = ResidualHistory()
    hist.append(0, 1.0)
    alphas, betas = [], []
    if bnorm == 0:
        return BiCGResult(x, "converged", 0, 0, hist)
    rho = np.vdot(rs, r)
    if abs(rho) <= breakdown_tol * norm2(rs) * bnorm:
        raise ValueError("shadow vector must satisfy (r_0, r_0*) != 0")
    if callback is not None:
        callback(0, x, r)
    matvecs = 0
    for m in range(1, maxit + 1):
        Au = _apply(A, u)
        matvecs += 1
        denom = np.vdot(us, Au)
        if abs(denom) <= breakdown_tol * norm2(us) * norm2(Au):
            return BiCGResult(x, "breakdown", m - 1, matvecs, hist,
                              BreakdownReport("pivot_zero", m, abs(denom) / max(norm2(us) * norm2(Au), 1e-300)),
                              alphas, betas)
        alpha = rho / denom
        x = x + alpha * u
        r = r - alpha * Au
        rs = rs - np.conj(alpha) * A.rmatvec(us)
        matvecs += 1
        alphas.append(complex(alpha))
        hist.append(matvecs, norm2(r) / bnorm)
        if callback is not None:
            callback(m, x, r)
        if norm2(r) <= tol * bnorm:
            return BiCGResult(x, "converged", m, matvecs, hist, None, alphas, betas)
        rho_new = np.vdot(rs, r)
        if abs(rho_new) <= breakdown_tol * norm2(rs) * norm2(r):
            return BiCGResult(x, "breakdown", m, matvecs, hist,
                              BreakdownReport("rho_zero", m, abs(rho_new) / max(norm2(rs) * norm2(r), 1e-300)),
                              alphas, betas)
        beta = rho_new / rho
        betas.append(complex(beta))
        u = r + beta * u
        us = rs + np.conj(beta) * us
        rho = rho_new
    return BiCGResult(x, "maxit", maxit, matvecs, hist, None, alphas, betas)
