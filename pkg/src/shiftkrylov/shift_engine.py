"""Shifted BiCGstab and its quasi-minimal residual variant.

One seed BiCGstab run on ``A x = b`` serves every system of the family
``(A + sigma_i I) x_i = b``. Shifted residuals are collinear with the seed
residuals, so each shift only needs scalar recurrences and a few vector
updates per iteration; the number of products with ``A`` stays at two per
iteration however many shifts are tracked.

The quasi-minimal residual layer smooths the shifted iterates by
quasi-minimising over the span of the shifted directions ``u`` and
half-step residuals ``s``, with the Givens rotations folded into the
scalar recurrences ``theta, tau, eta``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .history import ResidualHistory
from .seed_krylov import BreakdownReport, SeedBiCGStab, SeedBreakdown, SeedIterationRecord
from .sparsela import as_vector, norm2

__all__ = [
    "ShiftFamily",
    "CollinearityState",
    "ShiftedScalars",
    "ShiftBreakdown",
    "ShiftTrack",
    "ShiftedSolveResult",
    "update_collinearity",
    "shifted_scalars",
    "shifted_bicgstab",
    "sqmrcgstab",
    "quasi_residual_bound",
    "assemble_qmr_system",
]

_RESCALE_HI = 1e100
_RESCALE_LO = 1e-100


@dataclass
class ShiftFamily:
    """Systems ``(A + sigma_i I) x_i = b`` sharing ``A`` and ``b``.

    Shifts are not checked against the spectrum of ``A``.
    """

    A: object
    shifts: Sequence[complex]
    b: np.ndarray

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("operator must be square")
        self.b = as_vector(self.b, n)
        self.shifts = [complex(s) for s in self.shifts]
        if not self.shifts:
            raise ValueError("need at least one shift")

    @property
    def n(self) -> int:
        return self.A.shape[0]


class ShiftBreakdown(ArithmeticError):
    """A shift-specific coefficient became singular; only that shift stalls."""


@dataclass(frozen=True)
class CollinearityState:
    """Collinearity factors of one shift.

    ``pi_curr`` and ``pi_prev`` are the residual polynomial values
    ``p_m(-sigma)``, ``p_{m-1}(-sigma)``; ``rho_mr`` is the product
    ``prod 1/(1 + sigma chi_i)`` carried by the stabilising polynomial.
    All three share the common factor ``exp(log_scale)``, which is adjusted
    to keep them representable. Ratios never depend on it.
    """

    pi_curr: complex = 1.0 + 0j
    pi_prev: complex = 1.0 + 0j
    rho_mr: complex = 1.0 + 0j
    log_scale: float = 0.0

    @property
    def pi(self) -> complex:
        return self.pi_curr * math.exp(self.log_scale)

    @property
    def pi_previous(self) -> complex:
        return self.pi_prev * math.exp(self.log_scale)

    @property
    def mr_factor(self) -> complex:
        return self.rho_mr * math.exp(self.log_scale)

    @property
    def residual_factor(self) -> complex:
        """Scale turning the seed residual into the shifted one."""
        return self.rho_mr / self.pi_curr

    def rescaled(self) -> "CollinearityState":
        mag = abs(self.pi_curr)
        if _RESCALE_LO < mag < _RESCALE_HI or mag == 0 or not np.isfinite(mag):
            return self
        return CollinearityState(self.pi_curr / mag, self.pi_prev / mag, self.rho_mr / mag,
                                 self.log_scale + math.log(mag))


def update_collinearity(coll: CollinearityState, sigma, alpha_m, alpha_prev, beta_m) -> CollinearityState:
    """Advance ``pi`` by one step of the residual polynomial recurrence.

    ``pi_next = (1 + alpha_m sigma) pi_curr + (alpha_m beta_m / alpha_prev) (pi_curr - pi_prev)``
    with BiCGstab numbering (``beta_m`` is the coefficient used to build
    ``u_m``, ``alpha_prev`` the previous step length).
    """
    if alpha_prev == 0:
        raise ZeroDivisionError("alpha_prev must be non-zero")
    g = alpha_m * beta_m / alpha_prev
    pi_next = (1.0 + alpha_m * sigma) * coll.pi_curr + g * (coll.pi_curr - coll.pi_prev)
    return CollinearityState(pi_next, coll.pi_curr, coll.rho_mr, coll.log_scale)


@dataclass(frozen=True)
class ShiftedScalars:
    alpha: complex
    beta: complex
    chi: complex
    rho_mr_next: complex
    s_factor: complex  # s^sigma = s_factor * s
    r_factor: complex  # r^sigma = r_factor * r
    coll: CollinearityState  # state after the iteration


def shifted_scalars(coll: CollinearityState, sigma, alpha_m, alpha_prev, beta_m, chi_m) -> ShiftedScalars:
    """Shifted BiCGstab coefficients for one iteration.

    ``coll`` is the state before the iteration. Raises :class:`ShiftBreakdown`
    if ``p_m(-sigma)`` vanishes or ``1 + sigma chi_m = 0``.
    """
    if coll.pi_curr == 0:
        raise ShiftBreakdown("collinearity factor vanished")
    beta_s = (coll.pi_prev / coll.pi_curr) ** 2 * beta_m
    mid = update_collinearity(coll, sigma, alpha_m, alpha_prev, beta_m)
    if mid.pi_curr == 0 or not np.isfinite(mid.pi_curr):
        raise ShiftBreakdown("collinearity factor vanished or overflowed")
    alpha_s = alpha_m * mid.pi_prev / mid.pi_curr
    denom = 1.0 + sigma * chi_m
    if denom == 0:
        raise ShiftBreakdown("1 + sigma*chi vanished")
    chi_s = chi_m / denom
    rho_next = mid.rho_mr / denom
    s_factor = mid.rho_mr / mid.pi_curr
    new = CollinearityState(mid.pi_curr, mid.pi_prev, rho_next, mid.log_scale).rescaled()
    return ShiftedScalars(alpha_s, beta_s, chi_s, rho_next, s_factor, new.residual_factor, new)


def quasi_residual_bound(m: float, tau: float) -> float:
    """Upper bound ``sqrt(2m + 1) tau`` on the residual after ``m`` iterations.

    ``m`` counts full iterations; the first half of iteration ``m`` uses
    ``m - 0.5``.
    """
    if m < 0 or tau < 0:
        raise ValueError("m and tau must be non-negative")
    return math.sqrt(2.0 * m + 1.0) * tau


def assemble_qmr_system(delta_seq, theta_seq):
    """Scaled bidiagonal least-squares system of the quasi-minimisation.

    Parameters
    ----------
    delta_seq : k step lengths, interleaved ``alpha^sigma_1, chi^sigma_1, alpha^sigma_2, ...``
    theta_seq : k + 1 column norms ``||w_0||, ..., ||w_k||``

    Returns
    -------
    H : (k+1, k) ndarray with ``H[i, i] = theta_i / delta_i`` and
        ``H[i+1, i] = -theta_{i+1} / delta_i``
    rhs : ``theta_0 e_1``
    """
    delta = np.asarray(delta_seq, dtype=np.complex128)
    theta = np.asarray(theta_seq, dtype=float)
    k = delta.size
    if theta.size != k + 1:
        raise ValueError("theta_seq must have one more entry than delta_seq")
    if np.any(delta == 0):
        raise ZeroDivisionError("zero step length in delta_seq")
    H = np.zeros((k + 1, k), dtype=np.complex128)
    idx = np.arange(k)
    H[idx, idx] = theta[:-1] / delta
    H[idx + 1, idx] = -theta[1:] / delta
    rhs = np.zeros(k + 1, dtype=np.complex128)
    rhs[0] = theta[0]
    return H, rhs


def _prev_term(num, den):
    # coefficient num/den of the previous direction; 0/0 counts as 0
    if den == 0:
        if num == 0:
            return 0.0
        raise ShiftBreakdown("singular direction update")
    return num / den


@dataclass(eq=False)
class ShiftTrack:
    """Per-shift state of a shifted solve.

    ``x`` is the current iterate of this shift; for the quasi-minimal
    residual variant ``r_qmr`` is its recursively updated residual and
    ``x_tilde`` the iterate of the last first half-step.
    """

    sigma: complex
    n: int
    qmr: bool = False
    coll: CollinearityState = field(default_factory=CollinearityState)
    status: str = "running"
    iterations: int = 0
    matvecs: int = 0
    extra_matvecs: int = 0
    true_relres: Optional[float] = None
    min_abs_pi: float = np.inf
    history: ResidualHistory = field(default_factory=ResidualHistory)

    def __post_init__(self):
        z = lambda: np.zeros(self.n, dtype=np.complex128)
        self.x = z()
        self.u = z()
        self.v = z()
        self.s = z()
        self.r = None  # set by the driver to b
        self.alpha = 1.0 + 0j
        self.beta = 0.0 + 0j
        self.chi = 1.0 + 0j
        # quasi-minimisation
        self.tau = 0.0
        self.theta = 0.0
        self.eta = 0.0 + 0j
        self.theta_tilde = 0.0
        self.eta_tilde = 0.0 + 0j
        self.d = z()
        self.d_tilde = z()
        self.ad = z()
        self.ad_tilde = z()
        self.x_tilde = z()
        self.r_qmr = None
        self.r_qmr_tilde = None
        self._next_check = np.inf

    @property
    def running(self) -> bool:
        return self.status == "running"


@dataclass
class ShiftedSolveResult:
    method: str
    tracks: List[ShiftTrack]
    iterations: int
    seed_matvecs: int
    breakdown: Optional[BreakdownReport] = None

    @property
    def shifts(self):
        return [t.sigma for t in self.tracks]

    @property
    def solutions(self) -> List[np.ndarray]:
        return [t.x for t in self.tracks]

    @property
    def statuses(self) -> List[str]:
        return [t.status for t in self.tracks]

    @property
    def extra_matvecs(self) -> int:
        return sum(t.extra_matvecs for t in self.tracks)

    @property
    def converged(self) -> bool:
        return all(t.status == "converged" for t in self.tracks)


class _Solver:
    def __init__(self, family: ShiftFamily, tol, maxit, qmr, shadow, true_res_every, callback):
        if tol <= 0:
            raise ValueError("tol must be positive")
        self.family = family
        self.A = family.A
        self.b = family.b
        self.bnorm = norm2(self.b)
        self.tol = tol
        self.maxit = 10 * family.n if maxit is None else int(maxit)
        if self.maxit < 1:
            raise ValueError("maxit must be at least 1")
        self.qmr = qmr
        self.true_res_every = int(true_res_every)
        self.callback = callback
        self.seed = SeedBiCGStab(self.A, self.b, shadow)
        self.tracks = []
        for sigma in family.shifts:
            tr = ShiftTrack(sigma, family.n, qmr=qmr)
            tr.r = self.b.copy()
            tr.r_qmr = self.b.copy()
            tr.tau = self.bnorm
            tr.history.append(0, 1.0, 1.0 if self.true_res_every else None,
                              1.0 if qmr else None)
            self.tracks.append(tr)

    def true_relres(self, tr: ShiftTrack, x) -> float:
        tr.extra_matvecs += 1
        res = self.b - (np.asarray(self.A @ x) + tr.sigma * x)
        return norm2(res) / self.bnorm

    def finish(self, tr: ShiftTrack, status, x=None):
        if x is not None:
            tr.x = x
        tr.status = status
        tr.iterations = self.seed.m
        tr.matvecs = self.seed.matvecs if tr.matvecs == 0 else tr.matvecs

    def run(self) -> ShiftedSolveResult:
        method = "sqmrcgstab" if self.qmr else "shifted_bicgstab"
        if self.bnorm == 0:
            for tr in self.tracks:
                tr.status, tr.true_relres = "converged", 0.0
            return ShiftedSolveResult(method, self.tracks, 0, 0)
        report = None
        warned = False
        for _ in range(self.maxit):
            try:
                rec = self.seed.step()
            except SeedBreakdown as exc:
                report = exc.report
                for tr in self.tracks:
                    if tr.running:
                        self.finish(tr, "breakdown")
                break
            sample = self.true_res_every > 0 and rec.m % self.true_res_every == 0
            for tr in self.tracks:
                if not tr.running:
                    continue
                try:
                    if self.qmr:
                        self._advance_qmr(tr, rec, sample)
                    else:
                        self._advance_bicgstab(tr, rec, sample)
                except ShiftBreakdown:
                    self.finish(tr, "stalled")
            if self.callback is not None:
                self.callback(rec, self.tracks)
            if not any(tr.running for tr in self.tracks):
                break
            if not warned and norm2(rec.r) <= 1e-2 * self.tol * self.bnorm:
                warnings.warn("seed system converged before all shifts; continuing the seed "
                              "recurrences, shifted accuracy may degrade", RuntimeWarning, stacklevel=3)
                warned = True
        for tr in self.tracks:
            if tr.running:
                self.finish(tr, "maxit")
            if tr.true_relres is None:
                tr.true_relres = self.true_relres(tr, tr.x)
        return ShiftedSolveResult(method, self.tracks, self.seed.m, self.seed.matvecs, report)

    # ------------------------------------------------------------ common part
    def _shift_vectors(self, tr: ShiftTrack, rec: SeedIterationRecord):
        sc = shifted_scalars(tr.coll, tr.sigma, rec.alpha, rec.alpha_prev, rec.beta, rec.chi)
        u = tr.r + sc.beta * (tr.u - tr.chi * tr.v)
        s = sc.s_factor * rec.s
        # (A + sigma I) u^sigma without a product
        v = (tr.r - s) / sc.alpha
        r = sc.r_factor * rec.r
        return sc, u, s, v, r

    def _commit(self, tr, sc, u, s, v, r):
        tr.coll = sc.coll
        tr.alpha, tr.beta, tr.chi = sc.alpha, sc.beta, sc.chi
        tr.u, tr.s, tr.v, tr.r = u, s, v, r
        tr.min_abs_pi = min(tr.min_abs_pi, abs(sc.coll.pi))

    # --------------------------------------------------------------- BiCGstab
    def _advance_bicgstab(self, tr: ShiftTrack, rec, sample):
        sc, u, s, v, r = self._shift_vectors(tr, rec)
        m = rec.m
        x_half = tr.x + sc.alpha * u
        rel_s = norm2(s) / self.bnorm
        tr.history.append(2 * m - 1, rel_s, self.true_relres(tr, x_half) if sample else None)
        if rel_s <= self.tol:
            self._commit(tr, sc, u, s, v, r)
            tr.matvecs = 2 * m - 1
            self.finish(tr, "converged", x_half)
            return
        x = x_half + sc.chi * s
        rel_r = norm2(r) / self.bnorm
        tr.history.append(2 * m, rel_r, self.true_relres(tr, x) if sample else None)
        self._commit(tr, sc, u, s, v, r)
        tr.x = x
        if rel_r <= self.tol:
            tr.matvecs = 2 * m
            self.finish(tr, "converged")

    # -------------------------------------------------------------------- QMR
    def _confirm(self, tr, x, bound, matvecs):
        """Quasi-residual bound met: check the true residual once."""
        if bound > self.tol * self.bnorm or bound > tr._next_check:
            return False
        rel = self.true_relres(tr, x)
        if rel <= self.tol:
            tr.true_relres = rel
            tr.matvecs = matvecs
            return True
        tr._next_check = 0.5 * bound
        return False

    def _advance_qmr(self, tr: ShiftTrack, rec, sample):
        sc, u, s, v, r = self._shift_vectors(tr, rec)
        m = rec.m
        # first half-step over the direction u
        theta_t = norm2(s) / tr.tau
        zeta = 1.0 / math.sqrt(1.0 + theta_t ** 2)
        tau_t = tr.tau * theta_t * zeta
        eta_t = zeta ** 2 * sc.alpha
        c1 = _prev_term(tr.theta ** 2 * tr.eta, sc.alpha)
        d_t = u + c1 * tr.d
        ad_t = v + c1 * tr.ad
        x_t = tr.x + eta_t * d_t
        rq_t = tr.r_qmr - eta_t * ad_t
        bound = quasi_residual_bound(m - 0.5, tau_t)
        tr.history.append(2 * m - 1, norm2(rq_t) / self.bnorm,
                          self.true_relres(tr, x_t) if sample else None, bound / self.bnorm)
        tr.theta_tilde, tr.eta_tilde = theta_t, eta_t
        tr.d_tilde, tr.ad_tilde, tr.x_tilde, tr.r_qmr_tilde = d_t, ad_t, x_t, rq_t
        if tau_t == 0 or self._confirm(tr, x_t, bound, 2 * m - 1):
            self._commit(tr, sc, u, s, v, r)
            tr.tau = tau_t
            tr.r_qmr = rq_t
            if tr.matvecs == 0:
                tr.matvecs = 2 * m - 1
            self.finish(tr, "converged", x_t)
            return
        # second half-step over the half-step residual s
        theta = norm2(r) / tau_t
        zeta = 1.0 / math.sqrt(1.0 + theta ** 2)
        tau = tau_t * theta * zeta
        eta = zeta ** 2 * sc.chi
        c2 = _prev_term(theta_t ** 2 * eta_t, sc.chi)
        as_ = (s - r) / sc.chi if sc.chi != 0 else np.zeros_like(s)
        d = s + c2 * d_t
        ad = as_ + c2 * ad_t
        x = x_t + eta * d
        rq = rq_t - eta * ad
        bound = quasi_residual_bound(m, tau)
        tr.history.append(2 * m, norm2(rq) / self.bnorm,
                          self.true_relres(tr, x) if sample else None, bound / self.bnorm)
        self._commit(tr, sc, u, s, v, r)
        tr.theta, tr.eta, tr.tau = theta, eta, tau
        tr.d, tr.ad, tr.x, tr.r_qmr = d, ad, x, rq
        if tau == 0 or self._confirm(tr, x, bound, 2 * m):
            if tr.matvecs == 0:
                tr.matvecs = 2 * m
            self.finish(tr, "converged")


def shifted_bicgstab(family: ShiftFamily, tol: float = 1e-8, maxit: Optional[int] = None, *,
                     shadow=None, true_res_every: int = 0,
                     callback: Optional[Callable] = None) -> ShiftedSolveResult:
    """Solve every system of ``family`` with one seed BiCGstab run.

    Parameters
    ----------
    family : ShiftFamily
    tol : relative residual tolerance, tested on the recursive residual of
        each shift at both half-steps
    maxit : iteration limit (two products with ``A`` each), default ``10 n``
    shadow : shadow vector of the seed, default ``b``
    true_res_every : sample true residuals every that many iterations
        (0 disables); each sample costs one extra product per shift and is
        counted in ``ShiftTrack.extra_matvecs``
    callback : ``callback(seed_record, tracks)`` after every iteration

    Converged shifts freeze while the seed continues for the others.
    """
    return _Solver(family, tol, maxit, False, shadow, true_res_every, callback).run()


def sqmrcgstab(family: ShiftFamily, tol: float = 1e-8, maxit: Optional[int] = None, *,
               shadow=None, true_res_every: int = 0,
               callback: Optional[Callable] = None) -> ShiftedSolveResult:
    """Quasi-minimal residual variant of :func:`shifted_bicgstab`.

    A shift is declared converged once ``sqrt(2m+1) tau <= tol ||b||`` and
    one explicit true residual confirms it. Other arguments as for
    :func:`shifted_bicgstab`.
    """
    return _Solver(family, tol, maxit, True, shadow, true_res_every, callback).run()
