"""Small dense reference implementations used to check the production solvers.

Nothing here imports from the solver modules. Sizes are capped, these exist
for correctness checks only.
"""
import numpy as np

MAX_N = 256
MAX_STEPS = 32


class SingularMatrixError(np.linalg.LinAlgError):
    pass


def _dense(a):
    if hasattr(a, "toarray"):
        a = a.toarray()
    return np.array(a, dtype=np.complex128)


def dense_matvec(a, x):
    """Row-by-row product with an explicit loop."""
    a = _dense(a)
    x = np.asarray(x, dtype=np.complex128)
    if a.shape[1] != x.shape[0]:
        raise ValueError("dimension mismatch")
    y = np.zeros(a.shape[0], dtype=np.complex128)
    for i in range(a.shape[0]):
        acc = 0j
        for j in range(a.shape[1]):
            acc += a[i, j] * x[j]
        y[i] = acc
    return y


def naive_dot(u, v):
    acc = 0j
    for ui, vi in zip(u, v):
        acc += complex(ui).conjugate() * complex(vi)
    return acc


def dense_solve(a, b):
    """Gaussian elimination with partial pivoting.

    Raises :class:`SingularMatrixError` when a pivot falls below
    ``1e-13 * max|a_ij|``.
    """
    a = _dense(a)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n > MAX_N:
        raise ValueError(f"oracle limited to n <= {MAX_N}")
    x = np.array(b, dtype=np.complex128)
    scale = np.abs(a).max()
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if np.abs(a[p, k]) <= 1e-13 * scale:
            raise SingularMatrixError(f"pivot {k} is numerically zero")
        if p != k:
            a[[k, p]] = a[[p, k]]
            x[[k, p]] = x[[p, k]]
        f = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(f, a[k, k:])
        x[k + 1:] -= f * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def dense_lstsq(h, rhs):
    """Least-squares minimiser of ``||rhs - h z||`` via Householder QR.

    ``h`` must be tall with full column rank.
    """
    h = _dense(h)
    rhs = np.array(rhs, dtype=np.complex128)
    m, k = h.shape
    if m < k:
        raise ValueError("h must have at least as many rows as columns")
    r = h.copy()
    y = rhs.copy()
    for j in range(k):
        col = r[j:, j]
        alpha = np.linalg.norm(col)
        if alpha == 0:
            raise SingularMatrixError("rank-deficient least-squares matrix")
        phase = col[0] / abs(col[0]) if col[0] != 0 else 1.0
        v = col.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        r[j:, j:] -= 2.0 * np.outer(v, v.conj() @ r[j:, j:])
        y[j:] -= 2.0 * v * (v.conj() @ y[j:])
    diag = np.abs(np.diag(r[:k, :k]))
    if diag.min() <= 1e-13 * max(diag.max(), 1e-300):
        raise SingularMatrixError("rank-deficient least-squares matrix")
    z = np.zeros(k, dtype=np.complex128)
    for i in range(k - 1, -1, -1):
        z[i] = (y[i] - r[i, i + 1:k] @ z[i + 1:]) / r[i, i]
    return z


def residual_polynomial_eval(alpha_seq, beta_seq, t):
    """Evaluate the BiCG residual polynomial ``p_m(t)``.

    ``alpha_seq[j]`` and ``beta_seq[j]`` are the BiCG step lengths in
    zero-based BiCG numbering: ``r_{j+1} = r_j - alpha_j A u_j`` and
    ``u_{j+1} = r_{j+1} + beta_j u_j``. With ``m = len(alpha_seq)`` the
    three-term recurrence

        p_{j+1}(t) = (1 + (beta_{j-1}/alpha_{j-1}) alpha_j - alpha_j t) p_j(t)
                     - (beta_{j-1}/alpha_{j-1}) alpha_j p_{j-1}(t)

    is run from ``p_0 = 1`` (the beta term is absent for ``j = 0``).
    ``beta_seq`` needs at least ``m - 1`` entries.
    """
    p_prev, p = 1.0 + 0j, 1.0 + 0j
    for j, a in enumerate(alpha_seq):
        g = beta_seq[j - 1] / alpha_seq[j - 1] * a if j > 0 else 0.0
        p_prev, p = p, (1.0 + g - a * t) * p - g * p_prev
    return p


def reference_bicgstab(a, b, shadow=None, iterations=10):
    """Straight-line dense BiCGstab; returns per-iteration scalars and iterates.

    Each entry of the returned list is a dict with keys ``rho, beta, alpha,
    chi, x, r, s``. Iteration numbering starts at 1.
    """
    a = _dense(a)
    b = np.asarray(b, dtype=np.complex128)
    rt = b.copy() if shadow is None else np.asarray(shadow, dtype=np.complex128)
    x = np.zeros_like(b)
    r = b.copy()
    u = np.zeros_like(b)
    v = np.zeros_like(b)
    rho_old = alpha_old = chi_old = 1.0
    out = []
    for _ in range(iterations):
        rho = np.vdot(rt, r)
        beta = rho * alpha_old / (rho_old * chi_old)
        u = r + beta * (u - chi_old * v)
        v = a @ u
        alpha = rho / np.vdot(rt, v)
        s = r - alpha * v
        t = a @ s
        chi = np.vdot(t, s) / np.vdot(t, t)
        x = x + alpha * u + chi * s
        r = s - chi * t
        out.append(dict(rho=rho, beta=beta, alpha=alpha, chi=chi, x=x.copy(), r=r.copy(), s=s.copy()))
        rho_old, alpha_old, chi_old = rho, alpha, chi
    return out


def reference_shifted_family(a, b, sigma, shadow=None, iterations=10):
    """Shifted residual scale factors ``rho_sigma / pi`` from a dense seed run.

    The seed coefficients come from :func:`reference_bicgstab`; ``pi`` is
    the residual polynomial at ``-sigma`` and ``rho_sigma`` the product of
    ``1 / (1 + sigma chi_i)``. Returns ``(records, factors)``, one factor
    per iteration.
    """
    recs = reference_bicgstab(a, b, shadow, iterations)
    alphas = [rec["alpha"] for rec in recs]
    betas = [rec["beta"] for rec in recs[1:]]
    factors = []
    mr = 1.0 + 0j
    for m, rec in enumerate(recs, start=1):
        pi = residual_polynomial_eval(alphas[:m], betas, -sigma)
        mr = mr / (1.0 + sigma * rec["chi"])
        factors.append(mr / pi)
    return recs, factors
