import numpy as np
import pytest

from shiftkrylov.sparsela import SparseComplexMatrix, random_sparse


def random_complex(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def positive_real_matrix(n, rng, density=0.3, margin=0.3):
    """Sparse complex matrix whose Hermitian part is positive definite."""
    A = random_sparse(n, density, rng)
    dense = A.toarray()
    lam_min = np.linalg.eigvalsh(0.5 * (dense + dense.conj().T)).min()
    shift = max(0.0, -lam_min) + margin
    return SparseComplexMatrix.from_dense(dense + shift * np.eye(n))


def spd_matrix(n, rng, lo=1.0, hi=2.0):
    """Real symmetric matrix with spectrum in ``[lo, hi]`` (complex dtype)."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.linspace(lo, hi, n)
    return (q * lam) @ q.T + 0j


class CountingOperator:
    """Wraps an operator and counts products with it."""

    def __init__(self, A):
        self.A = A
        self.shape = A.shape
        self.count = 0

    def __matmul__(self, v):
        self.count += 1
        return self.A @ v


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_bipartite(n, rng, density=0.3):
    """Random complex ``D`` coupling only indices of opposite parity.

    Returns ``(D, parity)``; the parity labels are a random 0/1 split.
    """
    parity = rng.permutation(np.arange(n) % 2)
    mask = (rng.random((n, n)) < density) & (parity[:, None] != parity[None, :])
    vals = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return SparseComplexMatrix.from_dense(np.where(mask, vals, 0)), parity


# ------------------------------------------------------------ acceptance report

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        detail = dict(rep.user_properties).get("detail", "")
        if rep.skipped and isinstance(rep.longrepr, tuple):
            detail = rep.longrepr[2].removeprefix("Skipped: ")
        _CRITERIA[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        line = f"criterion {number}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
