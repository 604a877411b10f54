import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_factors(rng, m, n, k, scale=1.0):
    from fancl.linalg import LowRankFactors, qr_orthonormalize

    U = qr_orthonormalize(rng.standard_normal((m, k)))
    V = qr_orthonormalize(rng.standard_normal((n, k)))
    d = np.sort(rng.uniform(0.5, 3.0, size=k) * scale)[::-1]
    return LowRankFactors(U, d, V)


def random_sparse(rng, m, n, nnz):
    from fancl.linalg import SparseCoo

    flat = rng.choice(m * n, size=nnz, replace=False)
    rows, cols = np.divmod(flat, n)
    return SparseCoo.from_triplets(rows, cols, rng.standard_normal(nnz), (m, n))


# one line per acceptance criterion, shown at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
