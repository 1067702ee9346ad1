import numpy as np
import pytest

from spgrowth import likelihood as lk
from spgrowth import weights as wm

# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


def random_design(n=50, p=1, seed=0, rho=0.4, delta=0.6, durbin=True):
    """Small endogenous-W design drawn from the model itself."""
    rng = np.random.default_rng(seed)
    lat = rng.uniform(-60, 60, n)
    lon = rng.uniform(-180, 180, n)
    x = rng.standard_normal((n, 2))
    X2 = np.column_stack([np.ones(n), x[:, 0]])
    Gamma = np.vstack([np.full(p, 10.0), np.linspace(1.0, 0.5, p)])
    A = rng.standard_normal((p, p)) * 0.3 + np.eye(p)
    Sigma = A @ A.T
    eps = rng.standard_normal((n, p)) @ np.linalg.cholesky(Sigma).T
    Z = X2 @ Gamma + eps
    W = wm.build_weights(lat, lon, Z[:, 0], economic="neg_exponential").entries
    X1 = np.column_stack([np.ones(n), x] + ([W @ x] if durbin else []))
    beta = np.array([1.0, 1.0, -1.0, 0.5, -0.5][: X1.shape[1]])
    dl = np.full(p, delta)
    Y = np.linalg.solve(np.eye(n) - rho * W, X1 @ beta + eps @ dl + 0.5 * rng.standard_normal(n))
    names = ("const", "x1", "x2", "W_x1", "W_x2")[: X1.shape[1]]
    d = lk.Design(Y, X1, Z, X2, W, names, ("const", "x1"), tuple(f"z{j}" for j in range(p)))
    truth = lk.ParamVector(rho, beta, Gamma, 0.25, Sigma, dl)
    return d, truth


@pytest.fixture
def design():
    return random_design()[0]


@pytest.fixture
def design_truth():
    return random_design()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
