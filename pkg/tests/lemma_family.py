"""Seeded family of bounded sequences with known atoms, and test fields
with known Lipschitz constants, for the J cross-check."""

import numpy as np

N_SEQUENCES = 100
SEED = 20240917


def phi_functions():
    """(name, phi, Lipschitz constant) acting on (n, m) arrays."""
    return [
        ("first_coordinate", lambda X: X[:, 0], 1.0),
        ("norm", lambda X: np.linalg.norm(X, axis=1), 1.0),
        ("sine", lambda X: np.sin(3.0 * X[:, 0]), 3.0),
        ("tent", lambda X: 1.0 - np.abs(X[:, -1] - 0.3), 1.0),
        ("coordinate_sum", lambda X: X.sum(axis=1) / 2.0, np.sqrt(X_DIM_MAX) / 2.0),
    ]


X_DIM_MAX = 2


def make_sequence(rng, horizon=4000):
    """Atoms with weights >= 0.1, small noise and sparse outliers."""
    m = int(rng.integers(1, X_DIM_MAX + 1))
    k = int(rng.integers(1, 5))
    while True:
        atoms = rng.uniform(0.0, 1.0, size=(k, m))
        if k == 1 or min(
            np.linalg.norm(atoms[i] - atoms[j]) for i in range(k) for j in range(i + 1, k)
        ) >= 0.1:
            break
    weights = 0.1 + rng.dirichlet(np.ones(k)) * (1.0 - 0.1 * k)
    labels = rng.choice(k, size=horizon, p=weights / weights.sum())
    noise = rng.uniform(-1.0, 1.0, size=(horizon, m)) * 0.002 / np.sqrt(m)
    X = atoms[labels] + noise
    n = np.arange(1, horizon + 1)
    r = np.floor(np.sqrt(n)).astype(int)
    spikes = r * r == n
    X[spikes] = rng.uniform(0.0, 1.0, size=(int(spikes.sum()), m))
    return np.clip(X, -0.01, 1.01), atoms, weights


def family(seed=SEED, count=N_SEQUENCES):
    rng = np.random.default_rng(seed)
    return [make_sequence(rng) for _ in range(count)]
