import numpy as np


def dense_laplacian(n1, n2):
    """Kronecker-sum assembly of the 2D Dirichlet Laplacian (test oracle)."""
    L1 = 2 * np.eye(n1) - np.eye(n1, k=1) - np.eye(n1, k=-1)
    L2 = 2 * np.eye(n2) - np.eye(n2, k=1) - np.eye(n2, k=-1)
    return np.kron(np.eye(n2), L1) + np.kron(L2, np.eye(n1))


FUNCTIONS = {
    "exp_neg": lambda x: np.exp(-x),
    "sqrt": np.sqrt,
    "log": np.log,
    "tanh_sqrt": lambda x: np.tanh(np.sqrt(x)),
}


def random_spd(dim, rng, shift=0.5):
    X = rng.standard_normal((dim, dim))
    return X @ X.T / dim + shift * np.eye(dim)
