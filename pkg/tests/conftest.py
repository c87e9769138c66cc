import numpy as np
import pytest

from hysi.lasso import Dataset


def make_dataset(rng, n=50, p=10, beta=None, theta=0.0, normalize=True,
                 noise=1.0):
    """Random regression instance in the default simulation shape."""
    design = rng.standard_normal((n, p + 1))
    if normalize:
        design = design - design.mean(axis=0)
        design = design / np.linalg.norm(design, axis=0)
    if beta is None:
        beta = np.zeros(p)
        if p >= 2:
            beta[0], beta[1] = -4.0, 4.0
    y = theta * design[:, 0] + design[:, 1:] @ beta
    if noise:
        y = y + noise * rng.standard_normal(n)
    return Dataset(y=y, z=design[:, 0], controls=design[:, 1:])


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
