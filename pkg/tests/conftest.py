import numpy as np
import pytest

from fastborn.born_inversion import eta_projection
from fastborn.linalg import truncated_pinv
from fastborn.radial_model import ModelParams, assemble_model, forward_exact, ground_truth


@pytest.fixture(scope="session")
def disk_params():
    return ModelParams()


@pytest.fixture(scope="session")
def disk_model(disk_params):
    return assemble_model(disk_params)


@pytest.fixture(scope="session")
def disk_pinv(disk_model):
    return truncated_pinv(disk_model.k1_matrix, rank=23)


@pytest.fixture(scope="session")
def disk_phi(disk_params):
    return forward_exact(disk_params).values


@pytest.fixture(scope="session")
def disk_eta_proj(disk_model, disk_pinv, disk_params):
    return eta_projection(disk_pinv, disk_model, ground_truth(disk_params, disk_model.grid).values)


@pytest.fixture
def small_params():
    return ModelParams(modes=6, grid_n=8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
