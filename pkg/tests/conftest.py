import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rashomon_audit.data import Dataset
from rashomon_audit.learner import Hyperparameters, TrainedModel, Tree
from rashomon_audit.rashomon import ModelPool

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def make_dataset(n_major=100, n_minor=20, p=3, seed=0, name="toy", shift=1.5):
    """Gaussian blobs; the minority blob is shifted by ``shift`` in every column."""
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(size=(n_major, p)), rng.normal(loc=shift, size=(n_minor, p))])
    y = np.r_[np.zeros(n_major, dtype=int), np.ones(n_minor, dtype=int)]
    return Dataset(name, X, y, tuple(f"x{j}" for j in range(p)))


def leaf_tree(fraction):
    return Tree(
        np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([float(fraction)])
    )


def stump(feature, threshold, left_value, right_value):
    return Tree(
        np.array([feature, -1, -1]),
        np.array([threshold, 0.0, 0.0]),
        np.array([1, -1, -1]),
        np.array([2, -1, -1]),
        np.array([0.5, left_value, right_value]),
    )


def model(trees, n_features, model_id=0, loss=None):
    if not isinstance(trees, (list, tuple)):
        trees = [trees]
    return TrainedModel(model_id, Hyperparameters(), tuple(trees), n_features, holdout_loss=loss)


def pool_with_losses(losses, n_features=2):
    models = tuple(model(leaf_tree(0.5), n_features, i, l) for i, l in enumerate(losses))
    return ModelPool(models, None, len(models))


@pytest.fixture
def toy():
    return make_dataset()


# acceptance criteria report one line each; collected here and echoed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
