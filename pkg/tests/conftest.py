import hypothesis
import pytest

from benchplan.fitting import FitConfig, fit_pipeline
from benchplan.taskgen import generate_dataset

hypothesis.settings.register_profile("suite", max_examples=50, deadline=None)
hypothesis.settings.load_profile("suite")


@pytest.fixture(scope="session")
def level1_run():
    """Small noiseless level-1 dataset plus fitted pipeline, shared across tests."""
    dataset = generate_dataset(1, (200, 20, 40), seed=7)
    fitted = fit_pipeline(dataset, FitConfig(noise_sigma=0.0))
    return dataset, fitted


@pytest.fixture(scope="session")
def level3_run():
    """Small noiseless level-3 dataset plus fitted pipeline (dyer + obstacles)."""
    dataset = generate_dataset(3, (300, 20, 50), seed=7)
    fitted = fit_pipeline(dataset, FitConfig(noise_sigma=0.0))
    return dataset, fitted


@pytest.fixture(scope="session")
def level4_run():
    """Small noiseless level-4 dataset plus fitted pipeline (rotations involved)."""
    dataset = generate_dataset(4, (300, 20, 50), seed=7)
    fitted = fit_pipeline(dataset, FitConfig(noise_sigma=0.0))
    return dataset, fitted
