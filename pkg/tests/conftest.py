import numpy as np
import pytest

from plumegame.domain import ScenarioConfig, validate_scenario
from plumegame.engine import ForecastModels
from plumegame.forecasting.mlp import make_training_samples, train_mlp
from plumegame.forecasting.rbf import train_all_rbf
from plumegame.forecasting.synth import synthesize_dataset


@pytest.fixture(scope="session")
def small_dataset():
    """Short synthetic series; enough for model fitting in unit tests."""
    return synthesize_dataset(length=3000, seed=7)


@pytest.fixture(scope="session")
def small_models(small_dataset):
    """Cheap but functional model set shared by engine and CLI tests."""
    rbf = train_all_rbf(small_dataset, max_centers=12)
    samples, labels = make_training_samples(2500, seed=1)
    mlp = train_mlp(samples, labels, seed=1)
    return ForecastModels(rbf=rbf, mlp=mlp)


@pytest.fixture(scope="session")
def small_config():
    """Scaled-down scenario: quick to run, same machinery."""
    return validate_scenario({
        "num_pm10_sources": 20,
        "num_sox_sources": 20,
        "num_nox_sources": 20,
        "num_co_sources": 20,
        "num_boxes": 8,
        "total_hours": 300.0,
        "seed": 5,
    })


@pytest.fixture(scope="session")
def models_dir(tmp_path_factory, small_models):
    directory = tmp_path_factory.mktemp("models")
    small_models.save(directory)
    return directory


@pytest.fixture(scope="session")
def dataset_csv(tmp_path_factory, small_dataset):
    from plumegame.forecasting.preprocess import write_dataset_csv

    path = tmp_path_factory.mktemp("data") / "dataset.csv"
    write_dataset_csv(path, small_dataset)
    return path
