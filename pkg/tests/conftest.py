import numpy as np
import pytest

from gem.dataset import Dataset, Variable
from gem.oracle import Covariate, PlantedEffect, SynthSpec, plant_effects, rng


def synth(levels=(2, 3), reps=3, N=20, seed=0, effects=None, covariates=(), noise_sd=1.0, names=None):
    if effects is None:
        effects = [PlantedEffect("f1", 1.0, range(5))]
    spec = SynthSpec(levels=list(levels), reps=reps, n_responses=N, effects=effects,
                     covariates=list(covariates), noise_sd=noise_sd, seed=seed, factor_names=names)
    return plant_effects(spec)


def drop_rows(d: Dataset, rows) -> Dataset:
    keep = np.setdiff1d(np.arange(d.n), rows)
    return d.subset(keep)


@pytest.fixture
def two_factor():
    return synth(levels=(2, 3), reps=3, N=12, seed=1,
                 effects=[PlantedEffect("f1", 2.0, range(4)), PlantedEffect("f2", 1.0, range(2, 8))],
                 covariates=[Covariate("age", 20, 80)])


@pytest.fixture
def toy_dataset():
    """Four samples, one response, two groups: means 1 and 3."""
    return Dataset(
        Y=np.array([[1.0], [1.0], [3.0], [3.0]]),
        response_names=("y1",),
        sample_ids=("a", "b", "c", "d"),
        variables=(Variable.categorical("g", ["x", "x", "y", "y"]),),
    )


@pytest.fixture
def gen():
    return rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
