import numpy as np
import pytest

from hmmtts.corpus import load_manifest
from hmmtts.pipeline import prepare_items, train_models
from hmmtts.toy import write_toy_corpus


@pytest.fixture(scope="session")
def toy_manifest(tmp_path_factory):
    return write_toy_corpus(tmp_path_factory.mktemp("toy"), seed=0)


@pytest.fixture(scope="session")
def toy_items(toy_manifest):
    return prepare_items(load_manifest(toy_manifest))


@pytest.fixture(scope="session")
def toy_trained(toy_items):
    return train_models(toy_items, n_iterations=20)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    if config._acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config._acceptance_lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
