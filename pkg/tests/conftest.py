import sys
from pathlib import Path

import numpy as np
import pytest

from shift.catalog import Catalog
from shift.engine import Engine
from shift.synthetic import benchmark_catalog, seed_catalog

CORPUS = Path(__file__).parent / "corpus"


def corpus(name: str) -> str:
    return (CORPUS / f"{name}.sql").read_text()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def catalog(tmp_path):
    cat = Catalog(tmp_path / "catalog")
    yield cat
    cat.close()


@pytest.fixture
def seeded(catalog):
    seed_catalog(catalog, M=4, n_train=400, n_test=100, seed=0)
    return catalog


@pytest.fixture
def engine(seeded):
    return Engine(seeded)


@pytest.fixture
def bench_catalog(catalog):
    info = benchmark_catalog(catalog, n_datasets=4, M=5, seed=0)
    return catalog, info


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        terminalreporter.write_line(verdicts[n])
