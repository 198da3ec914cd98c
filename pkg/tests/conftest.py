import pytest

from lpa.experiments import EXPERIMENT_CONFIG
from lpa.fixtures import books_corpus, reviews_corpus
from lpa.ingest import build_counts
from lpa.vectorspace import build_dvr, build_pvrs, default_epsilon


@pytest.fixture(scope="session")
def reviews():
    return reviews_corpus(150)


@pytest.fixture(scope="session")
def books():
    return books_corpus()


@pytest.fixture(scope="session")
def small_domain():
    """40 review users: counts, DVR, PVRs and epsilon."""
    table = build_counts(reviews_corpus(40, reviews=(30, 45), seed=5), EXPERIMENT_CONFIG)
    return table, build_dvr(table), build_pvrs(table), default_epsilon(table)
