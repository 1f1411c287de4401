import pytest

from livehost.backends import StubBackend
from livehost.catalogue import load_default_catalogue
from livehost.config import default_config
from livehost.dialogue import ClaimLexicons
from livehost.pipeline import PipelineSettings


@pytest.fixture(scope="session")
def catalogue():
    return load_default_catalogue()


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def settings(cfg):
    return PipelineSettings.from_config(cfg)


@pytest.fixture(scope="session")
def lexicons(cfg):
    return ClaimLexicons.from_config(cfg)


@pytest.fixture()
def stub_backend(cfg):
    return StubBackend(cfg, seed=0)
