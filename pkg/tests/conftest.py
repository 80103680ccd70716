import os

import pytest

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def fixture_path(*parts):
    return os.path.join(FIXTURES, *parts)
