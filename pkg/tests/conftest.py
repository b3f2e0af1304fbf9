import functools

import pytest

from morseflow.braid import load_braid
from morseflow.cli import FIXTURES, fixture_path
from morseflow.pipeline import analyze


@functools.lru_cache(maxsize=None)
def fixture_braid(name):
    return load_braid(fixture_path(name))


@functools.lru_cache(maxsize=None)
def fixture_result(name):
    return analyze(fixture_braid(name))


@pytest.fixture(scope="session")
def example_a():
    return fixture_result("exampleA")


@pytest.fixture(scope="session")
def results():
    return fixture_result


@pytest.fixture(params=[f for f in FIXTURES if f != "pseudo_anosov"])
def small_fixture(request):
    return request.param


@pytest.fixture(params=FIXTURES)
def any_fixture(request):
    return request.param
