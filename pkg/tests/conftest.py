import pathlib

import pytest

from setexpand import load_taxonomy

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def t0():
    return load_taxonomy(DATA / "t0.tsv")


@pytest.fixture(scope="session")
def t1():
    return load_taxonomy(DATA / "t1.tsv")


@pytest.fixture(scope="session")
def data_dir():
    return DATA
