from __future__ import annotations

import pytest

from _datasets import iris_table, wine_table


@pytest.fixture(scope="session")
def iris():
    return iris_table()


@pytest.fixture(scope="session")
def wine():
    return wine_table()
