from __future__ import annotations

import pytest

from psrkit.formats import load_builtin_procedure


@pytest.fixture(scope="session")
def car_spec():
    return load_builtin_procedure("industreal_car_assembly")


@pytest.fixture(scope="session")
def maintenance_spec():
    return load_builtin_procedure("industreal_car_maintenance")
