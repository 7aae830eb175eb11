from typing import List

import pytest

from hiring_simulator.distributions import (
    Distribution,
    Empirical,
    Exponential,
    Pareto,
    Uniform01,
)
from hiring_simulator.models import TIER_ORDER


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--tier",
        default="standard",
        choices=list(TIER_ORDER),
        help="Largest test tier to run: smoke, standard or full",
    )


def pytest_collection_modifyitems(config: pytest.Config, items: List[pytest.Item]) -> None:
    selected = TIER_ORDER[config.getoption("--tier")]
    for item in items:
        marker = item.get_closest_marker("tier")
        if marker is None:
            continue
        needed = marker.args[0]
        if TIER_ORDER[needed] > selected:
            item.add_marker(pytest.mark.skip(reason=f"needs --tier {needed}"))


@pytest.fixture
def tier(request: pytest.FixtureRequest) -> str:
    return request.config.getoption("--tier")


@pytest.fixture
def uniform() -> Uniform01:
    return Uniform01()


@pytest.fixture
def exponential() -> Exponential:
    return Exponential(1.0)


@pytest.fixture
def pareto() -> Pareto:
    return Pareto(3.0, 1.0)


@pytest.fixture
def empirical() -> Empirical:
    return Empirical([0.05, 0.1, 0.2, 0.35, 0.5, 0.6, 0.8, 0.95])


@pytest.fixture
def all_laws(
    uniform: Uniform01, exponential: Exponential, pareto: Pareto, empirical: Empirical
) -> List[Distribution]:
    return [uniform, exponential, pareto, empirical]
