import numpy as np
import pytest

from mfsemigroup.rational import MultiMap, Polynomial, RationalMap, rmap_compose


def power_map(d: int) -> RationalMap:
    coeffs = [0.0] * d + [1.0]
    return RationalMap(Polynomial(coeffs), Polynomial([1.0]))


@pytest.fixture(scope="session")
def power_pair() -> MultiMap:
    """z^2 and z^3."""
    return MultiMap((power_map(2), power_map(3)))


@pytest.fixture(scope="session")
def golden_pair() -> MultiMap:
    """z^2 and z^4."""
    return MultiMap((power_map(2), power_map(4)))


@pytest.fixture(scope="session")
def single_square() -> MultiMap:
    return MultiMap((power_map(2),))


@pytest.fixture(scope="session")
def coliseum_pair() -> MultiMap:
    """The composed quartic z^4 - 2z^2 together with z^4/64."""
    g = RationalMap(Polynomial([-1.0, 0.0, 1.0]), Polynomial([1.0]))
    f1 = rmap_compose(g, g)
    f2 = RationalMap(Polynomial([0.0, 0.0, 0.0, 0.0, 1.0 / 64.0]), Polynomial([1.0]))
    return MultiMap((f1, f2))


GOLDEN_P1 = (np.sqrt(5.0) - 1.0) / 2.0
