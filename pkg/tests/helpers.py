"""Shared test data."""
from fractions import Fraction

from hypocert.kalman import SystemSpec
from hypocert.zoo import ZOO, zoo_file

ZOO_NAMES = list(ZOO)


def spec(name: str, **params) -> SystemSpec:
    return zoo_file(name).to_spec({k: str(v) for k, v in params.items()})


# Kalman rank of order 2 drops exactly at xi = +-1 (found by search, checked with sympy).
EXCEPTIONAL = SystemSpec.from_rows(
    [[1, 1, -1], [1, 1, 0], [-1, 0, 1]],
    [[0, -1, -1], [1, 0, 1], [1, -1, 0]],
    [[1, 0, 0], [0, 0, 0], [0, 0, 0]], "exceptional")

F = Fraction
