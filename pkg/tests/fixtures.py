"""Hand-computed metric fixtures shared by the unit and acceptance suites.

Each fixture is ``(preds, truths, expected)`` with ``expected`` worked out by
hand. Horizons are given in steps at 10 Hz, so step k is (k + 1) / 10 s.
"""

import math

import numpy as np


def perfect():
    truths = np.arange(2 * 3 * 2, dtype=float).reshape(2, 3, 2)
    return truths.copy(), truths, {"ade": 0.0, "fde": 0.0, "mr": 0.0, "rmse": {0.1: 0.0, 0.3: 0.0}}


def single_miss():
    # one sample, one step, error (3, 4): distance 5 > 2 m
    preds = np.array([[[3.0, 4.0]]])
    truths = np.zeros((1, 1, 2))
    return preds, truths, {"ade": 5.0, "fde": 5.0, "mr": 1.0, "rmse": {0.1: 5.0}}


def three_samples():
    # final-step errors 1.5, 2.5, 5.0 along x; first-step errors 0, 1, 2 along y
    preds = np.array([
        [[0.0, 0.0], [1.5, 0.0]],
        [[0.0, 1.0], [2.5, 0.0]],
        [[0.0, 2.0], [3.0, 4.0]],
    ])
    truths = np.zeros((3, 2, 2))
    expected = {
        "ade": (0.0 + 1.5 + 1.0 + 2.5 + 2.0 + 5.0) / 6,
        "fde": (1.5 + 2.5 + 5.0) / 3,
        "mr": 2 / 3,
        "rmse": {0.1: math.sqrt((0 + 1 + 4) / 3), 0.2: math.sqrt((2.25 + 6.25 + 25.0) / 3)},
    }
    return preds, truths, expected


FIXTURES = {"perfect": perfect, "single_miss": single_miss, "three_samples": three_samples}
