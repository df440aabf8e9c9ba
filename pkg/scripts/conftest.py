"""Shared scenarios for the debond test suite"""
import json

import numpy as np
import pytest

from debond.func1d import SampledFunction
from debond.model import ControlSignal, InitialState, Regularity, TargetState, Toughness


@pytest.fixture
def kappa_one():
    return Toughness.constant(1.0)


@pytest.fixture
def at_rest():
    """Zero data on [0, ell0]."""
    def make(ell0=1.0, regularity=Regularity.C01):
        return InitialState.at_rest(ell0, regularity)
    return make


@pytest.fixture
def resting_target():
    def make(ellbar0=2.0, regularity=Regularity.C01):
        return TargetState.at_rest(ellbar0, regularity)
    return make


@pytest.fixture
def constant_speed():
    """
    ell0 = 1, y0 = 0, y1 = 2, u = 0, kappa = 0.5.

    The front runs at 0.6 until t = 5 and stops at 4.
    """
    initial = InitialState(
        1.0,
        SampledFunction.constant(0.0, 0.0, 1.0),
        SampledFunction.constant(2.0, 0.0, 1.0),
    )
    return initial, ControlSignal.hold(0.0, 6.0), Toughness.constant(0.5)


@pytest.fixture
def write_scenario(tmp_path):
    """Dump a scenario dict to JSON and return its path."""
    def write(doc, name="scenario.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path
    return write


@pytest.fixture
def zero_scenario():
    def make(ell0=1.0, ellbar0=1.0, T=3.0, regularity="C01", h=1e-3):
        zero = {"preset": "constant", "c": 0.0}
        return {
            "T": T,
            "regularity": regularity,
            "toughness": {"value": 1.0},
            "initial": {"ell0": ell0, "y0": zero, "y1": zero},
            "target": {"ellbar0": ellbar0, "ybar0": zero, "ybar1": zero},
            "control": zero,
            "solver": {"h": h},
        }
    return make


def read_csv_columns(path):
    """Header and float columns of a CSV written by the CLI."""
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return header, data


def read_keyvalue(path):
    out = {}
    for line in path.read_text().splitlines():
        key, _, value = line.partition("=")
        out[key] = value
    return out
