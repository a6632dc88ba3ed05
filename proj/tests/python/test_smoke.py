import math

import numpy as np
import pytest

import carnot


def test_heisenberg_group_law():
    z = carnot.compose("heisenberg1", [1, 0, 0], [0, 1, 0])
    assert np.allclose(z, [1, 1, 0.5])
    assert np.allclose(carnot.dilate("heisenberg1", 2.0, [1, 1, 1]), [2, 2, 4])


def test_euclidean_distance():
    d = carnot.cc_distance("euclidean2", [0, 0], [3, 4])
    assert abs(d["value"] - 5.0) < 1e-4


def test_horizontal_segment():
    d = carnot.cc_distance("heisenberg1", [0, 0, 0], [1, 0, 0], restarts=2)
    assert abs(d["value"] - 1.0) < 1e-4
    assert d["endpoint_residual"] < 1e-8


def test_heat_kernels():
    v, err = carnot.heat_kernel("euclidean1", [0.0], 1.0)
    assert v == pytest.approx(1 / math.sqrt(4 * math.pi), rel=1e-14)
    v, err = carnot.heat_kernel("heisenberg1", [0, 0, 0.5], 1.0)
    assert v > 0 and err < 1e-3 * v


def test_constant_coefficients_have_no_correction():
    r = carnot.fundamental_solution({"group": "euclidean1", "A": 2.0}, [0.3], 1.0, [0.0], 0.0)
    assert r["J"] == 0.0
    assert r["Gamma"] == pytest.approx(math.exp(-0.09 / 8) / math.sqrt(8 * math.pi), rel=1e-12)


def test_mean_value_with_python_solution():
    rep = carnot.mean_value({"group": "euclidean1", "A": 1.0}, lambda x, t: 1.0 + x[0], [0.3], r=0.5)
    assert rep["residual"] <= 3 * rep["sigma"] + rep["membership_error"]
    assert rep["members"] > 0


def test_bad_input_raises():
    with pytest.raises(carnot.DomainError):
        carnot.mean_value({"group": "euclidean1", "A": 1.0}, lambda x, t: 1.0, [0.0], m=2)
    with pytest.raises(ValueError):
        carnot.compose("nosuchgroup", [0], [0])


def test_chain_count():
    ch = carnot.harnack_chain("euclidean1", ([0.0], -0.3), ([0.3], -0.7))
    assert ch["m"] == max(1, math.ceil(ch["m_primam"]), math.ceil(ch["m_time"]))
    assert len(ch["t"]) == ch["m"] + 1


def test_acceptance_subset():
    rows = carnot.acceptance([8])
    assert len(rows) == 1 and rows[0]["pass"]
