"""Heat operators on Carnot groups.

Groups are registry names ("euclidean2", "heisenberg1", ...) or dicts in the
group JSON format; operators are dicts in the operator JSON format.
"""

import json

import numpy as np

from . import _carnot
from ._carnot import DomainError, NumericalError, table_directory

__all__ = [
    "DomainError",
    "NumericalError",
    "acceptance",
    "cc_distance",
    "compose",
    "dilate",
    "fundamental_solution",
    "gauge",
    "harnack_chain",
    "heat_kernel",
    "mean_value",
    "table_directory",
]


def _group(g):
    return g if isinstance(g, str) else json.dumps(g)


def _operator(op):
    return op if isinstance(op, str) else json.dumps(op)


def _vec(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def compose(group, x, y):
    return _carnot.compose(_group(group), _vec(x), _vec(y))


def dilate(group, r, x):
    return _carnot.dilate(_group(group), float(r), _vec(x))


def gauge(group, x):
    return _carnot.gauge(_group(group), _vec(x))


def cc_distance(group, x, y, p="2", restarts=8, seed=0):
    return _carnot.cc_distance(_group(group), _vec(x), _vec(y), str(p), restarts, seed)


def heat_kernel(group, x, t):
    """Returns (value, error bar)."""
    return _carnot.heat_kernel(_group(group), _vec(x), float(t))


def fundamental_solution(operator, x, t, xi, tau, order=3):
    return _carnot.fundamental_solution(_operator(operator), _vec(x), float(t), _vec(xi), float(tau), order)


def mean_value(operator, u, xi, tau=0.0, r=0.5, f=None, m=4, samples=20000, seed=1, unbounded=False):
    """Both sides of the mean value formula at (xi, tau); u and f take (x, t)."""
    return _carnot.mean_value(
        _operator(operator), u, f, _vec(xi), float(tau), float(r), m, samples, seed, unbounded
    )


def harnack_chain(group, z_plus, z_minus, epsilon1=0.25, theta1=0.5, C_P=2.0):
    """z_plus and z_minus are (x, t) pairs."""
    (xp, tp), (xm, tm) = z_plus, z_minus
    return _carnot.harnack_chain(
        _group(group), _vec(xp), float(tp), _vec(xm), float(tm), epsilon1, theta1, C_P
    )


def acceptance(only=()):
    return _carnot.acceptance(list(only))
