"""Quadrature rules on the reference simplexes.

Rules are conical products of Gauss-Jacobi lines (Duffy transform), so any
order up to the cap is available without tabulated coefficients.  A rule of
order ``k`` integrates every polynomial of total degree <= ``k`` exactly.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import UnsupportedOrder

MAX_ORDER = 50


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, dim) on the reference simplex
    weights: np.ndarray  # (n,), sums to the reference measure
    order: int


def _gauss_jacobi_01(n, alpha):
    """Nodes/weights for int_0^1 (1-u)^alpha f(u) du."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w * 0.5 ** (alpha + 1.0)


def _check_order(order):
    if order < 0 or order > MAX_ORDER:
        raise UnsupportedOrder(f"quadrature order {order} outside [0, {MAX_ORDER}]")


@lru_cache(maxsize=None)
def interval_rule(order):
    """Gauss-Legendre rule on [0, 1]."""
    _check_order(order)
    n = order // 2 + 1
    u, w = _gauss_jacobi_01(n, 0.0)
    return QuadratureRule(u.reshape(-1, 1), w, order)


@lru_cache(maxsize=None)
def triangle_rule(order):
    """Collapsed rule on the reference triangle {x,y >= 0, x+y <= 1}."""
    _check_order(order)
    n = order // 2 + 1
    u, wu = _gauss_jacobi_01(n, 1.0)
    v, wv = _gauss_jacobi_01(n, 0.0)
    # x = u, y = v(1-u); dA = (1-u) du dv, the (1-u) lives in the Jacobi weight
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([uu.ravel(), (vv * (1.0 - uu)).ravel()])
    wts = np.outer(wu, wv).ravel()
    return QuadratureRule(pts, wts, order)


@lru_cache(maxsize=None)
def tet_rule(order):
    """Collapsed rule on the reference tetrahedron {x,y,z >= 0, x+y+z <= 1}."""
    _check_order(order)
    n = order // 2 + 1
    u, wu = _gauss_jacobi_01(n, 2.0)
    v, wv = _gauss_jacobi_01(n, 1.0)
    w, ww = _gauss_jacobi_01(n, 0.0)
    # x = u, y = v(1-u), z = w(1-u)(1-v); dV = (1-u)^2 (1-v) du dv dw
    uu, vv, www = np.meshgrid(u, v, w, indexing="ij")
    x = uu.ravel()
    y = (vv * (1.0 - uu)).ravel()
    z = (www * (1.0 - uu) * (1.0 - vv)).ravel()
    pts = np.column_stack([x, y, z])
    wts = (wu[:, None, None] * wv[None, :, None] * ww[None, None, :]).ravel()
    return QuadratureRule(pts, wts, order)


def quadrature(order):
    """Rule on the reference tetrahedron, exact for total degree <= order."""
    return tet_rule(order)
