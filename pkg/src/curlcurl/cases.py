"""Shipped experiment definitions: domains, sources, analytic solutions.

Every case has div J = 0 and J orthogonal to gradients of H^1_0, so the
gauge multiplier vanishes.  The whole boundary is Dirichlet (A x n = 0).
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BadAngle, TraceCheckFailure
from .mesh import extrude_triangulation, grid_mesh, unit_cube_mesh


@dataclass(frozen=True)
class CaseDefinition:
    name: str
    mesh_builder: Callable  # resolution int -> MeshTopology
    J: Callable  # (n, 3) points -> (n, 3)
    A: Optional[Callable] = None  # analytic solution, if available
    curl_A: Optional[Callable] = None
    exact_degree: Optional[int] = None  # smallest p whose Galerkin solve is exact


# ---- smooth solution in the unit cube --------------------------------------
# curl curl of the trigonometric field below equals 3*pi^2 times itself
# (each component is a Laplace eigenfunction and the field is solenoidal).


def _cube_A(x):
    s, c = np.sin(np.pi * x), np.cos(np.pi * x)
    out = np.empty_like(x)
    out[:, 0] = c[:, 0] * s[:, 1] * s[:, 2]
    out[:, 1] = -s[:, 0] * c[:, 1] * s[:, 2]
    out[:, 2] = 0.0
    return out


def _cube_curl_A(x):
    s, c = np.sin(np.pi * x), np.cos(np.pi * x)
    out = np.empty_like(x)
    out[:, 0] = np.pi * s[:, 0] * c[:, 1] * c[:, 2]
    out[:, 1] = np.pi * c[:, 0] * s[:, 1] * c[:, 2]
    out[:, 2] = -2.0 * np.pi * c[:, 0] * c[:, 1] * s[:, 2]
    return out


def smooth_cube_case():
    return CaseDefinition(
        name="cube",
        mesh_builder=unit_cube_mesh,
        J=lambda x: 3.0 * np.pi**2 * _cube_A(x),
        A=_cube_A,
        curl_A=_cube_curl_A,
    )


# ---- edge singularity in L-type prisms --------------------------------------

_CHI_LO, _CHI_HI = 0.25, 0.75


def cutoff(r):
    """C^2 radial cutoff: 1 below 0.25, 0 above 0.75, quintic bridge between."""
    t = np.clip((np.asarray(r, dtype=float) - _CHI_LO) / (_CHI_HI - _CHI_LO), 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def cutoff_d1(r):
    r = np.asarray(r, dtype=float)
    d = _CHI_HI - _CHI_LO
    t = np.clip((r - _CHI_LO) / d, 0.0, 1.0)
    return -30.0 * t**2 * (1.0 - t) ** 2 / d


def cutoff_d2(r):
    r = np.asarray(r, dtype=float)
    d = _CHI_HI - _CHI_LO
    t = np.clip((r - _CHI_LO) / d, 0.0, 1.0)
    return -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / d**2


def _ltype_theta(x, opening):
    th = np.arctan2(x[:, 1], x[:, 0])
    th = np.where(th < 0, th + 2.0 * np.pi, th)
    return np.clip(th, 0.0, opening)


def ltype_mesh(phi, n):
    """Structured polar-fan triangulation of the cut square, extruded in z.

    The angular grid contains the square corners and the cut directions, so
    the polygonal boundary (and the reentrant edge at the origin) is exact.
    """
    opening = 2.0 * np.pi - phi
    knots = [0.0] + [a for a in (np.pi / 4, 3 * np.pi / 4, 5 * np.pi / 4, 7 * np.pi / 4)
                     if a < opening - 1e-12] + [opening]
    thetas = []
    target = (np.pi / 4) / n
    for a, b in zip(knots[:-1], knots[1:]):
        k = max(1, int(np.ceil((b - a) / target - 1e-9)))
        thetas.extend(a + (b - a) * np.arange(k) / k)
    thetas.append(opening)
    thetas = np.array(thetas)

    def radius(th):
        return 1.0 / np.maximum(np.abs(np.cos(th)), np.abs(np.sin(th)))

    nr = n
    pts = [(0.0, 0.0)]
    ring_ids = [None]
    for i in range(1, nr + 1):
        ids = []
        t = i / nr
        for th in thetas:
            ids.append(len(pts))
            R = radius(th)
            pts.append((t * R * np.cos(th), t * R * np.sin(th)))
        ring_ids.append(ids)
    tris = []
    na = len(thetas) - 1
    for j in range(na):
        tris.append((0, ring_ids[1][j], ring_ids[1][j + 1]))
    for i in range(1, nr):
        for j in range(na):
            a, b = ring_ids[i][j], ring_ids[i][j + 1]
            c, d = ring_ids[i + 1][j], ring_ids[i + 1][j + 1]
            tris.append((a, c, d))
            tris.append((a, d, b))
    return extrude_triangulation(np.array(pts), np.array(tris), n)


def ltype_case(phi):
    if not 0.0 < phi < 2.0 * np.pi:
        raise BadAngle(f"opening angle {phi} outside (0, 2*pi)")
    opening = 2.0 * np.pi - phi
    alpha = np.pi / opening

    def A(x):
        r = np.hypot(x[:, 0], x[:, 1])
        th = _ltype_theta(x, opening)
        out = np.zeros_like(x)
        out[:, 2] = cutoff(r) * r**alpha * np.sin(alpha * th)
        return out

    def curl_A(x):
        # curl (0,0,s) = (ds/dy, -ds/dx, 0)
        r = np.hypot(x[:, 0], x[:, 1])
        th = _ltype_theta(x, opening)
        rs = np.maximum(r, 1e-300)
        sin_a, cos_a = np.sin(alpha * th), np.cos(alpha * th)
        s_r = cutoff_d1(r) * r**alpha * sin_a + cutoff(r) * alpha * r ** (alpha - 1) * sin_a
        s_t_over_r = cutoff(r) * alpha * r ** (alpha - 1) * cos_a
        ct, st = x[:, 0] / rs, x[:, 1] / rs
        ds_dx = ct * s_r - st * s_t_over_r
        ds_dy = st * s_r + ct * s_t_over_r
        out = np.zeros_like(x)
        out[:, 0] = ds_dy
        out[:, 1] = -ds_dx
        return out

    def J(x):
        # -Delta_2(chi * r^a sin(a th)); the r^a sin part is harmonic
        r = np.hypot(x[:, 0], x[:, 1])
        th = _ltype_theta(x, opening)
        rs = np.maximum(r, 1e-300)
        lap = (cutoff_d2(r) + cutoff_d1(r) / rs) * r**alpha \
            + 2.0 * alpha * cutoff_d1(r) * r ** (alpha - 1)
        out = np.zeros_like(x)
        out[:, 2] = -lap * np.sin(alpha * th)
        return out

    tag = {3 * np.pi / 4: "3pi4", np.pi / 2: "pi2", np.pi / 8: "pi8"}.get(phi)
    name = f"ltype-{tag}" if tag else f"ltype-{phi:.4f}"
    return CaseDefinition(
        name=name,
        mesh_builder=lambda n: ltype_mesh(phi, n),
        J=J,
        A=A,
        curl_A=curl_A,
    )


# ---- corner singularity in the Fichera cube ---------------------------------


def fichera_mesh(n):
    """(-1,1)^3 minus the (0,1)^3 octant, n subcubes per unit length."""
    return grid_mesh(
        2 * n, 2 * n, 2 * n,
        lo=(-1.0, -1.0, -1.0), hi=(1.0, 1.0, 1.0),
        skip=lambda i, j, k: i >= n and j >= n and k >= n,
    )


def fichera_case():
    def J(x):
        out = np.zeros((len(x), 3))
        out[:, 0] = 1.0
        out[:, 1] = 1.0
        return out

    return CaseDefinition(name="fichera", mesh_builder=fichera_mesh, J=J)


# ---- polynomial zero-residual oracle ----------------------------------------
# A = ((y - y^2)(z - z^2), 0, 0) is solenoidal with vanishing tangential trace
# on the unit cube; its components have degree 4, the smallest possible for
# such a field, so the Galerkin solve reproduces it exactly from p = 4 on.


def _poly_A(x):
    out = np.zeros_like(x)
    out[:, 0] = (x[:, 1] - x[:, 1] ** 2) * (x[:, 2] - x[:, 2] ** 2)
    return out


def _poly_curl_A(x):
    fy = (1.0 - 2.0 * x[:, 1]) * (x[:, 2] - x[:, 2] ** 2)
    fz = (x[:, 1] - x[:, 1] ** 2) * (1.0 - 2.0 * x[:, 2])
    out = np.zeros_like(x)
    out[:, 1] = fz
    out[:, 2] = -fy
    return out


def _poly_J(x):
    out = np.zeros_like(x)
    out[:, 0] = 2.0 * (x[:, 2] - x[:, 2] ** 2) + 2.0 * (x[:, 1] - x[:, 1] ** 2)
    return out


def _check_tangential_trace(A, tol=1e-12, samples=50):
    rng = np.random.default_rng(7)
    uv = rng.random((samples, 2))
    for axis in range(3):
        for side in (0.0, 1.0):
            pts = np.empty((samples, 3))
            other = [a for a in range(3) if a != axis]
            pts[:, axis] = side
            pts[:, other[0]] = uv[:, 0]
            pts[:, other[1]] = uv[:, 1]
            n = np.zeros(3)
            n[axis] = 1.0 if side == 1.0 else -1.0
            cross = np.cross(A(pts), n)
            if np.abs(cross).max() > tol:
                raise TraceCheckFailure(
                    f"A x n = {np.abs(cross).max():.2e} on face x{axis}={side}"
                )


def polynomial_case():
    _check_tangential_trace(_poly_A)
    return CaseDefinition(
        name="poly",
        mesh_builder=unit_cube_mesh,
        J=_poly_J,
        A=_poly_A,
        curl_A=_poly_curl_A,
        exact_degree=4,
    )


def case_by_name(name):
    if name == "cube":
        return smooth_cube_case()
    if name == "ltype-3pi4":
        return ltype_case(3 * np.pi / 4)
    if name == "ltype-pi2":
        return ltype_case(np.pi / 2)
    if name == "ltype-pi8":
        return ltype_case(np.pi / 8)
    if name == "fichera":
        return fichera_case()
    if name == "poly":
        return polynomial_case()
    raise KeyError(f"unknown case {name!r}")
