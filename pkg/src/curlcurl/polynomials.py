"""Homogeneous barycentric monomials on the reference tetrahedron.

Polynomials of total degree d are stored as coefficient vectors over the
monomials lam0^a lam1^b lam2^c lam3^e with a+b+c+e = d, where
lam0 = 1-x-y-z, lam1 = x, lam2 = y, lam3 = z.  This Bernstein-like frame
stays well conditioned at the degrees used here, and its exact integrals
over the reference tetrahedron are rational (factorial formula), which the
tests exploit.
"""

from functools import lru_cache
from math import factorial

import numpy as np


@lru_cache(maxsize=None)
def exponents(degree):
    """All (a0,a1,a2,a3) with sum == degree, lexicographic, as an int array."""
    out = []
    for a0 in range(degree, -1, -1):
        for a1 in range(degree - a0, -1, -1):
            for a2 in range(degree - a0 - a1, -1, -1):
                out.append((a0, a1, a2, degree - a0 - a1 - a2))
    return np.array(out, dtype=int)


@lru_cache(maxsize=None)
def _index(degree):
    return {tuple(e): i for i, e in enumerate(exponents(degree))}


def nterms(degree):
    return (degree + 1) * (degree + 2) * (degree + 3) // 6


def eval_matrix(degree, points):
    """(npts, nterms) matrix of monomial values at reference points."""
    pts = np.asarray(points, dtype=float)
    lam = np.column_stack([1.0 - pts.sum(axis=1), pts[:, 0], pts[:, 1], pts[:, 2]])
    exps = exponents(degree)
    # lam**exps broadcast: (npts, nterms, 4) -> product over the last axis
    powers = np.ones((pts.shape[0], len(exps)))
    for k in range(4):
        e = exps[:, k]
        nz = e > 0
        if nz.any():
            powers[:, nz] *= lam[:, k][:, None] ** e[nz][None, :]
    return powers


@lru_cache(maxsize=None)
def raise_degree(degree):
    """Matrix R with coeffs_{d+1} = R @ coeffs_d (multiplication by 1 = sum lam_i)."""
    lo, hi = exponents(degree), _index(degree + 1)
    R = np.zeros((nterms(degree + 1), nterms(degree)))
    for j, e in enumerate(lo):
        for k in range(4):
            R[hi[(e[0] + (k == 0), e[1] + (k == 1), e[2] + (k == 2), e[3] + (k == 3))], j] += 1.0
    return R


@lru_cache(maxsize=None)
def multiply_lambda(degree, k):
    """Matrix for multiplication by lam_k, mapping degree d to d+1 coefficients."""
    lo, hi = exponents(degree), _index(degree + 1)
    M = np.zeros((nterms(degree + 1), nterms(degree)))
    for j, e in enumerate(lo):
        f = list(e)
        f[k] += 1
        M[hi[tuple(f)], j] = 1.0
    return M


@lru_cache(maxsize=None)
def _d_lambda(degree, k):
    """Matrix of d/d(lam_k), mapping degree d to degree d-1 coefficients."""
    lo, hi = exponents(degree), _index(degree - 1)
    D = np.zeros((nterms(degree - 1), nterms(degree)))
    for j, e in enumerate(lo):
        if e[k] > 0:
            f = list(e)
            f[k] -= 1
            D[hi[tuple(f)], j] = float(e[k])
    return D


@lru_cache(maxsize=None)
def diff_xyz(degree):
    """(Dx, Dy, Dz) on x,y,z: d/dx = d/dlam1 - d/dlam0, etc."""
    d0 = _d_lambda(degree, 0)
    return tuple(_d_lambda(degree, k) - d0 for k in (1, 2, 3))


@lru_cache(maxsize=None)
def integrals(degree):
    """Exact integrals of each monomial over the reference tetrahedron."""
    exps = exponents(degree)
    vals = np.empty(len(exps))
    den = factorial(degree + 3)
    for i, e in enumerate(exps):
        num = factorial(e[0]) * factorial(e[1]) * factorial(e[2]) * factorial(e[3])
        vals[i] = num / den
    return vals


@lru_cache(maxsize=None)
def gram(degree):
    """Exact L2(ref tet) Gram matrix of the monomial basis."""
    exps = exponents(degree)
    n = len(exps)
    G = np.empty((n, n))
    den = factorial(2 * degree + 3)
    fac = [factorial(k) for k in range(2 * degree + 1)]
    for i in range(n):
        for j in range(i + 1):
            e = exps[i] + exps[j]
            G[i, j] = G[j, i] = fac[e[0]] * fac[e[1]] * fac[e[2]] * fac[e[3]] / den
    return G
