"""Reference elements for the four families used by the library.

Shape-function spans are stored as barycentric-monomial coefficients on the
reference tetrahedron.  Degrees of freedom are attached to mesh entities and
defined against *global* entity data (tangents, normals, parametrizations
from sorted vertex ids), so inter-element continuity never needs explicit
orientation tables; see :mod:`curlcurl.spaces`.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import legvander

from . import polynomials as poly
from .errors import UnsupportedDegree
from .quadrature import interval_rule, tet_rule, triangle_rule

LAGRANGE = "lagrange"
NEDELEC = "nedelec"
RAVIART_THOMAS = "raviart_thomas"
DG = "dg"
DG3 = "dg3"

MAX_DEGREE = 8

# reference tetrahedron vertices, row k = vertex k
REF_VERTICES = np.array(
    [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
)
# local edge k connects LOCAL_EDGES[k]; faces opposite to the missing vertex
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LOCAL_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


def family_dim(family, degree):
    p = degree
    if family == LAGRANGE:
        return (p + 1) * (p + 2) * (p + 3) // 6
    if family == NEDELEC:
        return (p + 1) * (p + 3) * (p + 4) // 2
    if family == RAVIART_THOMAS:
        return (p + 1) * (p + 2) * (p + 4) // 2
    if family == DG:
        return (p + 1) * (p + 2) * (p + 3) // 6
    if family == DG3:
        return (p + 1) * (p + 2) * (p + 3) // 2
    raise ValueError(f"unknown family {family!r}")


@dataclass(frozen=True)
class DofLayout:
    per_vertex: int
    per_edge: int
    per_face: int
    interior: int

    def cell_total(self):
        return 4 * self.per_vertex + 6 * self.per_edge + 4 * self.per_face + self.interior


def dof_layout(family, degree):
    q = degree
    if family == LAGRANGE:
        return DofLayout(1, q - 1, (q - 1) * (q - 2) // 2, (q - 1) * (q - 2) * (q - 3) // 6)
    if family == NEDELEC:
        return DofLayout(0, q + 1, q * (q + 1), (q - 1) * q * (q + 1) // 2)
    if family == RAVIART_THOMAS:
        return DofLayout(0, 0, (q + 1) * (q + 2) // 2, 3 * q * (q + 1) * (q + 2) // 6)
    if family in (DG, DG3):
        return DofLayout(0, 0, 0, family_dim(family, q))
    raise ValueError(f"unknown family {family!r}")


def _monomials_2d(degree):
    """Exponent pairs (i, j) with i + j <= degree."""
    return [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]


def _homogeneous_exponents(degree):
    """Exponents of x^a y^b z^c with a+b+c == degree, as barycentric tuples."""
    out = []
    for a in range(degree, -1, -1):
        for b in range(degree - a, -1, -1):
            out.append((0, a, b, degree - a - b))
    return out


def _embed_scalar(degree, target_degree):
    """Matrix taking degree-d coefficients to the target homogeneous degree."""
    M = np.eye(poly.nterms(degree))
    for d in range(degree, target_degree):
        M = poly.raise_degree(d) @ M
    return M


def _vector_span(family, q):
    """Spanning coefficient array (nspan, 3, nterms(q+1)) for N_q / RT_q."""
    rep = q + 1
    nt = poly.nterms(rep)
    embed = _embed_scalar(q, rep)
    idx = poly._index(rep)
    rows = []
    # full (P_q)^3 block, one component at a time
    for c in range(3):
        for m in range(poly.nterms(q)):
            coeff = np.zeros((3, nt))
            coeff[c] = embed[:, m]
            rows.append(coeff)
    # exact-degree-q homogeneous tail: x*m for RT, x cross (e_c m) for Nedelec
    for e in _homogeneous_exponents(q):
        def shifted(k, e=e):
            f = (e[0], e[1] + (k == 1), e[2] + (k == 2), e[3] + (k == 3))
            v = np.zeros(nt)
            v[idx[f]] = 1.0
            return v

        if family == RAVIART_THOMAS:
            coeff = np.stack([shifted(1), shifted(2), shifted(3)])
            rows.append(coeff)
        else:
            # x cross e_1 = (0, z, -y), x cross e_2 = (-z, 0, x), x cross e_3 = (y, -x, 0)
            zero = np.zeros(nt)
            rows.append(np.stack([zero, shifted(3), -shifted(2)]))
            rows.append(np.stack([-shifted(3), zero, shifted(1)]))
            rows.append(np.stack([shifted(2), -shifted(1), zero]))
    return np.stack(rows)


def _rank_reduce(span, rep_degree, target_dim):
    """Orthonormal (in L2) basis of the row space of an overcomplete span."""
    G = poly.gram(rep_degree)
    L = np.linalg.cholesky(G)
    n, ncomp, nt = span.shape
    Y = (span @ L).reshape(n, ncomp * nt)
    _, s, Vt = np.linalg.svd(Y, full_matrices=False)
    if (s > 1e-8 * s[0]).sum() != target_dim:
        raise RuntimeError(
            f"span rank {int((s > 1e-8 * s[0]).sum())} != expected dim {target_dim}"
        )
    basis = np.linalg.solve(L.T, Vt[:target_dim].reshape(target_dim * ncomp, nt).T).T
    return np.ascontiguousarray(basis.reshape(target_dim, ncomp, nt))


class ReferenceElement:
    """Polynomial span plus dof metadata for one family/degree pair."""

    def __init__(self, family, degree):
        if degree < 0 or (family == LAGRANGE and degree < 1):
            raise UnsupportedDegree(f"{family} degree {degree}")
        if degree > MAX_DEGREE:
            raise UnsupportedDegree(f"{family} degree {degree} exceeds cap {MAX_DEGREE}")
        self.family = family
        self.degree = degree
        self.ndofs = family_dim(family, degree)
        self.layout = dof_layout(family, degree)
        self.ncomp = 1 if family in (LAGRANGE, DG) else 3
        q = degree
        if family in (LAGRANGE, DG):
            self.rep_degree = q
            self.coeffs = np.eye(poly.nterms(q)).reshape(self.ndofs, 1, -1)
        elif family == DG3:
            self.rep_degree = q
            n1 = poly.nterms(q)
            coeffs = np.zeros((3 * n1, 3, n1))
            for c in range(3):
                coeffs[c * n1:(c + 1) * n1, c] = np.eye(n1)
            self.coeffs = coeffs
        else:
            self.rep_degree = q + 1
            self.coeffs = _rank_reduce(_vector_span(family, q), q + 1, self.ndofs)
        self._derive()

    def _derive(self):
        d = self.rep_degree
        if d == 0:
            zero = np.zeros((self.ndofs, 3, 1))
            self.grad_coeffs = zero
            self.curl_coeffs = zero
            self.div_coeffs = zero[:, 0]
            return
        Dx, Dy, Dz = poly.diff_xyz(d)
        c = self.coeffs
        if self.ncomp == 1:
            s = c[:, 0]
            self.grad_coeffs = np.stack([s @ Dx.T, s @ Dy.T, s @ Dz.T], axis=1)
        else:
            self.curl_coeffs = np.stack(
                [
                    c[:, 2] @ Dy.T - c[:, 1] @ Dz.T,
                    c[:, 0] @ Dz.T - c[:, 2] @ Dx.T,
                    c[:, 1] @ Dx.T - c[:, 0] @ Dy.T,
                ],
                axis=1,
            )
            self.div_coeffs = c[:, 0] @ Dx.T + c[:, 1] @ Dy.T + c[:, 2] @ Dz.T
            self.grad_coeffs = np.stack(
                [np.stack([c[:, k] @ D.T for D in (Dx, Dy, Dz)], axis=1)
                 for k in range(3)], axis=1)

    # ---- tabulation on reference points -------------------------------

    def tabulate(self, points, what="value"):
        """Values (nbasis, npts, ncomp-or-3) or scalars (nbasis, npts)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if what == "value":
            E = poly.eval_matrix(self.rep_degree, pts)
            out = np.einsum("jcm,pm->jpc", self.coeffs, E)
            return out[:, :, 0] if self.ncomp == 1 else out
        d = self.rep_degree - 1
        if what == "grad":
            E = poly.eval_matrix(max(d, 0), pts)
            g = self.grad_coeffs if self.ncomp == 1 else None
            if g is None:
                raise ValueError("grad of a vector family is rank-2; unsupported here")
            return np.einsum("jcm,pm->jpc", g, E)
        if what == "curl":
            E = poly.eval_matrix(max(d, 0), pts)
            return np.einsum("jcm,pm->jpc", self.curl_coeffs, E)
        if what == "div":
            E = poly.eval_matrix(max(d, 0), pts)
            return np.einsum("jm,pm->jp", self.div_coeffs, E)
        raise ValueError(f"unknown quantity {what!r}")


@lru_cache(maxsize=None)
def reference_element(family, degree):
    return ReferenceElement(family, degree)


# ---- moment tables (reference parameter domains) -----------------------


@dataclass(frozen=True)
class MomentTable:
    """Quadrature parameters and weight polynomials for one entity kind."""

    params: np.ndarray  # (npts, pdim) parameters in the entity's unit domain
    coeffs: np.ndarray  # (nmom, npts) weights already folded with quadrature


@lru_cache(maxsize=None)
def edge_moment_table(q):
    """Moments (1/|e|) int (v.tau) P_k, P_k orthonormal Legendre, k = 0..q."""
    rule = interval_rule(2 * q + 2)
    s = rule.points[:, 0]
    P = legvander(2.0 * s - 1.0, q).T  # (q+1, npts)
    P *= np.sqrt(2.0 * np.arange(q + 1) + 1.0)[:, None]
    return MomentTable(rule.points.copy(), P * rule.weights[None, :])


@lru_cache(maxsize=None)
def face_moment_table(q, mdeg):
    """Moments (1/|F|) int_F (v.dir) m, m orthonormal on the unit triangle."""
    from math import factorial

    rule = triangle_rule(2 * q + 2)
    xi, eta = rule.points[:, 0], rule.points[:, 1]
    mono = _monomials_2d(mdeg)
    if not mono:
        return MomentTable(rule.points.copy(), np.zeros((0, len(xi))))
    M = np.array([xi**i * eta**j for (i, j) in mono])
    G = np.empty((len(mono), len(mono)))
    for a, (i, j) in enumerate(mono):
        for b, (k, l) in enumerate(mono):
            G[a, b] = factorial(i + k) * factorial(j + l) / factorial(i + k + j + l + 2)
    L = np.linalg.cholesky(G)
    M = np.linalg.solve(L, M)  # orthonormal rows w.r.t. the triangle measure
    return MomentTable(rule.points.copy(), 2.0 * M * rule.weights[None, :])


@lru_cache(maxsize=None)
def interior_moment_table(q, mdeg):
    """Moments (1/|K|) int_K (v.e_c) m, m orthonormal barycentric polynomials."""
    rule = tet_rule(2 * q + 2)
    E = poly.eval_matrix(mdeg, rule.points)  # (npts, nterms)
    L = np.linalg.cholesky(poly.gram(mdeg))
    Eo = np.linalg.solve(L, E.T)  # rows orthonormal on the reference tet
    return MomentTable(rule.points.copy(), 6.0 * Eo * rule.weights[None, :])


@lru_cache(maxsize=None)
def lagrange_lattice(p):
    """Per-entity point parameters for the degree-p point lattice."""
    edge = np.array([[k / p] for k in range(1, p)])
    face = np.array([[i / p, j / p] for i in range(1, p) for j in range(1, p - i)])
    interior = np.array(
        [
            [a / p, b / p, c / p]
            for a in range(1, p)
            for b in range(1, p - a)
            for c in range(1, p - a - b)
        ]
    )
    return edge.reshape(-1, 1), face.reshape(-1, 2), interior.reshape(-1, 3)
