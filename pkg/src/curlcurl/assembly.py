"""Sparse assembly of the bilinear forms used by the solver and estimators.

Element integrals are computed from fixed reference tensors contracted with
per-cell affine metrics, chunked over cells to bound memory.
"""

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .elements import LAGRANGE, NEDELEC, RAVIART_THOMAS, reference_element
from .quadrature import tet_rule

CHUNK = 2048


@lru_cache(maxsize=None)
def _q_tensor(fam_row, deg_row, what_row, fam_col, deg_col, what_col, order):
    """Reference tensor int_ref w_p row_a[p,d] col_b[p,e] -> (a, b, d, e)."""
    rule = tet_rule(order)
    row = reference_element(fam_row, deg_row).tabulate(rule.points, what_row)
    col = reference_element(fam_col, deg_col).tabulate(rule.points, what_col)
    return np.einsum("p,apd,bpe->abde", rule.weights, row, col)


def _chunks(n):
    for lo in range(0, n, CHUNK):
        yield np.arange(lo, min(lo + CHUNK, n))


def _coo(space_row, space_col, blocks):
    """Accumulate per-cell element blocks into a CSR matrix."""
    rows_parts, cols_parts, vals_parts = [], [], []
    for cells, elem in blocks:
        r = space_row.cell_dofs[cells].astype(np.int32)
        c = space_col.cell_dofs[cells].astype(np.int32)
        nr, nc = r.shape[1], c.shape[1]
        rows_parts.append(np.repeat(r, nc, axis=1).ravel())
        cols_parts.append(np.tile(c, (1, nr)).ravel())
        vals_parts.append(elem.reshape(len(cells), -1).ravel())
    A = sp.coo_matrix(
        (np.concatenate(vals_parts),
         (np.concatenate(rows_parts), np.concatenate(cols_parts))),
        shape=(space_row.ndofs, space_col.ndofs),
    )
    return A.tocsr()


def _metric_elem(space_row, space_col, Q, metric):
    """Blocks of int (M span_row_i) . span_col_j for a per-cell 3x3 metric."""

    def gen():
        for cells in _chunks(space_row.mesh.nt):
            G = np.einsum("abde,nde->nab", Q, metric(cells))
            Ct = np.swapaxes(space_row.C[cells], 1, 2)
            elem = np.matmul(np.matmul(Ct, G), space_col.C[cells])
            yield cells, elem

    return _coo(space_row, space_col, gen())


def curl_curl_matrix(space, order=None):
    """(curl u, curl v) on a Nedelec space."""
    assert space.family == NEDELEC
    order = order if order is not None else 2 * space.degree + 2
    Q = _q_tensor(space.family, space.degree, "curl",
                  space.family, space.degree, "curl", order)

    def metric(cells):
        J = space.jac[cells]
        return np.einsum("nkd,nke->nde", J, J) / np.abs(space.det[cells])[:, None, None]

    return _metric_elem(space, space, Q, metric)


def vector_mass_matrix(space, order=None):
    """(u, v) on a Nedelec or Raviart-Thomas space."""
    order = order if order is not None else 2 * space.degree + 2
    Q = _q_tensor(space.family, space.degree, "value",
                  space.family, space.degree, "value", order)

    if space.family == NEDELEC:
        def metric(cells):
            Ji = space.jac_inv[cells]
            return np.einsum("ndk,nek->nde", Ji, Ji) * np.abs(space.det[cells])[:, None, None]
    elif space.family == RAVIART_THOMAS:
        def metric(cells):
            J = space.jac[cells]
            return np.einsum("nkd,nke->nde", J, J) / np.abs(space.det[cells])[:, None, None]
    else:
        raise ValueError(space.family)
    return _metric_elem(space, space, Q, metric)


def grad_grad_matrix(space, order=None):
    """(grad u, grad v) on a Lagrange space."""
    assert space.family == LAGRANGE
    order = order if order is not None else 2 * space.degree
    Q = _q_tensor(space.family, space.degree, "grad",
                  space.family, space.degree, "grad", order)

    def metric(cells):
        Ji = space.jac_inv[cells]
        return np.einsum("ndk,nek->nde", Ji, Ji) * np.abs(space.det[cells])[:, None, None]

    return _metric_elem(space, space, Q, metric)


def value_grad_matrix(ned_space, lag_space, order=None):
    """(v, grad q) with rows in the Lagrange space, columns in the Nedelec one."""
    order = order if order is not None else 2 * max(ned_space.degree + 1,
                                                    lag_space.degree)
    Q = _q_tensor(lag_space.family, lag_space.degree, "grad",
                  ned_space.family, ned_space.degree, "value", order)

    def metric(cells):
        Ji = ned_space.jac_inv[cells]
        return np.einsum("ndk,nek->nde", Ji, Ji) * np.abs(ned_space.det[cells])[:, None, None]

    return _metric_elem(lag_space, ned_space, Q, metric)


def div_dg_matrix(rt_space, dg_space):
    """(div v, z) with rows in the DG space; exact (reference) integration."""
    assert rt_space.family == RAVIART_THOMAS
    q = rt_space.degree
    rule = tet_rule(2 * q)
    dspan = rt_space.ref.tabulate(rule.points, "div")  # (a, p)
    zspan = dg_space.ref.tabulate(rule.points, "value")  # (m, p)
    Dref = np.einsum("p,mp,ap->ma", rule.weights, zspan, dspan)

    def gen():
        for cells in _chunks(rt_space.mesh.nt):
            elem = np.einsum("ma,naj->nmj", Dref, rt_space.C[cells])
            yield cells, elem

    return _coo(dg_space, rt_space, gen())


def mass_element_blocks(space, order=None):
    """Per-cell dense mass blocks (nt, nloc, nloc) for an RT or Nedelec space."""
    order = order if order is not None else 2 * space.degree + 2
    Q = _q_tensor(space.family, space.degree, "value",
                  space.family, space.degree, "value", order)
    out = np.empty((space.mesh.nt, space.nloc, space.nloc))
    for cells in _chunks(space.mesh.nt):
        J = space.jac[cells]
        if space.family == RAVIART_THOMAS:
            metric = np.einsum("nkd,nke->nde", J, J) / np.abs(space.det[cells])[:, None, None]
        else:
            Ji = space.jac_inv[cells]
            metric = np.einsum("ndk,nek->nde", Ji, Ji) * np.abs(space.det[cells])[:, None, None]
        G = np.einsum("abde,nde->nab", Q, metric)
        Ct = np.swapaxes(space.C[cells], 1, 2)
        out[cells] = np.matmul(np.matmul(Ct, G), space.C[cells])
    return out


def div_element_blocks(rt_space, dg_degree):
    """Per-cell blocks of (div v, z_m) against the reference DG monomials."""
    from . import polynomials as poly

    q = rt_space.degree
    rule = tet_rule(2 * q)
    dspan = rt_space.ref.tabulate(rule.points, "div")
    E = poly.eval_matrix(dg_degree, rule.points)
    Dref = np.einsum("p,pm,ap->ma", rule.weights, E, dspan)
    out = np.empty((rt_space.mesh.nt, Dref.shape[0], rt_space.nloc))
    for cells in _chunks(rt_space.mesh.nt):
        out[cells] = np.einsum("ma,naj->nmj", Dref, rt_space.C[cells])
    return out


def load_vector(space, f, order):
    """(f, v) for a vector-valued source f(x) -> (n, 3)."""
    rule = tet_rule(order)
    span = space.ref.tabulate(rule.points, "value")
    b = np.zeros(space.ndofs)
    for cells in _chunks(space.mesh.nt):
        pts = space.map_points(cells, rule.points)
        fv = np.asarray(f(pts.reshape(-1, 3))).reshape(len(cells), -1, 3)
        if space.family == NEDELEC:
            fhat = np.einsum("npc,ncd->npd", fv, np.swapaxes(space.jac_inv[cells], 1, 2))
            fhat *= np.abs(space.det[cells])[:, None, None]
        elif space.family == RAVIART_THOMAS:
            sign = np.sign(space.det[cells])
            fhat = np.einsum("npc,ncd->npd", fv, space.jac[cells])
            fhat *= sign[:, None, None]
        else:
            raise ValueError(space.family)
        rhs_span = np.einsum("p,npd,apd->na", rule.weights, fhat, span)
        local = np.einsum("nai,na->ni", space.C[cells], rhs_span)
        np.add.at(b, space.cell_dofs[cells], local)
    return b


def scalar_load_vector(space, f, order):
    """(f, q) for a scalar source on a Lagrange or DG space."""
    rule = tet_rule(order)
    span = space.ref.tabulate(rule.points, "value")  # (a, p)
    b = np.zeros(space.ndofs)
    for cells in _chunks(space.mesh.nt):
        pts = space.map_points(cells, rule.points)
        fv = np.asarray(f(pts.reshape(-1, 3))).reshape(len(cells), -1)
        fv = fv * np.abs(space.det[cells])[:, None]
        rhs_span = np.einsum("p,np,ap->na", rule.weights, fv, span)
        local = np.einsum("nai,na->ni", space.C[cells], rhs_span)
        np.add.at(b, space.cell_dofs[cells], local)
    return b
