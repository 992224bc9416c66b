"""Conforming global spaces, dof maps, fields, and local projections.

Degrees of freedom are moments/point values defined against global entity
data (edge parametrized from its lower to its higher vertex id, faces by
sorted vertex triples).  Each cell's shape functions are recovered by
inverting the matrix of those functionals applied to the reference span
under the appropriate Piola map, so tangential/normal continuity holds by
construction for any degree without orientation tables.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from . import polynomials as poly
from .elements import (
    DG,
    DG3,
    LAGRANGE,
    LOCAL_EDGES,
    LOCAL_FACES,
    NEDELEC,
    RAVIART_THOMAS,
    REF_VERTICES,
    edge_moment_table,
    face_moment_table,
    interior_moment_table,
    lagrange_lattice,
    reference_element,
)
from .errors import IncompatibleQuery
from .quadrature import tet_rule

_PERMS3 = tuple(permutations(range(3)))


def _edge_points(first, second, params):
    a, b = REF_VERTICES[first], REF_VERTICES[second]
    s = params[:, 0][:, None]
    return a[None, :] * (1.0 - s) + b[None, :] * s


def _face_points(v0, v1, v2, params):
    a, b, c = REF_VERTICES[v0], REF_VERTICES[v1], REF_VERTICES[v2]
    xi = params[:, 0][:, None]
    eta = params[:, 1][:, None]
    return a[None, :] + xi * (b - a)[None, :] + eta * (c - a)[None, :]


@lru_cache(maxsize=None)
def _tables(family, degree):
    """Per-slot, per-orientation fixed functional rows on the reference cell."""
    ref = reference_element(family, degree)
    lay = ref.layout
    out = {"ref": ref}
    if family in (DG, DG3):
        return out

    if family == LAGRANGE:
        p = degree
        eparams, fparams, iparams = lagrange_lattice(p)
        vrows = []
        for l in range(4):
            E = poly.eval_matrix(p, REF_VERTICES[l:l + 1])
            vrows.append(E @ ref.coeffs[:, 0, :].T)
        out["vertex"] = vrows
        erows = []
        for (i, j) in LOCAL_EDGES:
            bycase = []
            for (f, s) in ((i, j), (j, i)):
                pts = _edge_points(f, s, eparams) if len(eparams) else np.zeros((0, 3))
                E = poly.eval_matrix(p, pts)
                bycase.append(E @ ref.coeffs[:, 0, :].T)
            erows.append(bycase)
        out["edge"] = erows
        frows = []
        for loc in LOCAL_FACES:
            byperm = []
            for perm in _PERMS3:
                pts = (_face_points(loc[perm[0]], loc[perm[1]], loc[perm[2]], fparams)
                       if len(fparams) else np.zeros((0, 3)))
                E = poly.eval_matrix(p, pts)
                byperm.append(E @ ref.coeffs[:, 0, :].T)
            frows.append(byperm)
        out["face"] = frows
        E = poly.eval_matrix(p, iparams) if len(iparams) else np.zeros((0, poly.nterms(p)))
        out["interior"] = E @ ref.coeffs[:, 0, :].T
        return out

    # vector families: moments against directions
    q = degree
    if family == NEDELEC:
        etab = edge_moment_table(q)
        erows = []
        for (i, j) in LOCAL_EDGES:
            bycase = []
            for (f, s) in ((i, j), (j, i)):
                pts = _edge_points(f, s, etab.params)
                vals = ref.tabulate(pts, "value")  # (nbasis, npts, 3)
                dref = REF_VERTICES[s] - REF_VERTICES[f]
                proj = np.einsum("jpc,c->jp", vals, dref)
                bycase.append(np.einsum("kp,jp->kj", etab.coeffs, proj))
            erows.append(bycase)
        out["edge"] = erows
        if lay.per_face:
            ftab = face_moment_table(q, q - 1)
            frows = []
            for loc in LOCAL_FACES:
                byperm = []
                for perm in _PERMS3:
                    v0, v1, v2 = loc[perm[0]], loc[perm[1]], loc[perm[2]]
                    pts = _face_points(v0, v1, v2, ftab.params)
                    vals = ref.tabulate(pts, "value")
                    rows = []
                    for tgt in (v1, v2):
                        dref = REF_VERTICES[tgt] - REF_VERTICES[v0]
                        proj = np.einsum("jpc,c->jp", vals, dref)
                        rows.append(np.einsum("kp,jp->kj", ftab.coeffs, proj))
                    byperm.append(np.vstack(rows))
                frows.append(byperm)
            out["face"] = frows
        if lay.interior:
            itab = interior_moment_table(q, q - 2)
            vals = ref.tabulate(itab.params, "value")
            out["interior"] = np.einsum("kp,jpd->jkd", itab.coeffs, vals)
        return out

    if family == RAVIART_THOMAS:
        ftab = face_moment_table(q, q)
        frows = []
        for loc in LOCAL_FACES:
            byperm = []
            for perm in _PERMS3:
                v0, v1, v2 = loc[perm[0]], loc[perm[1]], loc[perm[2]]
                pts = _face_points(v0, v1, v2, ftab.params)
                vals = ref.tabulate(pts, "value")
                dref = np.cross(REF_VERTICES[v1] - REF_VERTICES[v0],
                                REF_VERTICES[v2] - REF_VERTICES[v0])
                proj = np.einsum("jpc,c->jp", vals, dref)
                byperm.append(np.einsum("kp,jp->kj", ftab.coeffs, proj))
            frows.append(byperm)
        out["face"] = frows
        if lay.interior:
            itab = interior_moment_table(q, q - 1)
            vals = ref.tabulate(itab.params, "value")
            out["interior"] = np.einsum("kp,jpd->jkd", itab.coeffs, vals)
        return out

    raise ValueError(family)


_ALLOWED_QUERIES = {
    LAGRANGE: ("value", "grad"),
    DG: ("value", "grad"),
    DG3: ("value",),
    NEDELEC: ("value", "curl"),
    RAVIART_THOMAS: ("value", "div"),
}


class FESpace:
    """A conforming (or broken, for DG) global space on a mesh."""

    def __init__(self, mesh, family, degree):
        self.mesh = mesh
        self.family = family
        self.degree = degree
        self.ref = reference_element(family, degree)
        lay = self.ref.layout
        self.layout = lay
        nt = mesh.nt

        v = mesh.vertices[mesh.tets]  # (nt, 4, 3)
        self.jac = np.stack([v[:, k] - v[:, 0] for k in (1, 2, 3)], axis=2)
        self.det = np.linalg.det(self.jac)
        self.jac_inv = np.linalg.inv(self.jac)
        self.origin = v[:, 0]

        nv_off = mesh.nv * lay.per_vertex
        ne_off = nv_off + mesh.ne * lay.per_edge
        nf_off = ne_off + mesh.nf * lay.per_face
        self.ndofs = nf_off + nt * lay.interior
        self.block_offsets = (0, nv_off, ne_off, nf_off)

        dofs = []
        if lay.per_vertex:
            for l in range(4):
                base = mesh.tets[:, l] * lay.per_vertex
                for k in range(lay.per_vertex):
                    dofs.append(base + k)
        if lay.per_edge:
            for slot in range(6):
                base = nv_off + mesh.tet_edges[:, slot] * lay.per_edge
                for k in range(lay.per_edge):
                    dofs.append(base + k)
        if lay.per_face:
            for slot in range(4):
                base = ne_off + mesh.tet_faces[:, slot] * lay.per_face
                for k in range(lay.per_face):
                    dofs.append(base + k)
        if lay.interior:
            base = nf_off + np.arange(nt) * lay.interior
            for k in range(lay.interior):
                dofs.append(base + k)
        self.cell_dofs = np.column_stack(dofs) if dofs else np.zeros((nt, 0), dtype=int)
        self.nloc = self.cell_dofs.shape[1]
        self._build_cell_basis()

    # -- construction ----------------------------------------------------

    def _build_cell_basis(self):
        mesh, lay = self.mesh, self.layout
        nt, nloc = mesh.nt, self.nloc
        if self.family in (DG, DG3):
            self.C = np.broadcast_to(np.eye(nloc), (nt, nloc, nloc)).copy()
            return
        tab = _tables(self.family, self.degree)
        V = np.empty((nt, nloc, nloc))
        row = 0
        tets = mesh.tets
        verts = mesh.vertices

        if lay.per_vertex:
            for l in range(4):
                V[:, row:row + lay.per_vertex, :] = tab["vertex"][l][None]
                row += lay.per_vertex

        if lay.per_edge:
            for slot, (i, j) in enumerate(LOCAL_EDGES):
                desc = tets[:, i] > tets[:, j]
                block = np.where(desc[:, None, None], tab["edge"][slot][1][None],
                                 tab["edge"][slot][0][None])
                if self.family == NEDELEC:
                    L = np.linalg.norm(verts[tets[:, j]] - verts[tets[:, i]], axis=1)
                    block = block / L[:, None, None]
                V[:, row:row + lay.per_edge, :] = block
                row += lay.per_edge

        if lay.per_face:
            for slot, loc in enumerate(LOCAL_FACES):
                gids = tets[:, loc]  # (nt, 3)
                order = np.argsort(gids, axis=1)
                block = np.empty((nt, lay.per_face, nloc))
                scale = np.ones((nt, lay.per_face))
                x = verts[gids]  # (nt, 3, 3)
                for ci, perm in enumerate(_PERMS3):
                    sel = np.all(order == np.array(perm)[None, :], axis=1)
                    if not sel.any():
                        continue
                    block[sel] = tab["face"][slot][ci][None]
                    x0 = x[sel][:, perm[0]]
                    x1 = x[sel][:, perm[1]]
                    x2 = x[sel][:, perm[2]]
                    if self.family == NEDELEC:
                        nm = lay.per_face // 2
                        scale[sel, :nm] = 1.0 / np.linalg.norm(x1 - x0, axis=1)[:, None]
                        scale[sel, nm:] = 1.0 / np.linalg.norm(x2 - x0, axis=1)[:, None]
                    elif self.family == RAVIART_THOMAS:
                        area2 = np.linalg.norm(np.cross(x1 - x0, x2 - x0), axis=1)
                        scale[sel] = (1.0 / area2)[:, None]
                V[:, row:row + lay.per_face, :] = block * scale[:, :, None]
                row += lay.per_face

        if lay.interior:
            if self.family == LAGRANGE:
                V[:, row:row + lay.interior, :] = tab["interior"][None]
            else:
                T = tab["interior"]  # (nbasis, nm, 3) reference moments
                nm = T.shape[1]
                if self.family == NEDELEC:
                    blk = np.einsum("ndc,jmd->ncmj", self.jac_inv, T)
                else:
                    blk = np.einsum("ncd,jmd->ncmj",
                                    self.jac / self.det[:, None, None], T)
                V[:, row:row + lay.interior, :] = blk.reshape(nt, 3 * nm, self.nloc)
                row += lay.interior

        self.C = np.ascontiguousarray(np.linalg.inv(V))

    # -- queries ----------------------------------------------------------

    def dof_entities(self):
        """(kind, entity id) per dof; kinds: 0 vertex, 1 edge, 2 face, 3 cell."""
        lay = self.layout
        kinds = np.empty(self.ndofs, dtype=np.int8)
        ids = np.empty(self.ndofs, dtype=np.int64)
        o = self.block_offsets
        if lay.per_vertex:
            kinds[:o[1]] = 0
            ids[:o[1]] = np.repeat(np.arange(self.mesh.nv), lay.per_vertex)
        if lay.per_edge:
            kinds[o[1]:o[2]] = 1
            ids[o[1]:o[2]] = np.repeat(np.arange(self.mesh.ne), lay.per_edge)
        if lay.per_face:
            kinds[o[2]:o[3]] = 2
            ids[o[2]:o[3]] = np.repeat(np.arange(self.mesh.nf), lay.per_face)
        if lay.interior:
            kinds[o[3]:] = 3
            ids[o[3]:] = np.repeat(np.arange(self.mesh.nt), lay.interior)
        return kinds, ids

    def constrained_mask(self, faces):
        """Dofs whose supporting entity lies in the closure of the given faces."""
        mesh, lay = self.mesh, self.layout
        faces = np.asarray(sorted(faces), dtype=np.int64)
        mask = np.zeros(self.ndofs, dtype=bool)
        if faces.size == 0:
            return mask
        o = self.block_offsets
        tri = mesh.faces[faces]
        if lay.per_face:
            idx = o[2] + (faces[:, None] * lay.per_face + np.arange(lay.per_face)).ravel()
            mask[idx] = True
        if lay.per_edge:
            pairs = np.vstack([tri[:, [0, 1]], tri[:, [0, 2]], tri[:, [1, 2]]])
            keys = pairs[:, 0] * mesh.nv + pairs[:, 1]
            ekeys = mesh.edges[:, 0] * mesh.nv + mesh.edges[:, 1]
            onb = np.isin(ekeys, keys)
            eids = np.flatnonzero(onb)
            idx = o[1] + (eids[:, None] * lay.per_edge + np.arange(lay.per_edge)).ravel()
            mask[idx] = True
        if lay.per_vertex:
            vids = np.unique(tri)
            idx = o[0] + (vids[:, None] * lay.per_vertex + np.arange(lay.per_vertex)).ravel()
            mask[idx] = True
        return mask

    def dirichlet_mask(self):
        return self.constrained_mask(self.mesh.dirichlet_faces())

    # -- evaluation --------------------------------------------------------

    def _piola(self, vals, cells, what):
        """Map reference tabulations (n, ..., comp) to physical ones."""
        fam = self.family
        if fam in (LAGRANGE, DG):
            if what == "value":
                return vals
            if what == "grad":
                return vals @ self.jac_inv[cells][:, None]
            raise IncompatibleQuery(f"{fam}: {what}")
        if fam == DG3:
            if what == "value":
                return vals
            raise IncompatibleQuery(f"{fam}: {what}")
        if fam == NEDELEC:
            if what == "value":
                return vals @ self.jac_inv[cells][:, None]
            if what == "curl":
                Jt = np.swapaxes(self.jac[cells], 1, 2)
                return vals @ (Jt / self.det[cells][:, None, None])[:, None]
            raise IncompatibleQuery(f"{fam}: {what}")
        if fam == RAVIART_THOMAS:
            if what == "value":
                Jt = np.swapaxes(self.jac[cells], 1, 2)
                return vals @ (Jt / self.det[cells][:, None, None])[:, None]
            if what == "div":
                return vals / self.det[cells][:, None, None]
            raise IncompatibleQuery(f"{fam}: {what}")
        raise IncompatibleQuery(f"{fam}: {what}")

    def shape_values(self, cells, ref_points, what="value"):
        """(ncells, nloc, npts[, 3]) physical tabulation of local shape funcs."""
        cells = np.asarray(cells, dtype=np.int64)
        span = self.ref.tabulate(ref_points, what)
        if span.ndim == 2:  # scalar quantity
            w = np.einsum("njl,jp->nlp", self.C[cells], span)
            if what == "div":
                return w / self.det[cells][:, None, None]
            return w
        w = np.einsum("njl,jpc->nlpc", self.C[cells], span)
        return self._piola(w, cells, what)

    def map_points(self, cells, ref_points):
        cells = np.asarray(cells, dtype=np.int64)
        pts = np.asarray(ref_points, dtype=float).reshape(-1, 3)
        return self.origin[cells][:, None, :] + pts[None] @ np.swapaxes(
            self.jac[cells], 1, 2)


@dataclass
class DiscreteField:
    """Coefficients of a function in a conforming or broken space."""

    space: FESpace
    coeffs: np.ndarray

    def __post_init__(self):
        if len(self.coeffs) != self.space.ndofs:
            raise ValueError("coefficient length does not match dof count")

    def eval(self, cells, ref_points, what="value"):
        sp = self.space
        if what not in _ALLOWED_QUERIES[sp.family]:
            raise IncompatibleQuery(f"{sp.family}: {what}")
        cells = np.asarray(cells, dtype=np.int64)
        span = sp.ref.tabulate(ref_points, what)
        local = self.coeffs[sp.cell_dofs[cells]]
        w = np.einsum("njl,nl->nj", sp.C[cells], local)
        if span.ndim == 2:
            vals = np.einsum("nj,jp->np", w, span)
            if what == "div":
                return vals / sp.det[cells][:, None]
            return vals
        vals = np.einsum("nj,jpc->npc", w, span)
        out = sp._piola(vals[:, None], cells, what)
        return out[:, 0]


def evaluate_field(field, cell, ref_points, what="value"):
    """Evaluate one cell of a field; thin wrapper over DiscreteField.eval."""
    out = field.eval(np.atleast_1d(cell), ref_points, what)
    return out[0] if np.isscalar(cell) else out


def interpolate(space, f):
    """Canonical interpolation: apply every global dof functional to f.

    f maps physical points (n, 3) to scalars (Lagrange) or 3-vectors.
    """
    mesh = space.mesh
    fam, lay = space.family, space.layout
    coeffs = np.zeros(space.ndofs)
    if fam in (DG, DG3):
        proj = l2_project_piecewise(f, space.degree, mesh, vector=fam == DG3)
        return DiscreteField(space, proj.coeffs.copy())
    tab = _tables(fam, space.degree)
    if fam == LAGRANGE:
        p = space.degree
        eparams, fparams, iparams = lagrange_lattice(p)
        coeffs[:mesh.nv] = np.asarray(f(mesh.vertices)).reshape(-1)
        if lay.per_edge:
            A = mesh.vertices[mesh.edges[:, 0]]
            B = mesh.vertices[mesh.edges[:, 1]]
            for k, t in enumerate(eparams[:, 0]):
                vals = np.asarray(f(A * (1 - t) + B * t)).reshape(-1)
                coeffs[space.block_offsets[1] + np.arange(mesh.ne) * lay.per_edge + k] = vals
        if lay.per_face:
            V0 = mesh.vertices[mesh.faces[:, 0]]
            V1 = mesh.vertices[mesh.faces[:, 1]]
            V2 = mesh.vertices[mesh.faces[:, 2]]
            for k, (xi, eta) in enumerate(fparams):
                vals = np.asarray(f(V0 + xi * (V1 - V0) + eta * (V2 - V0))).reshape(-1)
                coeffs[space.block_offsets[2] + np.arange(mesh.nf) * lay.per_face + k] = vals
        if lay.interior:
            for k, bar in enumerate(iparams):
                pts = space.map_points(np.arange(mesh.nt), bar.reshape(1, 3))[:, 0]
                coeffs[space.block_offsets[3] + np.arange(mesh.nt) * lay.interior + k] = \
                    np.asarray(f(pts)).reshape(-1)
        return DiscreteField(space, coeffs)

    # vector families: edge/face/interior moments of the physical field
    from .elements import edge_moment_table, face_moment_table, interior_moment_table

    q = space.degree
    if fam == NEDELEC and lay.per_edge:
        etab = edge_moment_table(q)
        A = mesh.vertices[mesh.edges[:, 0]]
        B = mesh.vertices[mesh.edges[:, 1]]
        tau = B - A
        tau = tau / np.linalg.norm(tau, axis=1)[:, None]
        s = etab.params[:, 0]
        fv = np.stack([np.asarray(f(A * (1 - t) + B * t)) for t in s], axis=1)
        proj = np.einsum("epc,ec->ep", fv, tau)
        mom = np.einsum("kp,ep->ek", etab.coeffs, proj)
        coeffs[space.block_offsets[1]:space.block_offsets[2]] = mom.ravel()
    if lay.per_face:
        mdeg = q - 1 if fam == NEDELEC else q
        ftab = face_moment_table(q, mdeg)
        V0 = mesh.vertices[mesh.faces[:, 0]]
        V1 = mesh.vertices[mesh.faces[:, 1]]
        V2 = mesh.vertices[mesh.faces[:, 2]]
        fv = np.stack(
            [np.asarray(f(V0 + xi * (V1 - V0) + eta * (V2 - V0)))
             for xi, eta in ftab.params], axis=1)
        if fam == NEDELEC:
            t1 = V1 - V0
            t1 /= np.linalg.norm(t1, axis=1)[:, None]
            t2 = V2 - V0
            t2 /= np.linalg.norm(t2, axis=1)[:, None]
            m1 = np.einsum("kp,ep->ek", ftab.coeffs, np.einsum("epc,ec->ep", fv, t1))
            m2 = np.einsum("kp,ep->ek", ftab.coeffs, np.einsum("epc,ec->ep", fv, t2))
            mom = np.concatenate([m1, m2], axis=1)
        else:
            nrm = np.cross(V1 - V0, V2 - V0)
            nrm /= np.linalg.norm(nrm, axis=1)[:, None]
            mom = np.einsum("kp,ep->ek", ftab.coeffs, np.einsum("epc,ec->ep", fv, nrm))
        coeffs[space.block_offsets[2]:space.block_offsets[3]] = mom.ravel()
    if lay.interior:
        mdeg = q - 2 if fam == NEDELEC else q - 1
        itab = interior_moment_table(q, mdeg)
        pts = space.map_points(np.arange(mesh.nt), itab.params)
        fv = np.asarray(f(pts.reshape(-1, 3))).reshape(mesh.nt, -1, 3)
        mom = np.einsum("kp,npc->nck", itab.coeffs, fv)  # (nt, 3, nm), c-major
        coeffs[space.block_offsets[3]:] = mom.reshape(mesh.nt, -1).ravel()
    return DiscreteField(space, coeffs)


def l2_project_piecewise(f, degree, mesh, cells=None, vector=False, order=None):
    """Cellwise L2 projection onto DiscontinuousP(degree) (scalar or 3-vector)."""
    family = DG3 if vector else DG
    space = FESpace(mesh, family, degree)
    if cells is None:
        cells = np.arange(mesh.nt)
    cells = np.asarray(cells, dtype=np.int64)
    if order is None:
        order = 2 * degree + 2
    rule = tet_rule(order)
    pts = space.map_points(cells, rule.points)  # (n, npts, 3)
    fv = np.asarray(f(pts.reshape(-1, 3)))
    n1 = poly.nterms(degree)
    E = poly.eval_matrix(degree, rule.points)  # (npts, n1)
    G = poly.gram(degree)
    Ginv = np.linalg.inv(G)
    coeffs = np.zeros(space.ndofs)
    if vector:
        fv = fv.reshape(len(cells), len(rule.weights), 3)
        rhs = np.einsum("p,npc,pm->ncm", rule.weights, fv, E)
        sol = rhs @ Ginv.T  # (n, 3, n1)
        coeffs[space.cell_dofs[cells]] = sol.reshape(len(cells), 3 * n1)
    else:
        fv = fv.reshape(len(cells), len(rule.weights))
        rhs = np.einsum("p,np,pm->nm", rule.weights, fv, E)
        sol = rhs @ Ginv.T
        coeffs[space.cell_dofs[cells]] = sol
    return DiscreteField(space, coeffs)
