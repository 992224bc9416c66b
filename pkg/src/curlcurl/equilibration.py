"""Patchwise flux equilibration and the two error estimators.

For each mesh edge, a divergence-constrained minimization over the edge
patch produces a local Raviart-Thomas flux; its objective value is the edge
estimator.  Recombining the patch fluxes weighted by edge tangents yields
three global H(div) fields whose elementwise contributions form the cell
estimator with a guaranteed reliability constant in convex domains.
"""

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import polynomials as poly
from .assembly import div_element_blocks, mass_element_blocks
from .elements import LAGRANGE, NEDELEC, RAVIART_THOMAS
from .errors import (
    CompatibilityViolation,
    DegreeMismatch,
    EigenFailure,
    SingularPatchSystem,
)
from .mesh import LOCAL_EDGES, build_topology, cell_kappas, edge_patch
from .quadrature import tet_rule
from .spaces import DiscreteField, FESpace

_CROSS_BASIS = (
    lambda c: np.stack([np.zeros_like(c[..., 0]), -c[..., 2], c[..., 1]], axis=-1),
    lambda c: np.stack([c[..., 2], np.zeros_like(c[..., 0]), -c[..., 0]], axis=-1),
    lambda c: np.stack([-c[..., 1], c[..., 0], np.zeros_like(c[..., 0])], axis=-1),
)


def _lambda_values(points):
    pts = np.asarray(points, dtype=float)
    return np.column_stack(
        [1.0 - pts.sum(axis=1), pts[:, 0], pts[:, 1], pts[:, 2]]
    ).T  # (4, npts)


@dataclass
class EdgeFunction:
    """Lowest-order edge (Whitney) function with cached sup norms."""

    edge: int
    field: DiscreteField
    linf: float
    curl_linf: float


def edge_function(mesh, e, n0_space=None):
    sp = n0_space if n0_space is not None else FESpace(mesh, NEDELEC, 0)
    coeffs = np.zeros(sp.ndofs)
    coeffs[e] = 1.0
    fld = DiscreteField(sp, coeffs)
    cells = mesh.edge_tets(e)
    lattice = tet_rule(4).points  # 20-point interior lattice
    pts = np.vstack([lattice, np.eye(4, 3, k=-1), np.zeros((1, 3))])
    vals = fld.eval(cells, pts)
    linf = float(np.linalg.norm(vals, axis=2).max())
    curls = fld.eval(cells, pts[:1], "curl")
    curl_linf = float(np.linalg.norm(curls, axis=2).max())
    return EdgeFunction(int(e), fld, linf, curl_linf)


class EstimatorContext:
    """Cached per-mesh data shared by all edge-patch problems.

    When the gauge multiplier of the Galerkin solve is supplied, the
    divergence data use the effective source J - grad(lambda_h), which is
    the source the discrete solution is exactly orthogonal against; the
    difference sits at quadrature-error level and keeps the patch
    compatibility integrals at round-off.
    """

    def __init__(self, A_h, J, q=None, rhs_order=None, multiplier=None,
                 enforce_degree=True):
        self.A_h = A_h
        self.J = J
        self.multiplier = multiplier
        mesh = A_h.space.mesh
        self.mesh = mesh
        p = A_h.space.degree
        self.p = p
        self.q = q if q is not None else p + 1
        if enforce_degree and self.q < p + 1:
            raise DegreeMismatch(f"flux degree {self.q} < p+1 = {p + 1}")
        q = self.q
        self.rt = FESpace(mesh, RAVIART_THOMAS, q)
        self.ndg = poly.nterms(q)
        self.mass = mass_element_blocks(self.rt)
        self.divblk = div_element_blocks(self.rt, q)
        self.dg_int = poly.integrals(q)  # reference integrals of DG monomials
        self.dg_gram_inv = np.linalg.inv(poly.gram(q))

        from .solver import source_quadrature_order

        self.est_rule = tet_rule(2 * q + 2)
        if rhs_order is None:
            rhs_order = max(2 * q + 4, source_quadrature_order(p))
        self.rhs_rule = tet_rule(rhs_order)
        self.rt_span_est = self.rt.ref.tabulate(self.est_rule.points, "value")
        self.lam_est = _lambda_values(self.est_rule.points)
        self.lam_rhs = _lambda_values(self.rhs_rule.points)
        self.dg_rhs = poly.eval_matrix(q, self.rhs_rule.points)  # (npts, ndg)

        nt = mesh.nt
        self.curl_est = self._curl_cache(self.est_rule)
        self.curl_rhs = self._curl_cache(self.rhs_rule)
        self.J_rhs = np.empty((nt, len(self.rhs_rule.weights), 3))
        step = 4096
        for lo in range(0, nt, step):
            cells = np.arange(lo, min(lo + step, nt))
            pts = self.rt.map_points(cells, self.rhs_rule.points)
            self.J_rhs[cells] = np.asarray(J(pts.reshape(-1, 3))).reshape(
                len(cells), -1, 3)
        if multiplier is not None:
            self.J_eff = np.empty_like(self.J_rhs)
            for lo in range(0, nt, step):
                cells = np.arange(lo, min(lo + step, nt))
                self.J_eff[cells] = self.J_rhs[cells] - multiplier.eval(
                    cells, self.rhs_rule.points, "grad")
        else:
            self.J_eff = self.J_rhs
        # physical hat-function gradients per cell
        ref_g = np.vstack([[-1.0, -1.0, -1.0], np.eye(3)])  # (4, 3)
        self.hat_grad = np.einsum("vc,ncd->nvd", ref_g, self.rt.jac_inv)
        self.absdet = np.abs(self.rt.det)
        kappas = cell_kappas(mesh)
        self.patches = [edge_patch(mesh, e, kappas=kappas) for e in range(mesh.ne)]
        self.edge_vec = mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]
        self.edge_len = np.linalg.norm(self.edge_vec, axis=1)

    def _curl_cache(self, rule):
        out = np.empty((self.mesh.nt, len(rule.weights), 3))
        step = 4096
        for lo in range(0, self.mesh.nt, step):
            cells = np.arange(lo, min(lo + step, self.mesh.nt))
            out[cells] = self.A_h.eval(cells, rule.points, "curl")
        return out

    def local_edge_slots(self, e, cells):
        """(local index of lower endpoint, higher endpoint) per patch cell."""
        a, b = self.mesh.edges[e]
        tets = self.mesh.tets[cells]
        la = np.argmax(tets == a, axis=1)
        lb = np.argmax(tets == b, axis=1)
        return la, lb

    def psi_values(self, e, cells, lam):
        """Edge function values at cached rule points on the patch cells."""
        la, lb = self.local_edge_slots(e, cells)
        hg = self.hat_grad[cells]
        L = self.edge_len[e]
        rows = np.arange(len(cells))
        ga = hg[rows, la]  # (n, 3)
        gb = hg[rows, lb]
        lam_a = lam[la]  # (n, npts)
        lam_b = lam[lb]
        psi = L * (lam_a[:, :, None] * gb[:, None, :] - lam_b[:, :, None] * ga[:, None, :])
        curl_psi = np.empty_like(ga)
        curl_psi[:, 0] = ga[:, 1] * gb[:, 2] - ga[:, 2] * gb[:, 1]
        curl_psi[:, 1] = ga[:, 2] * gb[:, 0] - ga[:, 0] * gb[:, 2]
        curl_psi[:, 2] = ga[:, 0] * gb[:, 1] - ga[:, 1] * gb[:, 0]
        curl_psi *= 2.0 * L
        return psi, curl_psi


@dataclass
class PatchMixedProblem:
    """Dense KKT data of one edge-patch minimization."""

    patch: object
    q: int
    cells: np.ndarray
    free: np.ndarray  # kept global RT dof ids (sorted)
    M: np.ndarray
    D: np.ndarray
    rhs_div: np.ndarray
    G: np.ndarray
    g_norm2: float
    mean_row: Optional[np.ndarray]
    compat: float


@dataclass
class PatchSolution:
    problem: PatchMixedProblem
    sigma: np.ndarray  # values on problem.free
    eta: float

    def as_field(self, ctx):
        """Materialize sigma as a global RT field (zero off the patch)."""
        coeffs = np.zeros(ctx.rt.ndofs)
        coeffs[self.problem.free] = self.sigma
        return DiscreteField(ctx.rt, coeffs)


def _patch_dofs(ctx, patch):
    """Free RT dofs of the patch after normal-trace constraints."""
    mesh, rt = ctx.mesh, ctx.rt
    cells = patch.cells
    pf = rt.layout.per_face
    faces = mesh.tet_faces[cells].ravel()
    uniq, counts = np.unique(faces, return_counts=True)
    boundary = uniq[counts == 1]
    if patch.dirichlet_edge:
        keep = np.isin(boundary, np.asarray(patch.gamma_faces, dtype=np.int64))
        blocked = boundary[~keep]
    else:
        blocked = boundary
    blocked_dofs = (blocked[:, None] * pf + np.arange(pf)).ravel()
    all_dofs = np.unique(rt.cell_dofs[cells])
    free = all_dofs[~np.isin(all_dofs, blocked_dofs)]
    return free


def build_patch_problem(ctx, e, check_compat=True):
    """Assemble the divergence-constrained minimization for one edge."""
    patch = ctx.patches[e]
    cells = patch.cells
    n = len(cells)
    free = _patch_dofs(ctx, patch)
    nfree = len(free)
    cd = ctx.rt.cell_dofs[cells]
    loc = np.searchsorted(free, cd)
    loc[loc >= nfree] = nfree - 1
    loc = np.where(free[loc] == cd, loc, -1)

    M = np.zeros((nfree, nfree))
    ndg = ctx.ndg
    D = np.zeros((n * ndg, nfree))
    rhs_div = np.zeros(n * ndg)
    G = np.zeros(nfree)

    psi_r, curl_psi = ctx.psi_values(e, cells, ctx.lam_rhs)
    psi_e, _ = ctx.psi_values(e, cells, ctx.lam_est)
    wr = ctx.rhs_rule.weights
    we = ctx.est_rule.weights
    absdet = ctx.absdet[cells]

    # divergence datum r = psi.J - curl psi . curl A_h  (projection implicit)
    fr1 = np.einsum("npc,npc->np", psi_r, ctx.J_eff[cells])
    fr2 = np.einsum("nc,npc->np", curl_psi, ctx.curl_rhs[cells])
    fr = fr1 - fr2
    rhs_cell = np.einsum("np,p,pm->nm", fr, wr, ctx.dg_rhs) * absdet[:, None]
    rhs_div[:] = rhs_cell.ravel()
    compat = float(np.einsum("np,p,n->", fr, wr, absdet))

    # target g = psi x curl A_h on the estimation rule
    g_vals = np.cross(psi_e, ctx.curl_est[cells])
    g_norm2 = float(np.einsum("npc,npc,p,n->", g_vals, g_vals, we, absdet))

    # (g, shape)_K via the contravariant pullback: shape . g = span . (J^T g)/det,
    # and |det| cancels against the sign(det) = +1 of the mesh orientation
    ghat = np.einsum("npc,ncd,p->npd", g_vals, ctx.rt.jac[cells], we)
    b_span = np.einsum("jpd,npd->nj", ctx.rt_span_est, ghat)
    Gcell = np.einsum("njl,nj->nl", ctx.rt.C[cells], b_span)

    valid = loc >= 0
    pairs = valid[:, :, None] & valid[:, None, :]
    np.add.at(M, (np.broadcast_to(loc[:, :, None], pairs.shape)[pairs],
                  np.broadcast_to(loc[:, None, :], pairs.shape)[pairs]),
              ctx.mass[cells][pairs])
    nloc = ctx.rt.nloc
    dmask = np.broadcast_to(valid[:, None, :], (n, ndg, nloc))
    drows = np.broadcast_to(
        (np.arange(n) * ndg)[:, None, None] + np.arange(ndg)[None, :, None],
        (n, ndg, nloc))
    dcols = np.broadcast_to(loc[:, None, :], (n, ndg, nloc))
    np.add.at(D, (drows[dmask], dcols[dmask]), ctx.divblk[cells][dmask])
    np.add.at(G, loc[valid], Gcell[valid])

    mean_row = None
    if not patch.dirichlet_edge:
        mean_row = (absdet[:, None] * ctx.dg_int[None, :]).ravel()
        # scale of the two (cancelling) contributions, not of their difference
        scale = float(np.einsum("np,p,n->", np.abs(fr1) + np.abs(fr2), wr, absdet))
        if check_compat and abs(compat) > 1e-10 * max(scale, 1e-30):
            raise CompatibilityViolation(
                f"edge {e}: (r,1) = {compat:.3e} vs scale {scale:.3e}"
            )
    return PatchMixedProblem(
        patch, ctx.q, cells, free, M, D, rhs_div, G, g_norm2, mean_row, compat
    )


def solve_patch(problem):
    """Stationarity system of the constrained minimization, solved densely."""
    nf = len(problem.free)
    nc = problem.D.shape[0]
    extra = 1 if problem.mean_row is not None else 0
    size = nf + nc + extra
    K = np.zeros((size, size))
    K[:nf, :nf] = problem.M
    K[:nf, nf:nf + nc] = problem.D.T
    K[nf:nf + nc, :nf] = problem.D
    rhs = np.zeros(size)
    rhs[:nf] = -problem.G
    rhs[nf:nf + nc] = problem.rhs_div
    if extra:
        K[nf:nf + nc, -1] = problem.mean_row
        K[-1, nf:nf + nc] = problem.mean_row
    try:
        x = scipy.linalg.solve(K, rhs, assume_a="sym")
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularPatchSystem(f"edge {problem.patch.edge}: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularPatchSystem(f"edge {problem.patch.edge}: non-finite solution")
    sigma = x[:nf]
    eta2 = float(sigma @ problem.M @ sigma + 2.0 * problem.G @ sigma + problem.g_norm2)
    return PatchSolution(problem, sigma, float(np.sqrt(max(eta2, 0.0))))


@dataclass
class EdgeEstimate:
    edge: int
    eta: float
    osc: float
    c_poincare: float
    c_cont: Optional[float] = None


def _submesh(mesh, cells, dirichlet_faces):
    """Patch submesh with the given parent faces labeled Dirichlet."""
    cells = np.asarray(cells)
    tets = mesh.tets[cells]
    verts, inv = np.unique(tets, return_inverse=True)
    local_tets = inv.reshape(tets.shape)
    gamma = {tuple(mesh.faces[f]) for f in dirichlet_faces}
    vmap = {g: i for i, g in enumerate(verts)}
    labels = {}
    tri = np.sort(local_tets[:, [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]].reshape(-1, 3), axis=1)
    uniq, counts = np.unique(tri, axis=0, return_counts=True)
    for t in uniq[counts == 1]:
        key = tuple(sorted(verts[t]))
        labels[tuple(t)] = "dirichlet" if key in gamma else "neumann"
    return build_topology(mesh.vertices[verts], local_tets, labels)


def h1_star_constant(mesh, h, dirichlet=False, degree=3):
    """sup ||w|| / ||grad w|| over H^1_star via a Lagrange eigensolve, / h.

    dirichlet=False: pure Neumann with zero mean (first nonzero eigenvalue);
    dirichlet=True: zero trace on the faces labeled Dirichlet.
    """
    from .assembly import _q_tensor
    from .quadrature import tet_rule as _tet_rule

    sp_ = FESpace(mesh, LAGRANGE, degree)
    Qg = _q_tensor(LAGRANGE, degree, "grad", LAGRANGE, degree, "grad", 2 * degree)
    rule = _tet_rule(2 * degree + 2)
    span = sp_.ref.tabulate(rule.points, "value")
    Qm = np.einsum("p,ap,bp->ab", rule.weights, span, span)
    n = sp_.ndofs
    A = np.zeros((n, n))
    Mm = np.zeros((n, n))
    absdet = np.abs(sp_.det)
    metric = np.einsum("ndk,nek->nde", sp_.jac_inv, sp_.jac_inv) * absdet[:, None, None]
    Gs = np.einsum("abde,nde->nab", Qg, metric)
    for c in range(mesh.nt):
        dofs = sp_.cell_dofs[c]
        A[np.ix_(dofs, dofs)] += sp_.C[c].T @ Gs[c] @ sp_.C[c]
        Mm[np.ix_(dofs, dofs)] += absdet[c] * sp_.C[c].T @ Qm @ sp_.C[c]
    try:
        if dirichlet:
            idx = np.flatnonzero(~sp_.dirichlet_mask())
            if idx.size == 0:
                raise EigenFailure("no free dofs for the Dirichlet eigenproblem")
            vals = scipy.linalg.eigh(A[np.ix_(idx, idx)], Mm[np.ix_(idx, idx)],
                                     eigvals_only=True, subset_by_index=[0, 0])
            lam = float(vals[0])
        else:
            vals = scipy.linalg.eigh(A, Mm, eigvals_only=True, subset_by_index=[0, 1])
            lam = float(vals[1])
    except scipy.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    if not np.isfinite(lam) or lam <= 0:
        raise EigenFailure(f"nonpositive eigenvalue {lam}")
    return 1.0 / (h * np.sqrt(lam))


def poincare_constant(mesh, patch, mode="eigen"):
    """Patch Poincare constant C_P: `eigen` surrogate or the convex bound 1/pi."""
    if mode == "bound":
        return 1.0 / np.pi
    if mode != "eigen":
        raise ValueError(f"unknown mode {mode!r}")
    sub = _submesh(mesh, patch.cells, patch.gamma_faces if patch.dirichlet_edge else ())
    return h1_star_constant(sub, patch.h, dirichlet=patch.dirichlet_edge)


def edge_estimate(ctx, e, solution, cp_mode="eigen", with_osc=True):
    """Edge estimator value plus the data-oscillation term."""
    patch = ctx.patches[e]
    if not with_osc:
        return EdgeEstimate(int(e), solution.eta, 0.0, 0.0)
    cells = patch.cells
    psi_r, _ = ctx.psi_values(e, cells, ctx.lam_rhs)
    f1 = np.einsum("npc,npc->np", psi_r, ctx.J_rhs[cells])
    wr = ctx.rhs_rule.weights
    rhs = np.einsum("np,p,pm->nm", f1, wr, ctx.dg_rhs)
    coeffs = rhs @ ctx.dg_gram_inv.T
    proj = coeffs @ ctx.dg_rhs.T  # (n, npts)
    resid2 = np.einsum("np,p,n->", (f1 - proj) ** 2, wr, ctx.absdet[cells])
    cp = poincare_constant(ctx.mesh, patch, mode=cp_mode)
    osc = cp * patch.h * float(np.sqrt(max(resid2, 0.0)))
    return EdgeEstimate(int(e), solution.eta, osc, cp)


@dataclass
class EquilibratedFieldSet:
    fields: tuple  # three RT DiscreteFields
    q: int


def assemble_equilibrated_fields(ctx, solutions):
    """S^k = sum over edges of (tau . u^k) sigma, accumulated in edge order."""
    coeffs = [np.zeros(ctx.rt.ndofs) for _ in range(3)]
    for e, sol in enumerate(solutions):
        if sol.problem.q != ctx.q:
            raise DegreeMismatch(f"edge {e} solved at q={sol.problem.q} != {ctx.q}")
        tau = ctx.edge_vec[e] / ctx.edge_len[e]
        for k in range(3):
            w = tau[k]
            if w != 0.0:
                coeffs[k][sol.problem.free] += w * sol.sigma
    return EquilibratedFieldSet(
        tuple(DiscreteField(ctx.rt, c) for c in coeffs), ctx.q
    )


@dataclass
class CellEstimates:
    eta: np.ndarray  # (nt, 3)
    osc: np.ndarray  # (nt, 3)


@dataclass
class CellEstimate:
    cell: int
    eta_k: np.ndarray  # (3,)
    osc_k: np.ndarray  # (3,)


def cell_estimates(ctx, fields):
    """eta_K^k and osc_K^k for all cells at once."""
    mesh = ctx.mesh
    nt = mesh.nt
    eta = np.empty((nt, 3))
    osc = np.empty((nt, 3))
    we, wr = ctx.est_rule.weights, ctx.rhs_rule.weights
    v = mesh.vertices[mesh.tets]
    hK = np.zeros(nt)
    for i, j in LOCAL_EDGES:
        hK = np.maximum(hK, np.linalg.norm(v[:, i] - v[:, j], axis=1))
    step = 4096
    for lo in range(0, nt, step):
        cells = np.arange(lo, min(lo + step, nt))
        curl = ctx.curl_est[cells]
        absdet = ctx.absdet[cells]
        for k in range(3):
            Sk = fields.fields[k].eval(cells, ctx.est_rule.points)
            integ = _CROSS_BASIS[k](curl) + Sk
            eta[cells, k] = np.sqrt(np.einsum("npc,npc,p,n->n", integ, integ, we, absdet))
            divS = fields.fields[k].eval(cells, ctx.rhs_rule.points, "div")
            diff = divS - ctx.J_rhs[cells][:, :, k]
            osc[cells, k] = hK[cells] / np.pi * np.sqrt(
                np.einsum("np,np,p,n->n", diff, diff, wr, absdet))
    return CellEstimates(eta, osc)


def cell_estimate(ctx, fields, cell):
    est = cell_estimates(ctx, fields)
    return CellEstimate(int(cell), est.eta[cell].copy(), est.osc[cell].copy())


@dataclass
class EstimatorTotals:
    eta_edge_raw: float  # (sum eta_l^2)^(1/2)
    eta_edge: float  # sqrt(6) C (sum eta^2 + osc^2)^(1/2)
    eta_cell: float  # C (sum_k (eta_K^k + osc_K^k)^2)^(1/2)
    eta_edge_noosc: float  # sqrt(6) C (sum eta^2)^(1/2)
    eta_cell_noosc: float  # C (sum (eta_K^k)^2)^(1/2)
    osc_edge: float
    osc_cell: float
    c_lift: float


def totals(edge_ests, cells_est, c_lift=1.0):
    eta2 = sum(e.eta**2 for e in edge_ests)
    osc2 = sum(e.osc**2 for e in edge_ests)
    raw = float(np.sqrt(eta2))
    cell2 = float((cells_est.eta**2).sum())
    cell_osc = float(np.sqrt((cells_est.osc**2).sum()))
    mixed2 = float(((cells_est.eta + cells_est.osc) ** 2).sum())
    return EstimatorTotals(
        eta_edge_raw=raw,
        eta_edge=float(np.sqrt(6.0) * c_lift * np.sqrt(eta2 + osc2)),
        eta_cell=float(c_lift * np.sqrt(mixed2)),
        eta_edge_noosc=float(np.sqrt(6.0) * c_lift * raw),
        eta_cell_noosc=float(c_lift * np.sqrt(cell2)),
        osc_edge=float(np.sqrt(osc2)),
        osc_cell=cell_osc,
        c_lift=c_lift,
    )


@dataclass
class EstimateResult:
    edge: list
    cells: CellEstimates
    fields: EquilibratedFieldSet
    totals: EstimatorTotals
    solutions: list = field(repr=False, default=None)


def estimate(A_h, J, q=None, c_lift=1.0, cp_mode="eigen", with_osc=True,
             keep_solutions=False, multiplier=None):
    """Run all edge patches, recombine, and total both estimators."""
    ctx = EstimatorContext(A_h, J, q=q, multiplier=multiplier)
    nthreads = int(os.environ.get("CURLCURL_THREADS", "1") or "1")
    edges = range(ctx.mesh.ne)

    def run(e):
        return solve_patch(build_patch_problem(ctx, e))

    if nthreads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            sols = list(ex.map(run, edges))
    else:
        sols = [run(e) for e in edges]
    ests = [edge_estimate(ctx, e, sols[e], cp_mode=cp_mode, with_osc=with_osc)
            for e in edges]
    fields = assemble_equilibrated_fields(ctx, sols)
    cells = cell_estimates(ctx, fields)
    tot = totals(ests, cells, c_lift=c_lift)
    return EstimateResult(ests, cells, fields, tot,
                          solutions=sols if keep_solutions else None)
