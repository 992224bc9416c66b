"""Galerkin solver for the divergence-constrained curl-curl problem.

The saddle-point system couples the Nedelec(p) curl-curl stiffness with the
gradient of a Lagrange(p+1) multiplier enforcing the discrete gauge; the
multiplier vanishes whenever the source is orthogonal to gradients.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import curl_curl_matrix, load_vector, value_grad_matrix
from .elements import LAGRANGE, NEDELEC
from .errors import SingularSystem
from .quadrature import tet_rule
from .spaces import DiscreteField, FESpace

# above this many total unknowns the reference solve switches to CG
# (the indefinite factorization's fill is prohibitive on one desk core)
_DIRECT_LIMIT = 20_000


@dataclass
class SaddleSystem:
    ned: FESpace
    lag: FESpace
    K: sp.csr_matrix
    B: sp.csr_matrix  # (v, grad q), rows Lagrange, cols Nedelec
    rhs: np.ndarray
    free_n: np.ndarray
    free_l: np.ndarray

    @property
    def nr_dofs(self):
        return len(self.free_n)


@dataclass
class GalerkinSolution:
    field: DiscreteField  # A_h in Nedelec(p)
    multiplier: DiscreteField  # Lagrange(p+1)
    residual_rel: float
    nr_dofs: int

    @property
    def space(self):
        return self.field.space


def source_quadrature_order(p):
    """Shared rule order for all source-term integrals at Nedelec degree p.

    The same rule feeds the load vector and the estimator's patch data, so
    the edge-patch compatibility integrals cancel against the Galerkin
    orthogonality to round-off rather than to quadrature error.  The margin
    over the exactness requirement 2(p+2)+4 keeps the gauge multiplier of
    smooth non-polynomial sources below 1e-8 at desk mesh sizes.
    """
    return 2 * (p + 1) + 8


def assemble_curlcurl_system(mesh, p, J, rhs_order=None):
    """Stiffness, gauge coupling and load for Nedelec(p) with A x n = 0 on Gamma_D."""
    ned = FESpace(mesh, NEDELEC, p)
    lag = FESpace(mesh, LAGRANGE, p + 1)
    K = curl_curl_matrix(ned)
    B = value_grad_matrix(ned, lag)
    order = rhs_order if rhs_order is not None else source_quadrature_order(p)
    rhs = load_vector(ned, J, order)
    free_n = np.flatnonzero(~ned.dirichlet_mask())
    free_l = np.flatnonzero(~lag.dirichlet_mask())
    return SaddleSystem(ned, lag, K, B, rhs, free_n, free_l)


def solve_galerkin(system, tol_lin=1e-9):
    """Direct symmetric-indefinite solve of the saddle-point system."""
    Kff = system.K[system.free_n][:, system.free_n]
    Bf = system.B[system.free_l][:, system.free_n]
    nn, nl = len(system.free_n), len(system.free_l)
    S = sp.bmat([[Kff, Bf.T], [Bf, None]], format="csr")
    b = np.concatenate([system.rhs[system.free_n], np.zeros(nl)])
    # symmetric equilibration keeps high-degree row norms near one
    d = np.sqrt(np.abs(S).max(axis=1).toarray().ravel())
    d[d <= 0] = 1.0
    Dinv = sp.diags(1.0 / d)
    Ss = (Dinv @ S @ Dinv).tocsc()
    bs = b / d
    try:
        lu = spla.splu(Ss)
        y = lu.solve(bs)
    except (RuntimeError, ValueError) as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(y)):
        raise SingularSystem("factorization produced non-finite values")
    scale = max(np.linalg.norm(bs), 1e-30)
    res = np.linalg.norm(Ss @ y - bs) / scale
    for _ in range(3):  # iterative refinement tightens Galerkin orthogonality
        if res <= 1e-15:
            break
        y += lu.solve(bs - Ss @ y)
        res = np.linalg.norm(Ss @ y - bs) / scale
    x = y / d
    if res > max(tol_lin, 1e-7):
        raise SingularSystem(f"direct solve residual {res:.2e}")
    a = np.zeros(system.ned.ndofs)
    a[system.free_n] = x[:nn]
    lam = np.zeros(system.lag.ndofs)
    lam[system.free_l] = x[nn:]
    return GalerkinSolution(
        DiscreteField(system.ned, a), DiscreteField(system.lag, lam), res, nn
    )


def _solve_cg(system, tol):
    """Memory-light solve of K a = b on the gradient quotient (curl is unique).

    Valid when the load is orthogonal to discrete gradients, which holds for
    the shipped sources; the returned coefficients carry an uncontrolled
    gradient component that no curl-based quantity sees.
    """
    Kff = (system.K[system.free_n][:, system.free_n]).tocsr()
    b = system.rhs[system.free_n]
    d = Kff.diagonal()
    d[d <= 0] = 1.0
    M = sp.diags(1.0 / d)
    x, info = spla.cg(Kff, b, rtol=tol, atol=0.0, maxiter=40000, M=M)
    if info != 0:
        raise SingularSystem(f"cg did not converge (info={info})")
    res = np.linalg.norm(Kff @ x - b) / max(np.linalg.norm(b), 1e-30)
    a = np.zeros(system.ned.ndofs)
    a[system.free_n] = x
    lam = np.zeros(system.lag.ndofs)
    return GalerkinSolution(
        DiscreteField(system.ned, a), DiscreteField(system.lag, lam), res, len(b)
    )


def _estimate_saddle_size(mesh, p):
    ned_dofs = mesh.ne * (p + 1) + mesh.nf * p * (p + 1) \
        + mesh.nt * (p - 1) * p * (p + 1) // 2
    q = p + 1
    lag_dofs = mesh.nv + mesh.ne * (q - 1) + mesh.nf * (q - 1) * (q - 2) // 2 \
        + mesh.nt * (q - 1) * (q - 2) * (q - 3) // 6
    return ned_dofs + lag_dofs


def reference_solution(mesh, p, J, rhs_order=None, tol_lin=1e-9):
    """Galerkin solve at degree p+2 on the same mesh (error surrogate)."""
    if _estimate_saddle_size(mesh, p + 2) > _DIRECT_LIMIT:
        # iterative path: only the curl-curl block and the load are needed
        ned = FESpace(mesh, NEDELEC, p + 2)
        K = curl_curl_matrix(ned)
        order = rhs_order if rhs_order is not None else source_quadrature_order(p + 2)
        rhs = load_vector(ned, J, order)
        free_n = np.flatnonzero(~ned.dirichlet_mask())
        lag = FESpace(mesh, LAGRANGE, 1)  # placeholder for the zero multiplier
        system = SaddleSystem(ned, lag, K, None, rhs, free_n,
                              np.array([], dtype=np.int64))
        return _solve_cg(system, tol=1e-7)
    system = assemble_curlcurl_system(mesh, p + 2, J, rhs_order=rhs_order)
    return solve_galerkin(system, tol_lin=tol_lin)


def energy_error(field, reference, order=None):
    """|| curl(reference - field) ||_Omega by cellwise quadrature.

    reference is either a DiscreteField on the same mesh or a callable
    returning the analytic curl at physical points.
    """
    space = field.space
    deg = space.degree + 1
    if isinstance(reference, DiscreteField):
        deg = max(deg, reference.space.degree + 1)
    rule = tet_rule(order if order is not None else 2 * deg + 4)
    total = 0.0
    nt = space.mesh.nt
    step = 4096
    for lo in range(0, nt, step):
        cells = np.arange(lo, min(lo + step, nt))
        ch = field.eval(cells, rule.points, "curl")
        if isinstance(reference, DiscreteField):
            cr = reference.eval(cells, rule.points, "curl")
        else:
            pts = space.map_points(cells, rule.points)
            cr = np.asarray(reference(pts.reshape(-1, 3))).reshape(ch.shape)
        diff = ((cr - ch) ** 2).sum(axis=2)
        total += float(np.einsum("np,p,n->", diff, rule.weights,
                                 np.abs(space.det[cells])))
    return float(np.sqrt(total))


def curl_norm(field, order=None):
    """|| curl field ||_Omega."""
    return energy_error(field, lambda x: np.zeros((len(x), 3)), order=order)
