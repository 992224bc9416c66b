"""Bulk-chasing marking and the adaptive refine-solve-estimate loop."""

from dataclasses import dataclass

import numpy as np

from .equilibration import estimate
from .mesh import refine_bisection
from .solver import (
    assemble_curlcurl_system,
    energy_error,
    reference_solution,
    solve_galerkin,
)


@dataclass
class ConvergenceRecord:
    iteration: int
    nr_dofs: int
    h_max: float
    err: float
    eta_edge_raw: float
    eta_edge: float  # sqrt(6) * C_lift * (sum eta_l^2)^(1/2), the plotted quantity
    eta_cell: float  # C_lift * (sum_K sum_k (eta_K^k)^2)^(1/2)
    osc_edge: float
    osc_cell: float

    @property
    def eff_edge(self):
        return self.eta_edge / self.err

    @property
    def eff_cell(self):
        return self.eta_cell / self.err


def dorfler_mark(values, theta):
    """Smallest prefix (by decreasing eta) with sum eta^2 >= theta * total.

    Ties are broken by entity id ascending; entity ids are returned sorted.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta = {theta} outside (0, 1)")
    values = np.asarray(values, dtype=float)
    total = float((values**2).sum())
    if total <= 0.0:
        return np.array([], dtype=np.int64)
    order = np.argsort(-values, kind="stable")
    csum = np.cumsum(values[order] ** 2)
    m = int(np.searchsorted(csum, theta * total - 1e-14 * total)) + 1
    return np.sort(order[:m])


def _edge_to_cell_values(mesh, edge_ests):
    """Distribute each eta_l^2 evenly over the patch cells (marking is cellwise)."""
    acc = np.zeros(mesh.nt)
    for est in edge_ests:
        cells = mesh.edge_tets(est.edge)
        acc[cells] += est.eta**2 / len(cells)
    return np.sqrt(acc)


def adapt_loop(case, p, driver="edge", theta=0.1, budget_dofs=None,
               max_iters=None, initial_resolution=1, c_lift=1.0,
               cp_mode="bound", with_osc=True, q=None,
               mesh=None, on_record=None):
    """Solve-estimate-mark-bisect until the dof or iteration budget is hit.

    Exhausting the budget is the normal termination.  err uses the analytic
    solution when the case provides one, otherwise a degree-(p+2) reference
    solve on the same mesh.
    """
    if budget_dofs is None and max_iters is None:
        raise ValueError("either budget_dofs or max_iters is required")
    if mesh is None:
        mesh = case.mesh_builder(initial_resolution)
    records = []
    it = 0
    while True:
        sol = solve_galerkin(assemble_curlcurl_system(mesh, p, case.J))
        res = estimate(sol.field, case.J, q=q, c_lift=c_lift, cp_mode=cp_mode,
                       with_osc=with_osc, multiplier=sol.multiplier)
        if case.curl_A is not None:
            err = energy_error(sol.field, case.curl_A)
        else:
            ref = reference_solution(mesh, p, case.J)
            err = energy_error(sol.field, ref.field)
        t = res.totals
        rec = ConvergenceRecord(
            iteration=it,
            nr_dofs=sol.nr_dofs,
            h_max=mesh.h_max(),
            err=err,
            eta_edge_raw=t.eta_edge_raw,
            eta_edge=t.eta_edge_noosc,
            eta_cell=t.eta_cell_noosc,
            osc_edge=t.osc_edge,
            osc_cell=t.osc_cell,
        )
        records.append(rec)
        if on_record is not None:
            on_record(rec)
        it += 1
        if budget_dofs is not None and sol.nr_dofs >= budget_dofs:
            break
        if max_iters is not None and it >= max_iters:
            break
        if driver == "edge":
            values = _edge_to_cell_values(mesh, res.edge)
        elif driver == "cell":
            values = np.sqrt((res.cells.eta**2).sum(axis=1))
        else:
            raise ValueError(f"unknown driver {driver!r}")
        marked = dorfler_mark(values, theta)
        if marked.size == 0:
            break
        mesh = refine_bisection(mesh, marked)
    return records, mesh
