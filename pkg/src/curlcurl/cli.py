"""Command-line driver: single solves, h/p-convergence studies, adaptivity.

Emits CSV with 12-significant-digit floats; exit code 0 on success, 2 on
validation errors, 3 on solver failures.
"""

import argparse
import sys

import numpy as np

from .adaptivity import adapt_loop
from .cases import case_by_name
from .equilibration import estimate
from .errors import CurlCurlError, SingularSystem
from .medit import read_medit
from .mesh import DIRICHLET, NEUMANN, refine_uniform
from .solver import assemble_curlcurl_system, energy_error, reference_solution, \
    solve_galerkin

SINGLE_HEADER = "h,p,nr_dofs,err,etae_raw,etae,etac,osce,oscc,eff_edge,eff_cell"
ADAPT_HEADER = "iter,nr_dofs,h_max,err,etae,etac,eff_edge,eff_cell"


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.12g}"


def build_parser():
    ap = argparse.ArgumentParser(
        prog="curlcurl",
        description="curl-curl solves with equilibrated a posteriori estimators",
    )
    ap.add_argument("--case", required=True,
                    help="cube | ltype-3pi4 | ltype-pi2 | ltype-pi8 | fichera | poly")
    ap.add_argument("--mode", default="single",
                    choices=["single", "hconv", "pconv", "adapt"])
    ap.add_argument("--p", type=int, default=0, help="Nedelec degree")
    ap.add_argument("--n", type=int, default=2, help="initial mesh resolution")
    ap.add_argument("--levels", type=int, default=3, help="hconv: uniform levels")
    ap.add_argument("--pmax", type=int, default=3, help="pconv: largest degree")
    ap.add_argument("--driver", default="edge", choices=["edge", "cell"])
    ap.add_argument("--theta", type=float, default=0.1, help="bulk parameter")
    ap.add_argument("--budget-dofs", type=int, default=30000)
    ap.add_argument("--clift", type=float, default=1.0,
                    help="lifting constant C_L (1 in convex domains)")
    ap.add_argument("--osc", action="store_true",
                    help="include oscillation terms in the reported totals")
    ap.add_argument("--cp-mode", default=None, choices=["eigen", "bound"],
                    help="Poincare constant mode (default: eigen, bound in adapt)")
    ap.add_argument("--mesh-in", default=None, help="MEDIT mesh overriding the case mesh")
    ap.add_argument("--dirichlet-refs", default=None,
                    help="comma-separated triangle refs mapped to Dirichlet")
    ap.add_argument("--out", default="-", help="output CSV path (default stdout)")
    return ap


def _validate(args):
    if args.p < 0:
        raise ValueError("p must be >= 0")
    if not 0.0 < args.theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if args.budget_dofs <= 0:
        raise ValueError("budget must be positive")
    if args.n < 1 or args.levels < 1 or args.pmax < 0:
        raise ValueError("resolution parameters must be positive")


def _load_mesh(args):
    if args.mesh_in is None:
        return None
    refs = None
    if args.dirichlet_refs:
        refs = {int(r): DIRICHLET for r in args.dirichlet_refs.split(",")}
        refs.setdefault(0, NEUMANN)
    return read_medit(args.mesh_in, refs)


def _run_one(case, mesh, p, clift, with_osc, cp_mode):
    sol = solve_galerkin(assemble_curlcurl_system(mesh, p, case.J))
    res = estimate(sol.field, case.J, c_lift=clift, cp_mode=cp_mode,
                   with_osc=True, multiplier=sol.multiplier)
    if case.curl_A is not None:
        err = energy_error(sol.field, case.curl_A)
    else:
        err = energy_error(sol.field, reference_solution(mesh, p, case.J).field)
    t = res.totals
    etae = t.eta_edge if with_osc else t.eta_edge_noosc
    etac = t.eta_cell if with_osc else t.eta_cell_noosc
    return [
        mesh.h_max(), p, sol.nr_dofs, err, t.eta_edge_raw, etae, etac,
        t.osc_edge, t.osc_cell, etae / err if err > 0 else np.inf,
        etac / err if err > 0 else np.inf,
    ]


def run(args, out):
    case = case_by_name(args.case)
    cp_default = "bound" if args.mode == "adapt" else "eigen"
    cp_mode = args.cp_mode or cp_default
    rows = []
    if args.mode in ("single", "hconv", "pconv"):
        mesh0 = _load_mesh(args) or case.mesh_builder(args.n)
        if args.mode == "single":
            rows.append(_run_one(case, mesh0, args.p, args.clift, args.osc, cp_mode))
        elif args.mode == "hconv":
            mesh = mesh0
            for _ in range(args.levels):
                rows.append(_run_one(case, mesh, args.p, args.clift, args.osc, cp_mode))
                mesh = refine_uniform(mesh)
        else:
            for p in range(args.pmax + 1):
                rows.append(_run_one(case, mesh0, p, args.clift, args.osc, cp_mode))
        print(SINGLE_HEADER, file=out)
        for row in rows:
            print(",".join(_fmt(x) for x in row), file=out)
        return 0

    # adapt
    mesh = _load_mesh(args)
    records, _ = adapt_loop(
        case, args.p, driver=args.driver, theta=args.theta,
        budget_dofs=args.budget_dofs, initial_resolution=args.n,
        c_lift=args.clift, cp_mode=cp_mode, mesh=mesh,
    )
    print(ADAPT_HEADER, file=out)
    for r in records:
        row = [r.iteration, r.nr_dofs, r.h_max, r.err, r.eta_edge, r.eta_cell,
               r.eff_edge, r.eff_cell]
        print(",".join(_fmt(x) for x in row), file=out)
    return 0


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        _validate(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.out == "-":
            return run(args, sys.stdout)
        with open(args.out, "w") as fh:
            return run(args, fh)
    except SingularSystem as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CurlCurlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
