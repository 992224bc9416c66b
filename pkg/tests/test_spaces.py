"""Global spaces: dof counts, continuity, constraints, projections."""

import numpy as np
import pytest

from curlcurl.errors import IncompatibleQuery
from curlcurl.mesh import build_topology, unit_cube_mesh
from curlcurl.quadrature import tet_rule
from curlcurl.spaces import (
    DiscreteField,
    FESpace,
    evaluate_field,
    interpolate,
    l2_project_piecewise,
)

REF_VERTS = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def face_samples(mesh, f, n=4):
    rng = np.random.default_rng(11)
    b = rng.dirichlet((1.5, 1.5, 1.5), size=n)
    tri = mesh.faces[f]
    return b @ mesh.vertices[tri]


def ref_coords(space, cell, x):
    return (x - space.origin[cell]) @ space.jac_inv[cell].T


def test_global_dof_counts():
    m1 = unit_cube_mesh(1)
    assert FESpace(m1, "nedelec", 0).ndofs == 19  # one per edge

    lag = FESpace(m1, "lagrange", 1)
    assert lag.ndofs == 8
    assert lag.dirichlet_mask().all()  # every vertex sits on the boundary

    verts = np.vstack([REF_VERTS, [[1.0, 1.0, 1.0]]])
    glued = build_topology(verts, [[0, 1, 2, 3], [1, 2, 3, 4]])
    rt = FESpace(glued, "raviart_thomas", 0)
    assert rt.ndofs == 7
    shared = set(rt.cell_dofs[0]) & set(rt.cell_dofs[1])
    assert len(shared) == 1  # the interior face dof is shared


@pytest.mark.parametrize("family,degree,what,continuity", [
    ("nedelec", 0, "value", "tangential"),
    ("nedelec", 1, "value", "tangential"),
    ("nedelec", 2, "value", "tangential"),
    ("nedelec", 3, "value", "tangential"),
    ("raviart_thomas", 0, "value", "normal"),
    ("raviart_thomas", 1, "value", "normal"),
    ("raviart_thomas", 2, "value", "normal"),
    ("raviart_thomas", 3, "value", "normal"),
    ("lagrange", 1, "value", "full"),
    ("lagrange", 2, "value", "full"),
    ("lagrange", 3, "value", "full"),
])
def test_interelement_continuity(family, degree, what, continuity):
    mesh = unit_cube_mesh(2)
    sp = FESpace(mesh, family, degree)
    rng = np.random.default_rng(degree + 17)
    u = DiscreteField(sp, rng.standard_normal(sp.ndofs))
    interior = np.flatnonzero(mesh.face_label == -1)
    picks = rng.choice(interior, size=10, replace=False)
    worst = 0.0
    for f in picks:
        c0, c1 = mesh.face_tets[f]
        X = face_samples(mesh, f)
        tri = mesh.faces[f]
        n = np.cross(mesh.vertices[tri[1]] - mesh.vertices[tri[0]],
                     mesh.vertices[tri[2]] - mesh.vertices[tri[0]])
        n /= np.linalg.norm(n)
        v0 = u.eval([c0], ref_coords(sp, c0, X))[0]
        v1 = u.eval([c1], ref_coords(sp, c1, X))[0]
        if continuity == "tangential":
            jump = (v0 - v1) - np.outer((v0 - v1) @ n, n)
        elif continuity == "normal":
            jump = (v0 - v1) @ n
        else:
            jump = v0 - v1
        worst = max(worst, np.abs(jump).max())
    assert worst < 1e-10


def test_constrained_dofs_match_boundary_entities():
    mesh = unit_cube_mesh(2)
    sp = FESpace(mesh, "nedelec", 1)
    mask = sp.dirichlet_mask()
    kinds, ids = sp.dof_entities()
    # every constrained edge dof belongs to an edge of a boundary face
    bfaces = mesh.dirichlet_faces()
    bedges = set()
    for f in bfaces:
        a, b, c = mesh.faces[f]
        for pair in ((a, b), (a, c), (b, c)):
            key = np.flatnonzero((mesh.edges[:, 0] == pair[0])
                                 & (mesh.edges[:, 1] == pair[1]))
            bedges.update(key.tolist())
    for d in np.flatnonzero(mask):
        if kinds[d] == 1:
            assert ids[d] in bedges
        elif kinds[d] == 2:
            assert ids[d] in set(bfaces.tolist())


def test_nedelec_edge_dof_duality():
    """Unit coefficient on edge l integrates to delta along other edges."""
    mesh = unit_cube_mesh(1)
    sp = FESpace(mesh, "nedelec", 0)
    rng = np.random.default_rng(0)
    for e in rng.choice(mesh.ne, size=4, replace=False):
        u = DiscreteField(sp, np.eye(sp.ndofs)[e])
        for e2 in rng.choice(mesh.ne, size=6, replace=False):
            a, b = mesh.edges[e2]
            cell = mesh.edge_tets(e2)[0]
            s = np.linspace(0, 1, 9)[1:-1][:, None]
            X = mesh.vertices[a] * (1 - s) + mesh.vertices[b] * s
            tau = mesh.edge_tangent(e2)
            vals = u.eval([cell], ref_coords(sp, cell, X))[0] @ tau
            # mean tangential trace equals the Kronecker delta
            mean = vals.mean()
            assert mean == pytest.approx(1.0 if e2 == e else 0.0, abs=1e-10)


def test_constant_field_in_n0_is_curl_free():
    mesh = unit_cube_mesh(2)
    sp = FESpace(mesh, "nedelec", 0)
    c = np.array([0.3, -1.2, 0.7])
    u = interpolate(sp, lambda x: np.tile(c, (len(x), 1)))
    pts = np.array([[0.25, 0.25, 0.25], [0.1, 0.2, 0.3]])
    vals = u.eval(np.arange(mesh.nt), pts)
    assert np.abs(vals - c[None, None, :]).max() < 1e-12
    curls = u.eval(np.arange(mesh.nt), pts, "curl")
    assert np.abs(curls).max() < 1e-11


def test_rt_interpolant_of_identity_has_div_three():
    mesh = unit_cube_mesh(2)
    sp = FESpace(mesh, "raviart_thomas", 0)
    u = interpolate(sp, lambda x: x)
    pts = np.array([[0.25, 0.25, 0.25]])
    divs = u.eval(np.arange(mesh.nt), pts, "div")
    assert np.abs(divs - 3.0).max() < 1e-10


def test_commuting_property():
    """div(RT interpolant of v) equals the DG projection of div v cellwise."""
    mesh = unit_cube_mesh(2)
    for q in (0, 1, 2):
        sp = FESpace(mesh, "raviart_thomas", q)

        def v(x):
            out = np.stack([
                x[:, 0] ** 2 - 2 * x[:, 1] * x[:, 2],
                x[:, 1] ** 2 + x[:, 0],
                x[:, 2] * x[:, 1] - x[:, 0] ** 2,
            ], axis=1)
            return out

        def div_v(x):
            return 2 * x[:, 0] + 2 * x[:, 1] + x[:, 1]

        u = interpolate(sp, v)
        proj = l2_project_piecewise(div_v, q, mesh)
        rule = tet_rule(2 * q + 2)
        du = u.eval(np.arange(mesh.nt), rule.points, "div")
        dp = proj.eval(np.arange(mesh.nt), rule.points)
        assert np.abs(du - dp).max() < 1e-8


def test_projection_values():
    ref = build_topology(REF_VERTS, [[0, 1, 2, 3]])
    pc = l2_project_piecewise(lambda x: np.full(len(x), 3.25), 2, ref)
    pts = np.array([[0.2, 0.2, 0.2], [0.6, 0.1, 0.1]])
    assert np.abs(pc.eval([0], pts)[0] - 3.25).max() < 1e-12

    p0 = l2_project_piecewise(lambda x: x[:, 0], 0, ref)
    assert p0.eval([0], pts[:1])[0][0] == pytest.approx(0.25, abs=1e-13)


def test_projection_orthogonality():
    mesh = unit_cube_mesh(1)
    q = 1

    def f(x):
        return np.sin(np.pi * x[:, 0]) * x[:, 1]

    proj = l2_project_piecewise(f, q, mesh, order=2 * q + 6)
    rule = tet_rule(2 * q + 6)
    vals_f = np.asarray(f(FESpace(mesh, "dg", q).map_points(
        np.arange(mesh.nt), rule.points).reshape(-1, 3))).reshape(mesh.nt, -1)
    vals_p = proj.eval(np.arange(mesh.nt), rule.points)
    dg = FESpace(mesh, "dg", q)
    base = dg.ref.tabulate(rule.points, "value")  # (nbasis, npts)
    resid = np.einsum("np,p,bp->nb", vals_f - vals_p, rule.weights, base)
    assert np.abs(resid).max() < 1e-12


def test_projection_decay_bound():
    """|| v - pi_q v || <= (h/pi)^(q+1) |v|_{H^(q+1)} for sines on one tet."""
    ref = build_topology(REF_VERTS, [[0, 1, 2, 3]])
    rng = np.random.default_rng(2)
    rule = tet_rule(14)
    from curlcurl.mesh import geometry_stats

    h = geometry_stats(ref, 0).h
    prev = None
    for trial in range(10):
        k = rng.uniform(0.5, 2.0, size=3)
        amp = rng.uniform(0.5, 2.0)
        phase = rng.uniform(0, np.pi)
        kn = np.linalg.norm(k)

        def v(x, k=k, amp=amp, phase=phase):
            return amp * np.sin(x @ k + phase)

        for q in (0, 1, 2):
            proj = l2_project_piecewise(v, q, ref, order=14)
            vals = v(rule.points)
            pv = proj.eval([0], rule.points)[0]
            err = np.sqrt(((vals - pv) ** 2 * rule.weights).sum())
            # |v|_{H^{q+1}}^2 = sum_{|a|=q+1} multinomial * k^(2a) * ||trig||^2
            from math import comb, factorial

            trig = amp * np.cos(rule.points @ k + phase) if q % 2 == 0 \
                else -amp * np.sin(rule.points @ k + phase)
            tnorm2 = float((trig**2 * rule.weights).sum())
            semi2 = 0.0
            m = q + 1
            for a in range(m + 1):
                for b in range(m + 1 - a):
                    c = m - a - b
                    mult = factorial(m) // (factorial(a) * factorial(b) * factorial(c))
                    semi2 += mult * (k[0] ** (2 * a)) * (k[1] ** (2 * b)) * (k[2] ** (2 * c))
            semi = np.sqrt(semi2 * tnorm2)
            assert err <= (h / np.pi) ** (q + 1) * semi * (1 + 1e-10)


def test_incompatible_query():
    mesh = unit_cube_mesh(1)
    u = DiscreteField(FESpace(mesh, "nedelec", 0), np.zeros(19))
    with pytest.raises(IncompatibleQuery):
        evaluate_field(u, 0, np.array([[0.2, 0.2, 0.2]]), "div")
    r = DiscreteField(FESpace(mesh, "raviart_thomas", 0),
                      np.zeros(FESpace(mesh, "raviart_thomas", 0).ndofs))
    with pytest.raises(IncompatibleQuery):
        evaluate_field(r, 0, np.array([[0.2, 0.2, 0.2]]), "curl")
