"""Conforming tetrahedral meshes with oriented entities and refinement.

Edges run from lower to higher global vertex id, faces are stored with
sorted vertex triples, and every boundary face carries a Dirichlet or
Neumann label.  Meshes are immutable; refinement builds a new mesh.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ClosureOverflow, InvertedCell, NonConforming, UnlabeledBoundary

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
_LABEL_CODE = {DIRICHLET: 0, NEUMANN: 1}
_CODE_LABEL = {0: DIRICHLET, 1: NEUMANN}

LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LOCAL_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


def signed_volumes(vertices, tets):
    v = vertices[tets]
    return np.linalg.det(v[:, 1:] - v[:, :1]) / 6.0


@dataclass
class BisectionState:
    """Tagged vertex orders driving newest-vertex bisection (Stevenson style)."""

    order: np.ndarray  # (nt, 4) vertex ids; refinement edge is (order[0], order[3])
    tag: np.ndarray  # (nt,) type in {0, 1, 2}


@dataclass
class MeshTopology:
    vertices: np.ndarray  # (nv, 3)
    tets: np.ndarray  # (nt, 4), positive signed volume
    edges: np.ndarray  # (ne, 2), lower id first
    faces: np.ndarray  # (nf, 3), sorted
    tet_edges: np.ndarray  # (nt, 6) into edges, slot k = LOCAL_EDGES[k]
    tet_faces: np.ndarray  # (nt, 4) into faces, slot k = LOCAL_FACES[k]
    face_tets: np.ndarray  # (nf, 2), second entry -1 on the boundary
    face_label: np.ndarray  # (nf,) int8: -1 interior, 0 Dirichlet, 1 Neumann
    edge_tet_ptr: np.ndarray  # CSR over edges
    edge_tet_idx: np.ndarray
    bisection: BisectionState | None = field(default=None, repr=False)

    @property
    def nv(self):
        return len(self.vertices)

    @property
    def nt(self):
        return len(self.tets)

    @property
    def ne(self):
        return len(self.edges)

    @property
    def nf(self):
        return len(self.faces)

    @property
    def boundary_faces(self):
        """Map face id -> label for all labeled boundary faces."""
        ids = np.flatnonzero(self.face_label >= 0)
        return {int(f): _CODE_LABEL[int(self.face_label[f])] for f in ids}

    def edge_tets(self, e):
        return self.edge_tet_idx[self.edge_tet_ptr[e]:self.edge_tet_ptr[e + 1]]

    def edge_tangent(self, e):
        a, b = self.edges[e]
        t = self.vertices[b] - self.vertices[a]
        return t / np.linalg.norm(t)

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    def h_max(self):
        return float(self.edge_lengths().max())

    def cell_volumes(self):
        return signed_volumes(self.vertices, self.tets)

    def boundary_label_map(self):
        """Labels keyed by sorted vertex triples (used by refinement and I/O)."""
        out = {}
        for f, lab in self.boundary_faces.items():
            out[tuple(self.faces[f])] = lab
        return out

    def dirichlet_faces(self):
        return np.flatnonzero(self.face_label == _LABEL_CODE[DIRICHLET])


def build_topology(vertices, tets, boundary_labels=DIRICHLET, bisection=None):
    """Assemble a validated MeshTopology from cells plus boundary labels.

    boundary_labels is either a single label applied to every topological
    boundary face, or a mapping {sorted vertex triple -> label} covering
    exactly the boundary faces.
    """
    vertices = np.ascontiguousarray(np.asarray(vertices, dtype=float).reshape(-1, 3))
    tets = np.ascontiguousarray(np.asarray(tets, dtype=np.int64).reshape(-1, 4))
    if tets.size and (tets.min() < 0 or tets.max() >= len(vertices)):
        raise IndexError("tet vertex index out of range")
    vols = signed_volumes(vertices, tets)
    if np.any(vols <= 0.0):
        bad = int(np.argmin(vols))
        raise InvertedCell(f"tet {bad} has signed volume {vols[bad]:.3e}")

    nt = len(tets)
    pair = tets[:, LOCAL_EDGES]  # (nt, 6, 2)
    pair = np.sort(pair.reshape(-1, 2), axis=1)
    edges, inv = np.unique(pair, axis=0, return_inverse=True)
    tet_edges = inv.reshape(nt, 6).astype(np.int64)

    tri = tets[:, LOCAL_FACES]  # (nt, 4, 3)
    tri = np.sort(tri.reshape(-1, 3), axis=1)
    faces, finv = np.unique(tri, axis=0, return_inverse=True)
    tet_faces = finv.reshape(nt, 4).astype(np.int64)

    nf = len(faces)
    counts = np.bincount(tet_faces.ravel(), minlength=nf)
    if np.any(counts > 2):
        raise NonConforming(f"{int((counts > 2).sum())} faces shared by >2 tets")
    face_tets = np.full((nf, 2), -1, dtype=np.int64)
    order = np.argsort(tet_faces.ravel(), kind="stable")
    fids = tet_faces.ravel()[order]
    cids = order // 4
    first = np.searchsorted(fids, np.arange(nf), side="left")
    last = np.searchsorted(fids, np.arange(nf), side="right")
    face_tets[:, 0] = cids[first]
    two = last - first == 2
    face_tets[two, 1] = cids[last[two] - 1]

    boundary = np.flatnonzero(counts == 1)
    face_label = np.full(nf, -1, dtype=np.int8)
    if isinstance(boundary_labels, str):
        face_label[boundary] = _LABEL_CODE[boundary_labels]
    else:
        keyed = {tuple(sorted(k)): v for k, v in boundary_labels.items()}
        face_keys = [tuple(faces[f]) for f in boundary]
        missing = [k for k in face_keys if k not in keyed]
        if missing:
            raise UnlabeledBoundary(
                f"{len(missing)} boundary faces unlabeled, e.g. {missing[0]}"
            )
        extra = set(keyed) - set(face_keys)
        if extra:
            raise NonConforming(f"labels given for non-boundary faces, e.g. {next(iter(extra))}")
        for f, key in zip(boundary, face_keys):
            face_label[f] = _LABEL_CODE[keyed[key]]

    eidx = np.argsort(tet_edges.ravel(), kind="stable")
    edge_tet_idx = (eidx // 6).astype(np.int64)
    edge_tet_ptr = np.zeros(len(edges) + 1, dtype=np.int64)
    np.cumsum(np.bincount(tet_edges.ravel(), minlength=len(edges)), out=edge_tet_ptr[1:])

    return MeshTopology(
        vertices, tets, edges, faces, tet_edges, tet_faces, face_tets,
        face_label, edge_tet_ptr, edge_tet_idx, bisection,
    )


# ---- structured generation ------------------------------------------------

_KUHN_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))


def _kuhn_cube_tets(corner_ids):
    """Six path tetrahedra of a cube; corner_ids indexed by (i,j,k) bits."""
    tets = []
    for perm in _KUHN_PERMS:
        bits = [0, 0, 0]
        path = [corner_ids[0, 0, 0]]
        for axis in perm:
            bits[axis] = 1
            path.append(corner_ids[bits[0], bits[1], bits[2]])
        # odd permutations give negative volume; swap the middle pair
        parity = (perm[0], perm[1], perm[2]) in ((0, 2, 1), (1, 0, 2), (2, 1, 0))
        if parity:
            path[1], path[2] = path[2], path[1]
        tets.append(path)
    return tets


def grid_mesh(nx, ny, nz, lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0), skip=None,
              label=DIRICHLET):
    """Kuhn-subdivided brick grid; skip(i, j, k) drops individual subcubes."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    dims = np.array([nx + 1, ny + 1, nz + 1])
    xs = [np.linspace(lo[a], hi[a], dims[a]) for a in range(3)]
    vid = np.arange(dims.prod()).reshape(dims)
    X, Y, Z = np.meshgrid(xs[0], xs[1], xs[2], indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    tets = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if skip is not None and skip(i, j, k):
                    continue
                corners = vid[i:i + 2, j:j + 2, k:k + 2]
                tets.extend(_kuhn_cube_tets(corners))
    tets = np.array(tets, dtype=np.int64)
    used = np.unique(tets)
    remap = np.full(len(vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return build_topology(vertices[used], remap[tets], label)


def unit_cube_mesh(n, label=DIRICHLET):
    """Kuhn/Freudenthal mesh of (0,1)^3 with n subdivisions per axis."""
    if n < 1:
        raise ValueError("n >= 1 required")
    return grid_mesh(n, n, n, label=label)


def extrude_triangulation(points2d, triangles, nz, z0=0.0, z1=1.0, label=DIRICHLET):
    """Extrude a 2D triangulation into nz layers of tetrahedra.

    Each prism splits into three tets along the vertex-id staircase, which
    makes neighbouring prisms agree on quad-face diagonals.
    """
    points2d = np.asarray(points2d, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    n2 = len(points2d)
    zs = np.linspace(z0, z1, nz + 1)
    vertices = np.vstack([
        np.column_stack([points2d, np.full(n2, z)]) for z in zs
    ])
    tets = []
    for layer in range(nz):
        lo = layer * n2
        hi = (layer + 1) * n2
        for tri in triangles:
            b0, b1, b2 = (int(v) for v in np.sort(tri))  # staircase on 2D ids
            bb = (b0 + lo, b1 + lo, b2 + lo)
            tt = (b0 + hi, b1 + hi, b2 + hi)
            tets.append((bb[0], bb[1], bb[2], tt[2]))
            tets.append((bb[0], bb[1], tt[1], tt[2]))
            tets.append((bb[0], tt[0], tt[1], tt[2]))
    tets = np.array(tets, dtype=np.int64)
    vols = signed_volumes(vertices, tets)
    flip = vols < 0
    tets[flip, 2], tets[flip, 3] = tets[flip, 3], tets[flip, 2].copy()
    return build_topology(vertices, tets, label)


# ---- geometry -------------------------------------------------------------


@dataclass(frozen=True)
class CellGeometry:
    h: float  # diameter (max edge length)
    rho: float  # diameter of the inscribed ball, 6V/surface
    kappa: float  # h / rho
    volume: float


def geometry_stats(mesh, cell):
    v = mesh.vertices[mesh.tets[cell]]
    vol = float(np.linalg.det(v[1:] - v[:1]) / 6.0)
    if vol <= 0.0:
        raise InvertedCell(f"cell {cell} volume {vol:.3e}")
    h = 0.0
    for i, j in LOCAL_EDGES:
        h = max(h, float(np.linalg.norm(v[i] - v[j])))
    area = 0.0
    for f in LOCAL_FACES:
        a, b, c = v[f[0]], v[f[1]], v[f[2]]
        area += 0.5 * float(np.linalg.norm(np.cross(b - a, c - a)))
    rho = 6.0 * vol / area
    return CellGeometry(h, rho, h / rho, vol)


def cell_kappas(mesh):
    v = mesh.vertices[mesh.tets]
    vols = np.linalg.det(v[:, 1:] - v[:, :1]) / 6.0
    h = np.zeros(len(v))
    for i, j in LOCAL_EDGES:
        h = np.maximum(h, np.linalg.norm(v[:, i] - v[:, j], axis=1))
    area = np.zeros(len(v))
    for f in LOCAL_FACES:
        a, b, c = v[:, f[0]], v[:, f[1]], v[:, f[2]]
        area += 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    rho = 6.0 * vols / area
    return h / rho


# ---- edge patches ----------------------------------------------------------


@dataclass(frozen=True)
class EdgePatch:
    edge: int
    cells: np.ndarray
    h: float  # patch diameter
    kappa: float  # min over patch cells of h_K / rho_K
    dirichlet_edge: bool
    gamma_faces: tuple  # patch boundary faces on the Dirichlet part


def edge_patch(mesh, e, kappas=None):
    cells = np.sort(mesh.edge_tets(e))
    verts = np.unique(mesh.tets[cells])
    xyz = mesh.vertices[verts]
    diff = xyz[:, None, :] - xyz[None, :, :]
    h = float(np.sqrt((diff**2).sum(-1).max()))
    if kappas is None:
        kap = min(geometry_stats(mesh, c).kappa for c in cells)
    else:
        kap = float(np.min(kappas[cells]))
    a, b = mesh.edges[e]
    dirichlet = False
    gamma = []
    dir_code = _LABEL_CODE[DIRICHLET]
    for c in cells:
        for f in mesh.tet_faces[c]:
            if mesh.face_label[f] != dir_code:
                continue
            gamma.append(int(f))
            fv = mesh.faces[f]
            if a in fv and b in fv:
                dirichlet = True
    gamma = tuple(sorted(set(gamma)))
    if not dirichlet:
        gamma = ()
    return EdgePatch(int(e), cells, h, kap, dirichlet, gamma)


# ---- uniform (red) refinement ---------------------------------------------


def refine_uniform(mesh):
    """Split each tet into 8 (Bey), inheriting boundary labels."""
    nv = mesh.nv
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])
    edge_id = {tuple(e): nv + i for i, e in enumerate(mesh.edges)}

    def mid(a, b):
        return edge_id[(a, b) if a < b else (b, a)]

    children = []
    for t in np.sort(mesh.tets, axis=1):
        v0, v1, v2, v3 = (int(x) for x in t)
        m01, m02, m03 = mid(v0, v1), mid(v0, v2), mid(v0, v3)
        m12, m13, m23 = mid(v1, v2), mid(v1, v3), mid(v2, v3)
        children.extend([
            (v0, m01, m02, m03), (v1, m01, m12, m13),
            (v2, m02, m12, m23), (v3, m03, m13, m23),
            (m01, m02, m03, m13), (m01, m02, m12, m13),
            (m02, m03, m13, m23), (m02, m12, m13, m23),
        ])
    children = np.array(children, dtype=np.int64)
    vols = signed_volumes(vertices, children)
    flip = vols < 0
    children[flip, 2], children[flip, 3] = children[flip, 3], children[flip, 2].copy()

    labels = {}
    for key, lab in mesh.boundary_label_map().items():
        a, b, c = key
        mab, mac, mbc = mid(a, b), mid(a, c), mid(b, c)
        for sub in ((a, mab, mac), (b, mab, mbc), (c, mac, mbc), (mab, mac, mbc)):
            labels[tuple(sorted(sub))] = lab
    return build_topology(vertices, children, labels)


# ---- marked-edge bisection --------------------------------------------------


def _children(order, tag, z):
    x0, x1, x2, x3 = order
    if tag == 0:
        return (x0, z, x1, x2), (x3, z, x2, x1), 1
    return (x0, z, x1, x2), (x3, z, x1, x2), (tag + 1) % 3


def refine_bisection(mesh, marked, max_depth=64):
    """Bisect every marked tet at least once; recursive conforming closure."""
    marked = np.unique(np.asarray(list(marked), dtype=np.int64))
    if marked.size == 0:
        return mesh
    if mesh.bisection is None:
        order = [tuple(int(v) for v in row) for row in np.sort(mesh.tets, axis=1)]
        tag = [0] * mesh.nt
    else:
        order = [tuple(int(v) for v in row) for row in mesh.bisection.order]
        tag = [int(t) for t in mesh.bisection.tag]
    alive = [True] * mesh.nt
    verts = [tuple(map(float, p)) for p in mesh.vertices]
    labels = dict(mesh.boundary_label_map())
    midpoint = {}

    edge_map = {}
    for t, o in enumerate(order):
        for i, j in LOCAL_EDGES:
            key = (o[i], o[j]) if o[i] < o[j] else (o[j], o[i])
            edge_map.setdefault(key, set()).add(t)

    def ref_edge(t):
        o = order[t]
        return (o[0], o[3]) if o[0] < o[3] else (o[3], o[0])

    def bisect_ring(E):
        ring = sorted(edge_map.get(E, ()))
        a, b = E
        if E in midpoint:
            z = midpoint[E]
        else:
            z = len(verts)
            verts.append(tuple(0.5 * (np.array(verts[a]) + np.array(verts[b]))))
            midpoint[E] = z
        # split labeled faces containing E once
        for t in ring:
            o = order[t]
            rest = [v for v in o if v not in E]
            for c in rest:
                key = tuple(sorted((a, b, c)))
                if key in labels:
                    lab = labels.pop(key)
                    labels[tuple(sorted((a, z, c)))] = lab
                    labels[tuple(sorted((z, b, c)))] = lab
        for t in ring:
            o, g = order[t], tag[t]
            c1, c2, ntag = _children(o, g, z)
            alive[t] = False
            for i, j in LOCAL_EDGES:
                key = (o[i], o[j]) if o[i] < o[j] else (o[j], o[i])
                edge_map[key].discard(t)
            for child in (c1, c2):
                tc = len(order)
                order.append(child)
                tag.append(ntag)
                alive.append(True)
                for i, j in LOCAL_EDGES:
                    key = (child[i], child[j]) if child[i] < child[j] else (child[j], child[i])
                    edge_map.setdefault(key, set()).add(tc)

    def refine(t, depth):
        if depth > max_depth:
            raise ClosureOverflow(f"bisection closure exceeded depth {max_depth}")
        while alive[t]:
            E = ref_edge(t)
            ring = sorted(edge_map.get(E, ()))
            pending = [s for s in ring if ref_edge(s) != E]
            if not pending:
                bisect_ring(E)
                return
            for s in pending:
                if alive[s]:
                    refine(s, depth + 1)

    for t in marked:
        if alive[t]:
            refine(int(t), 0)

    live = [i for i, a in enumerate(alive) if a]
    new_order = np.array([order[i] for i in live], dtype=np.int64)
    new_tag = np.array([tag[i] for i in live], dtype=np.int64)
    tets = np.sort(new_order, axis=1)
    vertices = np.array(verts)
    vols = signed_volumes(vertices, tets)
    flip = vols < 0
    tets[flip, 2], tets[flip, 3] = tets[flip, 3], tets[flip, 2].copy()
    return build_topology(
        vertices, tets, labels, bisection=BisectionState(new_order, new_tag)
    )
