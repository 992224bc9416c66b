"""ASCII MEDIT (.mesh) reader/writer for the tetrahedral subset.

Supported sections: MeshVersionFormatted, Dimension, Vertices, Tetrahedra,
Triangles, End.  Triangle reference integers map to boundary labels through
a caller-supplied table (default: everything Dirichlet).
"""

import numpy as np

from .errors import ParseError, UnmappedReference
from .mesh import DIRICHLET, NEUMANN, build_topology

_DEFAULT_REFS = {DIRICHLET: 1, NEUMANN: 2}


def write_medit(mesh, path, label_refs=None):
    refs = dict(_DEFAULT_REFS)
    if label_refs:
        refs.update(label_refs)
    lines = ["MeshVersionFormatted 2", "", "Dimension 3", ""]
    lines.append("Vertices")
    lines.append(str(mesh.nv))
    for p in mesh.vertices:
        lines.append(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g} 0")
    lines.append("")
    lines.append("Tetrahedra")
    lines.append(str(mesh.nt))
    for t in mesh.tets:
        lines.append(f"{t[0] + 1} {t[1] + 1} {t[2] + 1} {t[3] + 1} 0")
    boundary = mesh.boundary_faces
    lines.append("")
    lines.append("Triangles")
    lines.append(str(len(boundary)))
    for f, lab in sorted(boundary.items()):
        a, b, c = mesh.faces[f]
        lines.append(f"{a + 1} {b + 1} {c + 1} {refs[lab]}")
    lines.append("")
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class _Tokens:
    def __init__(self, path):
        self.items = []  # (token, line number)
        with open(path) as fh:
            for ln, line in enumerate(fh, start=1):
                for tok in line.split():
                    self.items.append((tok, ln))
        self.pos = 0

    def peek(self):
        return self.items[self.pos] if self.pos < len(self.items) else (None, -1)

    def next(self, what="token"):
        tok, ln = self.peek()
        if tok is None:
            raise ParseError(f"unexpected end of file, expected {what}",
                             self.items[-1][1] if self.items else 0)
        self.pos += 1
        return tok, ln

    def next_int(self, what="integer"):
        tok, ln = self.next(what)
        try:
            return int(tok), ln
        except ValueError:
            raise ParseError(f"expected {what}, got {tok!r}", ln) from None

    def next_float(self, what="number"):
        tok, ln = self.next(what)
        try:
            return float(tok), ln
        except ValueError:
            raise ParseError(f"expected {what}, got {tok!r}", ln) from None


def read_medit(path, ref_labels=None):
    """Parse a MEDIT file; ref_labels maps triangle reference ints to labels."""
    tk = _Tokens(path)
    vertices = None
    tets = None
    triangles = []
    while True:
        tok, ln = tk.peek()
        if tok is None:
            break
        tk.next()
        key = tok.lower()
        if key == "meshversionformatted":
            tk.next_int("format version")
        elif key == "dimension":
            dim, dln = tk.next_int("dimension")
            if dim != 3:
                raise ParseError(f"only dimension 3 supported, got {dim}", dln)
        elif key == "vertices":
            n, _ = tk.next_int("vertex count")
            vertices = np.empty((n, 3))
            for i in range(n):
                for d in range(3):
                    vertices[i, d], _ = tk.next_float("coordinate")
                tk.next("vertex reference")
        elif key == "tetrahedra":
            n, _ = tk.next_int("tet count")
            tets = np.empty((n, 4), dtype=np.int64)
            for i in range(n):
                for d in range(4):
                    v, vln = tk.next_int("vertex id")
                    tets[i, d] = v - 1
                tk.next("tet reference")
        elif key == "triangles":
            n, _ = tk.next_int("triangle count")
            for _ in range(n):
                tri = []
                for d in range(3):
                    v, _ = tk.next_int("vertex id")
                    tri.append(v - 1)
                ref, rln = tk.next_int("triangle reference")
                triangles.append((tuple(tri), ref, rln))
        elif key == "end":
            break
        else:
            raise ParseError(f"unknown section {tok!r}", ln)
    if vertices is None:
        raise ParseError("missing Vertices section", 0)
    if tets is None:
        raise ParseError("missing Tetrahedra section", 0)
    labels = {}
    for tri, ref, rln in triangles:
        if ref_labels is None:
            labels[tri] = DIRICHLET
        elif ref in ref_labels:
            labels[tri] = ref_labels[ref]
        else:
            raise UnmappedReference(f"line {rln}: triangle reference {ref} unmapped")
    # an absent/short Triangles section surfaces as UnlabeledBoundary here
    return build_topology(vertices, tets, labels)
