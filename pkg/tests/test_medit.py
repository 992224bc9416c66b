"""MEDIT mesh file round trips and error paths."""

import numpy as np
import pytest

from curlcurl.errors import ParseError, UnlabeledBoundary, UnmappedReference
from curlcurl.medit import read_medit, write_medit
from curlcurl.mesh import DIRICHLET, NEUMANN, unit_cube_mesh


def assert_isomorphic(a, b):
    assert a.nv == b.nv and a.nt == b.nt and a.ne == b.ne and a.nf == b.nf
    assert np.abs(a.vertices - b.vertices).max() < 1e-14
    assert sorted(map(tuple, np.sort(a.tets, axis=1))) == \
        sorted(map(tuple, np.sort(b.tets, axis=1)))


def test_round_trip(tmp_path):
    m = unit_cube_mesh(1)
    path = tmp_path / "cube.mesh"
    write_medit(m, path)
    back = read_medit(path, {1: DIRICHLET, 2: NEUMANN})
    assert_isomorphic(m, back)
    assert back.boundary_label_map() == m.boundary_label_map()


def test_round_trip_default_labels(tmp_path):
    m = unit_cube_mesh(2)
    path = tmp_path / "cube2.mesh"
    write_medit(m, path)
    back = read_medit(path)  # default: everything Dirichlet
    assert_isomorphic(m, back)


def test_handwritten_reference_tet(tmp_path):
    path = tmp_path / "ref.mesh"
    path.write_text("""MeshVersionFormatted 2
Dimension 3
Vertices
4
0 0 0 0
1 0 0 0
0 1 0 0
0 0 1 0
Tetrahedra
1
1 2 3 4 0
Triangles
4
1 2 3 1
1 2 4 1
1 3 4 1
2 3 4 1
End
""")
    m = read_medit(path, {1: DIRICHLET})
    assert (m.nv, m.nt, m.ne, m.nf) == (4, 1, 6, 4)
    assert m.cell_volumes().sum() == pytest.approx(1 / 6)


def test_missing_triangles_is_unlabeled(tmp_path):
    path = tmp_path / "bare.mesh"
    path.write_text("""MeshVersionFormatted 2
Dimension 3
Vertices
4
0 0 0 0
1 0 0 0
0 1 0 0
0 0 1 0
Tetrahedra
1
1 2 3 4 0
End
""")
    with pytest.raises(UnlabeledBoundary):
        read_medit(path)


def test_parse_error_carries_line(tmp_path):
    path = tmp_path / "bad.mesh"
    path.write_text("MeshVersionFormatted 2\nDimension 3\nVertices\nnotanumber\n")
    with pytest.raises(ParseError) as exc:
        read_medit(path)
    assert "line 4" in str(exc.value)


def test_unknown_section(tmp_path):
    path = tmp_path / "bad2.mesh"
    path.write_text("MeshVersionFormatted 2\nDimension 3\nHexahedra\n0\nEnd\n")
    with pytest.raises(ParseError):
        read_medit(path)


def test_unmapped_reference(tmp_path):
    m = unit_cube_mesh(1)
    path = tmp_path / "cube.mesh"
    write_medit(m, path)
    with pytest.raises(UnmappedReference):
        read_medit(path, {7: DIRICHLET})
