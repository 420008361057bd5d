"""Geometry, generator, patch, validation, and file-format tests."""

import logging

import numpy as np
import pytest

from conftest import single_cell_mesh
from oracles import random_simple_polygon
from vemrcp.generators import generate_mesh
from vemrcp.mesh import (
    GENERATED_FAMILIES,
    ElementPatch,
    MeshFamily,
    MeshFormatError,
    MeshValidationError,
    PatchKind,
    PolygonalMesh,
    average_edge_length,
    build_patch,
    ear_clip,
    edge_outward_normal,
    load_mesh,
    polygon_area,
    polygon_centroid,
    save_mesh,
    signed_area,
    triangulate_polygon,
    validate_mesh,
)

ALL_FAMILIES = list(GENERATED_FAMILIES)


class TestPolygonGeometry:
    def test_unit_square_area(self, unit_square_mesh):
        assert polygon_area(unit_square_mesh, 0) == pytest.approx(1.0)

    def test_triangle_area(self):
        mesh = single_cell_mesh([(0, 0), (1, 0), (0, 1)])
        assert polygon_area(mesh, 0) == pytest.approx(0.5)

    def test_concave_quad_area_matches_triangulation(self):
        # concave quad scaled into the unit domain
        coords = 0.4 * np.array([(0.0, 0.0), (2.0, 0.0), (1.0, 0.5), (0.0, 2.0)])
        mesh = single_cell_mesh(coords)
        tri_sum = 0.0
        for tri in ear_clip(coords):
            a, b, c = coords[list(tri)]
            tri_sum += 0.5 * abs(
                (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            )
        assert polygon_area(mesh, 0) == pytest.approx(tri_sum, rel=1e-12)

    def test_square_centroid(self, unit_square_mesh):
        np.testing.assert_allclose(polygon_centroid(unit_square_mesh, 0), [0.5, 0.5])

    def test_triangle_centroid(self):
        mesh = single_cell_mesh([(0, 0), (1, 0), (0, 1)])
        np.testing.assert_allclose(polygon_centroid(mesh, 0), [1 / 3, 1 / 3])

    def test_l_shape_centroid_matches_triangulation(self):
        coords = 0.5 * np.array(
            [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]
        )
        mesh = single_cell_mesh(coords)
        total_area = 0.0
        weighted = np.zeros(2)
        for tri in ear_clip(coords):
            a, b, c = coords[list(tri)]
            area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
            total_area += area
            weighted += area * (a + b + c) / 3.0
        np.testing.assert_allclose(polygon_centroid(mesh, 0), weighted / total_area, atol=1e-14)
        np.testing.assert_allclose(polygon_centroid(mesh, 0), [5 / 12, 5 / 12])


class TestOutwardNormal:
    def test_bottom_edge(self, unit_square_mesh):
        np.testing.assert_allclose(edge_outward_normal(unit_square_mesh, 0, 0), [0, -1])

    def test_right_edge(self, unit_square_mesh):
        np.testing.assert_allclose(edge_outward_normal(unit_square_mesh, 0, 1), [1, 0])

    def test_diagonal_edge(self):
        # cell lies left of the edge (0,0) -> (1,1)
        mesh = single_cell_mesh([(0, 0), (1, 1), (0, 1)])
        expected = np.array([1.0, -1.0]) / np.sqrt(2.0)
        np.testing.assert_allclose(edge_outward_normal(mesh, 0, 0), expected)

    def test_points_away_from_centroid_on_convex_cells(self, rng):
        mesh = generate_mesh(MeshFamily.HEX_S, 3)
        for ci in range(mesh.num_cells):
            pts = mesh.cell_coords(ci)
            center = polygon_centroid(mesh, ci)
            for e in range(len(pts)):
                mid = 0.5 * (pts[e] + pts[(e + 1) % len(pts)])
                n = edge_outward_normal(mesh, ci, e)
                assert np.dot(n, mid - center) > 0.0

    def test_closed_polygon_normal_integral_vanishes(self):
        for fam in ALL_FAMILIES:
            mesh = generate_mesh(fam, 3, seed=5)
            for ci in range(mesh.num_cells):
                pts = mesh.cell_coords(ci)
                total = np.zeros(2)
                for e in range(len(pts)):
                    a, b = pts[e], pts[(e + 1) % len(pts)]
                    total += np.linalg.norm(b - a) * edge_outward_normal(mesh, ci, e)
                np.testing.assert_allclose(total, 0.0, atol=1e-12)


class TestTriangulation:
    def test_triangle_is_itself(self):
        mesh = single_cell_mesh([(0, 0), (1, 0), (0, 1)])
        assert triangulate_polygon(mesh, 0) == [(0, 1, 2)]

    def test_convex_quad_two_triangles(self, unit_square_mesh):
        tris = triangulate_polygon(unit_square_mesh, 0)
        assert len(tris) == 2
        total = sum(
            abs(signed_area(unit_square_mesh.vertices[list(t)])) for t in tris
        )
        assert total == pytest.approx(1.0, rel=1e-12)

    def test_concave_hexagon(self):
        coords = np.array(
            [(0.0, 0.0), (4.0, 0.0), (4.0, 3.0), (2.0, 1.0), (1.0, 3.0), (0.0, 3.0)]
        )
        mesh = single_cell_mesh(coords / 4.0)
        tris = triangulate_polygon(mesh, 0)
        total = sum(signed_area(mesh.vertices[list(t)]) for t in tris)
        assert total == pytest.approx(polygon_area(mesh, 0), rel=1e-12)

    def test_thousand_random_simple_polygons(self, rng):
        for _ in range(1000):
            coords = random_simple_polygon(rng)
            mesh = single_cell_mesh(coords)
            total = sum(
                signed_area(mesh.vertices[list(t)]) for t in triangulate_polygon(mesh, 0)
            )
            assert total == pytest.approx(polygon_area(mesh, 0), rel=1e-12)


class TestGenerators:
    def test_quad_s_n2(self):
        mesh = generate_mesh(MeshFamily.QUAD_S, 2, seed=0)
        assert mesh.num_cells == 4
        assert mesh.num_vertices == 9
        for ci in range(4):
            assert polygon_area(mesh, ci) == pytest.approx(0.25)
            sides = np.linalg.norm(
                np.roll(mesh.cell_coords(ci), -1, axis=0) - mesh.cell_coords(ci), axis=1
            )
            np.testing.assert_allclose(sides, 0.5)

    def test_tri_s_n2(self):
        mesh = generate_mesh(MeshFamily.TRI_S, 2, seed=0)
        assert mesh.num_cells == 8
        total = sum(polygon_area(mesh, ci) for ci in range(mesh.num_cells))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_poly_u_n4_seed42(self):
        mesh = generate_mesh(MeshFamily.POLY_U, 4, seed=42)
        report = validate_mesh(mesh)
        assert report.ok, report.errors
        total = sum(polygon_area(mesh, ci) for ci in range(mesh.num_cells))
        assert total == pytest.approx(1.0, abs=1e-10)
        interior = [u for u in mesh.edge_map.values() if len(u) == 2]
        assert interior  # a 16-cell tessellation certainly has interior edges

    @pytest.mark.parametrize("family", ALL_FAMILIES, ids=lambda f: f.value)
    def test_all_families_validate(self, family):
        for n, seed in ((1, 0), (3, 0), (6, 7)):
            mesh = generate_mesh(family, n, seed)
            report = validate_mesh(mesh)
            assert report.ok, (family, n, report.errors)

    @pytest.mark.parametrize("family", ALL_FAMILIES, ids=lambda f: f.value)
    def test_area_and_euler(self, family):
        mesh = generate_mesh(family, 4, seed=3)
        total = sum(polygon_area(mesh, ci) for ci in range(mesh.num_cells))
        assert total == pytest.approx(1.0, abs=1e-10)
        euler = mesh.num_vertices - len(mesh.edge_map) + mesh.num_cells
        assert euler == 1

    def test_deterministic_for_fixed_inputs(self):
        a = generate_mesh(MeshFamily.POLY_U, 3, seed=11)
        b = generate_mesh(MeshFamily.POLY_U, 3, seed=11)
        np.testing.assert_array_equal(a.vertices, b.vertices)
        assert all((x == y).all() for x, y in zip(a.cells, b.cells))

    def test_structured_families_ignore_seed(self):
        for fam in (MeshFamily.TRI_S, MeshFamily.QUAD_S, MeshFamily.HEX_S, MeshFamily.CONC_S):
            a = generate_mesh(fam, 3, seed=0)
            b = generate_mesh(fam, 3, seed=99)
            np.testing.assert_array_equal(a.vertices, b.vertices)

    def test_unsupported_family(self):
        with pytest.raises(ValueError, match="unsupported"):
            generate_mesh(MeshFamily.EXTERNAL, 2, 0)
        with pytest.raises(ValueError):
            generate_mesh(MeshFamily.QUAD_S, 0, 0)

    def test_conc_families_have_reflex_vertices(self):
        for fam in (MeshFamily.CONC_S, MeshFamily.CONC_U):
            mesh = generate_mesh(fam, 3, seed=2)
            reflex = 0
            for ci in range(mesh.num_cells):
                pts = mesh.cell_coords(ci)
                k = len(pts)
                for v in range(k):
                    a, b, c = pts[v - 1], pts[v], pts[(v + 1) % k]
                    if (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) < 0:
                        reflex += 1
            assert reflex > 0


class TestAverageEdgeLength:
    def test_single_square(self, unit_square_mesh):
        assert average_edge_length(unit_square_mesh) == pytest.approx(1.0)

    def test_quad_s_n2(self):
        assert generate_mesh(MeshFamily.QUAD_S, 2).average_edge_length == pytest.approx(0.5)

    def test_tri_s_n2(self):
        # 12 axis-aligned edges of 0.5 plus 4 diagonals of sqrt(2)/2
        expected = (12 * 0.5 + 4 * np.sqrt(2.0) / 2.0) / 16.0
        mesh = generate_mesh(MeshFamily.TRI_S, 2)
        assert mesh.average_edge_length == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.5517766952966369)


class TestPatches:
    def test_patch0(self):
        mesh = generate_mesh(MeshFamily.QUAD_S, 3)
        patch = build_patch(mesh, 4, PatchKind.PATCH0)
        assert patch == ElementPatch(4, (4,), PatchKind.PATCH0)

    def test_interior_patch1_is_full_neighborhood(self):
        mesh = generate_mesh(MeshFamily.QUAD_S, 3)
        central = 4  # middle cell of the 3x3 grid
        patch = build_patch(mesh, central, PatchKind.PATCH1)
        brute = {
            ci
            for ci in range(mesh.num_cells)
            if set(map(int, mesh.cells[ci])) & set(map(int, mesh.cells[central]))
        }
        assert patch.kind is PatchKind.PATCH1
        assert set(patch.member_cells) == brute
        assert len(patch.member_cells) == 9

    def test_corner_cell_promotes_to_patch1b(self):
        mesh = generate_mesh(MeshFamily.QUAD_S, 3)
        patch = build_patch(mesh, 0, PatchKind.PATCH1)
        brute = {
            ci
            for ci in range(mesh.num_cells)
            if set(map(int, mesh.cells[ci])) & set(map(int, mesh.cells[0]))
        }
        assert patch.kind is PatchKind.PATCH1B
        assert set(patch.member_cells) == brute
        assert len(patch.member_cells) == 4

    def test_adjacency_symmetry(self):
        mesh = generate_mesh(MeshFamily.POLY_U, 4, seed=9)
        patches = [build_patch(mesh, ci, PatchKind.PATCH1) for ci in range(mesh.num_cells)]
        for a in range(mesh.num_cells):
            for b in patches[a].member_cells:
                assert a in patches[b].member_cells


class TestValidation:
    def test_overlapping_cells_fail(self):
        verts = np.array(
            [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0), (1, 0), (1, 1), (0, 1)], dtype=float
        )
        mesh = PolygonalMesh(verts, [[0, 1, 2, 3], [4, 5, 6, 7]], MeshFamily.QUAD_S)
        report = validate_mesh(mesh)
        assert not report.ok
        assert any("areas sum" in e or "Euler" in e for e in report.errors)

    def test_overlapping_external_cells_fail_topologically(self):
        verts = np.array(
            [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0), (1, 0), (1, 1), (0, 1)], dtype=float
        )
        mesh = PolygonalMesh(verts, [[0, 1, 2, 3], [4, 5, 6, 7]], MeshFamily.EXTERNAL)
        assert not validate_mesh(mesh).ok

    def test_dangling_edge_fails(self):
        verts = np.array([(0, 0), (1, 0), (0.5, 1), (0.5, -1), (1.5, 1)], dtype=float)
        mesh = PolygonalMesh(
            verts, [[0, 1, 2], [0, 3, 1], [0, 1, 4]], MeshFamily.EXTERNAL
        )
        report = validate_mesh(mesh)
        assert not report.ok
        assert any("shared by 3" in e or "same direction" in e for e in report.errors)

    @pytest.mark.parametrize("family", ALL_FAMILIES, ids=lambda f: f.value)
    def test_generator_round_trip(self, family):
        mesh = generate_mesh(family, 5, seed=13)
        assert validate_mesh(mesh).ok


class TestMeshFile:
    def test_round_trip(self, tmp_path):
        mesh = generate_mesh(MeshFamily.CONC_U, 3, seed=4)
        path = tmp_path / "m.pmesh"
        save_mesh(mesh, path)
        loaded = load_mesh(path)
        np.testing.assert_allclose(loaded.vertices, mesh.vertices)
        assert all((a == b).all() for a, b in zip(loaded.cells, mesh.cells))
        assert loaded.family is MeshFamily.EXTERNAL

    def test_single_cell_file(self, tmp_path):
        path = tmp_path / "square.pmesh"
        path.write_text("pmesh 1\n4 1\n0 0\n1 0\n1 1\n0 1\n4 0 1 2 3\n")
        mesh = load_mesh(path)
        assert mesh.num_cells == 1
        assert polygon_area(mesh, 0) == pytest.approx(1.0)

    def test_comments_and_whitespace(self, tmp_path):
        path = tmp_path / "square.pmesh"
        path.write_text(
            "# a comment\npmesh 1\n4 1 # counts\n0 0\n1 0\n1 1\n0 1\n4 0 1 2 3\n"
        )
        assert load_mesh(path).num_cells == 1

    def test_clockwise_cell_corrected_with_warning(self, tmp_path, caplog):
        path = tmp_path / "cw.pmesh"
        path.write_text("pmesh 1\n4 1\n0 0\n1 0\n1 1\n0 1\n4 0 3 2 1\n")
        with caplog.at_level(logging.WARNING):
            mesh = load_mesh(path)
        assert polygon_area(mesh, 0) == pytest.approx(1.0)
        assert any("counterclockwise" in r.message for r in caplog.records)

    def test_vertex_index_out_of_range(self, tmp_path):
        path = tmp_path / "bad.pmesh"
        path.write_text("pmesh 1\n4 1\n0 0\n1 0\n1 1\n0 1\n4 0 1 2 7\n")
        with pytest.raises(MeshFormatError, match=r"cell 0 references vertex 7"):
            load_mesh(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.pmesh"
        path.write_text("mesh 2\n")
        with pytest.raises(MeshFormatError, match="line 1"):
            load_mesh(path)

    def test_validation_failure_reported(self, tmp_path):
        path = tmp_path / "dup.pmesh"
        path.write_text(
            "pmesh 1\n8 2\n0 0\n1 0\n1 1\n0 1\n0 0\n1 0\n1 1\n0 1\n"
            "4 0 1 2 3\n4 4 5 6 7\n"
        )
        with pytest.raises(MeshValidationError):
            load_mesh(path)

    def test_boundary_flags_recomputed(self, tmp_path):
        mesh = generate_mesh(MeshFamily.QUAD_S, 2)
        path = tmp_path / "m.pmesh"
        save_mesh(mesh, path)
        loaded = load_mesh(path)
        # 3x3 grid of vertices: all but the center are on the boundary
        assert loaded.boundary_vertex_flags.sum() == 8
        assert not loaded.boundary_vertex_flags[4]
