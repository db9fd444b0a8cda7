#
# Copyright (C) 2026 The dualmg Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#

import os

import numpy as np

from dualmg.exceptions import BoundaryLabelError, InvertedTriangleError, MeshError, \
    NonManifoldEdgeError, NonNestedMeshError
from dualmg.mesh import Hole, MeshHierarchy, Patch, build_mesh, check_nested, edge_parents, \
    enlarge_patch, node_patch, patches, read_mesh, rectilinear_mesh_with_holes, \
    refine_uniform, structured_mesh, write_mesh
from dualmg.testing.utils import DualMGTestCase, TestUtils


UNIT_SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]


def _all(label):
    return lambda midpoint: label


def _bottom_dirichlet(midpoint):
    return 'D' if abs(midpoint[1]) < 1e-12 else 'N'


class MeshTest(DualMGTestCase, TestUtils):

    def test_single_triangle(self):
        mesh = build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], _all('D'))
        self.assertEqual((mesh.n_vertices, mesh.n_edges, mesh.n_triangles), (3, 3, 1))
        self.assertEqual(mesh.euler, 1)
        self.assertEqual(len(mesh.boundary_edges), 3)
        self.assertAlmostEqual(mesh.area, 0.5)
        self.assertTrue((mesh.edge_triangles[:, 1] == -1).all())
        self.assert_array_eq(mesh.edge_labels, ['D', 'D', 'D'])

    def test_edges_are_sorted_and_oriented(self):
        mesh = structured_mesh(UNIT_SQUARE, 3, 2, _bottom_dirichlet)
        self.assertTrue((mesh.edges[:, 0] < mesh.edges[:, 1]).all())
        self.assertEqual(mesh.euler, 1)

        # The global normal points out of the first adjacent triangle.
        centroids = mesh.vertices[mesh.triangles].mean(axis=1)
        owner_centroid = centroids[mesh.edge_triangles[:, 0]]
        outward = np.einsum('ij,ij->i', mesh.edge_normals, mesh.edge_midpoints - owner_centroid)
        self.assertTrue((outward > 0).all())

        interior = mesh.edge_triangles[:, 1] >= 0
        self.assertTrue((mesh.edge_triangles[interior, 0] < mesh.edge_triangles[interior, 1])
                        .all())
        self.assertTrue((mesh.edge_labels[interior] == '').all())

        # Every interior edge is seen with opposite signs from its two triangles.
        signs = np.zeros(mesh.n_edges)
        np.add.at(signs, mesh.triangle_edges.ravel(), mesh.triangle_edge_signs.ravel())
        self.assert_array_eq(signs[interior], np.zeros(interior.sum()))
        self.assert_array_eq(signs[~interior], np.ones((~interior).sum()))

    def test_boundary_lengths(self):
        mesh = structured_mesh(UNIT_SQUARE, 4, 4, _bottom_dirichlet)
        self.assertAlmostEqual(mesh.boundary_length(), 4.0, places=12)
        self.assertAlmostEqual(mesh.boundary_length('D'), 1.0, places=12)
        self.assertAlmostEqual(mesh.boundary_length('Neumann'), 3.0, places=12)
        self.assertEqual(len(mesh.labelled_edges('D')), 4)

    def test_mapping_classifier(self):
        labels = {(0, 1): 'Dirichlet', (1, 2): 'n', (0, 2): 'N'}
        mesh = build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], labels)
        self.assert_array_eq(mesh.edge_labels, ['D', 'N', 'N'])

        del labels[(1, 2)]
        with self.assertRaisesRegex(BoundaryLabelError, r"\(1, 2\) has no label"):
            build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], labels)

    def test_bad_label(self):
        with self.assertRaises(BoundaryLabelError) as ctx:
            build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], _all('robin'))
        self.assertEqual(ctx.exception.label, 'robin')

    def test_inverted_triangle(self):
        with self.assertRaises(InvertedTriangleError) as ctx:
            build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]], _all('D'))
        self.assertEqual(ctx.exception.triangle, 0)
        self.assertLess(ctx.exception.area, 0)

        with self.assertRaises(InvertedTriangleError):
            build_mesh([[0, 0], [1, 0], [2, 0]], [[0, 1, 2]], _all('D'))

    def test_non_manifold_edge(self):
        vertices = [[0, 0], [1, 0], [0.5, 1], [0.5, -1], [0.5, 2]]
        triangles = [[0, 1, 2], [1, 0, 3], [0, 1, 4]]
        with self.assertRaises(NonManifoldEdgeError) as ctx:
            build_mesh(vertices, triangles, _all('D'))
        self.assertEqual(ctx.exception.edge, (0, 1))
        self.assertEqual(ctx.exception.triangles, [0, 1, 2])
        self.assertIsInstance(ctx.exception, MeshError)

    def test_invalid_arrays(self):
        with self.assertRaisesRegex(MeshError, "shape"):
            build_mesh([0, 1, 2], [[0, 1, 2]], _all('D'))
        with self.assertRaisesRegex(MeshError, "outside"):
            build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 3]], _all('D'))

    def test_refine_uniform(self):
        coarse = structured_mesh(UNIT_SQUARE, 2, 2, _bottom_dirichlet)
        fine, child_map = refine_uniform(coarse)
        V, E, T = coarse.n_vertices, coarse.n_edges, coarse.n_triangles
        self.assertEqual(fine.n_vertices, V + E)
        self.assertEqual(fine.n_triangles, 4 * T)
        self.assertEqual(fine.level, 1)
        self.assert_array_eq(child_map, np.arange(4 * T).reshape(T, 4))
        self.assertEqual(fine.euler, coarse.euler)
        np.testing.assert_allclose(fine.vertices[V:], coarse.edge_midpoints)
        np.testing.assert_allclose(fine.areas.reshape(T, 4), np.repeat(coarse.areas / 4, 4)
                                   .reshape(T, 4), rtol=1e-13)
        self.assertAlmostEqual(fine.boundary_length('D'), 1.0, places=12)

        check_nested(coarse, fine)

        parents = edge_parents(coarse, fine)
        halves = np.flatnonzero(parents >= 0)
        self.assertEqual(len(halves), 2 * E)
        np.testing.assert_allclose(fine.edge_lengths[halves],
                                   0.5 * coarse.edge_lengths[parents[halves]], rtol=1e-13)
        self.assert_array_eq(fine.edge_labels[halves], coarse.edge_labels[parents[halves]])

    def test_check_nested_rejects(self):
        coarse = structured_mesh(UNIT_SQUARE, 2, 2, _all('D'))
        other = structured_mesh(UNIT_SQUARE, 4, 4, _all('D'))
        with self.assertRaises(NonNestedMeshError):
            check_nested(coarse, other)

    def test_hierarchy(self):
        coarse = structured_mesh(UNIT_SQUARE, 1, 1, _all('D'))
        hierarchy = MeshHierarchy.from_coarse(coarse, 3)
        self.assertEqual(len(hierarchy), 4)
        self.assertIs(hierarchy.coarsest, coarse)
        self.assertIs(hierarchy[3], hierarchy.finest)
        self.assertEqual([m.n_triangles for m in hierarchy.meshes], [2, 8, 32, 128])
        self.assertEqual([m.level for m in hierarchy.meshes], [0, 1, 2, 3])
        with self.assertRaises(ValueError):
            MeshHierarchy.from_coarse(coarse, -1)

    def test_node_patch(self):
        mesh = structured_mesh(UNIT_SQUARE, 2, 2, _all('D'))
        self.assertEqual(node_patch(mesh, 4), Patch(4, (0, 1, 3, 4, 6, 7), (4,)))
        self.assertEqual(node_patch(mesh, 2), Patch(2, (2,), (2,)))
        with self.assertRaisesRegex(MeshError, "not a vertex"):
            node_patch(mesh, 9)

    def test_enlarge_patch(self):
        mesh = structured_mesh(UNIT_SQUARE, 2, 2, _all('D'))
        enlarged = enlarge_patch(mesh, node_patch(mesh, 2))
        self.assertEqual(enlarged, Patch(2, (0, 2, 3), (2, 1)))
        self.assertEqual(enlarged.generation_trace[0], enlarged.anchor_node)

        big = node_patch(mesh, 4)
        self.assertIs(enlarge_patch(mesh, big), big)

        single = build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], _all('D'))
        with self.assertRaisesRegex(MeshError, "Cannot build patches"):
            enlarge_patch(single, node_patch(single, 0))

    def test_patches(self):
        mesh = structured_mesh(UNIT_SQUARE, 3, 3, _bottom_dirichlet)
        result = patches(mesh)
        self.assertEqual([p.anchor_node for p in result], list(range(mesh.n_vertices)))
        self.assertTrue(all(len(p) >= 3 for p in result))
        covered = set()
        for p in result:
            self.assertEqual(list(p.elements), sorted(p.elements))
            covered.update(p.elements)
        self.assertEqual(covered, set(range(mesh.n_triangles)))

        plain = patches(mesh, enlarge=False)
        self.assertEqual(len(plain[0]), 2)
        self.assertEqual(plain[0].generation_trace, (0,))

    def test_hole(self):
        hole = Hole.rectangle(0.25, 0.75, 0.25, 0.75, 'D')
        self.assert_array_eq(hole.contains([[0.5, 0.5], [0.25, 0.5], [0.1, 0.1]]),
                             [True, False, False])
        self.assertTrue(hole.on_boundary([0.25, 0.4]))
        self.assertFalse(hole.on_boundary([0.5, 0.5]))

    def test_mesh_with_hole(self):
        hole = Hole.rectangle(0.25, 0.75, 0.25, 0.75, 'D')

        def classifier(midpoint):
            return 'D' if hole.on_boundary(midpoint) else 'N'

        grid = [0, 0.25, 0.75, 1]
        mesh = rectilinear_mesh_with_holes(grid, grid, [hole], classifier)
        self.assertEqual(mesh.n_triangles, 16)
        self.assertEqual(mesh.n_vertices, 16)
        self.assertEqual(mesh.euler, 0)
        self.assertAlmostEqual(mesh.area, 0.75, places=12)
        self.assertAlmostEqual(mesh.boundary_length('D'), 2.0, places=12)
        self.assertAlmostEqual(mesh.boundary_length('N'), 4.0, places=12)

    def test_write_read(self):
        mesh = structured_mesh([[0, 0], [2, 0], [2.5, 1], [0, 1.5]], 3, 2, _bottom_dirichlet)
        with self.temp_dir() as tmp:
            path = os.path.join(tmp, 'mesh.txt')
            write_mesh(mesh, path)
            other = read_mesh(path)
        self.assert_array_eq(other.vertices, mesh.vertices)
        self.assert_array_eq(other.triangles, mesh.triangles)
        self.assert_array_eq(other.edges, mesh.edges)
        self.assert_array_eq(other.edge_labels, mesh.edge_labels)

    def test_read_mesh_errors(self):
        with self.temp_file() as path:
            with open(path, 'w') as f:
                f.write("3 1\n")
            with self.assertRaisesRegex(MeshError, "header"):
                read_mesh(path)
            with open(path, 'w') as f:
                f.write("3 1 3\n0 0\n1 0\n")
            with self.assertRaisesRegex(MeshError, "Expected 7 lines"):
                read_mesh(path)
