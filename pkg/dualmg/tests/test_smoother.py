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

import numpy as np

from dualmg.assembly import Loads, MaterialParams, assemble, direct_solve
from dualmg.config import option_context
from dualmg.exceptions import ConfigurationError, SingularLocalSystem
from dualmg.mesh import Patch, enlarge_patch, node_patch, patches, structured_mesh
from dualmg.smoother import BCKind, LocalProblem, PatchSmoother, SmootherConfig, \
    extract_local, local_solve, robin_matrix, sweep
from dualmg.spaces import build_layout
from dualmg.testing.utils import DualMGTestCase


UNIT_SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]


def _system(classifier=lambda midpoint: 'D', divisions=2, mat=MaterialParams(lam=1.0)):
    mesh = structured_mesh(UNIT_SQUARE, divisions, divisions, classifier)
    loads = Loads(body_force=lambda p: np.stack([np.sin(3 * p[:, 1]), p[:, 0] * p[:, 1]],
                                                axis=1),
                  displacement=lambda p: np.stack([0.1 * p[:, 0], -0.2 * p[:, 1] ** 2], axis=1))
    return assemble(mesh, build_layout(mesh), mat, loads)


class ConfigTest(DualMGTestCase):

    def test_parse(self):
        self.assertIs(BCKind.parse('Robin'), BCKind.ROBIN)
        self.assertIs(BCKind.parse('neumann-remove-rbm'), BCKind.NEUMANN_REMOVE_RBM)
        self.assertIs(BCKind.parse('NeumannZeroAverage'), BCKind.NEUMANN_ZERO_AVERAGE)
        self.assertIs(BCKind.parse(BCKind.DIRICHLET), BCKind.DIRICHLET)
        with self.assertRaisesRegex(ConfigurationError, "Unknown local boundary condition"):
            BCKind.parse('periodic')
        self.assertTrue(BCKind.ROBIN.uses_boundary_dofs)
        self.assertFalse(BCKind.NEUMANN.uses_boundary_dofs)

    def test_config(self):
        config = SmootherConfig(bc_kind='dirichlet', rbm_dofs=[0, 1, -1])
        self.assertIs(config.bc_kind, BCKind.DIRICHLET)
        self.assertEqual(config.rbm_dofs, (0, 1, -1))
        with self.assertRaisesRegex(ConfigurationError, "alpha"):
            SmootherConfig(alpha=-1.0)
        with self.assertRaisesRegex(ConfigurationError, "alpha"):
            SmootherConfig(alpha=float('nan'))
        with self.assertRaisesRegex(ConfigurationError, "sweeps"):
            SmootherConfig(sweeps=-1)
        with self.assertRaisesRegex(ConfigurationError, "ordering"):
            SmootherConfig(ordering='random')


class RobinMatrixTest(DualMGTestCase):

    def test_robin_matrix(self):
        rng = np.random.RandomState(5)
        n_int, n_ext, n_mult = 4, 3, 5
        A = rng.standard_normal((n_int + n_ext, n_int + n_ext))
        A = A + A.T
        B = rng.standard_normal((n_mult, n_int + n_ext))
        local = LocalProblem.from_blocks(A[:n_int, :n_int], A[:n_int, n_int:], A[n_int:, n_int:],
                                         B[:, :n_int], B[:, n_int:])
        for alpha in (0.0, 0.5, 3.0):
            expected = []
            for p in range(n_ext):
                candidates = [abs(A[n_int + p, n_int + s]) for s in range(n_ext)]
                candidates += [abs(A[s, n_int + p]) for s in range(n_int)]
                candidates += [abs(B[s, n_int + p]) for s in range(n_mult)]
                expected.append(alpha * max(candidates))
            np.testing.assert_allclose(robin_matrix(local, alpha), expected, rtol=1e-15)

    def test_robin_matrix_errors(self):
        local = LocalProblem.from_blocks([[1.0]], [[-2.0]], [[0.5]], [[0.0]], [[1.0]])
        with self.assertRaisesRegex(ConfigurationError, "alpha"):
            robin_matrix(local, -0.1)

    def test_from_blocks(self):
        local = LocalProblem.from_blocks([[1.0]], [[-2.0]], [[0.5]], [[0.0]], [[1.0]])
        self.assertEqual((local.n_int, local.n_ext, local.n_mult), (1, 1, 1))
        self.assert_array_eq(local.dofs, [0, 1, 2])
        self.assert_array_eq(local.A_ie, [[-2.0]])
        self.assert_array_eq(local.B_ext, [[1.0]])
        self.assert_array_eq(local.matrix, [[1.0, -2.0, 0.0], [-2.0, 0.5, 1.0], [0.0, 1.0, 0.0]])


class LocalProblemTest(DualMGTestCase):

    def setUp(self):
        self.system = _system()
        self.traction_free = _system(lambda midpoint: 'N')
        self.neumann = SmootherConfig(bc_kind='neumann')

    def test_neumann_counts(self):
        # Elements 0, 3 and 6 form a fan around the central node 4 of the 2x2 grid.
        for elements, counts in [((0,), (4, 9)), ((0, 3), (12, 16)), ((0, 3, 6), (20, 23))]:
            local = extract_local(self.traction_free, Patch(4, elements, (4,)), self.neumann)
            self.assertEqual((local.n_int, local.n_mult), counts)
            self.assertEqual(local.n_ext, 0)
            self.assertEqual(local.matrix.shape, (sum(counts),) * 2)

    def test_dirichlet_counts(self):
        local = extract_local(self.traction_free, Patch(4, (0, 3, 6), (4,)),
                              SmootherConfig(bc_kind='dirichlet'))
        self.assertEqual((local.n_int, local.n_ext, local.n_mult), (20, 12, 23))

    def test_domain_boundary_dofs_are_interior(self):
        # The fan touches the bottom and right sides, whose edges carry free stress dofs.
        patch = Patch(4, (0, 3, 6), (4,))
        mesh, layout = self.system.mesh, self.system.layout
        boundary = [e for e in mesh.boundary_edges
                    if set(mesh.edge_triangles[e]) & {0, 3, 6}]
        self.assertEqual(len(boundary), 2)
        dofs = layout.full_to_free[layout.edge_dofs(boundary).ravel()]
        for kind, n_ext in [('dirichlet', 12), ('robin', 12), ('neumann_zero_average', 0)]:
            local = extract_local(self.system, patch, SmootherConfig(bc_kind=kind))
            self.assertEqual((local.n_int, local.n_ext, local.n_mult), (28, n_ext, 23))
            self.assertTrue(np.isin(dofs, local.int_dofs).all())
            self.assertFalse(np.isin(dofs, local.ext_dofs).any())

    def test_constrained_dofs_are_excluded(self):
        system = _system(lambda midpoint: 'D' if abs(midpoint[1]) < 1e-12 else 'N')
        for patch in patches(system.mesh):
            local = extract_local(system, patch, SmootherConfig(bc_kind='dirichlet'))
            self.assertTrue((local.int_dofs < system.n).all())
            self.assertTrue((local.ext_dofs < system.n).all())
            self.assertTrue((local.mult_dofs >= system.n).all())
            self.assertEqual(len(np.unique(local.dofs)), len(local.dofs))

    def test_local_rhs_is_residual(self):
        system = self.system
        patch = node_patch(system.mesh, 4)
        config = SmootherConfig(bc_kind='dirichlet')
        rng = np.random.RandomState(2)
        y, z = rng.standard_normal(system.n), rng.standard_normal(system.m)
        local = extract_local(system, patch, config, (y, z))
        residual = system.rhs - system.matrix @ np.concatenate([y, z])
        self.assert_relative_close(local.rhs, residual[local.dofs], rtol=1e-13)

        smoother = PatchSmoother(system, [patch], config)
        other = smoother.local_problem(0, np.concatenate([y, z]))
        self.assert_relative_close(other.rhs, local.rhs, rtol=1e-14)
        self.assert_array_eq(other.matrix, local.matrix)

    def test_averages(self):
        local = extract_local(self.system, Patch(4, (0, 3, 6), (4,)), self.neumann)
        area = self.system.mesh.areas[[0, 3, 6]].sum()
        np.testing.assert_allclose(local.averages.sum(axis=1), [area, area, area], rtol=1e-14)
        self.assertFalse(local.averages[0, 1:18:2].any())
        self.assertFalse(local.averages[:2, 18:].any())

    def test_unmodified_neumann_is_singular(self):
        local = extract_local(self.traction_free, Patch(4, (0,), (4,)), self.neumann)
        with self.assertRaises(SingularLocalSystem) as ctx:
            local_solve(local, self.neumann)
        self.assertEqual(ctx.exception.size, 13)
        self.assertGreaterEqual(ctx.exception.size - ctx.exception.rank, 5)

    def test_remove_rbm(self):
        config = SmootherConfig(bc_kind='neumann_remove_rbm')
        local = extract_local(self.system, node_patch(self.system.mesh, 4), config)
        local = LocalProblem(local.patch, local.kind, local.int_dofs, local.ext_dofs,
                             local.mult_dofs, local.matrix,
                             np.random.RandomState(0).standard_normal(len(local.dofs)),
                             local.averages)
        y_loc, z_loc = local_solve(local, config)
        self.assertEqual(len(y_loc), local.n_stress)
        removed = [local.n_stress + 0, local.n_stress + 1, len(local.dofs) - 1]
        self.assert_array_eq(np.concatenate([y_loc, z_loc])[removed], [0.0, 0.0, 0.0])
        keep = np.setdiff1d(np.arange(len(local.dofs)), removed)
        correction = np.concatenate([y_loc, z_loc])
        self.assert_relative_close((local.matrix @ correction)[keep], local.rhs[keep],
                                   rtol=1e-9)

    def test_zero_average(self):
        config = SmootherConfig(bc_kind='neumann_zero_average')
        local = extract_local(self.system, node_patch(self.system.mesh, 4), config)
        y_loc, z_loc = local_solve(local, config)
        np.testing.assert_allclose(local.averages @ z_loc, 0.0,
                                   atol=1e-10 * max(np.abs(z_loc).max(), 1.0))
        self.assertEqual(len(z_loc), local.n_mult)

    def test_dirichlet_patch_covering_the_mesh(self):
        system = self.system
        everything = Patch(0, tuple(range(system.mesh.n_triangles)), (0,))
        local = extract_local(system, everything, SmootherConfig(bc_kind='dirichlet'))
        self.assertEqual(local.n_stress, system.n)
        self.assertEqual(local.n_mult, system.m)
        y_loc, z_loc = local_solve(local, SmootherConfig(bc_kind='dirichlet'))

        x = np.zeros(system.size)
        x[local.dofs] = np.concatenate([y_loc, z_loc])
        y, z = direct_solve(system)
        self.assert_relative_close(x, np.concatenate([y, z]), rtol=1e-8)

    def test_pivot_tolerance(self):
        local = extract_local(self.system, node_patch(self.system.mesh, 4),
                              SmootherConfig(bc_kind='dirichlet'))
        with option_context('smoother.pivot_tolerance', 0.5):
            with self.assertRaises(SingularLocalSystem):
                local_solve(local, SmootherConfig(bc_kind='dirichlet'))


class SweepTest(DualMGTestCase):

    def setUp(self):
        self.system = _system(lambda midpoint: 'D' if abs(midpoint[1]) < 1e-12 else 'N',
                              divisions=3)
        self.patches = patches(self.system.mesh)

    def test_dirichlet_patch_residual_vanishes(self):
        system = self.system
        smoother = PatchSmoother(system, self.patches, SmootherConfig(bc_kind='dirichlet'))
        x = np.zeros(system.size)
        for i in (0, 5, len(smoother) - 1):
            smoother.apply_patch(i, x, system.rhs)
            residual = system.rhs - system.matrix @ x
            dofs = smoother.local_problem(i).dofs
            self.assertLessEqual(np.abs(residual[dofs]).max(),
                                 1e-9 * np.abs(system.rhs).max())

    def test_robin_patch_residual(self):
        system = self.system
        config = SmootherConfig(bc_kind='robin', alpha=1.0)
        smoother = PatchSmoother(system, self.patches, config)
        x = np.zeros(system.size)
        i = 4
        local = smoother.local_problem(i, x)
        correction = smoother.apply_patch(i, x, system.rhs)
        residual = (system.rhs - system.matrix @ x)[local.dofs]
        ext = np.arange(local.n_int, local.n_stress)
        inner = np.setdiff1d(np.arange(len(local.dofs)), ext)
        scale = np.abs(system.rhs).max()
        self.assertLessEqual(np.abs(residual[inner]).max(), 1e-10 * scale)
        np.testing.assert_allclose(residual[ext], robin_matrix(local, 1.0) * correction[ext],
                                   rtol=1e-8, atol=1e-10 * scale)

    def test_robin_zero_is_dirichlet(self):
        system = self.system
        state = (np.zeros(system.n), np.zeros(system.m))
        (y0, z0), res0 = sweep(system, state, self.patches,
                               SmootherConfig(bc_kind='robin', alpha=0.0))
        (y1, z1), res1 = sweep(system, state, self.patches, SmootherConfig(bc_kind='dirichlet'))
        self.assert_array_eq(y0, y1)
        self.assert_array_eq(z0, z1)
        self.assertEqual(res0.norm, res1.norm)

    def test_exact_solution_is_a_fixed_point(self):
        system = self.system
        y, z = direct_solve(system)
        for kind in ('robin', 'dirichlet'):
            (y1, z1), res = sweep(system, (y, z), self.patches, SmootherConfig(bc_kind=kind))
            self.assertLessEqual(res.norm, 1e-9 * np.linalg.norm(system.rhs))
            self.assert_relative_close(y1, y, rtol=1e-8)

    def test_sweep_does_not_modify_input(self):
        system = self.system
        y, z = np.zeros(system.n), np.zeros(system.m)
        (y1, z1), res = sweep(system, (y, z), self.patches, SmootherConfig())
        self.assertFalse(y.any() or z.any())
        self.assertTrue(y1.any())
        self.assertEqual((len(y1), len(z1)), (system.n, system.m))
        self.assertAlmostEqual(res.norm, system.residuals(y1, z1).norm, places=14)

    def test_smoothing_reduces_the_residual(self):
        system = self.system
        smoother = PatchSmoother(system, self.patches, SmootherConfig(alpha=1.0))
        norms = []
        x = smoother.smooth(np.zeros(system.size), steps=20,
                            callback=lambda step, x: norms.append(
                                system.residuals(*system.split(x)).norm))
        self.assertEqual(len(norms), 20)
        self.assertLess(norms[-1], 0.5 * np.linalg.norm(system.rhs))
        self.assertEqual(x.shape, (system.size,))

    def test_ordering(self):
        smoother = PatchSmoother(self.system, self.patches, SmootherConfig(ordering='descending'))
        anchors = [p.anchor_node for p in smoother.patches]
        self.assertEqual(anchors, sorted(anchors, reverse=True))
        self.assertEqual(len(smoother), self.system.mesh.n_vertices)

    def test_reverse_sweep(self):
        system = self.system
        forward = PatchSmoother(system, self.patches, SmootherConfig(alpha=1.0))
        backward = PatchSmoother(system, self.patches,
                                 SmootherConfig(alpha=1.0, ordering='descending'))
        x0 = forward.sweep(np.zeros(system.size), reverse=True)
        x1 = backward.sweep(np.zeros(system.size))
        self.assert_array_eq(x0, x1)
        self.assertFalse(np.array_equal(x0, forward.sweep(np.zeros(system.size))))

    def test_enlarged_patches_are_solvable_with_rbm_removal(self):
        system = self.system
        config = SmootherConfig(bc_kind='neumann_remove_rbm')
        mesh = system.mesh
        interior = [v for v in range(mesh.n_vertices)
                    if 0 < mesh.vertices[v, 0] < 1 and 0 < mesh.vertices[v, 1] < 1]
        for v in interior:
            patch = enlarge_patch(mesh, node_patch(mesh, v))
            y_loc, z_loc = local_solve(extract_local(system, patch, config), config)
            self.assertTrue(np.isfinite(y_loc).all() and np.isfinite(z_loc).all())
