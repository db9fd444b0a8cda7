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

"""
Dof layouts, the RT1 reference basis, canonical interpolation and intergrid transfers for the
stress (two RT1 rows), displacement (discontinuous P1) and rotation (continuous P1) spaces.

Global RT1 dofs of a scalar row are numbered edge first: the two moments of edge ``e``
against the linear Lagrange functions of its sorted endpoints are ``2e`` and ``2e + 1``, and
the two interior moments of triangle ``t`` are ``2E + 2t`` and ``2E + 2t + 1``. Stress row
``r`` is offset by ``r * (2E + 2T)``. The displacement dof of component ``c`` at local vertex
``a`` of triangle ``t`` is ``6t + 3c + a``; the rotation dofs follow as one per vertex.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Tuple

import numpy as np
import scipy.sparse as sps

from dualmg.config import get_option
from dualmg.exceptions import MeshError
from dualmg.mesh import LOCAL_EDGES, Mesh, check_nested
from dualmg.quadrature import edge_rule, triangle_rule
from dualmg.utils import assemble_coo, lazy_property


__all__ = ['build_layout', 'eval_rt1_basis', 'rt1_dof_functionals', 'build_transfer',
           'free_transfer', 'compose_transfers', 'interpolate_stress',
           'interpolate_displacement', 'interpolate_rotation', 'boundary_flux_moments',
           'evaluate_stress', 'reference_coordinates']

_REFERENCE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _monomials(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """ Values (N, 8, 2) and divergences (N, 8) of the monomial RT1 fields. """
    x, y = points[..., 0], points[..., 1]
    one, zero = np.ones_like(x), np.zeros_like(x)
    values = np.stack([
        np.stack([one, zero], axis=-1),
        np.stack([x, zero], axis=-1),
        np.stack([y, zero], axis=-1),
        np.stack([zero, one], axis=-1),
        np.stack([zero, x], axis=-1),
        np.stack([zero, y], axis=-1),
        np.stack([x * x, x * y], axis=-1),
        np.stack([x * y, y * y], axis=-1),
    ], axis=-2)
    divs = np.stack([zero, one, zero, zero, zero, one, 3 * x, 3 * y], axis=-1)
    return values, divs


def _local_functionals(triangle: np.ndarray, field: Callable[[np.ndarray], np.ndarray]):
    """
    The 8 RT1 functionals of one scalar row on a counter-clockwise triangle: for local edge
    ``k`` the flux moments against the Lagrange functions of its endpoints ``v[k+1]``,
    ``v[k+2]`` (outward normal), then the moments of the components along ``J^{-T} e_k``.
    """
    t, w = edge_rule(3)
    out = np.empty(8)
    for k, (ia, ib) in enumerate(LOCAL_EDGES):
        a, b = triangle[ia], triangle[ib]
        d = b - a
        normal = np.array([d[1], -d[0]])
        flux = field(a + t[:, None] * d) @ normal
        out[2 * k] = np.sum(w * flux * (1 - t))
        out[2 * k + 1] = np.sum(w * flux * t)
    bary, weights = triangle_rule(4)
    jac = np.stack([triangle[1] - triangle[0], triangle[2] - triangle[0]], axis=1)
    area = 0.5 * np.linalg.det(jac)
    values = field(bary @ triangle)
    directions = np.linalg.inv(jac).T
    out[6:] = (weights * area) @ (values @ directions)
    return out


@lru_cache(maxsize=None)
def _reference_coefficients() -> np.ndarray:
    """ Coefficients of the reference basis in the monomial fields, column per basis field. """
    duals = np.empty((8, 8))
    for j in range(8):
        duals[:, j] = _local_functionals(_REFERENCE, lambda p: _monomials(p)[0][:, j])
    coefficients = np.linalg.inv(duals)
    coefficients.setflags(write=False)
    return coefficients


def reference_basis(points) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reference RT1 basis values (..., 8, 2) and divergences (..., 8) at reference points.
    """
    values, divs = _monomials(np.asarray(points, dtype=float))
    coefficients = _reference_coefficients()
    return np.einsum('...jd,ji->...id', values, coefficients), divs @ coefficients


def reference_coordinates(triangle, points) -> np.ndarray:
    """ Pull physical points back to the reference triangle of ``triangle``. """
    triangle = np.asarray(triangle, dtype=float)
    jac = np.stack([triangle[1] - triangle[0], triangle[2] - triangle[0]], axis=1)
    return np.linalg.solve(jac, (np.asarray(points, dtype=float) - triangle[0]).T).T


def eval_rt1_basis(triangle, local_dof: int, point) -> np.ndarray:
    """
    Value of a local RT1 basis field of ``triangle`` at a point of the reference triangle.

    The reference field is mapped by the contravariant Piola transform ``J phi / det J``, so the
    basis is dual to the local functionals (edge flux moments along the outward normal, then
    the two interior moments).

    Examples
    --------
    >>> value = eval_rt1_basis([[0, 0], [1, 0], [0, 1]], 6, [1 / 3, 1 / 3])
    >>> value.shape
    (2,)
    """
    triangle = np.asarray(triangle, dtype=float)
    if not 0 <= local_dof < 8:
        raise ValueError("local_dof should be in [0, 8), got {}.".format(local_dof))
    jac = np.stack([triangle[1] - triangle[0], triangle[2] - triangle[0]], axis=1)
    det = np.linalg.det(jac)
    if det <= 1e-14 * max(float(np.abs(jac).max()), 1e-300) ** 2:
        raise MeshError("Degenerate or inverted triangle {}.".format(triangle.tolist()))
    values, _ = reference_basis(point)
    return values[..., local_dof, :] @ jac.T / det


def rt1_dof_functionals(triangle, field: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """
    Apply the 8 local RT1 functionals of ``triangle`` to a vector field of physical points.
    """
    return _local_functionals(np.asarray(triangle, dtype=float), field)


@dataclass(frozen=True, eq=False)
class DofLayout(object):
    """
    Sizes and index maps of the stress, displacement and rotation dofs of a mesh.

    ``constrained`` lists the stress dofs on Neumann edges, which are eliminated from the
    assembled system; ``free`` is its complement in ascending order.
    """
    n_vertices: int
    n_edges: int
    n_triangles: int
    element_dofs: np.ndarray
    element_signs: np.ndarray
    constrained: np.ndarray

    @property
    def n_rt(self) -> int:
        return 2 * self.n_edges + 2 * self.n_triangles

    @property
    def n_stress(self) -> int:
        return 2 * self.n_rt

    @property
    def n_disp(self) -> int:
        return 6 * self.n_triangles

    @property
    def n_rot(self) -> int:
        return self.n_vertices

    @property
    def n(self) -> int:
        return self.n_stress

    @property
    def m(self) -> int:
        return self.n_disp + self.n_rot

    def stress_index(self, row, dof):
        return row * self.n_rt + dof

    def edge_dofs(self, edge) -> np.ndarray:
        """ Stress dofs of an edge ordered by row then endpoint. """
        base = 2 * np.asarray(edge)
        return np.stack([base, base + 1, self.n_rt + base, self.n_rt + base + 1], axis=-1)

    def interior_dofs(self, triangle) -> np.ndarray:
        base = 2 * self.n_edges + 2 * np.asarray(triangle)
        return np.stack([base, base + 1, self.n_rt + base, self.n_rt + base + 1], axis=-1)

    def disp_index(self, triangle, component, vertex):
        return 6 * triangle + 3 * component + vertex

    def rot_index(self, vertex):
        """ Position of a rotation dof among the multipliers. """
        return self.n_disp + vertex

    def stress_owner(self, index: int) -> Tuple[str, int, int, int]:
        """ (kind, entity, local dof, row) of a global stress dof. """
        row, dof = divmod(int(index), self.n_rt)
        if not 0 <= row < 2:
            raise IndexError("Stress dof {} out of range.".format(index))
        if dof < 2 * self.n_edges:
            return 'edge', dof // 2, dof % 2, row
        dof -= 2 * self.n_edges
        return 'interior', dof // 2, dof % 2, row

    @lazy_property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_stress, dtype=bool)
        mask[self.constrained] = False
        free = np.flatnonzero(mask)
        free.setflags(write=False)
        return free

    @lazy_property
    def full_to_free(self) -> np.ndarray:
        """ Position of every stress dof among the free ones, -1 if constrained. """
        index = np.full(self.n_stress, -1, dtype=np.int64)
        index[self.free] = np.arange(len(self.free))
        index.setflags(write=False)
        return index


def build_layout(mesh: Mesh) -> DofLayout:
    """
    Dof layout of the RT1 x DP1 x P1 triple on ``mesh``.

    Examples
    --------
    >>> from dualmg.mesh import build_mesh
    >>> mesh = build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], lambda midpoint: 'D')
    >>> layout = build_layout(mesh)
    >>> layout.n_stress, layout.n_disp, layout.n_rot
    (16, 6, 3)
    """
    T, E = mesh.n_triangles, mesh.n_edges
    dofs = np.empty((T, 8), dtype=np.int64)
    signs = np.ones((T, 8))
    for k, (ia, ib) in enumerate(LOCAL_EDGES):
        e = mesh.triangle_edges[:, k]
        for l, local_vertex in enumerate((ia, ib)):
            vertex = mesh.triangles[:, local_vertex]
            dofs[:, 2 * k + l] = 2 * e + np.where(vertex == mesh.edges[e, 0], 0, 1)
            signs[:, 2 * k + l] = mesh.triangle_edge_signs[:, k]
    dofs[:, 6] = 2 * E + 2 * np.arange(T)
    dofs[:, 7] = dofs[:, 6] + 1
    dofs.setflags(write=False)
    signs.setflags(write=False)

    neumann = mesh.labelled_edges('N')
    n_rt = 2 * E + 2 * T
    constrained = np.sort(np.concatenate(
        [r * n_rt + 2 * neumann + j for r in (0, 1) for j in (0, 1)])).astype(np.int64)
    constrained.setflags(write=False)
    return DofLayout(mesh.n_vertices, E, T, dofs, signs, constrained)


def element_basis(mesh: Mesh, layout: DofLayout, reference_points) -> Tuple[np.ndarray, np.ndarray]:
    """
    Physical basis values (T, nq, 8, 2) and divergences (T, nq, 8) of every element at the
    images of shared reference points, including the global orientation signs.
    """
    values, divs = reference_basis(reference_points)
    jac = mesh.jacobians
    det = 2 * mesh.areas
    scale = layout.element_signs / det[:, None]
    phi = np.einsum('tab,qib->tqia', jac, values) * scale[:, None, :, None]
    div = divs[None, :, :] * scale[:, None, :]
    return phi, div


def _pointwise_basis(mesh: Mesh, layout: DofLayout, triangles: np.ndarray, points: np.ndarray):
    """ Basis values (N, nq, 8, 2) of ``triangles[i]`` at its own physical points (N, nq, 2). """
    jac = mesh.jacobians[triangles]
    origin = mesh.vertices[mesh.triangles[triangles, 0]]
    local = np.einsum('nab,nqb->nqa', np.linalg.inv(jac), points - origin[:, None, :])
    values, _ = reference_basis(local)
    scale = layout.element_signs[triangles] / (2 * mesh.areas[triangles])[:, None]
    return np.einsum('nab,nqib->nqia', jac, values) * scale[:, None, :, None]


def _edge_points(mesh: Mesh, n_points: int = 3):
    t, w = edge_rule(n_points)
    start = mesh.vertices[mesh.edges[:, 0]]
    direction = mesh.vertices[mesh.edges[:, 1]] - start
    points = start[:, None, :] + t[None, :, None] * direction[:, None, :]
    return t, w, points


def _interior_points(mesh: Mesh, order: int):
    bary, weights = triangle_rule(order)
    points = np.einsum('qk,tkd->tqd', bary, mesh.vertices[mesh.triangles])
    return bary, weights[None, :] * mesh.areas[:, None], points


def interpolate_stress(mesh: Mesh, layout: DofLayout,
                       sigma: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """
    Canonical RT1 interpolant of a stress field, all dofs including the constrained ones.

    ``sigma`` maps points of shape (N, 2) to tensors of shape (N, 2, 2); row ``r`` of the
    tensor is interpolated into stress row ``r``.
    """
    E, T = mesh.n_edges, mesh.n_triangles
    out = np.empty(layout.n_stress)
    t, w, points = _edge_points(mesh)
    values = np.asarray(sigma(points.reshape(-1, 2)), dtype=float).reshape(E, len(t), 2, 2)
    normal = mesh.edge_normals * mesh.edge_lengths[:, None]
    flux = np.einsum('eqrd,ed->erq', values, normal)
    for r in (0, 1):
        out[layout.stress_index(r, 2 * np.arange(E))] = flux[:, r] @ (w * (1 - t))
        out[layout.stress_index(r, 2 * np.arange(E) + 1)] = flux[:, r] @ (w * t)

    _, weights, points = _interior_points(mesh, 4)
    values = np.asarray(sigma(points.reshape(-1, 2)), dtype=float).reshape(T, -1, 2, 2)
    directions = np.linalg.inv(mesh.jacobians).transpose(0, 2, 1)
    moments = np.einsum('tq,tqrd,tdk->trk', weights, values, directions)
    for r in (0, 1):
        for k in (0, 1):
            out[layout.stress_index(r, 2 * E + 2 * np.arange(T) + k)] = moments[:, r, k]
    return out


def boundary_flux_moments(mesh: Mesh, layout: DofLayout, edges,
                          traction: Callable[[np.ndarray, np.ndarray], np.ndarray]):
    """
    RT1 edge dofs of a prescribed traction ``sigma n`` on boundary edges.

    Returns the stress dof indices, ordered like :meth:`DofLayout.edge_dofs`, and their values.
    """
    edges = np.asarray(edges, dtype=np.int64)
    if len(edges) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    t, w, points = _edge_points(mesh)
    points = points[edges]
    normals = np.repeat(mesh.edge_normals[edges][:, None, :], len(t), axis=1)
    g = np.asarray(traction(points.reshape(-1, 2), normals.reshape(-1, 2)), dtype=float)
    g = g.reshape(len(edges), len(t), 2) * mesh.edge_lengths[edges][:, None, None]
    values = np.stack([g[:, :, 0] @ (w * (1 - t)), g[:, :, 0] @ (w * t),
                       g[:, :, 1] @ (w * (1 - t)), g[:, :, 1] @ (w * t)], axis=1)
    return layout.edge_dofs(edges).ravel(), values.ravel()


def interpolate_displacement(mesh: Mesh, u: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """ DP1 nodal interpolant, ordered ``6t + 3c + a``. """
    values = np.asarray(u(mesh.vertices[mesh.triangles].reshape(-1, 2)), dtype=float)
    return values.reshape(mesh.n_triangles, 3, 2).transpose(0, 2, 1).ravel()


def interpolate_rotation(mesh: Mesh, p: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """ P1 nodal interpolant of a scalar field. """
    return np.asarray(p(mesh.vertices), dtype=float).reshape(mesh.n_vertices)


def evaluate_stress(mesh: Mesh, layout: DofLayout, y_full: np.ndarray, order: int = 6):
    """
    Evaluate a stress vector at element quadrature points.

    Returns
    -------
    points : ndarray, shape (T, nq, 2)
    weights : ndarray, shape (T, nq)
    values : ndarray, shape (T, nq, 2, 2)
    """
    bary, weights, points = _interior_points(mesh, order)
    phi, _ = element_basis(mesh, layout, bary[:, 1:])
    y_full = np.asarray(y_full, dtype=float)
    coefficients = np.stack(
        [y_full[layout.stress_index(r, layout.element_dofs)] for r in (0, 1)], axis=1)
    values = np.einsum('tri,tqid->tqrd', coefficients, phi)
    return points, weights, values


@dataclass(frozen=True, eq=False)
class TransferPair(object):
    """
    Prolongations of the stress (``Pi``) and multiplier (``Q``) vectors from a coarse level to
    the next finer one.
    """
    Pi: sps.csr_matrix
    Q: sps.csr_matrix

    @lazy_property
    def prolongation(self) -> sps.csr_matrix:
        """ ``blockdiag(Pi, Q)`` acting on ``[y; z]``. """
        return sps.block_diag([self.Pi, self.Q], format='csr')


def _drop(rows, cols, vals):
    tol = get_option('transfer.drop_tolerance')
    keep = np.abs(vals) > tol * max(float(np.abs(vals).max()), 1e-300)
    return rows[keep], cols[keep], vals[keep]


def _stress_transfer(coarse: Mesh, fine: Mesh, coarse_layout: DofLayout,
                     fine_layout: DofLayout) -> sps.csr_matrix:
    Ef, Tf = fine.n_edges, fine.n_triangles
    coarse_dofs = coarse_layout.element_dofs

    # fine edge moments, evaluated inside the parent of the first adjacent fine triangle
    t, w, points = _edge_points(fine)
    parents = fine.edge_triangles[:, 0] // 4
    phi = _pointwise_basis(coarse, coarse_layout, parents, points)
    normal = fine.edge_normals * fine.edge_lengths[:, None]
    flux = np.einsum('eqid,ed->eqi', phi, normal)
    moments = np.stack([np.einsum('q,eqi->ei', w * (1 - t), flux),
                        np.einsum('q,eqi->ei', w * t, flux)], axis=1)
    edge_rows = np.repeat((2 * np.arange(Ef)[:, None] + np.arange(2)[None, :])[:, :, None],
                          8, axis=2)
    edge_cols = np.repeat(coarse_dofs[parents][:, None, :], 2, axis=1)

    # fine interior moments
    _, weights, points = _interior_points(fine, 4)
    parents = np.arange(Tf) // 4
    phi = _pointwise_basis(coarse, coarse_layout, parents, points)
    directions = np.linalg.inv(fine.jacobians).transpose(0, 2, 1)
    interior = np.einsum('tq,tqid,tdk->tki', weights, phi, directions)
    interior_rows = np.repeat(
        (2 * Ef + 2 * np.arange(Tf)[:, None] + np.arange(2)[None, :])[:, :, None], 8, axis=2)
    interior_cols = np.repeat(coarse_dofs[parents][:, None, :], 2, axis=1)

    rows = np.concatenate([edge_rows.ravel(), interior_rows.ravel()])
    cols = np.concatenate([edge_cols.ravel(), interior_cols.ravel()])
    vals = np.concatenate([moments.ravel(), interior.ravel()])
    rows, cols, vals = _drop(rows, cols, vals)
    return assemble_coo(rows, cols, vals, (fine_layout.n_rt, coarse_layout.n_rt))


def _multiplier_transfer(coarse: Mesh, fine: Mesh) -> sps.csr_matrix:
    Tc, Tf, Vc = coarse.n_triangles, fine.n_triangles, coarse.n_vertices

    # barycentric coordinates of the fine element vertices in their parent, snapped to halves
    parents = np.arange(Tf) // 4
    local = np.einsum('tab,tkb->tka', np.linalg.inv(coarse.jacobians[parents]),
                      fine.vertices[fine.triangles] -
                      coarse.vertices[coarse.triangles[parents, 0]][:, None, :])
    bary = np.concatenate([1 - local.sum(axis=2, keepdims=True), local], axis=2)
    halves = np.round(2 * bary) / 2
    bary = np.where(np.abs(bary - halves) < 1e-10, halves, bary)
    tf, a, b = np.meshgrid(np.arange(Tf), np.arange(3), np.arange(3), indexing='ij')
    rows, cols, vals = [], [], []
    for c in (0, 1):
        rows.append((6 * tf + 3 * c + a).ravel())
        cols.append((6 * parents[tf] + 3 * c + b).ravel())
        vals.append(bary.ravel())
    rows, cols, vals = _drop(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
    Q_disp = assemble_coo(rows, cols, vals, (6 * Tf, 6 * Tc))

    midpoints = np.arange(coarse.n_edges)
    rot_rows = np.concatenate([np.arange(Vc), Vc + midpoints, Vc + midpoints])
    rot_cols = np.concatenate([np.arange(Vc), coarse.edges[:, 0], coarse.edges[:, 1]])
    rot_vals = np.concatenate([np.ones(Vc), np.full(2 * coarse.n_edges, 0.5)])
    Q_rot = assemble_coo(rot_rows, rot_cols, rot_vals, (fine.n_vertices, Vc))
    return sps.block_diag([Q_disp, Q_rot], format='csr')


def build_transfer(coarse_mesh: Mesh, fine_mesh: Mesh,
                   layouts: Tuple[DofLayout, DofLayout]) -> TransferPair:
    """
    Canonical prolongations between a mesh and its uniform refinement.

    Column ``j`` of ``Pi`` holds the fine RT1 dofs of coarse basis field ``j``; ``Q`` applies
    DP1 interpolation in the child elements and P1 vertex/midpoint interpolation. Both act on
    all dofs; use :func:`free_transfer` to restrict them to the unconstrained ones.

    Parameters
    ----------
    coarse_mesh, fine_mesh : Mesh
        ``fine_mesh`` must be ``refine_uniform(coarse_mesh)``.
    layouts : (DofLayout, DofLayout)
        Coarse and fine layouts.
    """
    check_nested(coarse_mesh, fine_mesh)
    coarse_layout, fine_layout = layouts
    Pi_rt = _stress_transfer(coarse_mesh, fine_mesh, coarse_layout, fine_layout)
    Pi = sps.block_diag([Pi_rt, Pi_rt], format='csr')
    return TransferPair(Pi, _multiplier_transfer(coarse_mesh, fine_mesh))


def free_transfer(pair: TransferPair, coarse_layout: DofLayout,
                  fine_layout: DofLayout) -> TransferPair:
    """ Restrict ``Pi`` to the free stress dofs of both levels. """
    Pi = pair.Pi[fine_layout.free][:, coarse_layout.free].tocsr()
    return TransferPair(Pi, pair.Q)


def compose_transfers(pairs: Sequence[TransferPair]) -> TransferPair:
    """ Chain prolongations given from coarse to fine into one coarse-to-finest transfer. """
    if len(pairs) == 0:
        raise ValueError("At least one transfer is needed.")
    if len(pairs) == 1:
        return pairs[0]
    Pi, Q = pairs[0].Pi, pairs[0].Q
    for pair in pairs[1:]:
        Pi = (pair.Pi @ Pi).tocsr()
        Q = (pair.Q @ Q).tocsr()
    return TransferPair(Pi, Q)
