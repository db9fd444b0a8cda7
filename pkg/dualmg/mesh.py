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
Conforming triangular meshes, nested uniform refinement and node patches.
"""
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sps

from dualmg.exceptions import BoundaryLabelError, InvertedTriangleError, MeshError, \
    NonManifoldEdgeError, NonNestedMeshError
from dualmg.utils import lazy_property, normalize_label


__all__ = ['build_mesh', 'refine_uniform', 'node_patch', 'enlarge_patch', 'patches',
           'structured_mesh', 'rectilinear_mesh_with_holes', 'read_mesh', 'write_mesh',
           'edge_parents', 'check_nested']

logger = logging.getLogger(__name__)

# Local edge k of a triangle is opposite to its local vertex k.
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])

Classifier = Union[Callable[[np.ndarray], str], Mapping]


def _frozen(array, dtype):
    array = np.ascontiguousarray(array, dtype=dtype)
    array.setflags(write=False)
    return array


class Mesh(object):
    """
    A conforming triangulation with globally oriented edges and labelled boundary.

    Instances are created by :func:`build_mesh` and are immutable.

    Attributes
    ----------
    vertices : ndarray, shape (V, 2)
    triangles : ndarray, shape (T, 3)
        Counter-clockwise vertex indices.
    edges : ndarray, shape (E, 2)
        Vertex pairs sorted ascending; the edge functionals refer to this endpoint order.
    edge_triangles : ndarray, shape (E, 2)
        Adjacent triangles in ascending order, ``-1`` in the second column on the boundary.
        The global normal of an edge points out of the first triangle.
    triangle_edges : ndarray, shape (T, 3)
        Global edge index of the local edge opposite to each local vertex.
    edge_labels : ndarray, shape (E,)
        'N' or 'D' on boundary edges, '' on interior edges.
    level : int
    """

    def __init__(self, vertices, triangles, edges, edge_triangles, triangle_edges, edge_labels,
                 level=0):
        self.vertices = _frozen(vertices, float)
        self.triangles = _frozen(triangles, np.int64)
        self.edges = _frozen(edges, np.int64)
        self.edge_triangles = _frozen(edge_triangles, np.int64)
        self.triangle_edges = _frozen(triangle_edges, np.int64)
        self.edge_labels = _frozen(edge_labels, '<U1')
        self.level = int(level)

    def __repr__(self):
        return "Mesh(level={}, V={}, E={}, T={}, boundary={})".format(
            self.level, self.n_vertices, self.n_edges, self.n_triangles,
            len(self.boundary_edges))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def euler(self) -> int:
        """ V - E + T, equal to one minus the number of holes for a connected mesh. """
        return self.n_vertices - self.n_edges + self.n_triangles

    @lazy_property
    def areas(self) -> np.ndarray:
        return _frozen(_signed_areas(self.vertices, self.triangles), float)

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    @lazy_property
    def jacobians(self) -> np.ndarray:
        """ Affine maps from the reference triangle, columns ``v1 - v0`` and ``v2 - v0``. """
        p = self.vertices[self.triangles]
        return _frozen(np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2), float)

    @lazy_property
    def boundary_edges(self) -> np.ndarray:
        return _frozen(np.flatnonzero(self.edge_triangles[:, 1] < 0), np.int64)

    @lazy_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return _frozen(np.hypot(d[:, 0], d[:, 1]), float)

    @lazy_property
    def edge_midpoints(self) -> np.ndarray:
        return _frozen(0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]]),
                       float)

    @lazy_property
    def edge_normals(self) -> np.ndarray:
        """ Unit normals pointing out of ``edge_triangles[:, 0]``. """
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        normals = np.stack([d[:, 1], -d[:, 0]], axis=1) / self.edge_lengths[:, None]
        centroids = self.vertices[self.triangles[self.edge_triangles[:, 0]]].mean(axis=1)
        flip = np.einsum('ij,ij->i', normals, self.edge_midpoints - centroids) < 0
        normals[flip] *= -1
        return _frozen(normals, float)

    @lazy_property
    def triangle_edge_signs(self) -> np.ndarray:
        """ +1 where the triangle owns the global normal of its local edge, else -1. """
        owner = self.edge_triangles[self.triangle_edges, 0]
        signs = np.where(owner == np.arange(self.n_triangles)[:, None], 1.0, -1.0)
        return _frozen(signs, float)

    @lazy_property
    def vertex_triangles(self) -> sps.csr_matrix:
        """ Vertex to triangle incidence with sorted column indices. """
        T = self.n_triangles
        incidence = sps.csr_matrix(
            (np.ones(3 * T), (self.triangles.ravel(), np.repeat(np.arange(T), 3))),
            shape=(self.n_vertices, T))
        incidence.sort_indices()
        return incidence

    def coords(self, t: int) -> np.ndarray:
        return self.vertices[self.triangles[t]]

    def boundary_length(self, label: Optional[str] = None) -> float:
        """ Total length of the boundary edges, restricted to ``label`` if given. """
        edges = self.boundary_edges
        if label is not None:
            edges = edges[self.edge_labels[edges] == normalize_label(label)]
        return float(self.edge_lengths[edges].sum())

    def labelled_edges(self, label: str) -> np.ndarray:
        return np.flatnonzero(self.edge_labels == normalize_label(label))


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _classify(classifier: Classifier, edge, midpoint) -> str:
    key = (int(edge[0]), int(edge[1]))
    if isinstance(classifier, Mapping):
        if key not in classifier:
            raise BoundaryLabelError(key)
        raw = classifier[key]
    else:
        raw = classifier(midpoint)
    label = normalize_label(raw)
    if label is None:
        raise BoundaryLabelError(key, raw)
    return label


def build_mesh(vertices, triangles, boundary_classifier: Classifier, level: int = 0) -> Mesh:
    """
    Extract oriented edges and boundary labels from a vertex/triangle list.

    Parameters
    ----------
    vertices : array-like, shape (V, 2)
    triangles : array-like, shape (T, 3)
        Counter-clockwise vertex indices.
    boundary_classifier : callable or mapping
        Either a function of the edge midpoint returning 'N'/'D' (or 'Neumann'/'Dirichlet'),
        or a mapping from sorted vertex pairs of boundary edges to labels.
    level : int
        Refinement level stored on the mesh.

    Returns
    -------
    Mesh

    Raises
    ------
    MeshError : invalid vertex references
    InvertedTriangleError : a triangle with non-positive signed area
    NonManifoldEdgeError : an edge shared by more than two triangles
    BoundaryLabelError : a boundary edge without a valid label

    Examples
    --------
    >>> mesh = build_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]],
    ...                   lambda midpoint: 'N')
    >>> mesh.n_vertices, mesh.n_edges, mesh.n_triangles, len(mesh.boundary_edges)
    (4, 5, 2, 4)
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("Vertices should have shape (V, 2), got {}.".format(vertices.shape))
    if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
        raise MeshError("Triangles should have shape (T, 3) with T > 0, got {}."
                        .format(triangles.shape))
    if triangles.min() < 0 or triangles.max() >= len(vertices):
        raise MeshError("Triangles reference vertices outside [0, {}).".format(len(vertices)))

    areas = _signed_areas(vertices, triangles)
    p = vertices[triangles]
    diameters = np.max(np.abs(p - np.roll(p, 1, axis=1)), axis=(1, 2))
    bad = np.flatnonzero(areas <= 1e-13 * diameters * diameters)
    if len(bad) > 0:
        raise InvertedTriangleError(bad[0], areas[bad[0]])

    T = len(triangles)
    pairs = np.sort(triangles[:, LOCAL_EDGES].reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(
        pairs, axis=0, return_inverse=True, return_counts=True)
    inverse = np.asarray(inverse).reshape(-1)
    owners = np.repeat(np.arange(T), 3)
    over = np.flatnonzero(counts > 2)
    if len(over) > 0:
        e = over[0]
        raise NonManifoldEdgeError(edges[e], owners[inverse == e])

    order = np.lexsort((owners, inverse))
    starts = np.searchsorted(inverse[order], np.arange(len(edges)))
    edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_triangles[:, 0] = owners[order][starts]
    shared = counts == 2
    edge_triangles[shared, 1] = owners[order][starts[shared] + 1]

    labels = np.full(len(edges), '', dtype='<U1')
    for e in np.flatnonzero(~shared):
        midpoint = 0.5 * (vertices[edges[e, 0]] + vertices[edges[e, 1]])
        labels[e] = _classify(boundary_classifier, edges[e], midpoint)

    return Mesh(vertices, triangles, edges, edge_triangles, inverse.reshape(T, 3), labels,
                level=level)


def refine_uniform(mesh: Mesh) -> Tuple[Mesh, np.ndarray]:
    """
    Split every triangle into four congruent children through its edge midpoints.

    The fine vertices are the coarse vertices followed by the midpoint of coarse edge ``e`` at
    index ``V + e``. Children of triangle ``t`` are ``4t .. 4t + 3``, the last one being the
    middle triangle. Boundary labels are inherited from the parent edge.

    Returns
    -------
    (Mesh, ndarray of shape (T, 4)) : the fine mesh and the child map

    Examples
    --------
    >>> mesh = build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], lambda midpoint: 'D')
    >>> fine, child_map = refine_uniform(mesh)
    >>> fine.n_vertices, fine.n_edges, fine.n_triangles, child_map.tolist()
    (6, 9, 4, [[0, 1, 2, 3]])
    """
    V = mesh.n_vertices
    vertices = np.vstack([mesh.vertices, mesh.edge_midpoints])
    v = mesh.triangles
    m = V + mesh.triangle_edges
    children = np.stack([
        np.stack([v[:, 0], m[:, 2], m[:, 1]], axis=1),
        np.stack([m[:, 2], v[:, 1], m[:, 0]], axis=1),
        np.stack([m[:, 1], m[:, 0], v[:, 2]], axis=1),
        np.stack([m[:, 0], m[:, 1], m[:, 2]], axis=1),
    ], axis=1).reshape(-1, 3)

    labels = {}  # type: Dict[Tuple[int, int], str]
    for e in mesh.boundary_edges:
        a, b = mesh.edges[e]
        label = str(mesh.edge_labels[e])
        labels[(int(a), int(V + e))] = label
        labels[(int(b), int(V + e))] = label

    fine = build_mesh(vertices, children, labels, level=mesh.level + 1)
    child_map = np.arange(4 * mesh.n_triangles).reshape(-1, 4)
    logger.debug("Refined %r into %r.", mesh, fine)
    return fine, child_map


def edge_parents(coarse: Mesh, fine: Mesh) -> np.ndarray:
    """
    Coarse edge containing each fine edge, or -1 for edges interior to a coarse triangle.
    """
    V = coarse.n_vertices
    lo, hi = fine.edges[:, 0], fine.edges[:, 1]
    halves = (lo < V) & (hi >= V)
    return np.where(halves, hi - V, -1)


def check_nested(coarse: Mesh, fine: Mesh) -> None:
    """
    Raise NonNestedMeshError unless ``fine`` is the uniform refinement of ``coarse``.
    """
    V, E, T = coarse.n_vertices, coarse.n_edges, coarse.n_triangles
    if fine.n_vertices != V + E or fine.n_triangles != 4 * T:
        raise NonNestedMeshError(
            "Mesh with V={}, T={} is not the uniform refinement of a mesh with V={}, E={}, "
            "T={}.".format(fine.n_vertices, fine.n_triangles, V, E, T))
    scale = max(float(np.abs(coarse.vertices).max()), 1.0)
    if not (np.allclose(fine.vertices[:V], coarse.vertices, rtol=0, atol=1e-12 * scale) and
            np.allclose(fine.vertices[V:], coarse.edge_midpoints, rtol=0, atol=1e-12 * scale)):
        raise NonNestedMeshError("Fine vertices are not the coarse vertices and edge midpoints.")
    centroids = fine.vertices[fine.triangles].mean(axis=1).reshape(T, 4, 2)
    parents = coarse.vertices[coarse.triangles]
    jinv = np.linalg.inv(coarse.jacobians)
    local = np.einsum('tij,tcj->tci', jinv, centroids - parents[:, None, 0])
    inside = (local >= -1e-12).all(axis=2) & (local.sum(axis=2) <= 1 + 1e-12)
    if not inside.all():
        raise NonNestedMeshError("Fine triangles are not ordered as children of the coarse ones.")


@dataclass(frozen=True)
class MeshHierarchy(object):
    """
    Nested meshes from coarse to fine with their parent-child maps.
    """
    meshes: List[Mesh]
    child_maps: List[np.ndarray] = field(default_factory=list)
    edge_parents: List[np.ndarray] = field(default_factory=list)

    @staticmethod
    def from_coarse(mesh: Mesh, refinements: int) -> 'MeshHierarchy':
        if refinements < 0:
            raise ValueError("refinements should be >= 0, got {}.".format(refinements))
        meshes, child_maps, parents = [mesh], [], []
        for _ in range(refinements):
            fine, child_map = refine_uniform(meshes[-1])
            parents.append(edge_parents(meshes[-1], fine))
            meshes.append(fine)
            child_maps.append(child_map)
        return MeshHierarchy(meshes, child_maps, parents)

    def __len__(self):
        return len(self.meshes)

    def __getitem__(self, level):
        return self.meshes[level]

    @property
    def finest(self) -> Mesh:
        return self.meshes[-1]

    @property
    def coarsest(self) -> Mesh:
        return self.meshes[0]


@dataclass(frozen=True)
class Patch(object):
    """
    Elements around an anchor node, possibly enlarged through the nodes of the trace.
    """
    anchor_node: int
    elements: Tuple[int, ...]
    generation_trace: Tuple[int, ...]

    def __len__(self):
        return len(self.elements)


def _incident(mesh: Mesh, node: int) -> np.ndarray:
    incidence = mesh.vertex_triangles
    return incidence.indices[incidence.indptr[node]:incidence.indptr[node + 1]]


def node_patch(mesh: Mesh, node: int) -> Patch:
    """
    All triangles sharing ``node``.

    >>> mesh = build_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]],
    ...                   lambda midpoint: 'N')
    >>> node_patch(mesh, 1)
    Patch(anchor_node=1, elements=(0,), generation_trace=(1,))
    """
    node = int(node)
    if not 0 <= node < mesh.n_vertices:
        raise MeshError("Node {} is not a vertex of {!r}.".format(node, mesh))
    elements = _incident(mesh, node)
    if len(elements) == 0:
        raise MeshError("Node {} is an isolated vertex.".format(node))
    return Patch(node, tuple(int(t) for t in elements), (node,))


def enlarge_patch(mesh: Mesh, patch: Patch, min_elements: int = 3) -> Patch:
    """
    Grow a patch until it has at least ``min_elements`` triangles.

    While the patch is too small, the lowest-index vertex of its elements that is not yet in
    the generation trace is appended to the trace and its node patch is merged in.
    """
    if len(patch) >= min_elements:
        return patch
    if mesh.n_triangles < min_elements:
        raise MeshError("Cannot build patches of {} elements on a mesh with {} triangles."
                        .format(min_elements, mesh.n_triangles))
    elements = set(patch.elements)
    trace = list(patch.generation_trace)
    while len(elements) < min_elements:
        nodes = np.unique(mesh.triangles[sorted(elements)])
        candidates = [int(v) for v in nodes if v not in trace]
        if len(candidates) == 0:
            raise MeshError("Patch anchored at node {} cannot be enlarged to {} elements."
                            .format(patch.anchor_node, min_elements))
        node = candidates[0]
        trace.append(node)
        elements.update(int(t) for t in _incident(mesh, node))
    return Patch(patch.anchor_node, tuple(sorted(elements)), tuple(trace))


def patches(mesh: Mesh, enlarge: bool = True) -> List[Patch]:
    """ The patch of every vertex in ascending node order. """
    result = [node_patch(mesh, node) for node in range(mesh.n_vertices)]
    if enlarge:
        result = [enlarge_patch(mesh, p) for p in result]
    return result


def structured_mesh(corners, nx: int, ny: int, boundary_classifier: Classifier) -> Mesh:
    """
    Mesh of a quadrilateral through the bilinear map of an ``nx`` by ``ny`` grid.

    Parameters
    ----------
    corners : array-like, shape (4, 2)
        Counter-clockwise corners, the first one mapped from (0, 0).
    nx, ny : int
        Number of cells along each direction. Every cell is split along its rising diagonal.
    boundary_classifier : callable or mapping

    Examples
    --------
    >>> mesh = structured_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], 2, 2, lambda midpoint: 'N')
    >>> mesh.n_triangles, mesh.euler
    (8, 1)
    """
    if nx < 1 or ny < 1:
        raise MeshError("Expected at least one cell in each direction, got {}x{}."
                        .format(nx, ny))
    p00, p10, p11, p01 = np.asarray(corners, dtype=float)
    s, t = np.meshgrid(np.linspace(0, 1, nx + 1), np.linspace(0, 1, ny + 1))
    s, t = s.ravel()[:, None], t.ravel()[:, None]
    vertices = ((1 - s) * (1 - t) * p00 + s * (1 - t) * p10 + s * t * p11 + (1 - s) * t * p01)
    return build_mesh(vertices, _grid_triangles(nx, ny), boundary_classifier)


def _grid_triangles(nx, ny):
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    q00 = j * (nx + 1) + i
    q10, q01 = q00 + 1, q00 + nx + 1
    q11 = q01 + 1
    lower = np.stack([q00, q10, q11], axis=1)
    upper = np.stack([q00, q11, q01], axis=1)
    return np.stack([lower, upper], axis=1).reshape(-1, 3)


@dataclass(frozen=True)
class Hole(object):
    """
    A convex polygonal hole given by its counter-clockwise corners.

    ``label`` is the boundary condition imposed on the edges around the hole.
    """
    corners: Tuple[Tuple[float, float], ...]
    label: str = 'N'

    @staticmethod
    def rectangle(x0, x1, y0, y1, label='N') -> 'Hole':
        return Hole(((x0, y0), (x1, y0), (x1, y1), (x0, y1)), label)

    def _sides(self):
        p = np.asarray(self.corners, dtype=float)
        return p, np.roll(p, -1, axis=0)

    def contains(self, points, tol=1e-12) -> np.ndarray:
        """ Strictly inside the polygon. """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        a, b = self._sides()
        d = b - a
        cross = (d[None, :, 0] * (points[:, None, 1] - a[None, :, 1]) -
                 d[None, :, 1] * (points[:, None, 0] - a[None, :, 0]))
        return (cross > tol).all(axis=1)

    def on_boundary(self, point, tol=1e-9) -> bool:
        point = np.asarray(point, dtype=float)
        a, b = self._sides()
        for start, end in zip(a, b):
            d = end - start
            s = np.clip(np.dot(point - start, d) / np.dot(d, d), 0.0, 1.0)
            if np.linalg.norm(point - (start + s * d)) <= tol:
                return True
        return False


def rectilinear_mesh_with_holes(xs: Sequence[float], ys: Sequence[float], holes: Sequence[Hole],
                                boundary_classifier: Classifier) -> Mesh:
    """
    Mesh of the rectangle spanned by the grid lines ``xs`` and ``ys`` minus the ``holes``.

    Each grid cell is split along its rising diagonal, triangles whose centroid lies inside a
    hole are removed and unused vertices are dropped. Hole corners should lie on grid nodes.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    nx, ny = len(xs) - 1, len(ys) - 1
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.stack([gx.ravel(), gy.ravel()], axis=1)
    triangles = _grid_triangles(nx, ny)
    centroids = vertices[triangles].mean(axis=1)
    keep = np.ones(len(triangles), dtype=bool)
    for hole in holes:
        keep &= ~hole.contains(centroids)
    triangles = triangles[keep]
    used, triangles = np.unique(triangles, return_inverse=True)
    triangles = np.asarray(triangles).reshape(-1, 3)
    logger.debug("Removed %d triangles and %d vertices for %d holes.",
                 int((~keep).sum()), len(vertices) - len(used), len(holes))
    return build_mesh(vertices[used], triangles, boundary_classifier)


def write_mesh(mesh: Mesh, path) -> None:
    """
    Write a mesh as plain text: a ``V T B`` header, vertex lines, triangle lines and boundary
    edge lines ``v0 v1 label``.
    """
    with open(path, 'w') as f:
        f.write("{} {} {}\n".format(mesh.n_vertices, mesh.n_triangles, len(mesh.boundary_edges)))
        for x, y in mesh.vertices:
            f.write("{!r} {!r}\n".format(float(x), float(y)))
        for a, b, c in mesh.triangles:
            f.write("{} {} {}\n".format(a, b, c))
        for e in mesh.boundary_edges:
            f.write("{} {} {}\n".format(mesh.edges[e, 0], mesh.edges[e, 1], mesh.edge_labels[e]))


def read_mesh(path, level: int = 0) -> Mesh:
    """ Read a mesh written by :func:`write_mesh`. """
    with open(path) as f:
        lines = [line.split() for line in f if line.strip()]
    if len(lines) == 0 or len(lines[0]) != 3:
        raise MeshError("Missing 'V T B' header in {}.".format(path))
    V, T, B = (int(v) for v in lines[0])
    if len(lines) != 1 + V + T + B:
        raise MeshError("Expected {} lines after the header of {}, found {}."
                        .format(V + T + B, path, len(lines) - 1))
    vertices = np.array(lines[1:1 + V], dtype=float)
    triangles = np.array(lines[1 + V:1 + V + T], dtype=np.int64)
    labels = {}
    for v0, v1, label in lines[1 + V + T:]:
        a, b = sorted((int(v0), int(v1)))
        labels[(a, b)] = label
    return build_mesh(vertices, triangles, labels, level=level)
