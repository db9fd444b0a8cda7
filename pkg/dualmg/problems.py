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
Benchmark problems: the Cook membrane, the face domain with four holes, the dual Poisson
problem with Robin conditions and manufactured elasticity solutions.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import numpy.polynomial.polynomial as npoly
import scipy.sparse as sps

from dualmg.assembly import Loads, MaterialParams, SaddleSystem, _factorize, assemble, \
    saddle_matrix
from dualmg.exceptions import ConfigurationError
from dualmg.mesh import Classifier, Hole, Mesh, MeshHierarchy, rectilinear_mesh_with_holes, \
    structured_mesh
from dualmg.quadrature import edge_rule, triangle_rule
from dualmg.spaces import DofLayout, build_layout, element_basis, evaluate_stress, \
    interpolate_displacement, interpolate_rotation, interpolate_stress
from dualmg.utils import assemble_coo, lazy_property


__all__ = ['cook_problem', 'face_problem', 'dual_poisson_robin', 'manufactured_elasticity',
           'unit_square', 'stress_l2_error']

logger = logging.getLogger(__name__)

COOK_CORNERS = ((0.0, 0.0), (48.0, 44.0), (48.0, 60.0), (0.0, 44.0))
COOK_TRACTION = (0.0, 0.01)

DEFAULT_FACE_HOLES = (
    Hole.rectangle(0.15, 0.3, 0.65, 0.8),
    Hole.rectangle(0.7, 0.85, 0.65, 0.8),
    Hole.rectangle(0.3, 0.7, 0.15, 0.3),
    Hole(((0.45, 0.4), (0.55, 0.4), (0.55, 0.55)), label='D'),
)

_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ExactSolution(object):
    """ Displacement, stress and rotation fields of a manufactured problem. """
    displacement: Callable[[np.ndarray], np.ndarray]
    stress: Callable[[np.ndarray], np.ndarray]
    rotation: Callable[[np.ndarray], np.ndarray]
    body_force: Callable[[np.ndarray], np.ndarray]

    def dofs(self, mesh: Mesh, layout: DofLayout) -> Tuple[np.ndarray, np.ndarray]:
        """ Canonical interpolants ``(y_full, z)``; ``y_full`` includes constrained dofs. """
        y = interpolate_stress(mesh, layout, self.stress)
        z = np.concatenate([interpolate_displacement(mesh, self.displacement),
                            interpolate_rotation(mesh, self.rotation)])
        return y, z


@dataclass(frozen=True, eq=False)
class ProblemSpec(object):
    """
    Data of a benchmark.

    Attributes
    ----------
    name : str
    mesh : Mesh
        Coarsest mesh, labelled by ``boundary_classifier``.
    boundary_classifier : callable or mapping
    loads : Loads
    mat : MaterialParams
    exact : ExactSolution, optional
    """
    name: str
    mesh: Mesh
    boundary_classifier: Classifier
    loads: Loads
    mat: MaterialParams
    exact: Optional[ExactSolution] = None

    def hierarchy(self, refinements: int) -> MeshHierarchy:
        return MeshHierarchy.from_coarse(self.mesh, refinements)

    def system(self, mesh: Optional[Mesh] = None) -> SaddleSystem:
        """ Assemble the problem on ``mesh``, by default the coarsest one. """
        mesh = self.mesh if mesh is None else mesh
        return assemble(mesh, build_layout(mesh), self.mat, self.loads)


def _check_refinements(refinements: int) -> None:
    if refinements < 0:
        raise ConfigurationError("refinements should be >= 0, got {}.".format(refinements))


def _cook_classifier(midpoint) -> str:
    return 'D' if abs(midpoint[0]) < _TOL else 'N'


def _cook_traction(points, normals):
    right = np.abs(points[:, 0] - COOK_CORNERS[1][0]) < _TOL
    return np.where(right[:, None], np.asarray(COOK_TRACTION)[None, :], 0.0)


def cook_problem(refinements: int, mat: Optional[MaterialParams] = None,
                 divisions: int = 3) -> Tuple[ProblemSpec, MeshHierarchy]:
    """
    Cook's membrane: the quadrilateral (0, 0), (48, 44), (48, 60), (0, 44), clamped on the
    left edge and sheared by ``sigma n = [0, 0.01]`` on the right edge. The other edges are
    traction free.

    Parameters
    ----------
    refinements : int
        Uniform refinements of the coarse mesh.
    mat : MaterialParams, optional
        Defaults to ``mu = 1``, ``lam = inf``.
    divisions : int
        Cells per side of the coarse structured mesh.

    Examples
    --------
    >>> spec, meshes = cook_problem(1)
    >>> spec.mesh.n_triangles, meshes.finest.n_triangles
    (18, 72)
    """
    _check_refinements(refinements)
    mat = mat if mat is not None else MaterialParams()
    mesh = structured_mesh(COOK_CORNERS, divisions, divisions, _cook_classifier)
    loads = Loads(traction=_cook_traction)
    spec = ProblemSpec('cook', mesh, _cook_classifier, loads, mat)
    return spec, spec.hierarchy(refinements)


def _face_classifier(holes: Sequence[Hole]) -> Callable[[np.ndarray], str]:
    def classify(midpoint) -> str:
        for hole in holes:
            if hole.on_boundary(midpoint):
                return hole.label
        return 'D' if abs(midpoint[1]) < _TOL else 'N'
    return classify


def _face_displacement(points):
    points = np.asarray(points, dtype=float)
    bottom = np.abs(points[:, 1]) < _TOL
    out = np.zeros_like(points)
    out[:, 1] = np.where(bottom, 0.05 * points[:, 0] ** 2, 0.0)
    return out


def _breakpoints(values) -> np.ndarray:
    return np.unique(np.round(np.concatenate([[0.0, 1.0], values]), 12))


def face_problem(refinements: int, mat: Optional[MaterialParams] = None,
                 holes: Sequence[Hole] = DEFAULT_FACE_HOLES) -> Tuple[ProblemSpec, MeshHierarchy]:
    """
    The unit square with two square eyes, a rectangular mouth and a triangular nose.

    The bottom edge is displaced by ``[0, 0.05 x^2]`` and the nose is clamped. Every other
    boundary, the outer sides and the remaining holes, is traction free.

    Parameters
    ----------
    refinements : int
    mat : MaterialParams, optional
        Defaults to ``mu = 1``, ``lam = inf``.
    holes : sequence of Hole
        Convex holes whose corners lie on the grid lines spanned by all hole corners. A
        triangular hole should be the lower right half of one grid cell.
    """
    _check_refinements(refinements)
    mat = mat if mat is not None else MaterialParams()
    corners = np.concatenate([np.asarray(h.corners, dtype=float) for h in holes]) \
        if len(holes) > 0 else np.empty((0, 2))
    classifier = _face_classifier(holes)
    mesh = rectilinear_mesh_with_holes(_breakpoints(corners[:, 0]), _breakpoints(corners[:, 1]),
                                       holes, classifier)
    logger.info("Face mesh: %d vertices, %d triangles, Euler characteristic %d.",
                mesh.n_vertices, mesh.n_triangles, mesh.euler)
    spec = ProblemSpec('face', mesh, classifier, Loads(displacement=_face_displacement), mat)
    return spec, spec.hierarchy(refinements)


def unit_square(divisions: int, boundary_classifier: Classifier = lambda midpoint: 'D') -> Mesh:
    """ Structured mesh of ``[0, 1]^2`` with ``2 divisions^2`` triangles. """
    return structured_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], divisions, divisions,
                           boundary_classifier)


class DualPoissonSystem(object):
    """
    Dual mixed Poisson problem ``u + alpha sigma.n = 0`` on the whole boundary, with one RT1
    row for the flux and DP1 for the potential.

    Attributes
    ----------
    S : csr_matrix
        ``int sigma . tau`` on all RT1 dofs.
    M : csr_matrix
        Boundary mass ``int_{dOmega} (sigma.n)(tau.n)``, without ``alpha``.
    T : csr_matrix
        ``int div(sigma) v``.
    f : ndarray
        ``-int f v``.
    ext : ndarray
        RT1 dofs on boundary edges; ``interior`` is the complement.
    """

    def __init__(self, mesh: Mesh, alpha: float, S, M, T, f, ext):
        self.mesh = mesh
        self.alpha = float(alpha)
        self.S = S
        self.M = M
        self.T = T
        self.f = f
        self.ext = ext

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @lazy_property
    def interior(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.ext] = False
        return np.flatnonzero(mask)

    def dirichlet_matrix(self) -> sps.csr_matrix:
        """ ``[[S, T^T], [T, 0]]``, the homogeneous Dirichlet system. """
        return saddle_matrix(self.S, self.T)

    def robin_matrix(self, alpha: Optional[float] = None) -> sps.csr_matrix:
        """ ``[[S + alpha M, T^T], [T, 0]]``. """
        alpha = self.alpha if alpha is None else float(alpha)
        return saddle_matrix((self.S + alpha * self.M).tocsr(), self.T)

    def lumped(self, alpha: Optional[float] = None) -> np.ndarray:
        """
        Diagonal ``G`` over the boundary dofs: ``alpha`` times the largest magnitude of each
        boundary row of ``[S_ext,ext, S_int,ext^T, T_ext^T]``.
        """
        alpha = self.alpha if alpha is None else float(alpha)
        rows = sps.hstack([self.S[self.ext][:, self.ext], self.S[self.interior][:, self.ext].T,
                           self.T[:, self.ext].T]).tocsr()
        return alpha * abs(rows).max(axis=1).toarray().ravel()

    def lumping_coefficients(self, alpha: Optional[float] = None) -> np.ndarray:
        """ ``beta_i = G_ii / sum_j M_ij`` on the boundary dofs. """
        row_sums = np.asarray(self.M[self.ext].sum(axis=1)).ravel()
        return self.lumped(alpha) / row_sums

    def averaged(self, alpha: Optional[float] = None) -> sps.csr_matrix:
        """ ``[[S + G, T^T], [T, 0]]`` with the lumped ``G`` on the boundary dofs. """
        G = np.zeros(self.n)
        G[self.ext] = self.lumped(alpha)
        return saddle_matrix((self.S + sps.diags(G)).tocsr(), self.T)

    def rhs(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.n), self.f])

    def solve(self, kind: str = 'robin') -> Tuple[np.ndarray, np.ndarray]:
        """ Direct solve of the 'robin', 'dirichlet' or 'averaged' system as ``(sigma, u)``. """
        matrices = {'robin': self.robin_matrix, 'dirichlet': self.dirichlet_matrix,
                    'averaged': self.averaged}
        if kind not in matrices:
            raise ConfigurationError("Unknown dual Poisson system {!r}; expected one of {}."
                                     .format(kind, sorted(matrices)))
        x = _factorize(matrices[kind]()).solve(self.rhs())
        return x[:self.n], x[self.n:]


def _boundary_mass(mesh: Mesh, n_rt: int) -> sps.csr_matrix:
    edges = mesh.boundary_edges
    t, w = edge_rule(3)
    traces = np.stack([4 * (1 - t) - 2 * t, 4 * t - 2 * (1 - t)])
    local = np.einsum('q,jq,kq->jk', w, traces, traces)
    vals = local[None, :, :] / mesh.edge_lengths[edges][:, None, None]
    dofs = np.stack([2 * edges, 2 * edges + 1], axis=1)
    rows = np.broadcast_to(dofs[:, :, None], vals.shape)
    cols = np.broadcast_to(dofs[:, None, :], vals.shape)
    return assemble_coo(rows, cols, vals, (n_rt, n_rt))


def dual_poisson_robin(mesh: Mesh, alpha: float,
                       source: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                       order: int = 4) -> DualPoissonSystem:
    """
    Assemble the dual Poisson system with Robin conditions of parameter ``alpha``.

    Parameters
    ----------
    mesh : Mesh
        Boundary labels are ignored; the Robin condition holds on the whole boundary.
    alpha : float
        ``alpha >= 0``; zero gives the homogeneous Dirichlet problem.
    source : callable, optional
        ``f`` mapping points (N, 2) to values (N,), defaults to 1.
    order : int
        Quadrature order.

    Examples
    --------
    >>> system = dual_poisson_robin(unit_square(2), 1.0)
    >>> system.S.shape, system.T.shape
    ((48, 48), (24, 48))
    """
    if not alpha >= 0:
        raise ConfigurationError("alpha should be >= 0, got {}.".format(alpha))
    layout = build_layout(mesh)
    bary, weights = triangle_rule(order)
    phi, div = element_basis(mesh, layout, bary[:, 1:])
    wq = weights[None, :] * mesh.areas[:, None]
    T = mesh.n_triangles
    n_rt = layout.n_rt
    dofs = layout.element_dofs

    mass = np.einsum('tq,tqia,tqja->tij', wq, phi, phi)
    S = assemble_coo(np.broadcast_to(dofs[:, :, None], mass.shape),
                     np.broadcast_to(dofs[:, None, :], mass.shape), mass, (n_rt, n_rt))
    div_moments = np.einsum('tq,qa,tqi->tai', wq, bary, div)
    rows = np.broadcast_to(3 * np.arange(T)[:, None, None] + np.arange(3)[None, :, None],
                           div_moments.shape)
    cols = np.broadcast_to(dofs[:, None, :], div_moments.shape)
    B = assemble_coo(rows, cols, div_moments, (3 * T, n_rt))

    points = np.einsum('qk,tkd->tqd', bary, mesh.vertices[mesh.triangles])
    if source is None:
        values = np.ones(points.shape[:2])
    else:
        values = np.asarray(source(points.reshape(-1, 2)), dtype=float).reshape(T, -1)
    f = -np.einsum('tq,qa,tq->ta', wq, bary, values).ravel()

    edges = mesh.boundary_edges
    ext = np.sort(np.concatenate([2 * edges, 2 * edges + 1]))
    return DualPoissonSystem(mesh, alpha, S, _boundary_mass(mesh, n_rt), B, f, ext)


# Coefficients of x^i y^j in the manufactured displacement, grouped by total degree.
_MANUFACTURED_TERMS = {
    0: {(0, 0): (0.1, -0.1)},
    1: {(1, 0): (0.2, 0.4), (0, 1): (0.3, -0.2)},
    2: {(2, 0): (0.5, -0.2), (1, 1): (-0.3, 0.6), (0, 2): (0.2, 0.1)},
    3: {(3, 0): (0.3, 0.1), (2, 1): (-0.4, 0.2), (1, 2): (0.1, -0.5), (0, 3): (0.2, 0.3)},
}


def _coefficients(degree: int) -> np.ndarray:
    c = np.zeros((2, 4, 4))
    for d in range(degree + 1):
        for (i, j), values in _MANUFACTURED_TERMS[d].items():
            c[:, i, j] = values
    return c


def _derivative(c: np.ndarray, axis: int) -> np.ndarray:
    """ Partial derivative of a coefficient grid, padded back to its shape. """
    d = npoly.polyder(c, axis=axis)
    out = np.zeros_like(c)
    out[:d.shape[0], :d.shape[1]] = d
    return out


def manufactured_elasticity(mesh: Mesh, mat: MaterialParams,
                            degree: int = 3) -> Tuple[ProblemSpec, ExactSolution]:
    """
    Polynomial displacement ``u*`` of total degree ``degree`` with the matching stress
    ``sigma* = 2 mu eps(u*) + lam tr(eps(u*)) I``, body force ``f = -div sigma*``, rotation
    ``(d_x u*_y - d_y u*_x) / 2``, ``g_D = u*`` and ``g_N = sigma* n``.

    Raises
    ------
    ConfigurationError : ``lam`` is infinite or ``degree`` is not in 1..3
    """
    if mat.incompressible:
        raise ConfigurationError("Manufactured solutions need a finite lam.")
    if degree not in (1, 2, 3):
        raise ConfigurationError("degree should be 1, 2 or 3, got {}.".format(degree))
    mu, lam = mat.mu, mat.lam
    ux, uy = _coefficients(degree)
    dxx, dxy = _derivative(ux, 0), _derivative(ux, 1)
    dyx, dyy = _derivative(uy, 0), _derivative(uy, 1)
    s11 = 2 * mu * dxx + lam * (dxx + dyy)
    s22 = 2 * mu * dyy + lam * (dxx + dyy)
    s12 = mu * (dxy + dyx)
    rot = 0.5 * (dyx - dxy)
    fx = -(_derivative(s11, 0) + _derivative(s12, 1))
    fy = -(_derivative(s12, 0) + _derivative(s22, 1))

    def evaluate(*grids):
        def field(points):
            points = np.asarray(points, dtype=float)
            return np.stack([npoly.polyval2d(points[:, 0], points[:, 1], g) for g in grids],
                            axis=-1)
        return field

    displacement = evaluate(ux, uy)
    stress_rows = evaluate(s11, s12, s12, s22)

    def stress(points):
        return stress_rows(points).reshape(-1, 2, 2)

    def rotation(points):
        return evaluate(rot)(points)[:, 0]

    body_force = evaluate(fx, fy)

    def traction(points, normals):
        return np.einsum('nij,nj->ni', stress(points), normals)

    exact = ExactSolution(displacement, stress, rotation, body_force)
    loads = Loads(body_force=body_force, displacement=displacement, traction=traction)
    labels = {(int(a), int(b)): label for (a, b), label in
              zip(mesh.edges[mesh.boundary_edges], mesh.edge_labels[mesh.boundary_edges])}
    return ProblemSpec('manufactured', mesh, labels, loads, mat, exact), exact


def stress_l2_error(mesh: Mesh, layout: DofLayout, y_full: np.ndarray,
                    sigma: Callable[[np.ndarray], np.ndarray], order: int = 6) -> float:
    """ ``||sigma - sigma_h||_L2`` with ``sigma_h`` given by all its stress dofs. """
    points, weights, values = evaluate_stress(mesh, layout, y_full, order)
    exact = np.asarray(sigma(points.reshape(-1, 2)), dtype=float).reshape(values.shape)
    return float(np.sqrt(np.einsum('tq,tqrd->', weights, (exact - values) ** 2)))
