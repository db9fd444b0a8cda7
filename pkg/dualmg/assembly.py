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
Assembly of the dual mixed saddle point system of linear elasticity.

The unknowns are the stress ``y`` (two RT1 rows), and the multipliers ``z``: the displacement
(two discontinuous P1 components) followed by the scalar rotation (continuous P1). The system
reads ``[[A, B^T], [B, 0]] [y; z] = [f; h]`` where ``A`` discretizes the compliance form, the
first rows of ``B`` the divergence form and its last rows the asymmetry form
``c(tau, p) = int p (tau_21 - tau_12)``.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import splu

from dualmg.config import get_option
from dualmg.exceptions import CoarseSolveError, ConfigurationError
from dualmg.mesh import Mesh
from dualmg.quadrature import edge_rule, quadrature, triangle_rule
from dualmg.spaces import DofLayout, boundary_flux_moments, element_basis
from dualmg.utils import assemble_coo, lazy_property


__all__ = ['compliance_apply', 'assemble', 'assemble_operators', 'residuals', 'quadrature',
           'saddle_matrix', 'direct_solve', 'lbb_witness', 'stress_energy']

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MaterialParams(object):
    """
    Lame parameters. ``lam`` may be ``math.inf`` for the incompressible limit.

    >>> MaterialParams(mu=1.0, lam=1.0).kappa
    0.25
    >>> MaterialParams(mu=1.0, lam=math.inf).kappa
    0.5
    """
    mu: float = 1.0
    lam: float = math.inf

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ConfigurationError("mu should be a positive number, got {}.".format(self.mu))
        if not self.lam > 0:
            raise ConfigurationError(
                "lam should be a positive number or inf, got {}.".format(self.lam))

    @staticmethod
    def from_values(mu, lam) -> 'MaterialParams':
        """ Accept 'inf', 'infinity' or None for an infinite ``lam``. """
        if lam is None or (isinstance(lam, str) and lam.strip().lower() in ('inf', 'infinity')):
            lam = math.inf
        return MaterialParams(float(mu), float(lam))

    @property
    def incompressible(self) -> bool:
        return math.isinf(self.lam)

    @property
    def kappa(self) -> float:
        """ Weight of the trace term, ``lam / (2 lam + 2 mu)`` in 2D. """
        if self.incompressible:
            return 0.5
        return self.lam / (2 * self.lam + 2 * self.mu)


def compliance_apply(sigma, mat: MaterialParams) -> np.ndarray:
    """
    Apply the compliance tensor to 2x2 stress tensors.

    ``(sigma - kappa tr(sigma) I) / (2 mu)``, with ``kappa = 1/2`` when ``lam`` is infinite.

    Examples
    --------
    >>> compliance_apply(np.eye(2), MaterialParams(mu=1.0, lam=1.0))
    array([[0.25, 0.  ],
           [0.  , 0.25]])
    >>> compliance_apply(np.eye(2), MaterialParams(mu=3.0, lam=math.inf))
    array([[0., 0.],
           [0., 0.]])
    """
    sigma = np.asarray(sigma, dtype=float)
    trace = np.trace(sigma, axis1=-2, axis2=-1)
    return (sigma - mat.kappa * trace[..., None, None] * np.eye(2)) / (2 * mat.mu)


def _zero_field(points, *args):
    return np.zeros((len(points), 2))


@dataclass(frozen=True)
class Loads(object):
    """
    Data of a problem: the body force ``f``, the displacement ``g_D`` on Dirichlet edges and
    the traction ``g_N = sigma n`` on Neumann edges.

    ``body_force`` and ``displacement`` map points (N, 2) to vectors (N, 2); ``traction`` maps
    points and outward unit normals to vectors.
    """
    body_force: Optional[Callable[[np.ndarray], np.ndarray]] = None
    displacement: Optional[Callable[[np.ndarray], np.ndarray]] = None
    traction: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None


@dataclass(frozen=True, eq=False)
class Residuals(object):
    """ Residual of the stress rows ``r_a`` and of the multiplier rows ``r_b``. """
    r_a: np.ndarray
    r_b: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return np.concatenate([self.r_a, self.r_b])

    @property
    def norm_a(self) -> float:
        return float(np.linalg.norm(self.r_a))

    @property
    def norm_b(self) -> float:
        return float(np.linalg.norm(self.r_b))

    @property
    def norm(self) -> float:
        return float(math.hypot(self.norm_a, self.norm_b))


@dataclass(frozen=True, eq=False)
class SaddleSystem(object):
    """
    Assembled blocks on the free stress dofs.

    Attributes
    ----------
    A : csr_matrix, shape (n, n)
    B : csr_matrix, shape (m, n)
    f : ndarray, shape (n,)
    h : ndarray, shape (m,)
    mesh : Mesh
    layout : DofLayout
    prescribed : ndarray
        Values of the constrained stress dofs ``layout.constrained``.
    mat : MaterialParams
    """
    A: sps.csr_matrix
    B: sps.csr_matrix
    f: np.ndarray
    h: np.ndarray
    mesh: Mesh
    layout: DofLayout
    prescribed: np.ndarray
    mat: MaterialParams

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def size(self) -> int:
        return self.n + self.m

    @lazy_property
    def matrix(self) -> sps.csr_matrix:
        return saddle_matrix(self.A, self.B)

    @lazy_property
    def rhs(self) -> np.ndarray:
        return np.concatenate([self.f, self.h])

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return x[:self.n], x[self.n:]

    def residuals(self, y: np.ndarray, z: np.ndarray) -> Residuals:
        return residuals(self, y, z)

    def full_stress(self, y: np.ndarray) -> np.ndarray:
        """ Insert the prescribed Neumann values into a vector of free stress dofs. """
        full = np.empty(self.layout.n_stress)
        full[self.layout.free] = y
        full[self.layout.constrained] = self.prescribed
        return full


def saddle_matrix(A, B) -> sps.csr_matrix:
    """ ``[[A, B^T], [B, 0]]`` in CSR format. """
    return sps.bmat([[A, B.T], [B, None]], format='csr')


def _element_blocks(mesh: Mesh, layout: DofLayout, mat: MaterialParams, order: int):
    bary, weights = triangle_rule(order)
    phi, div = element_basis(mesh, layout, bary[:, 1:])
    wq = weights[None, :] * mesh.areas[:, None]

    mass = np.einsum('tq,tqia,tqja->tij', wq, phi, phi)
    trace = np.einsum('tq,tqir,tqjs->trisj', wq, phi, phi)
    eye = np.eye(2)
    A_loc = (np.einsum('rs,tij->trisj', eye, mass) - mat.kappa * trace) / (2 * mat.mu)

    div_moments = np.einsum('tq,qa,tqi->tai', wq, bary, div)
    # asymmetry tau_21 - tau_12 of the field phi placed in row r
    skew = np.stack([-phi[..., 1], phi[..., 0]], axis=2)
    rot_moments = np.einsum('tq,qa,tqri->tari', wq, bary, skew)
    return A_loc, div_moments, rot_moments


def assemble_operators(mesh: Mesh, layout: DofLayout, mat: MaterialParams,
                       element_order: Optional[Sequence[int]] = None,
                       order: Optional[int] = None) -> Tuple[sps.csr_matrix, sps.csr_matrix]:
    """
    Assemble ``A`` and ``B`` on all stress dofs, before any boundary condition.

    Parameters
    ----------
    element_order : sequence of int, optional
        Order in which the element contributions are generated. Duplicated entries are summed
        in a fixed order, so any permutation gives bit-identical matrices.
    order : int, optional
        Quadrature order, defaults to the 'assembly.quadrature_order' option.
    """
    if order is None:
        order = get_option('assembly.quadrature_order')
    T = mesh.n_triangles
    elements = np.arange(T) if element_order is None else np.asarray(element_order)
    if sorted(elements.tolist()) != list(range(T)):
        raise ValueError("element_order should be a permutation of range({}).".format(T))

    A_loc, div_moments, rot_moments = _element_blocks(mesh, layout, mat, order)
    n_rt = layout.n_rt
    dofs = layout.element_dofs[elements]
    glob = np.stack([dofs, dofs + n_rt], axis=1).reshape(T, 16)
    local = np.arange(16)

    A_vals = A_loc[elements].reshape(T, 16, 16)
    A = assemble_coo(
        np.repeat(glob[:, :, None], 16, axis=2), np.repeat(glob[:, None, :], 16, axis=1),
        A_vals, (layout.n_stress, layout.n_stress),
        tiebreak=[np.broadcast_to(elements[:, None, None], A_vals.shape),
                  np.broadcast_to(local[None, :, None] * 16 + local[None, None, :],
                                  A_vals.shape)])

    # divergence rows: component c of the displacement pairs with stress row c
    a = np.arange(3)
    div_rows = (6 * elements[:, None, None, None] + 3 * np.arange(2)[None, :, None, None] +
                a[None, None, :, None])
    div_rows = np.broadcast_to(div_rows, (T, 2, 3, 8))
    div_cols = np.broadcast_to(np.stack([dofs, dofs + n_rt], axis=1)[:, :, None, :],
                               (T, 2, 3, 8))
    div_vals = np.broadcast_to(div_moments[elements][:, None, :, :], (T, 2, 3, 8))
    rot_rows = np.broadcast_to(layout.n_disp + mesh.triangles[elements][:, :, None, None],
                               (T, 3, 2, 8))
    rot_cols = np.broadcast_to(np.stack([dofs, dofs + n_rt], axis=1)[:, None, :, :],
                               (T, 3, 2, 8))
    rot_vals = rot_moments[elements]
    B = assemble_coo(
        np.concatenate([div_rows.ravel(), rot_rows.ravel()]),
        np.concatenate([div_cols.ravel(), rot_cols.ravel()]),
        np.concatenate([div_vals.ravel(), rot_vals.ravel()]),
        (layout.m, layout.n_stress),
        tiebreak=[np.concatenate([np.broadcast_to(elements[:, None, None, None],
                                                  (T, 2, 3, 8)).ravel(),
                                  np.broadcast_to(elements[:, None, None, None],
                                                  (T, 3, 2, 8)).ravel()]),
                  np.concatenate([np.broadcast_to(np.arange(48).reshape(2, 3, 8),
                                                  (T, 2, 3, 8)).ravel(),
                                  48 + np.broadcast_to(np.arange(48).reshape(3, 2, 8),
                                                       (T, 3, 2, 8)).ravel()])])
    return A, B


def _dirichlet_moments(mesh: Mesh, layout: DofLayout, displacement) -> np.ndarray:
    """ ``int_e (tau n) . g_D`` for every stress basis field, nonzero on Dirichlet edges only. """
    f = np.zeros(layout.n_stress)
    edges = mesh.labelled_edges('D')
    if displacement is None or len(edges) == 0:
        return f
    t, w = edge_rule(3)
    start = mesh.vertices[mesh.edges[edges, 0]]
    direction = mesh.vertices[mesh.edges[edges, 1]] - start
    points = start[:, None, :] + t[None, :, None] * direction[:, None, :]
    g = np.asarray(displacement(points.reshape(-1, 2)), dtype=float).reshape(len(edges), len(t), 2)
    # normal traces of the two edge basis fields, times the edge length
    traces = np.stack([4 * (1 - t) - 2 * t, 4 * t - 2 * (1 - t)])
    values = np.einsum('q,jq,eqr->erj', w, traces, g)
    f[layout.edge_dofs(edges).ravel()] = values.reshape(-1)
    return f


def _body_force_moments(mesh: Mesh, layout: DofLayout, body_force, order: int) -> np.ndarray:
    """ ``-int f . v`` for every displacement basis function, zero on rotation rows. """
    h = np.zeros(layout.m)
    if body_force is None:
        return h
    bary, weights = triangle_rule(order)
    points = np.einsum('qk,tkd->tqd', bary, mesh.vertices[mesh.triangles])
    values = np.asarray(body_force(points.reshape(-1, 2)), dtype=float)
    values = values.reshape(mesh.n_triangles, len(weights), 2)
    wq = weights[None, :] * mesh.areas[:, None]
    h[:layout.n_disp] = -np.einsum('tq,qa,tqc->tca', wq, bary, values).ravel()
    return h


def assemble(mesh: Mesh, layout: DofLayout, mat: MaterialParams, loads: Optional[Loads] = None,
             element_order: Optional[Sequence[int]] = None) -> SaddleSystem:
    """
    Assemble the saddle point system with the boundary conditions carried by the mesh labels.

    Dirichlet edges contribute ``int (tau n) . g_D`` to ``f``; Neumann stress dofs are fixed to
    the RT1 edge moments of ``g_N`` and eliminated, their contribution moved to the right-hand
    side.

    Parameters
    ----------
    mesh : Mesh
    layout : DofLayout
        Built on ``mesh``.
    mat : MaterialParams
    loads : Loads, optional
        Defaults to no load.
    element_order : sequence of int, optional
        Permutation of the element loop, see :func:`assemble_operators`.

    Returns
    -------
    SaddleSystem
    """
    loads = loads if loads is not None else Loads()
    order = get_option('assembly.quadrature_order')
    A_full, B_full = assemble_operators(mesh, layout, mat, element_order, order)

    f_full = _dirichlet_moments(mesh, layout, loads.displacement)
    h = _body_force_moments(mesh, layout, loads.body_force, order)

    free, constrained = layout.free, layout.constrained
    traction = loads.traction if loads.traction is not None else _zero_field
    index, values = boundary_flux_moments(mesh, layout, mesh.labelled_edges('N'), traction)
    prescribed = np.zeros(len(constrained))
    prescribed[np.searchsorted(constrained, index)] = values

    A_fc = A_full[free][:, constrained]
    A = A_full[free][:, free].tocsr()
    B = B_full[:, free].tocsr()
    f = f_full[free] - A_fc @ prescribed
    h = h - B_full[:, constrained] @ prescribed
    logger.info("Assembled level %d: %d free stress dofs, %d multiplier dofs, %d eliminated.",
                mesh.level, A.shape[0], B.shape[0], len(constrained))
    return SaddleSystem(A, B, f, h, mesh, layout, prescribed, mat)


def residuals(system: SaddleSystem, y: np.ndarray, z: np.ndarray) -> Residuals:
    """
    ``r_a = f - A y - B^T z`` and ``r_b = h - B y``.
    """
    r_a = system.f - system.A @ y - system.B.T @ z
    r_b = system.h - system.B @ y
    return Residuals(r_a, r_b)


def _factorize(matrix):
    try:
        return splu(sps.csc_matrix(matrix))
    except RuntimeError as e:
        raise CoarseSolveError("Sparse LU factorization of a {}x{} saddle matrix failed: {}"
                               .format(matrix.shape[0], matrix.shape[1], e))


def direct_solve(system: SaddleSystem) -> Tuple[np.ndarray, np.ndarray]:
    """ Solve the saddle system with a sparse LU factorization. """
    x = _factorize(system.matrix).solve(system.rhs)
    return system.split(x)


def lbb_witness(system: SaddleSystem) -> float:
    """
    Smallest over largest pivot magnitude of the sparse LU factorization of the saddle matrix.

    Zero when the factorization fails. A value well above round-off certifies that the
    discrete system is uniquely solvable.
    """
    try:
        lu = _factorize(system.matrix)
    except CoarseSolveError:
        return 0.0
    pivots = np.abs(lu.U.diagonal())
    return float(pivots.min() / pivots.max())


def stress_energy(system: SaddleSystem, y: np.ndarray) -> float:
    """ ``y^T A y`` on the free stress dofs. """
    y = np.asarray(y, dtype=float)
    return float(y @ (system.A @ y))
