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
Monolithic patch smoother for the dual mixed saddle point system.

Every patch restricts the global system to the stress and multiplier dofs of its elements and
solves the resulting dense saddle system for a correction of the current residual. The local
boundary condition decides which stress dofs take part and how the local system is made
solvable:

- ``neumann``: interior stress dofs only, no treatment of the rigid body motions; away from
  the Dirichlet boundary the local matrix is singular and :class:`SingularLocalSystem` is raised.
- ``neumann_remove_rbm``: interior stress dofs, two displacement dofs and one rotation dof
  removed from the multipliers.
- ``neumann_zero_average``: interior stress dofs, zero mean displacement and rotation over the
  patch imposed with three Lagrange multipliers.
- ``dirichlet``: all stress dofs of the patch elements.
- ``robin``: as ``dirichlet`` with ``G(alpha)`` added on the patch boundary stress dofs.

Patch boundary stress dofs sit on edges shared with an element outside the patch. Stress dofs on
the domain boundary are interior to every patch containing them.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from dualmg.assembly import Residuals, SaddleSystem
from dualmg.config import get_option
from dualmg.exceptions import ConfigurationError, SingularLocalSystem
from dualmg.mesh import Patch


__all__ = ['extract_local', 'robin_matrix', 'local_solve', 'sweep']

logger = logging.getLogger(__name__)


class BCKind(Enum):
    NEUMANN = 'neumann'
    NEUMANN_REMOVE_RBM = 'neumann_remove_rbm'
    NEUMANN_ZERO_AVERAGE = 'neumann_zero_average'
    DIRICHLET = 'dirichlet'
    ROBIN = 'robin'

    @property
    def uses_boundary_dofs(self) -> bool:
        return self in (BCKind.DIRICHLET, BCKind.ROBIN)

    @staticmethod
    def parse(value) -> 'BCKind':
        if isinstance(value, BCKind):
            return value
        key = str(value).strip().lower().replace('-', '_')
        aliases = {'neumannremoverbm': 'neumann_remove_rbm',
                   'neumannzeroaverage': 'neumann_zero_average'}
        key = aliases.get(key.replace('_', ''), key)
        try:
            return BCKind(key)
        except ValueError:
            raise ConfigurationError(
                "Unknown local boundary condition {!r}; expected one of [{}]."
                .format(value, ", ".join(k.value for k in BCKind)))


@dataclass(frozen=True)
class SmootherConfig(object):
    """
    Parameters of the patch smoother.

    Parameters
    ----------
    bc_kind : BCKind or str
    alpha : float
        Robin weight, ``alpha >= 0``; ``alpha = 0`` reproduces the Dirichlet smoother.
    sweeps : int
        Number of sweeps of a stand-alone smoothing run.
    ordering : str
        'ascending' or 'descending' anchor node order.
    rbm_dofs : tuple of int
        Positions among the local multipliers removed by ``neumann_remove_rbm``. The default
        picks the two displacement components at the first vertex of the first element and the
        last rotation dof.
    """
    bc_kind: BCKind = BCKind.ROBIN
    alpha: float = 1.0
    sweeps: int = 1
    ordering: str = 'ascending'
    rbm_dofs: Tuple[int, ...] = (0, 1, -1)

    def __post_init__(self):
        object.__setattr__(self, 'bc_kind', BCKind.parse(self.bc_kind))
        if not self.alpha >= 0:
            raise ConfigurationError("alpha should be >= 0, got {}.".format(self.alpha))
        if self.sweeps < 0:
            raise ConfigurationError("sweeps should be >= 0, got {}.".format(self.sweeps))
        if self.ordering not in ('ascending', 'descending'):
            raise ConfigurationError(
                "ordering should be 'ascending' or 'descending', got {!r}."
                .format(self.ordering))
        object.__setattr__(self, 'rbm_dofs', tuple(int(p) for p in self.rbm_dofs))


@dataclass(frozen=True, eq=False)
class LocalProblem(object):
    """
    Dense restriction of the global system to a patch.

    ``dofs`` concatenates the interior stress, boundary stress and multiplier dofs, as
    positions in the global ``[y; z]`` vector. ``matrix`` is the restricted saddle matrix in
    that order and ``rhs`` the restricted residual. ``averages`` holds the patch integrals of
    both displacement components and of the rotation as rows over the multipliers.
    """
    patch: Patch
    kind: BCKind
    int_dofs: np.ndarray
    ext_dofs: np.ndarray
    mult_dofs: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    averages: np.ndarray = field(default_factory=lambda: np.zeros((3, 0)))

    @staticmethod
    def from_blocks(A_ii, A_ie, A_ee, B_int, B_ext, kind=BCKind.ROBIN, rhs=None,
                    patch=None) -> 'LocalProblem':
        """ Build a problem from dense blocks, with consecutive placeholder dofs. """
        A_ii, A_ie, A_ee = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (A_ii, A_ie, A_ee))
        B_int, B_ext = (np.atleast_2d(np.asarray(b, dtype=float)) for b in (B_int, B_ext))
        n_int, n_ext, n_mult = A_ii.shape[0], A_ee.shape[0], B_int.shape[0]
        A = np.block([[A_ii, A_ie], [A_ie.T, A_ee]])
        B = np.hstack([B_int, B_ext])
        matrix = np.block([[A, B.T], [B, np.zeros((n_mult, n_mult))]])
        k = n_int + n_ext + n_mult
        return LocalProblem(
            patch if patch is not None else Patch(-1, (), ()),
            BCKind.parse(kind), np.arange(n_int), n_int + np.arange(n_ext),
            n_int + n_ext + np.arange(n_mult), matrix,
            np.zeros(k) if rhs is None else np.asarray(rhs, dtype=float),
            np.zeros((3, n_mult)))

    @property
    def n_int(self) -> int:
        return len(self.int_dofs)

    @property
    def n_ext(self) -> int:
        return len(self.ext_dofs)

    @property
    def n_stress(self) -> int:
        return self.n_int + self.n_ext

    @property
    def n_mult(self) -> int:
        return len(self.mult_dofs)

    @property
    def dofs(self) -> np.ndarray:
        return np.concatenate([self.int_dofs, self.ext_dofs, self.mult_dofs])

    @property
    def A_ii(self) -> np.ndarray:
        return self.matrix[:self.n_int, :self.n_int]

    @property
    def A_ie(self) -> np.ndarray:
        return self.matrix[:self.n_int, self.n_int:self.n_stress]

    @property
    def A_ee(self) -> np.ndarray:
        return self.matrix[self.n_int:self.n_stress, self.n_int:self.n_stress]

    @property
    def B_int(self) -> np.ndarray:
        return self.matrix[self.n_stress:, :self.n_int]

    @property
    def B_ext(self) -> np.ndarray:
        return self.matrix[self.n_stress:, self.n_int:self.n_stress]


def _patch_dofs(system: SaddleSystem, patch: Patch, kind: BCKind):
    """ (int, ext, mult) global positions and the patch average rows of a patch. """
    mesh, layout = system.mesh, system.layout
    if len(patch.elements) == 0:
        raise ValueError("Patch anchored at node {} is empty.".format(patch.anchor_node))
    elements = np.asarray(patch.elements, dtype=np.int64)
    to_free = layout.full_to_free

    edges, counts = np.unique(mesh.triangle_edges[elements].ravel(), return_counts=True)
    # closed edges have all their triangles in the patch, domain boundary edges included
    closed = counts == np.where(mesh.edge_triangles[edges, 1] < 0, 1, 2)
    inner = np.concatenate([layout.interior_dofs(elements).ravel(),
                            layout.edge_dofs(edges[closed]).ravel()])
    int_dofs = np.sort(to_free[inner])
    int_dofs = int_dofs[int_dofs >= 0]
    if kind.uses_boundary_dofs:
        ext_dofs = np.sort(to_free[layout.edge_dofs(edges[~closed]).ravel()])
        ext_dofs = ext_dofs[ext_dofs >= 0]
    else:
        ext_dofs = np.empty(0, dtype=np.int64)

    # displacement dofs ordered by element, vertex, component; then rotations by vertex
    disp = (6 * elements[:, None, None] + 3 * np.arange(2)[None, None, :] +
            np.arange(3)[None, :, None]).ravel()
    vertices = np.unique(mesh.triangles[elements])
    mult_dofs = system.n + np.concatenate([disp, layout.n_disp + vertices])

    thirds = np.repeat(mesh.areas[elements] / 3, 3)
    averages = np.zeros((3, len(mult_dofs)))
    averages[0, 0:len(disp):2] = thirds
    averages[1, 1:len(disp):2] = thirds
    averages[2, len(disp):] = np.bincount(
        np.searchsorted(vertices, mesh.triangles[elements].ravel()), weights=thirds,
        minlength=len(vertices))
    return int_dofs.astype(np.int64), ext_dofs.astype(np.int64), mult_dofs, averages


def _restrict(matrix: sps.csr_matrix, dofs: np.ndarray) -> np.ndarray:
    return matrix[dofs][:, dofs].toarray()


def extract_local(system: SaddleSystem, patch: Patch, config: SmootherConfig,
                  state: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> LocalProblem:
    """
    Restrict the system to a patch.

    Globally constrained Neumann dofs never appear. The local right-hand side is the
    restriction of the residual of ``state`` (zero state by default).

    Parameters
    ----------
    system : SaddleSystem
    patch : Patch
    config : SmootherConfig
        Its ``bc_kind`` decides whether the patch boundary stress dofs take part.
    state : (ndarray, ndarray), optional
        Current ``(y, z)``.
    """
    int_dofs, ext_dofs, mult_dofs, averages = _patch_dofs(system, patch, config.bc_kind)
    dofs = np.concatenate([int_dofs, ext_dofs, mult_dofs])
    rhs = system.rhs[dofs]
    if state is not None:
        rhs = rhs - system.matrix[dofs] @ np.concatenate(state)
    return LocalProblem(patch, config.bc_kind, int_dofs, ext_dofs, mult_dofs,
                        _restrict(system.matrix, dofs), rhs, averages)


def robin_matrix(local: LocalProblem, alpha: float) -> np.ndarray:
    """
    Diagonal of ``G(alpha)`` on the boundary stress dofs of a patch.

    ``G_pp = alpha * max_s max(|(A_ee)_ps|, |(A_ie^T)_ps|, |(B_ext^T)_ps|)``.

    Examples
    --------
    >>> local = LocalProblem.from_blocks(A_ii=[[1.0]], A_ie=[[-2.0]], A_ee=[[0.5]],
    ...                                  B_int=[[0.0]], B_ext=[[1.0]])
    >>> robin_matrix(local, 1.0)
    array([2.])
    """
    if alpha < 0:
        raise ConfigurationError("alpha should be >= 0, got {}.".format(alpha))
    if local.n_ext == 0:
        return np.zeros(0)
    blocks = [np.abs(local.A_ee), np.abs(local.A_ie).T, np.abs(local.B_ext).T]
    scan = np.max(np.hstack([b for b in blocks if b.shape[1] > 0]), axis=1)
    return alpha * scan


class _DenseSolver(object):
    """
    Inverse of a dense local matrix through a column-pivoted QR factorization.

    The matrix is rejected when a pivot falls below the 'smoother.pivot_tolerance' fraction of
    the largest one.
    """

    def __init__(self, matrix: np.ndarray, anchor: int, n_stress: int, n_mult: int):
        size = matrix.shape[0]
        tol = get_option('smoother.pivot_tolerance')
        Q, R, perm = sla.qr(matrix, pivoting=True)
        pivots = np.abs(np.diag(R))
        rank = int(np.sum(pivots > tol * pivots[0])) if size > 0 else 0
        if rank < size:
            raise SingularLocalSystem(anchor, n_stress, n_mult, rank, size)
        inverse = np.empty_like(matrix)
        inverse[perm] = sla.solve_triangular(R, Q.T)
        self.inverse = inverse

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.inverse @ rhs


class _LocalOperator(object):
    """
    The solvable local system of a patch for a given boundary condition kind, mapping a local
    residual to a correction of ``local.dofs``.
    """

    def __init__(self, local: LocalProblem, config: SmootherConfig):
        kind = config.bc_kind
        matrix = local.matrix
        size = matrix.shape[0]
        self.size = size
        self.keep = None
        self.extra = 0
        if kind is BCKind.ROBIN and config.alpha != 0:
            matrix = matrix.copy()
            ext = np.arange(local.n_int, local.n_stress)
            matrix[ext, ext] += robin_matrix(local, config.alpha)
        elif kind is BCKind.NEUMANN_REMOVE_RBM:
            removed = [local.n_stress + (p % local.n_mult) for p in config.rbm_dofs]
            keep = np.setdiff1d(np.arange(size), removed)
            self.keep = keep
            matrix = matrix[np.ix_(keep, keep)]
        elif kind is BCKind.NEUMANN_ZERO_AVERAGE:
            constraint = np.hstack([np.zeros((3, local.n_stress)), local.averages])
            matrix = np.block([[matrix, constraint.T], [constraint, np.zeros((3, 3))]])
            self.extra = 3
        self.solver = _DenseSolver(matrix, local.patch.anchor_node, local.n_stress, local.n_mult)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.keep is not None:
            correction = np.zeros(self.size)
            correction[self.keep] = self.solver.solve(rhs[self.keep])
            return correction
        if self.extra > 0:
            return self.solver.solve(np.concatenate([rhs, np.zeros(self.extra)]))[:self.size]
        return self.solver.solve(rhs)


def local_solve(local: LocalProblem, config: SmootherConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve the local system of a patch for its current right-hand side.

    Returns
    -------
    (y_loc, z_loc) : corrections of the local stress dofs (interior then boundary) and of
        the local multipliers

    Raises
    ------
    SingularLocalSystem : the local matrix is rank deficient, as for unmodified Neumann patches
    """
    correction = _LocalOperator(local, config).solve(local.rhs)
    return correction[:local.n_stress], correction[local.n_stress:]


class PatchSmoother(object):
    """
    Multiplicative sweep over the patches of one level.

    Index sets are computed at construction; the dense local inverses are computed on the
    first sweep and reused, since the level matrix does not change between sweeps. The local
    right-hand side is the residual of the current iterate, refreshed before every patch.

    Parameters
    ----------
    system : SaddleSystem
    patches : sequence of Patch
    config : SmootherConfig
    """

    def __init__(self, system: SaddleSystem, patches: Sequence[Patch], config: SmootherConfig):
        self.system = system
        self.config = config
        ordered = sorted(patches, key=lambda p: p.anchor_node,
                         reverse=config.ordering == 'descending')
        self.patches = ordered  # type: List[Patch]
        matrix = system.matrix
        self._dofs = []  # type: List[np.ndarray]
        self._rows = []  # type: List[sps.csr_matrix]
        self._locals = []  # type: List[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]
        for patch in ordered:
            parts = _patch_dofs(system, patch, config.bc_kind)
            dofs = np.concatenate(parts[:3])
            self._locals.append(parts)
            self._dofs.append(dofs)
            self._rows.append(matrix[dofs])
        self._operators = None  # type: Optional[List[_LocalOperator]]
        logger.debug("Prepared %d %s patches on a system of size %d.",
                     len(ordered), config.bc_kind.value, system.size)

    def __len__(self):
        return len(self.patches)

    def local_problem(self, i: int, x: Optional[np.ndarray] = None) -> LocalProblem:
        int_dofs, ext_dofs, mult_dofs, averages = self._locals[i]
        dofs = self._dofs[i]
        rhs = self.system.rhs[dofs]
        if x is not None:
            rhs = rhs - self._rows[i] @ x
        return LocalProblem(self.patches[i], self.config.bc_kind, int_dofs, ext_dofs, mult_dofs,
                            self._rows[i][:, dofs].toarray(), rhs, averages)

    def _factorize(self):
        operators = []
        for i in range(len(self.patches)):
            operators.append(_LocalOperator(self.local_problem(i), self.config))
        self._operators = operators

    def apply_patch(self, i: int, x: np.ndarray, b: np.ndarray) -> np.ndarray:
        """ Add the correction of patch ``i`` to ``x`` in place and return the correction. """
        if self._operators is None:
            self._factorize()
        dofs = self._dofs[i]
        correction = self._operators[i].solve(b[dofs] - self._rows[i] @ x)
        x[dofs] += correction
        return correction

    def sweep(self, x: np.ndarray, b: Optional[np.ndarray] = None,
              reverse: bool = False) -> np.ndarray:
        """ One pass over all patches, updating ``x`` in place; ``reverse`` runs it backwards. """
        b = self.system.rhs if b is None else b
        order = range(len(self.patches))
        for i in (reversed(order) if reverse else order):
            self.apply_patch(i, x, b)
        return x

    def smooth(self, x: np.ndarray, b: Optional[np.ndarray] = None, steps: int = 1,
               callback: Optional[Callable[[int, np.ndarray], None]] = None,
               reverse: bool = False) -> np.ndarray:
        """ ``steps`` sweeps, calling ``callback(step, x)`` after each of them. """
        for step in range(steps):
            self.sweep(x, b, reverse)
            if callback is not None:
                callback(step, x)
        return x


def sweep(system: SaddleSystem, state: Tuple[np.ndarray, np.ndarray], patches: Sequence[Patch],
          config: SmootherConfig) -> Tuple[Tuple[np.ndarray, np.ndarray], Residuals]:
    """
    One multiplicative sweep over ``patches`` starting from ``state = (y, z)``.

    Returns the new state and its residuals. The input arrays are not modified.
    """
    x = np.concatenate(state).astype(float)
    PatchSmoother(system, patches, config).sweep(x)
    y, z = system.split(x)
    return (y, z), system.residuals(y, z)
