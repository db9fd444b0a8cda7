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
Geometric multigrid for the dual mixed saddle point system.

The finest level is assembled, coarser levels use the Galerkin products
``A_j = Pi^T A_{j+1} Pi`` and ``B_j = Q^T B_{j+1} Pi`` of the canonical transfers, and the
coarsest level is solved exactly. Cycles work on corrections: the residual of a level is
restricted with the transposed prolongation and the coarse correction is prolongated back.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sps

from dualmg.assembly import Loads, MaterialParams, SaddleSystem, _factorize, assemble
from dualmg.config import get_option
from dualmg.exceptions import ConfigurationError
from dualmg.mesh import Mesh, MeshHierarchy, patches
from dualmg.smoother import PatchSmoother, SmootherConfig
from dualmg.spaces import TransferPair, build_layout, build_transfer, compose_transfers, \
    free_transfer
from dualmg.utils import lazy_property


__all__ = ['build_hierarchy', 'v_cycle', 'two_grid', 'solve']

logger = logging.getLogger(__name__)


class CycleMode(Enum):
    VCYCLE = 'vcycle'
    TWO_GRID = 'two_grid'

    @staticmethod
    def parse(value) -> 'CycleMode':
        if isinstance(value, CycleMode):
            return value
        key = str(value).strip().lower().replace('-', '_')
        key = {'v_cycle': 'vcycle', 'twogrid': 'two_grid', '2grid': 'two_grid'}.get(key, key)
        try:
            return CycleMode(key)
        except ValueError:
            raise ConfigurationError("Unknown cycle mode {!r}; expected 'vcycle' or 'two_grid'."
                                     .format(value))


@dataclass(frozen=True)
class CycleConfig(object):
    """
    Parameters of a multigrid solve.

    Parameters
    ----------
    pre_smooth, post_smooth : int
        Sweeps before and after the coarse correction on every level but the coarsest.
    mode : CycleMode or str
        'vcycle' visits every level, 'two_grid' only the finest and the coarsest.
    smoother : SmootherConfig
    tol : float
        Relative reduction of the Euclidean residual norm to reach.
    max_cycles : int
    symmetric : bool
        Post-smoothing visits the patches in reverse order, which makes the cycle symmetric.
    """
    pre_smooth: int = 5
    post_smooth: int = 5
    mode: CycleMode = CycleMode.VCYCLE
    smoother: SmootherConfig = field(default_factory=SmootherConfig)
    tol: float = 1e-8
    max_cycles: int = 50
    symmetric: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'mode', CycleMode.parse(self.mode))
        if self.pre_smooth < 0 or self.post_smooth < 0:
            raise ConfigurationError("Smoothing counts should be >= 0, got pre={}, post={}."
                                     .format(self.pre_smooth, self.post_smooth))
        if not self.tol > 0:
            raise ConfigurationError("tol should be > 0, got {}.".format(self.tol))
        if self.max_cycles < 0:
            raise ConfigurationError("max_cycles should be >= 0, got {}."
                                     .format(self.max_cycles))


class ResidualLog(object):
    """
    Records of the finest-level residual norms.

    Every record is ``(cycle, event, res, res_a, res_b)`` with ``event`` one of 'initial',
    'pre', 'coarse', 'post', 'sweep' or 'direct'. Records are kept in insertion order.

    Examples
    --------
    >>> log = ResidualLog()
    >>> log.append(0, 'initial', 1.0, 0.6, 0.8)
    >>> log.append(1, 'post', 0.1, 0.06, 0.08)
    >>> log.contraction_factor()
    0.1
    """

    columns = ['cycle', 'event', 'res', 'res_a', 'res_b']

    def __init__(self, records: Optional[List[Tuple[int, str, float, float, float]]] = None):
        self.records = list(records) if records is not None else []

    def __len__(self):
        return len(self.records)

    def __repr__(self):
        return "ResidualLog({} records)".format(len(self.records))

    def append(self, cycle: int, event: str, res: float, res_a: float, res_b: float) -> None:
        self.records.append((int(cycle), str(event), float(res), float(res_a), float(res_b)))

    def extend(self, other: 'ResidualLog') -> None:
        self.records.extend(other.records)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.records, columns=self.columns)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.17g')

    def cycle_residuals(self) -> np.ndarray:
        """ Residual norm before the first cycle and at the end of every cycle. """
        last = {}  # type: Dict[int, float]
        for cycle, _, res, _, _ in self.records:
            last[cycle] = res
        return np.array([last[c] for c in sorted(last)])

    def contraction_factor(self) -> float:
        """ Geometric mean of the per-cycle reduction factors. """
        res = self.cycle_residuals()
        if len(res) < 2 or res[0] == 0:
            return float('nan')
        return float((res[-1] / res[0]) ** (1.0 / (len(res) - 1)))

    def iterations_to(self, reduction: float) -> Optional[int]:
        """ First cycle whose residual is at most ``reduction`` times the initial one. """
        res = self.cycle_residuals()
        if len(res) == 0:
            return None
        hits = np.flatnonzero(res <= reduction * res[0])
        return int(hits[0]) if len(hits) > 0 else None


@dataclass(frozen=True, eq=False)
class Level(object):
    """
    One level of a hierarchy. ``transfer`` prolongates from the next coarser level and is
    restricted to free dofs; it is None on the coarsest level.
    """
    system: SaddleSystem
    patches: list
    transfer: Optional[TransferPair] = None
    smoother: Optional[PatchSmoother] = None

    @property
    def mesh(self) -> Mesh:
        return self.system.mesh

    @lazy_property
    def prolongation(self) -> sps.csr_matrix:
        return self.transfer.prolongation

    @lazy_property
    def restriction(self) -> sps.csr_matrix:
        return self.transfer.prolongation.T.tocsr()


class Hierarchy(object):
    """
    Levels from coarse to fine with the coarsest factorization.

    Build it with :func:`build_hierarchy`.
    """

    def __init__(self, levels: List[Level], meshes: MeshHierarchy, smoother: SmootherConfig,
                 coarse_solver=None):
        self.levels = levels
        self.meshes = meshes
        self.smoother = smoother
        self.coarse_solver = (coarse_solver if coarse_solver is not None
                              else _factorize(levels[0].system.matrix))

    def __len__(self):
        return len(self.levels)

    def __repr__(self):
        return "Hierarchy(levels={}, dofs={})".format(len(self.levels), self.dofs)

    @property
    def J(self) -> int:
        return len(self.levels) - 1

    @property
    def finest(self) -> Level:
        return self.levels[-1]

    @property
    def dofs(self) -> List[int]:
        return [level.system.size for level in self.levels]

    def with_smoother(self, config: SmootherConfig) -> 'Hierarchy':
        """ The same levels and coarse factorization with another smoother. """
        levels = [self.levels[0]] + [
            replace(level, smoother=PatchSmoother(level.system, level.patches, config))
            for level in self.levels[1:]]
        return Hierarchy(levels, self.meshes, config, self.coarse_solver)

    @lazy_property
    def two_grid_levels(self) -> List[Level]:
        """ Level 0 and the finest level with the composite prolongation between them. """
        if self.J == 1:
            return self.levels
        transfer = compose_transfers([level.transfer for level in self.levels[1:]])
        return [self.levels[0], replace(self.finest, transfer=transfer)]

    def coarse_solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.coarse_solver.solve(rhs)


def _galerkin(fine: SaddleSystem, pair: TransferPair, mesh: Mesh, layout) -> SaddleSystem:
    A = (pair.Pi.T @ fine.A @ pair.Pi).tocsr()
    B = (pair.Q.T @ fine.B @ pair.Pi).tocsr()
    A.sort_indices()
    B.sort_indices()
    return SaddleSystem(A, B, np.zeros(A.shape[0]), np.zeros(B.shape[0]), mesh, layout,
                        np.zeros(len(layout.constrained)), fine.mat)


def build_hierarchy(coarse_mesh: Mesh, J: int, mat: MaterialParams, loads: Optional[Loads],
                    smoother_cfg: SmootherConfig) -> Hierarchy:
    """
    Refine ``coarse_mesh`` ``J`` times, assemble the finest level and build the coarse levels
    by Galerkin products.

    Parameters
    ----------
    coarse_mesh : Mesh
    J : int
        Number of refinements, at least 1.
    mat : MaterialParams
    loads : Loads
        Data of the finest level problem; coarse right-hand sides are restricted residuals.
    smoother_cfg : SmootherConfig

    Raises
    ------
    CoarseSolveError : the coarsest saddle matrix cannot be factorized
    """
    if J < 1:
        raise ConfigurationError("A hierarchy needs J >= 1 refinements, got {}.".format(J))
    meshes = MeshHierarchy.from_coarse(coarse_mesh, J)
    layouts = [build_layout(mesh) for mesh in meshes.meshes]
    transfers = []
    for j in range(J):
        pair = build_transfer(meshes[j], meshes[j + 1], (layouts[j], layouts[j + 1]))
        transfers.append(free_transfer(pair, layouts[j], layouts[j + 1]))

    systems = [assemble(meshes.finest, layouts[-1], mat, loads)]
    for j in reversed(range(J)):
        systems.insert(0, _galerkin(systems[0], transfers[j], meshes[j], layouts[j]))

    levels = []
    for j, system in enumerate(systems):
        level_patches = patches(system.mesh)
        smoother = PatchSmoother(system, level_patches, smoother_cfg) if j > 0 else None
        levels.append(Level(system, level_patches, transfers[j - 1] if j > 0 else None,
                            smoother))
    hierarchy = Hierarchy(levels, meshes, smoother_cfg)
    logger.info("Built hierarchy with dofs per level %s.", hierarchy.dofs)
    return hierarchy


class _Cycle(object):
    """
    Correction scheme over a list of levels, logging the finest-level residual.
    """

    def __init__(self, hierarchy: Hierarchy, levels: List[Level], cfg: CycleConfig,
                 log: ResidualLog, cycle: int):
        self.hierarchy = hierarchy
        self.levels = levels
        self.cfg = cfg
        self.log = log
        self.cycle = cycle
        self.finest = levels[-1].system

    def _record(self, event: str, x: np.ndarray) -> None:
        y, z = self.finest.split(x)
        res = self.finest.residuals(y, z)
        self.log.append(self.cycle, event, res.norm, res.norm_a, res.norm_b)

    def run(self, j: int, x: np.ndarray, b: np.ndarray) -> np.ndarray:
        if j == 0:
            return self.hierarchy.coarse_solve(b)
        level = self.levels[j]
        top = j == len(self.levels) - 1
        callback = (lambda step, x: self._record('pre', x)) if top else None
        level.smoother.smooth(x, b, self.cfg.pre_smooth, callback)

        residual = b - level.system.matrix @ x
        correction = self.run(j - 1, np.zeros(self.levels[j - 1].system.size),
                              level.restriction @ residual)
        x += level.prolongation @ correction
        if top:
            self._record('coarse', x)

        callback = (lambda step, x: self._record('post', x)) if top else None
        level.smoother.smooth(x, b, self.cfg.post_smooth, callback, reverse=self.cfg.symmetric)
        return x


def _run_cycle(hierarchy: Hierarchy, levels: List[Level], state, cfg: CycleConfig,
               cycle: int = 1) -> Tuple[Tuple[np.ndarray, np.ndarray], ResidualLog]:
    log = ResidualLog()
    finest = levels[-1].system
    x = np.concatenate(state).astype(float)
    x = _Cycle(hierarchy, levels, cfg, log, cycle).run(len(levels) - 1, x, finest.rhs)
    return finest.split(x), log


def v_cycle(hierarchy: Hierarchy, state: Tuple[np.ndarray, np.ndarray], cfg: CycleConfig,
            cycle: int = 1) -> Tuple[Tuple[np.ndarray, np.ndarray], ResidualLog]:
    """
    One V-cycle from the finest-level ``state = (y, z)``.

    Logs the finest residual after every pre-smoothing sweep, after the coarse correction and
    after every post-smoothing sweep.
    """
    return _run_cycle(hierarchy, hierarchy.levels, state, cfg, cycle)


def two_grid(hierarchy: Hierarchy, state: Tuple[np.ndarray, np.ndarray], cfg: CycleConfig,
             cycle: int = 1) -> Tuple[Tuple[np.ndarray, np.ndarray], ResidualLog]:
    """
    One two-grid cycle between the finest level and level 0, with the composite transfer.

    With a single refinement this is the V-cycle.
    """
    if len(hierarchy) < 2:
        raise ConfigurationError("The two-grid method needs at least 2 levels.")
    return _run_cycle(hierarchy, hierarchy.two_grid_levels, state, cfg, cycle)


@dataclass(frozen=True, eq=False)
class SolveResult(object):
    y: np.ndarray
    z: np.ndarray
    log: ResidualLog
    converged: bool
    cycles: int


def solve(hierarchy: Hierarchy, cfg: CycleConfig,
          initial: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> SolveResult:
    """
    Cycle until ``||r|| <= tol ||r_0||`` or ``max_cycles``.

    The run stops early, flagged as not converged, when the residual becomes non-finite or
    exceeds 'multigrid.divergence_threshold' times the initial one. A zero initial residual is
    converged without cycling.

    Parameters
    ----------
    hierarchy : Hierarchy
    cfg : CycleConfig
    initial : (ndarray, ndarray), optional
        Initial ``(y, z)``, zero by default.

    Returns
    -------
    SolveResult
    """
    finest = hierarchy.finest.system
    if initial is None:
        initial = (np.zeros(finest.n), np.zeros(finest.m))
    y, z = (np.array(v, dtype=float) for v in initial)
    if len(hierarchy) < 2:
        raise ConfigurationError("Multigrid needs at least 2 levels.")
    cycle_fn = two_grid if cfg.mode is CycleMode.TWO_GRID else v_cycle
    threshold = get_option('multigrid.divergence_threshold')

    res = finest.residuals(y, z)
    log = ResidualLog()
    log.append(0, 'initial', res.norm, res.norm_a, res.norm_b)
    r0 = res.norm
    converged = r0 == 0 and cfg.max_cycles > 0
    cycles = 0
    while not converged and cycles < cfg.max_cycles:
        cycles += 1
        (y, z), entries = cycle_fn(hierarchy, (y, z), cfg, cycles)
        log.extend(entries)
        norm = entries.records[-1][2] if len(entries) > 0 else finest.residuals(y, z).norm
        logger.info("Cycle %d: residual %.3e (reduction %.3e).", cycles, norm, norm / r0)
        if norm <= cfg.tol * r0:
            converged = True
        elif not math.isfinite(norm) or norm > threshold * r0:
            logger.warning("Residual %.3e after %d cycles exceeds the divergence threshold.",
                           norm, cycles)
            break
    if not converged:
        logger.warning("No convergence to a %.1e reduction after %d cycles.", cfg.tol, cycles)
    return SolveResult(y, z, log, converged, cycles)
