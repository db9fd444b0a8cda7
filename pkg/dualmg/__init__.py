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

from dualmg.version import __version__

from dualmg.assembly import MaterialParams, Loads, SaddleSystem
from dualmg.mesh import Mesh, MeshHierarchy, Patch
from dualmg.multigrid import CycleConfig, Hierarchy, ResidualLog
from dualmg.smoother import BCKind, SmootherConfig
from dualmg.config import get_option, set_option, reset_option

__all__ = ['MaterialParams', 'Loads', 'SaddleSystem', 'Mesh', 'MeshHierarchy', 'Patch',
           'CycleConfig', 'Hierarchy', 'ResidualLog', 'BCKind', 'SmootherConfig',
           'build_mesh', 'refine_uniform', 'patches', 'build_layout', 'build_transfer',
           'assemble', 'direct_solve', 'build_hierarchy', 'v_cycle', 'two_grid', 'solve',
           'sweep', 'cook_problem', 'face_problem', 'dual_poisson_robin',
           'manufactured_elasticity', 'get_option', 'set_option', 'reset_option']


def _auto_patch():
    import os
    import logging

    # Attach a usage logger.
    logger_module = os.getenv("DUALMG_USAGE_LOGGER", None)
    if logger_module is not None:
        try:
            from dualmg import usage_logging
            usage_logging.attach(logger_module)
        except Exception as e:
            logger = logging.getLogger('dualmg.usage_logger')
            logger.warning('Tried to attach usage logger `{}`, but an exception was raised: {}'
                           .format(logger_module, e))


_auto_patch()

# Import after the usage logger is attached.
from dualmg.mesh import build_mesh, refine_uniform, patches
from dualmg.spaces import build_layout, build_transfer
from dualmg.assembly import assemble, direct_solve
from dualmg.smoother import sweep
from dualmg.multigrid import build_hierarchy, v_cycle, two_grid, solve
from dualmg.problems import cook_problem, face_problem, dual_poisson_robin, \
    manufactured_elasticity
