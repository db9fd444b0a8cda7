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
Exceptions/Errors used in dualmg.
"""
import numpy as np


class MeshError(ValueError):
    pass


class NonManifoldEdgeError(MeshError):

    def __init__(self, edge, triangles):
        self.edge = tuple(int(v) for v in edge)
        self.triangles = [int(t) for t in triangles]
        super(NonManifoldEdgeError, self).__init__(
            "Edge {} is shared by {} triangles {}; at most 2 are allowed."
            .format(self.edge, len(self.triangles), self.triangles))


class InvertedTriangleError(MeshError):

    def __init__(self, triangle, area):
        self.triangle = int(triangle)
        self.area = float(area)
        super(InvertedTriangleError, self).__init__(
            "Triangle {} has non-positive signed area {:.3e}; triangles must be "
            "counter-clockwise and non-degenerate.".format(self.triangle, self.area))


class BoundaryLabelError(MeshError):

    def __init__(self, edge, label=None):
        self.edge = tuple(int(v) for v in edge)
        self.label = label
        if label is None:
            msg = "Boundary edge {} has no label.".format(self.edge)
        else:
            msg = ("Boundary edge {} has label {!r}; expected one of 'N' (Neumann) or "
                   "'D' (Dirichlet).".format(self.edge, label))
        super(BoundaryLabelError, self).__init__(msg)


class NonNestedMeshError(MeshError):
    pass


class QuadratureError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


class SingularLocalSystem(np.linalg.LinAlgError):
    """
    Raised when the dense system of a patch cannot be factorized.

    The anchor node, the local block sizes and the detected rank are kept on the instance
    so that callers can report the rank deficiency of unmodified Neumann patches.
    """

    def __init__(self, anchor, n_stress, n_multiplier, rank, size):
        self.anchor = anchor
        self.n_stress = n_stress
        self.n_multiplier = n_multiplier
        self.rank = rank
        self.size = size
        super(SingularLocalSystem, self).__init__(
            "Local system of the patch anchored at node {} is singular: detected rank {} "
            "for a {}x{} matrix ({} stress and {} multiplier dofs, deficiency {})."
            .format(anchor, rank, size, size, n_stress, n_multiplier, size - rank))


class CoarseSolveError(RuntimeError):
    pass
