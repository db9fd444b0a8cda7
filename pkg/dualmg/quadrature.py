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
Symmetric quadrature rules on triangles and Gauss-Legendre rules on edges.
"""
from functools import lru_cache
from typing import Tuple

import numpy as np

from dualmg.exceptions import QuadratureError


__all__ = ['quadrature', 'triangle_rule', 'edge_rule']


def _orbit(a, b, c):
    return sorted(set([(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]))


# (weight, barycentric generator) pairs; every generator is expanded to its permutation orbit.
_RULES = {
    2: [(1.0 / 3.0, (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0))],
    4: [(0.223381589678011, (0.108103018168070, 0.445948490915965, 0.445948490915965)),
        (0.109951743655322, (0.816847572980459, 0.091576213509771, 0.091576213509771))],
    6: [(0.116786275726379, (0.501426509658179, 0.249286745170910, 0.249286745170910)),
        (0.050844906370207, (0.873821971016996, 0.063089014491502, 0.063089014491502)),
        (0.082851075618374, (0.053145049844817, 0.310352451033784, 0.636502499121399))],
}


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Barycentric points and weights of a symmetric rule exact up to ``order``.

    The weights sum to one; multiply them by the triangle area.

    >>> bary, weights = triangle_rule(4)
    >>> bary.shape, round(float(weights.sum()), 12)
    ((6, 3), 1.0)
    """
    if order not in _RULES:
        raise QuadratureError(
            "Unsupported quadrature order {}; supported orders are {}."
            .format(order, sorted(_RULES)))
    points, weights = [], []
    for weight, generator in _RULES[order]:
        for bary in _orbit(*generator):
            points.append(bary)
            weights.append(weight)
    bary = np.array(points)
    weights = np.array(weights)
    bary.setflags(write=False)
    weights.setflags(write=False)
    return bary, weights


@lru_cache(maxsize=None)
def edge_rule(n_points: int = 3) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre points on [0, 1] with weights summing to one.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    t = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def quadrature(triangle, order: int = 4) -> Tuple[np.ndarray, np.ndarray]:
    """
    Physical quadrature points and weights on a triangle.

    Parameters
    ----------
    triangle : array-like, shape (3, 2)
        The vertex coordinates.
    order : int
        Polynomial degree integrated exactly, one of 2, 4, 6.

    Returns
    -------
    points : ndarray, shape (n, 2)
    weights : ndarray, shape (n,), summing to the triangle area

    Examples
    --------
    >>> points, weights = quadrature([[0, 0], [1, 0], [0, 1]], order=2)
    >>> round(float(weights.sum()), 12), round(float(weights @ points[:, 0]), 12)
    (0.5, 0.166666666667)
    """
    triangle = np.asarray(triangle, dtype=float)
    if triangle.shape != (3, 2):
        raise QuadratureError(
            "Expected the 3 vertices of a triangle, got an array of shape {}."
            .format(triangle.shape))
    e1 = triangle[1] - triangle[0]
    e2 = triangle[2] - triangle[0]
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    scale = max(float(np.abs(e1).max()), float(np.abs(e2).max()), 1e-300)
    if not np.isfinite(area) or area <= 1e-14 * scale * scale:
        raise QuadratureError("Degenerate triangle {} has area {:.3e}."
                              .format(triangle.tolist(), area))
    bary, weights = triangle_rule(order)
    return bary @ triangle, weights * area
