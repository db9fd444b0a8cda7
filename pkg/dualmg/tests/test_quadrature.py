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

import math

import numpy as np

from dualmg.exceptions import QuadratureError
from dualmg.quadrature import edge_rule, quadrature, triangle_rule
from dualmg.testing.utils import DualMGTestCase


def _monomial_integral(a, b):
    """ Integral of x^a y^b over the reference triangle. """
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


class QuadratureTest(DualMGTestCase):

    reference = [[0, 0], [1, 0], [0, 1]]

    def test_weights_sum_to_area(self):
        triangle = [[0.5, 0.2], [3.0, 1.0], [1.0, 2.5]]
        area = 0.5 * abs((3.0 - 0.5) * (2.5 - 0.2) - (1.0 - 0.2) * (1.0 - 0.5))
        for order in (2, 4, 6):
            _, weights = quadrature(triangle, order)
            self.assertAlmostEqual(weights.sum(), area, places=12)

    def test_linear_moment(self):
        points, weights = quadrature(self.reference, 4)
        self.assertAlmostEqual(weights @ points[:, 0], 1.0 / 6.0, places=12)

    def test_exactness(self):
        for order in (2, 4, 6):
            points, weights = quadrature(self.reference, order)
            x, y = points[:, 0], points[:, 1]
            for a in range(order + 1):
                for b in range(order + 1 - a):
                    self.assertAlmostEqual(weights @ (x ** a * y ** b), _monomial_integral(a, b),
                                           places=11, msg="order {}: x^{} y^{}".format(order, a, b))

    def test_x2y2(self):
        points, weights = quadrature(self.reference, 4)
        self.assertAlmostEqual(weights @ (points[:, 0] ** 2 * points[:, 1] ** 2), 1.0 / 180.0,
                               places=12)

    def test_rule_sizes(self):
        self.assertEqual(len(triangle_rule(2)[1]), 3)
        self.assertEqual(len(triangle_rule(4)[1]), 6)
        self.assertEqual(len(triangle_rule(6)[1]), 12)
        bary, _ = triangle_rule(6)
        np.testing.assert_allclose(bary.sum(axis=1), 1.0, rtol=0, atol=1e-12)

    def test_edge_rule(self):
        t, w = edge_rule(3)
        self.assertAlmostEqual(w.sum(), 1.0, places=14)
        for k in range(6):
            self.assertAlmostEqual(w @ t ** k, 1.0 / (k + 1), places=14)

    def test_errors(self):
        with self.assertRaisesRegex(QuadratureError, "Unsupported quadrature order 3"):
            quadrature(self.reference, 3)
        with self.assertRaisesRegex(QuadratureError, "Degenerate triangle"):
            quadrature([[0, 0], [1, 1], [2, 2]], 4)
        with self.assertRaisesRegex(QuadratureError, "shape"):
            quadrature([[0, 0], [1, 0]], 4)
