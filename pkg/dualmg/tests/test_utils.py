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

import os
from dataclasses import dataclass
from unittest import mock

import numpy as np

from dualmg.testing.utils import DualMGTestCase
from dualmg.utils import assemble_coo, default_workers, lazy_property, normalize_label


class UtilsTest(DualMGTestCase):

    def test_lazy_property(self):
        obj = TestClassForLazyProp()
        # If lazy prop is not working, the second test would fail (because it'd be 2)
        self.assertEqual(obj.lazy_prop, 1)
        self.assertEqual(obj.lazy_prop, 1)

    def test_lazy_property_on_frozen_dataclass(self):
        obj = FrozenForLazyProp(3)
        self.assertEqual(obj.squared, 9)
        self.assertIs(obj.squared_list, obj.squared_list)

    def test_normalize_label(self):
        self.assertEqual(normalize_label(' Neumann '), 'N')
        self.assertEqual(normalize_label('D'), 'D')
        self.assertIsNone(normalize_label('robin'))
        self.assertIsNone(normalize_label(None))

    def test_assemble_coo_sums_duplicates(self):
        rows = np.array([0, 2, 0, 1, 2])
        cols = np.array([1, 2, 1, 0, 2])
        vals = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        m = assemble_coo(rows, cols, vals, (3, 3))
        self.assert_array_eq(m.toarray(), np.array([[0, 4, 0], [4, 0, 0], [0, 0, 7]]))
        self.assertTrue(m.has_sorted_indices)

    def test_assemble_coo_is_order_independent(self):
        rng = np.random.RandomState(0)
        n = 200
        rows = rng.randint(0, 5, n)
        cols = rng.randint(0, 5, n)
        vals = rng.standard_normal(n) * 10.0 ** rng.randint(-8, 8, n)
        keys = np.arange(n)
        perm = rng.permutation(n)
        left = assemble_coo(rows, cols, vals, (5, 5), tiebreak=[keys])
        right = assemble_coo(rows[perm], cols[perm], vals[perm], (5, 5), tiebreak=[keys[perm]])
        self.assert_array_eq(left.indptr, right.indptr)
        self.assert_array_eq(left.indices, right.indices)
        self.assert_array_eq(left.data, right.data)

    def test_assemble_coo_empty(self):
        m = assemble_coo(np.empty(0), np.empty(0), np.empty(0), (2, 3))
        self.assertEqual(m.shape, (2, 3))
        self.assertEqual(m.nnz, 0)

    def test_default_workers(self):
        with mock.patch.dict(os.environ, {'DUALMG_THREADS': '4'}):
            self.assertEqual(default_workers(), 4)
        with mock.patch.dict(os.environ, {'DUALMG_THREADS': 'many'}):
            self.assertEqual(default_workers(), 1)
        with mock.patch.dict(os.environ, {'DUALMG_THREADS': '0'}):
            self.assertEqual(default_workers(), 1)


class TestClassForLazyProp:

    def __init__(self):
        self.some_variable = 0

    @lazy_property
    def lazy_prop(self):
        self.some_variable += 1
        return self.some_variable


@dataclass(frozen=True)
class FrozenForLazyProp(object):
    value: int

    @lazy_property
    def squared(self):
        return self.value ** 2

    @lazy_property
    def squared_list(self):
        return [self.value ** 2]
