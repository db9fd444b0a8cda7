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

import shutil
import tempfile
import unittest
from contextlib import contextmanager

import numpy as np
import pandas as pd
import scipy.sparse as sps
from scipy.sparse.linalg import norm as sparse_norm

from dualmg.multigrid import Hierarchy, build_hierarchy
from dualmg.smoother import SmootherConfig


class DualMGTestCase(unittest.TestCase):

    def assert_array_eq(self, left, right):
        left, right = np.asarray(left), np.asarray(right)
        self.assertEqual(left.shape, right.shape)
        self.assertTrue((left == right).all(), msg="Arrays differ:\n%s\n%s" % (left, right))

    def assert_relative_close(self, left, right, rtol=1e-10, atol=0.0):
        """
        ``|left - right| <= rtol * |right| + atol`` in the Euclidean norm, for arrays or
        scalars.
        """
        left = np.asarray(left, dtype=float)
        right = np.asarray(right, dtype=float)
        diff = np.linalg.norm(left - right)
        bound = rtol * np.linalg.norm(right) + atol
        self.assertLessEqual(diff, bound,
                             msg="Relative difference %.3e exceeds %.1e" %
                             (diff / max(np.linalg.norm(right), 1e-300), rtol))

    def assert_sparse_almost_equal(self, left, right, rtol=1e-10):
        """ Compare sparse matrices in the relative Frobenius norm. """
        self.assertEqual(left.shape, right.shape)
        diff = sparse_norm(sps.csr_matrix(left) - sps.csr_matrix(right))
        scale = sparse_norm(sps.csr_matrix(right))
        self.assertLessEqual(diff, rtol * scale,
                             msg="Frobenius difference %.3e, scale %.3e" % (diff, scale))

    def assertPandasEqual(self, left, right):
        msg = ("DataFrames are not equal: " +
               "\n\nLeft:\n%s\n%s" % (left, left.dtypes) +
               "\n\nRight:\n%s\n%s" % (right, right.dtypes))
        self.assertTrue(isinstance(left, pd.DataFrame) and left.equals(right), msg=msg)


class ReusedHierarchyTestCase(DualMGTestCase):
    """
    Builds the hierarchy returned by :meth:`problem` once per class.
    """

    refinements = 1
    smoother = SmootherConfig()

    @classmethod
    def problem(cls):
        """
        Override this in subclasses to supply ``(coarse mesh, material, loads)``.
        """
        raise NotImplementedError()

    @classmethod
    def setUpClass(cls):
        mesh, mat, loads = cls.problem()
        cls.hierarchy = build_hierarchy(mesh, cls.refinements, mat, loads,
                                        cls.smoother)  # type: Hierarchy

    @classmethod
    def tearDownClass(cls):
        del cls.hierarchy


class TestUtils(object):

    @contextmanager
    def temp_dir(self):
        tmp = tempfile.mkdtemp()
        try:
            yield tmp
        finally:
            shutil.rmtree(tmp)

    @contextmanager
    def temp_file(self):
        with self.temp_dir() as tmp:
            yield tempfile.mktemp(dir=tmp)
