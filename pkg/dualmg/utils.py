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
Commonly used utils in dualmg.
"""

import functools
import os
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sps


_LABELS = {'n': 'N', 'neumann': 'N', 'd': 'D', 'dirichlet': 'D'}


def normalize_label(label) -> Optional[str]:
    """
    Map a boundary label to 'N' or 'D'. Returns None when the label is unknown.

    >>> normalize_label('Dirichlet')
    'D'
    >>> normalize_label('n')
    'N'
    >>> normalize_label('robin') is None
    True
    """
    if not isinstance(label, str):
        return None
    return _LABELS.get(label.strip().lower())


def assemble_coo(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray,
                 shape: Tuple[int, int], tiebreak: Sequence[np.ndarray] = ()) -> sps.csr_matrix:
    """
    Sum duplicated (row, col) entries in a fixed order and return a CSR matrix.

    Duplicates are ordered by ``tiebreak`` (for example the element index and the local
    index of each contribution) rather than by their position in the input, so permuting
    the contributions yields a bit-identical matrix.

    :param rows: row index of every contribution
    :param cols: column index of every contribution
    :param vals: value of every contribution
    :param shape: shape of the result
    :param tiebreak: extra keys, most significant first, ordering duplicates
    :return: the summed matrix with sorted indices

    >>> m = assemble_coo(np.array([0, 1, 0]), np.array([0, 1, 0]), np.array([1., 2., 3.]),
    ...                  (2, 2), tiebreak=[np.array([1, 0, 0])])
    >>> m.toarray()
    array([[4., 0.],
           [0., 2.]])
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=float).ravel()
    if rows.size == 0:
        return sps.csr_matrix(shape)
    keys = [np.asarray(k).ravel() for k in reversed(list(tiebreak))]
    order = np.lexsort(keys + [cols, rows])
    rows, cols, vals = rows[order], cols[order], vals[order]
    starts = np.flatnonzero(np.r_[True, (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])])
    data = np.add.reduceat(vals, starts)
    matrix = sps.csr_matrix((data, (rows[starts], cols[starts])), shape=shape)
    matrix.sort_indices()
    return matrix


def lazy_property(fn):
    """
    Decorator that makes a property lazy-evaluated.

    The value is kept in the instance ``__dict__`` so frozen dataclasses can use it too.
    """
    attr_name = '_lazy_' + fn.__name__

    @property
    @functools.wraps(fn)
    def _lazy_property(self):
        if attr_name not in self.__dict__:
            self.__dict__[attr_name] = fn(self)
        return self.__dict__[attr_name]

    return _lazy_property


def default_workers() -> int:
    """ Number of parallel runs allowed by the ``DUALMG_THREADS`` environment variable. """
    value = os.getenv("DUALMG_THREADS", None)
    try:
        return max(1, int(value)) if value is not None else 1
    except ValueError:
        return 1
