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

import atexit
import logging
import math
import os
import shutil
import tempfile

import numpy
import pandas as pd
import pytest

import dualmg
from dualmg.config import _registry

try:
    import matplotlib
    matplotlib.use('agg')
except ImportError:
    pass


@pytest.fixture(autouse=True)
def add_dualmg(doctest_namespace):
    doctest_namespace['dualmg'] = dualmg


@pytest.fixture(autouse=True)
def add_math(doctest_namespace):
    doctest_namespace['math'] = math


@pytest.fixture(autouse=True)
def clear_options():
    yield
    _registry.clear()


@pytest.fixture(autouse=True)
def add_np(doctest_namespace):
    doctest_namespace['np'] = numpy


@pytest.fixture(autouse=True)
def add_pd(doctest_namespace):
    doctest_namespace['pd'] = pd


@pytest.fixture(autouse=True)
def add_path(doctest_namespace):
    path = tempfile.mkdtemp()
    atexit.register(lambda: shutil.rmtree(path, ignore_errors=True))
    doctest_namespace['path'] = path


@pytest.fixture(autouse=os.getenv("DUALMG_USAGE_LOGGER", None) is not None)
def add_caplog(caplog):
    with caplog.at_level(logging.INFO, logger='dualmg.usage_logger'):
        yield
