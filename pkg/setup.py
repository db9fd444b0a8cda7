#!/usr/bin/env python

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

import sys
from setuptools import setup
from os import path

DESCRIPTION = "dualmg: patch-smoothed multigrid for the dual mixed elasticity problem"

this_directory = path.abspath(path.dirname(__file__))
with open(path.join(this_directory, 'README.md'), encoding='utf-8') as f:
    LONG_DESCRIPTION = f.read()

try:
    exec(open('dualmg/version.py').read())
except IOError:
    print("Failed to load the dualmg version file for packaging. You must be in the dualmg "
          "root dir.", file=sys.stderr)
    sys.exit(-1)
VERSION = __version__  # noqa

setup(
    name='dualmg',
    version=VERSION,
    packages=['dualmg', 'dualmg.testing', 'dualmg.usage_logging'],
    extras_require={
        'plot': ['matplotlib>=3.0.0'],
    },
    python_requires='>=3.7',
    install_requires=[
        'numpy>=1.16',
        'scipy>=1.3',
        'pandas>=0.25',
    ],
    entry_points={
        'console_scripts': ['dualmg=dualmg.cli:main'],
    },
    license='http://www.apache.org/licenses/LICENSE-2.0',
    description=DESCRIPTION,
    long_description=LONG_DESCRIPTION,
    long_description_content_type='text/markdown',
    classifiers=[
        'Programming Language :: Python :: 3.7',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
)
