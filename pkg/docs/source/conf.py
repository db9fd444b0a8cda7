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

# Configuration file for the Sphinx documentation builder.

import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join('..', '..')))

import dualmg  # noqa: E402

# -- Project information -----------------------------------------------------

project = 'dualmg'
copyright = '2026, The dualmg Authors'
author = 'The dualmg Authors'

# The full version, including alpha/beta/rc tags.
release = os.environ.get('RELEASE_VERSION', dualmg.__version__)

# -- General configuration ---------------------------------------------------

needs_sphinx = '1.2'

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'numpydoc',  # handle NumPy documentation formatted docstrings. Needs to install
]

templates_path = ['_templates']
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
master_doc = 'index'

numpydoc_show_class_members = False
autoclass_content = 'both'
autosummary_generate = True

# -- Options for HTML output -------------------------------------------------

html_theme = 'nature'
html_static_path = []
html_use_index = False
html_domain_indices = False

# -- Options for manual page output ------------------------------------------

man_pages = [
    ('index', 'dualmg', u'dualmg Documentation',
     [u'Author'], 1)
]
