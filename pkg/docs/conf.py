#!/usr/bin/env python
#
# spotsim documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.
import os
import sys

# Get the project root dir, which is the parent dir of this
cwd = os.getcwd()
project_root = os.path.dirname(cwd)

# Insert the project root dir as the first element in the PYTHONPATH.
# This lets us ensure that the source package is imported, and that its
# version is used.
sys.path.insert(0, project_root)

import spotsim  # noqa: E402

# -- General configuration ---------------------------------------------

extensions = [
    "myst_parser",
    "sphinx.ext.autodoc",
    "sphinx.ext.doctest",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx.ext.autosectionlabel",
    "sphinx_copybutton",
]

templates_path = ["_templates"]

source_suffix = {".rst": "restructuredtext", ".md": "markdown"}

master_doc = "index"

project = "spotsim"
copyright = "2026, spotsim contributors"

version = spotsim.__version__
release = spotsim.__version__

exclude_patterns = ["_build"]

autosectionlabel_prefix_document = True

# -- Options for HTML output -------------------------------------------

html_theme = "furo"

html_title = f"spotsim {release}"

html_copy_source = False
html_show_sourcelink = False

html_theme_options = {
    "navigation_with_keys": True,
    "top_of_page_buttons": ["view", "edit"],
    "source_directory": "docs/",
}

pygments_style = "monokai"
pygments_dark_style = "monokai"

htmlhelp_basename = "spotsimdoc"

# -- Options for Napoleon Extension ------------------------------------

napoleon_google_docstring = True
napoleon_numpy_docstring = True
napoleon_include_init_with_doc = True
napoleon_include_private_with_doc = False
napoleon_include_special_with_doc = True
napoleon_use_admonition_for_examples = True
napoleon_use_param = True
napoleon_use_rtype = True
napoleon_attr_annotations = True

# -- Options for MyST ---------------------------------------------------

myst_heading_anchors = 3
myst_enable_extensions = ["deflist"]

copybutton_exclude = ".linenos, .gp, .go"
