# -*- coding: utf-8 -*-
#
# comact documentation build configuration file
#

import sys, os

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here.
sys.path.insert(0, os.path.abspath('../..'))

AUTHORS = u'comact developers'

# -- General configuration -----------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.doctest', 'numpydoc']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'comact'
copyright = u'2021, ' + AUTHORS

version = '0.1'
release = '0.1.0'

exclude_trees = []
pygments_style = 'sphinx'

# -- Options for HTML output ---------------------------------------------------

html_theme = 'nature'
html_static_path = ['_static']
html_sidebars = {'**': ['relations.html', 'sourcelink.html', 'searchbox.html']}
htmlhelp_basename = 'comactdoc'

# -- Options for LaTeX output --------------------------------------------------

latex_documents = [
  ('index', 'comact.tex', u'comact Documentation',
   AUTHORS, 'manual'),
]

autodoc_member_order = 'bysource'
numpydoc_show_class_members = False

# The analysis data structures declare their identity through param parameters; list them.
import param
import inspect


def param_doc(app, what, name, obj, options, lines):
    new_lines = []
    if what == 'class' and isinstance(obj, param.parameterized.ParameterizedMetaclass):
        params = obj.param.objects('existing')
        for child in params:
            if child in obj.__dict__ and child != 'name':
                doc = params[child].doc or ''
                new_lines.extend(["        **%s** : %s" % (child, params[child].__class__.__name__),
                                  "                %s" % doc, ""])
    if new_lines:
        lines.extend(["", ":comact parameters:"] + new_lines)


def setup(app):
    app.connect('autodoc-process-docstring', param_doc)
