"""Sphinx configuration file for the qpf_cylinder package.
This configuration only affects single-package Sphinx documentation builds.
"""

from documenteer.conf.pipelinespkg import *

project = "qpf_cylinder"
html_theme_options["logotext"] = project
html_title = project
html_short_title = project
