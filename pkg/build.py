#   -*- coding: utf-8 -*-
from pybuilder.core import use_plugin, init

use_plugin("python.core")
use_plugin("python.unittest")
use_plugin("python.coverage")
use_plugin("python.distutils")


name = "rgbir-fusion"
version = "0.1.0"
summary = "RGB-infrared fusion kernels: selective scans, CEI gating, pyramid fusion, adapters"
default_task = "publish"


@init
def set_properties(project):
    project.depends_on("numpy")
    project.depends_on("einops")
    project.build_depends_on("freezegun")
    project.build_depends_on("hypothesis")
    project.set_property("coverage_break_build", False)
    project.set_property("distutils_console_scripts", ["rgbir-fusion = rgbir_fusion.cli:main"])
