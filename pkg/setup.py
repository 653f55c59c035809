#!/usr/bin/env python
#   -*- coding: utf-8 -*-
# Package metadata mirrors build.py (PyBuilder); `pyb` remains the full build.
from setuptools import find_packages, setup

setup(
    name="rgbir-fusion",
    version="0.1.0",
    description="RGB-infrared fusion kernels: selective scans, CEI gating, pyramid fusion, adapters",
    package_dir={"": "src/main/python"},
    packages=find_packages("src/main/python"),
    install_requires=["numpy", "einops"],
    entry_points={"console_scripts": ["rgbir-fusion = rgbir_fusion.cli:main"]},
)
