"""python -m rgbir_fusion"""
import sys

from rgbir_fusion.cli import main

sys.exit(main())
