# coding: utf-8
"""Setup script for library."""
from setuptools import setup

__version__ = "0.0.dev0"

setup(version=__version__)
