#!/usr/bin/env python
"""Setup script for divcol package."""

import os
import sys
from setuptools import setup, find_packages

# Add src to path to import version
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))
from __init__ import __version__

setup(
    name="divcol",
    version=__version__,
    packages=find_packages(where="src", exclude=["testing", "testing.*"]),
    package_dir={"": "src"},
    package_data={"divcol": ["data/*.csv"]},
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22.0",
        "scipy>=1.9.0",
        "pandas>=1.5.0",
    ],
    extras_require={
        "test": [
            "pytest>=7.0.0",
            "hypothesis>=6.50.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "divcol=divcol.cli:main",
        ],
    },

)
