#!/usr/bin/env python

from setuptools import setup, find_packages


setup(
    name="tractoria",
    version="1.0.0",
    description="Tracts, covering certificates and slow escaping orbits of transcendental entire functions.",
    packages=find_packages(exclude=("tests", "docs")),
    install_requires=["mpmath", "networkx", "numpy", "pillow", "scipy"],
    entry_points={"console_scripts": ["tractoria = tractoria.cli:main"]},
    python_requires=">=3.9.12",
)
