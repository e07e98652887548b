# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

from setuptools import setup, find_packages

setup(
    name="hardy-ss",
    version="0.1.0",
    packages=find_packages(),
    author="hardy-ss development team",
    description="Self-similar solutions of the porous medium equation with "
                "a Hardy potential: phase space, shooting and evolution",
    install_requires=["numpy", "scipy", "pandas", "decorator", "psutil"],
    extras_require={"test": ["pytest"]},
    entry_points={
        "console_scripts": ["hardy-ss=hardy_ss.cli:main"]
    },
    license="BSD-3-Clause",
    package_data={
        'hardy_ss.tests': ['data/*']
    },
    zip_safe=False,
)
