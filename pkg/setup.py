# **************************************************************************
# *
# * jointdistill - adaptive multi-teacher distillation laboratory
# *
# * This program is free software; you can redistribute it and/or modify
# * it under the terms of the GNU General Public License as published by
# * the Free Software Foundation; either version 3 of the License, or
# * (at your option) any later version.
# *
# * This program is distributed in the hope that it will be useful,
# * but WITHOUT ANY WARRANTY; without even the implied warranty of
# * MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# * GNU General Public License for more details.
# *
# **************************************************************************

"""A setuptools based setup module.
See:
https://packaging.python.org/en/latest/distributing.html
"""

# Always prefer setuptools over distutils
from setuptools import setup, find_packages
# To use a consistent encoding
from codecs import open
from os import path

here = path.abspath(path.dirname(__file__))

# Get the long description from the README file
with open(path.join(here, 'README.rst'), encoding='utf-8') as f:
    long_description = f.read()

# Load requirements.txt
with open(path.join(here, 'requirements.txt')) as f:
    requirements = [r for r in f.read().splitlines()
                    if r and not r.startswith('#')]

setup(
    name='jointdistill',  # Required

    version='1.0.0',  # Required

    description='Adaptive multi-teacher distillation of single-task '
                'teachers into a multi-task student',  # Required

    long_description=long_description,  # Optional

    classifiers=[  # Optional
        'Development Status :: 4 - Beta',

        'Intended Audience :: Science/Research',

        'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',

        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],

    # Note that this is a string of words separated by whitespace, not a list.
    keywords='knowledge-distillation multi-task-learning segmentation '
             'depth-estimation autodiff',  # Optional

    packages=find_packages(),

    python_requires='>=3.7',

    install_requires=requirements,

    # The command line: jointdistill gen-data | pretrain-teacher | distill |
    # eval | delta-mtl | report
    entry_points={
        'console_scripts': [
            'jointdistill=jointdistill.cli:main',
        ],
    },
)
