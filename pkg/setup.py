from setuptools import setup
import os, sys

here = os.path.abspath( os.path.dirname( __file__ ))

__version__			= None
__version_info__		= None
exec( open( 'version.py', 'r' ).read() )

console_scripts			= [
    'spdgpr		= spdgpr.harness.main:main',
]

install_requires		= open( os.path.join( here, "requirements.txt" )).readlines()

setup(
    name			= "spdgpr",
    version			= __version__,
    tests_require		= [ "pytest" ],
    install_requires		= install_requires,
    python_requires		= ">=3.7",
    packages			= [
        "spdgpr",
        "spdgpr/linalg",
        "spdgpr/spd",
        "spdgpr/optim",
        "spdgpr/nn",
        "spdgpr/models",
        "spdgpr/sim",
        "spdgpr/data",
        "spdgpr/harness",
    ],
    package_dir			= {
        "spdgpr":		".",
        "spdgpr/linalg":	"./linalg",
        "spdgpr/spd":		"./spd",
        "spdgpr/optim":		"./optim",
        "spdgpr/nn":		"./nn",
        "spdgpr/models":	"./models",
        "spdgpr/sim":		"./sim",
        "spdgpr/data":		"./data",
        "spdgpr/harness":	"./harness",
    },
    entry_points		= {
        'console_scripts': 	console_scripts,
    },
    include_package_data	= True,
    author			= "The spdgpr developers",
    description			= "Second-order (SPD matrix) networks for GPR hyperbola thumbnail classification",
    long_description		= """\
Spdgpr classifies thumbnails of hyperbolic echoes cut from ground-penetrating
radar B-scans into four classes: metal, shelter, non-metal and empty.

Features from a truncated residual convolution stack are pooled into a
covariance matrix, which is then processed on the manifold of symmetric
positive-definite matrices (BiMap, ReEig and LogEig layers) with Stiefel
constrained weights, trained by Riemannian SGD.  Gradients are written by
hand on numpy, and every layer ships with a finite-difference check.

A deterministic GPR B-scan simulator generates labelled datasets, and an
experiment harness reproduces the training-ratio, label-noise and
domain-shift studies with seeded, byte-reproducible CSV output.
""",
    license			= "GPLv3",
    keywords			= "GPR radar SPD manifold covariance pooling Stiefel classification",
    classifiers			= [
        "License :: OSI Approved :: GNU General Public License v3 or later (GPLv3+)",
        "Programming Language :: Python :: 3",
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Environment :: Console",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
)
