import setuptools
from os import path
import dtwindex

this_directory = path.abspath(path.dirname(__file__))
with open(path.join(this_directory, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

setuptools.setup(
    name="dtwindex",
    version=dtwindex.__version__,
    description="Exact epsilon-range search of unequal-length time series under the DTW distance",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=['dtwindex'],
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Information Analysis"
    ],
    python_requires='>=3.9',
    install_requires=['numpy>=1.22', 'scipy', 'numba', 'pyyaml'],
    extras_require={
        'dask': ['dask', 'distributed'],
        'test': ['pytest'],
    },
    entry_points={'console_scripts':
                      ['dtwindex = dtwindex.cli:main']}
)
