import pathlib
import setuptools
from setuptools import find_packages


setuptools.setup(
    name="levelgeom",
    description="Curvature, level-set measures and integral identities of Morse functions",
    long_description=pathlib.Path("README.md").read_text(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    package_data={"levelgeom": ["configs.yaml"]},
    include_package_data=True,
    install_requires=pathlib.Path("requirements.txt").read_text().splitlines(),
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["levelgeom = levelgeom.main:main"]},
    classifiers=[
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
