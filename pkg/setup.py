"""
Setup script for the derived brackets toolkit
"""

from setuptools import setup, find_packages

TEST_REQUIREMENTS = ("pytest",)


# Read README file
def read_readme():
    with open("README.md", "r", encoding="utf-8") as fh:
        return fh.read()


# Read requirements
def read_requirements():
    with open("requirements.txt", "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]


def runtime_requirements():
    return [r for r in read_requirements() if not r.startswith(TEST_REQUIREMENTS)]


def test_requirements():
    return [r for r in read_requirements() if r.startswith(TEST_REQUIREMENTS)]


setup(
    name="derived-brackets",
    version="0.1.0",
    description="Higher derived brackets, homotopy transfer and cocone models for graded Lie algebras",
    long_description=read_readme(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=["main"],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
    install_requires=runtime_requirements(),
    extras_require={"test": test_requirements()},
    entry_points={
        "console_scripts": [
            "derived-brackets=main:main",
        ],
    },
    include_package_data=True,
    package_data={
        "": ["*.md", "*.txt", "*.json"],
    },
    keywords="graded Lie algebra, L-infinity, derived brackets, homotopy transfer, Bernoulli numbers",
)
