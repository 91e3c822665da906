import os

from setuptools import find_packages, setup

here = os.path.dirname(__file__)

with open(os.path.join(here, "requirements.txt")) as f:
    requirements = [
        line.strip() for line in f.readlines() if not line.strip().startswith("#")
    ]

with open(os.path.join(here, "README.md"), encoding="utf8") as f:
    readme = f.read()

version_ns = {}
with open(os.path.join(here, "chainstab", "_version.py")) as f:
    exec(f.read(), {}, version_ns)

setup(
    name="chainstab",
    version=version_ns["__version__"],
    python_requires=">=3.10",
    license="BSD",
    # this should be a whitespace separated string of keywords, not a list
    keywords="joint spectral radius markov jump linear systems stability lyapunov",
    description="Stability of matrix products driven by Markov chains",
    long_description=readme,
    long_description_content_type="text/markdown",
    packages=find_packages(),
    package_data={
        "chainstab": [
            "event-schemas/*.json",
            "schemas/*.json",
            "tests/systems/*.json",
        ],
    },
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "chainstab = chainstab.app:main",
        ],
    },
)
