from setuptools import setup, find_packages

setup(
    name="dpdm",
    version="0.1.0",
    description="Desk-scale differentially private diffusion models: training, accounting and evaluation",
    author="dpdm developers",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "click>=8.1.0",
        "rich>=13.0.0",
        "numpy>=1.24.0",
        "scipy>=1.10.0",
    ],
    entry_points={
        "console_scripts": [
            "dpdm=dpdm.cli:cli",
        ],
    },
    python_requires=">=3.9",
)
