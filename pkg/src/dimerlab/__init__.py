"""Dimerlab -- exact counts and sampling for dimer models with impurities."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("dimerlab")
except PackageNotFoundError:
    __version__ = "0.0.0+local"
