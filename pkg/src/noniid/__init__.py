"""Testing averages of non-identical product states and distributions."""

__version__ = "0.1.0"
