"""Buffer-controlled SC-Flip decoding of polar codes: simulation toolkit."""

__version__ = "0.1.0"
